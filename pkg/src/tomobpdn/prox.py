"""Objective evaluation and proximal machinery for complex-valued L1LS.

The problem is  min_x ||A x - b||_2^2 + lambda ||x||_1  with complex data.
Conventions used throughout the package:

* the data term carries no 1/2 factor, so the gradient is 2 A^H (A x - b)
  and the global Lipschitz constant of the gradient is 2 ||A^H A||_2;
* gradients follow Wirtinger calculus: f(x + d) ~ f(x) + Re<grad, d>;
* the L1 norm sums complex moduli, so its proximal operator shrinks the
  modulus and keeps the phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, LineSearchError
from .model import SteeringMatrix

BACKTRACK_CAP = 50


@dataclass(frozen=True)
class Objective:
    """One L1LS instance: dictionary, measurement, regularization weight."""

    dictionary: np.ndarray
    measurement: np.ndarray
    lambda_reg: float

    def __post_init__(self):
        a = self.dictionary
        if isinstance(a, SteeringMatrix):
            a = a.entries
        a = np.asarray(a, dtype=complex)
        b = np.asarray(self.measurement, dtype=complex).reshape(-1)
        object.__setattr__(self, "dictionary", a)
        object.__setattr__(self, "measurement", b)
        if a.ndim != 2:
            raise ConfigurationError("dictionary must be a 2-d matrix")
        if a.shape[0] != b.size:
            raise ConfigurationError(
                f"dictionary has {a.shape[0]} rows but measurement has {b.size} entries"
            )
        if not (np.isfinite(self.lambda_reg) and self.lambda_reg >= 0):
            raise ConfigurationError(f"lambda_reg must be finite and >= 0, got {self.lambda_reg}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.dictionary.shape

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.dictionary @ self._check_dim(x) - self.measurement

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.dictionary.shape[1],):
            raise ConfigurationError(
                f"x has shape {x.shape}, expected ({self.dictionary.shape[1]},)"
            )
        return x


def eval_f(obj: Objective, x: np.ndarray) -> float:
    """Data term ||A x - b||_2^2."""
    r = obj.residual(x)
    return float(np.real(np.vdot(r, r)))


def eval_F(obj: Objective, x: np.ndarray) -> float:
    """Full objective f(x) + lambda * sum |x_l|."""
    return eval_f(obj, x) + obj.lambda_reg * float(np.sum(np.abs(x)))


def grad_f(obj: Objective, x: np.ndarray) -> np.ndarray:
    """Wirtinger gradient 2 A^H (A x - b)."""
    return 2.0 * (obj.dictionary.conj().T @ obj.residual(x))


def soft_threshold(x, alpha: float):
    """Modulus shrinkage: x * max(0, 1 - alpha/|x|), zero when |x| <= alpha.

    Works elementwise on arrays and on scalars; for real input it reduces
    to the classic sign-preserving soft threshold.
    """
    if alpha < 0:
        raise ConfigurationError(f"threshold must be >= 0, got {alpha}")
    x = np.asarray(x)
    mag = np.abs(x)
    scale = np.maximum(0.0, 1.0 - alpha / np.maximum(mag, np.finfo(float).tiny))
    out = x * scale
    if out.ndim == 0:
        return complex(out) if np.iscomplexobj(out) else float(out)
    return out


def prox_step(obj: Objective, x: np.ndarray, alpha: float) -> np.ndarray:
    """One proximal gradient step: shrink the gradient step by alpha*lambda."""
    if alpha <= 0:
        raise ConfigurationError(f"step size must be > 0, got {alpha}")
    z = x - alpha * grad_f(obj, x)
    return soft_threshold(z, alpha * obj.lambda_reg)


def line_search_ok(obj: Objective, x: np.ndarray, x_new: np.ndarray, alpha: float) -> bool:
    """Quadratic upper-bound acceptance test at base point ``x``.

    True iff  f(x_new) <= f(x) + Re<grad f(x), x_new - x> + ||x_new - x||^2 / (2 alpha).
    """
    delta = x_new - x
    lhs = eval_f(obj, x_new)
    rhs = (
        eval_f(obj, x)
        + float(np.real(np.vdot(grad_f(obj, x), delta)))
        + float(np.real(np.vdot(delta, delta))) / (2.0 * alpha)
    )
    return lhs <= rhs


def backtrack(
    obj: Objective,
    x: np.ndarray,
    alpha_init: float,
    c_alpha: float,
    max_shrink: int = BACKTRACK_CAP,
) -> tuple[float, np.ndarray]:
    """Shrink the step by ``c_alpha`` until the prox step passes the test.

    Returns the accepted step size and the corresponding iterate.

    Raises
    ------
    LineSearchError
        If no step within ``max_shrink`` shrinkages is accepted.
    """
    if alpha_init <= 0:
        raise ConfigurationError(f"alpha_init must be > 0, got {alpha_init}")
    if not 0.0 < c_alpha < 1.0:
        raise ConfigurationError(f"c_alpha must lie in (0, 1), got {c_alpha}")
    alpha = alpha_init
    for _ in range(max_shrink + 1):
        x_new = prox_step(obj, x, alpha)
        if line_search_ok(obj, x, x_new, alpha):
            return alpha, x_new
        alpha *= c_alpha
    raise LineSearchError(
        f"no acceptable step after {max_shrink} shrinkages from alpha={alpha_init}"
    )


def default_lambda(dictionary: np.ndarray, measurement: np.ndarray, beta: float = 0.05) -> float:
    """Scale-free default weight beta * ||A^H b||_inf.

    Any lambda at or above ||A^H b||_inf forces the all-zero solution, so a
    fixed fraction of that bound adapts to the data scale.
    """
    a = dictionary.entries if isinstance(dictionary, SteeringMatrix) else np.asarray(dictionary)
    corr = a.conj().T @ np.asarray(measurement).reshape(-1)
    return beta * float(np.max(np.abs(corr))) if corr.size else 0.0
