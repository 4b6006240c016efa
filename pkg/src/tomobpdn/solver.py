"""Solvers for the complex L1LS problem.

``rbpg_solve`` is the workhorse: randomized blockwise proximal gradient with
Nesterov extrapolation and backtracking line search. ``ista_solve`` and
``fista_solve`` are the unaccelerated and accelerated full-vector baselines;
FISTA doubles as the high-accuracy optimum reference since the problem is
convex and the optimal value solver-independent. ``svd_wiener_solve`` is the
fast linear estimator used for resolution comparisons.

Randomized block sampling draws block ``i`` with probability proportional to
its gradient Lipschitz constant ``L_i = 2 sigma_max(A_i)^2``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path

import numpy as np

from . import prox
from .exceptions import ConfigurationError, LineSearchError, NumericalError
from .prox import Objective
from .rng import substream

STOP_WINDOW = 10
THETA_SCHEDULE = "2/(k+1)"

_POWER_ITER_SEED = 0x5EED0F


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by all iterative solvers.

    ``lambda_reg`` is consumed when the objective is assembled (pipeline and
    CLI); ``None`` selects the scale-free default 0.05 * ||A^H g||_inf. The
    iterative solvers themselves read the weight from the Objective.

    ``fixed_iters`` runs exactly that many iterations and takes precedence
    over the tolerance stop; otherwise iteration ends at ``max_iters`` or
    when the relative objective change over a 10-iteration window drops to
    ``tol``. The extrapolation schedule is pinned to theta_k = 2/(k+1).
    """

    lambda_reg: float | None = None
    num_blocks: int = 8
    max_iters: int = 5000
    tol: float = 1e-8
    c_alpha: float = 0.5
    alpha_init_scale: float = 1.0
    seed: int = 0
    fixed_iters: int | None = None
    theta_schedule: str = THETA_SCHEDULE

    def __post_init__(self):
        if self.lambda_reg is not None and not (
            np.isfinite(self.lambda_reg) and self.lambda_reg >= 0
        ):
            raise ConfigurationError(f"lambda_reg must be >= 0, got {self.lambda_reg}")
        if self.num_blocks < 1:
            raise ConfigurationError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ConfigurationError(f"tol must be > 0, got {self.tol}")
        if not 0.0 < self.c_alpha < 1.0:
            raise ConfigurationError(f"c_alpha must lie in (0, 1), got {self.c_alpha}")
        if not (np.isfinite(self.alpha_init_scale) and self.alpha_init_scale > 0):
            raise ConfigurationError(
                f"alpha_init_scale must be > 0, got {self.alpha_init_scale}"
            )
        if self.fixed_iters is not None and self.fixed_iters < 1:
            raise ConfigurationError(f"fixed_iters must be >= 1, got {self.fixed_iters}")
        if self.theta_schedule != THETA_SCHEDULE:
            raise ConfigurationError(
                f"theta_schedule is pinned to {THETA_SCHEDULE!r}, got {self.theta_schedule!r}"
            )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SolverConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def config_schema() -> dict:
    """Machine-readable description of all solver knobs and their defaults."""
    type_names = {
        "lambda_reg": "float | null",
        "num_blocks": "int",
        "max_iters": "int",
        "tol": "float",
        "c_alpha": "float",
        "alpha_init_scale": "float",
        "seed": "int",
        "fixed_iters": "int | null",
        "theta_schedule": "str (pinned)",
    }
    return {
        f.name: {"type": type_names[f.name], "default": f.default}
        for f in fields(SolverConfig)
    }


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    LINE_SEARCH_FAILURE = "line-search-failure"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class Solution:
    """Recovered reflectivity vector plus convergence telemetry."""

    x_hat: np.ndarray
    objective_history: np.ndarray
    iterations_used: int
    status: SolverStatus
    wall_time: float


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous coordinate blocks with Lipschitz-weighted sampling law."""

    blocks: tuple[tuple[int, int], ...]
    lipschitz: np.ndarray
    probabilities: np.ndarray = field(init=False)

    def __post_init__(self):
        lip = np.asarray(self.lipschitz, dtype=float)
        if lip.size != len(self.blocks):
            raise ConfigurationError("one Lipschitz constant required per block")
        if np.any(lip < 0) or not np.all(np.isfinite(lip)):
            raise ConfigurationError("Lipschitz constants must be finite and >= 0")
        stop_prev = self.blocks[0][0]
        for start, stop in self.blocks:
            if start != stop_prev or stop <= start:
                raise ConfigurationError("blocks must be contiguous, disjoint, non-empty")
            stop_prev = stop
        total = float(lip.sum())
        if total <= 0:
            raise ConfigurationError("at least one block must have positive Lipschitz")
        object.__setattr__(self, "lipschitz", lip)
        object.__setattr__(self, "probabilities", lip / total)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)


def spectral_sq_norm(a: np.ndarray, max_iter: int = 300, rtol: float = 1e-12) -> float:
    """Largest squared singular value of ``a`` by power iteration on A^H A."""
    a = np.asarray(a)
    n_cols = a.shape[1]
    if n_cols == 1:
        return float(np.real(np.vdot(a[:, 0], a[:, 0])))
    rng = substream(_POWER_ITER_SEED, n_cols)
    v = rng.standard_normal(n_cols) + 1j * rng.standard_normal(n_cols)
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = a @ v
        sigma2_new = float(np.real(np.vdot(w, w)))
        u = a.conj().T @ w
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return 0.0
        v = u / norm_u
        if abs(sigma2_new - sigma2) <= rtol * max(sigma2_new, 1e-300):
            return sigma2_new
        sigma2 = sigma2_new
    return sigma2


def block_partition(l_total: int, num_blocks: int, a: np.ndarray) -> BlockPartition:
    """Split 0..L into near-equal contiguous blocks with per-block Lipschitz.

    Block sizes differ by at most one; the per-block gradient Lipschitz
    constant is 2 sigma_max(A_block)^2 from power iteration.
    """
    if not 1 <= num_blocks <= l_total:
        raise ConfigurationError(
            f"num_blocks must lie in [1, {l_total}], got {num_blocks}"
        )
    a = np.asarray(a)
    if a.shape[1] != l_total:
        raise ConfigurationError("matrix column count must equal l_total")
    base, rem = divmod(l_total, num_blocks)
    blocks = []
    start = 0
    for i in range(num_blocks):
        stop = start + base + (1 if i < rem else 0)
        blocks.append((start, stop))
        start = stop
    lipschitz = np.array(
        [2.0 * spectral_sq_norm(a[:, s:e]) for s, e in blocks], dtype=float
    )
    return BlockPartition(blocks=tuple(blocks), lipschitz=lipschitz)


def sample_block(partition: BlockPartition, rng: np.random.Generator) -> int:
    """Draw a block index according to the Lipschitz-weighted law."""
    return int(rng.choice(partition.num_blocks, p=partition.probabilities))


def _momentum(k: int) -> float:
    # theta_k (1/theta_{k-1} - 1) with theta_k = 2/(k+1) collapses to (k-2)/(k+1)
    return (k - 2.0) / (k + 1.0)


def _window_converged(history: list[float], tol: float, window: int = STOP_WINDOW) -> bool:
    if len(history) <= window:
        return False
    ref = history[-1 - window]
    return abs(history[-1] - ref) <= tol * max(abs(ref), 1e-300)


def _finish(
    x: np.ndarray,
    history: list[float],
    iterations: int,
    status: SolverStatus,
    t_start: float,
) -> Solution:
    return Solution(
        x_hat=np.array(x, copy=True),
        objective_history=np.asarray(history, dtype=float),
        iterations_used=iterations,
        status=status,
        wall_time=time.perf_counter() - t_start,
    )


def rbpg_solve(obj: Objective, config: SolverConfig) -> Solution:
    """Randomized blockwise proximal gradient with backtracking.

    Per iteration: draw a block by the Lipschitz-weighted law, extrapolate
    it against its value before its own last accepted update (theta indexed
    by the global iteration counter), take a prox step on the block, shrink
    the step until the quadratic upper bound holds, and accept the candidate
    only if the full objective does not increase. Rejection keeps the
    iterate and resets that block's extrapolation memory so its next visit
    is a plain (always-accepted) prox step.
    """
    t_start = time.perf_counter()
    a = obj.dictionary
    b = obj.measurement
    lam = obj.lambda_reg
    l_total = a.shape[1]

    partition = block_partition(l_total, config.num_blocks, a)
    rng = substream(config.seed)

    x = np.zeros(l_total, dtype=complex)
    prev_vals = [np.zeros(stop - start, dtype=complex) for start, stop in partition.blocks]
    r = -b.astype(complex)
    l1 = 0.0
    f_cur = float(np.real(np.vdot(r, r)))
    big_f = f_cur + lam * l1
    history = [big_f]

    total_iters = config.fixed_iters if config.fixed_iters is not None else config.max_iters
    iterations = 0
    status = SolverStatus.MAX_ITERS
    for k in range(1, total_iters + 1):
        iterations = k
        i = sample_block(partition, rng)
        start, stop = partition.blocks[i]
        a_blk = a[:, start:stop]
        x_b = x[start:stop]

        m_k = _momentum(k)
        y_b = x_b + m_k * (x_b - prev_vals[i])
        dy = y_b - x_b
        r_y = r + a_blk @ dy if np.any(dy) else r
        f_y = float(np.real(np.vdot(r_y, r_y)))
        grad_b = 2.0 * (a_blk.conj().T @ r_y)

        alpha = config.alpha_init_scale / max(partition.lipschitz[i], 1e-300)
        accepted_step = False
        for _ in range(prox.BACKTRACK_CAP + 1):
            z_b = prox.soft_threshold(y_b - alpha * grad_b, alpha * lam)
            dz = z_b - y_b
            r_z = r_y + a_blk @ dz
            f_z = float(np.real(np.vdot(r_z, r_z)))
            bound = (
                f_y
                + float(np.real(np.vdot(grad_b, dz)))
                + float(np.real(np.vdot(dz, dz))) / (2.0 * alpha)
            )
            if f_z <= bound:
                accepted_step = True
                break
            alpha *= config.c_alpha
        if not accepted_step:
            history.append(big_f)
            status = SolverStatus.LINE_SEARCH_FAILURE
            break

        l1_new = l1 - float(np.sum(np.abs(x_b))) + float(np.sum(np.abs(z_b)))
        big_f_cand = f_z + lam * l1_new
        if big_f_cand <= big_f:
            prev_vals[i] = x_b.copy()
            x[start:stop] = z_b
            r = r_z
            l1 = l1_new
            big_f = big_f_cand
        else:
            prev_vals[i] = x_b.copy()
        history.append(big_f)

        if not np.isfinite(big_f):
            status = SolverStatus.NUMERICAL_FAILURE
            break
        if config.fixed_iters is None and _window_converged(history, config.tol):
            status = SolverStatus.CONVERGED
            break
    else:
        if _window_converged(history, config.tol):
            status = SolverStatus.CONVERGED

    return _finish(x, history, iterations, status, t_start)


def _full_vector_pg(obj: Objective, config: SolverConfig, accelerated: bool) -> Solution:
    t_start = time.perf_counter()
    l_total = obj.dictionary.shape[1]
    lipschitz = 2.0 * spectral_sq_norm(obj.dictionary)
    alpha0 = config.alpha_init_scale / max(lipschitz, 1e-300)

    x = np.zeros(l_total, dtype=complex)
    x_prev = x
    history = [prox.eval_F(obj, x)]

    total_iters = config.fixed_iters if config.fixed_iters is not None else config.max_iters
    iterations = 0
    status = SolverStatus.MAX_ITERS
    for k in range(1, total_iters + 1):
        iterations = k
        y = x + _momentum(k) * (x - x_prev) if accelerated else x
        try:
            _, x_new = prox.backtrack(obj, y, alpha0, config.c_alpha)
        except LineSearchError:
            status = SolverStatus.LINE_SEARCH_FAILURE
            break
        x_prev = x
        x = x_new
        history.append(prox.eval_F(obj, x))

        if not np.isfinite(history[-1]):
            status = SolverStatus.NUMERICAL_FAILURE
            break
        if config.fixed_iters is None and _window_converged(history, config.tol):
            status = SolverStatus.CONVERGED
            break
    else:
        if _window_converged(history, config.tol):
            status = SolverStatus.CONVERGED

    return _finish(x, history, iterations, status, t_start)


def ista_solve(obj: Objective, config: SolverConfig) -> Solution:
    """Plain proximal gradient with backtracking (monotone baseline)."""
    return _full_vector_pg(obj, config, accelerated=False)


def fista_solve(obj: Objective, config: SolverConfig) -> Solution:
    """Nesterov-accelerated full-vector proximal gradient.

    Deterministic (no sampling); with a tight tolerance this is the optimum
    reference for solver-agreement checks.
    """
    return _full_vector_pg(obj, config, accelerated=True)


def svd_wiener_solve(obj: Objective, noise_power: float) -> np.ndarray:
    """Wiener/Tikhonov-regularized pseudo-inverse from the thin SVD.

    Returns the full reflectivity profile V diag(s/(s^2 + mu)) U^H g with
    mu = ``noise_power``; mu = 0 gives the minimum-norm least squares
    profile, large mu shrinks the profile toward zero.
    """
    if not (np.isfinite(noise_power) and noise_power >= 0):
        raise ConfigurationError(f"noise_power must be >= 0, got {noise_power}")
    try:
        u, s, vh = np.linalg.svd(obj.dictionary, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    filt = s / (s * s + noise_power)
    return vh.conj().T @ (filt * (u.conj().T @ obj.measurement))
