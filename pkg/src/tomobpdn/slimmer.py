"""Three-stage scatterer estimation: sparse solve, model selection, debias.

A pixel is processed by (1) solving the L1LS problem for a sparse
reflectivity profile, (2) picking the model order among the profile peaks
with a BIC criterion on least-squares refits, and (3) re-estimating the
complex amplitudes by unpenalized least squares on the selected columns,
which removes the shrinkage bias of the L1 solution.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import prox, solver
from .exceptions import ConfigurationError, EstimationError
from .model import ParameterGrid
from .prox import Objective
from .solver import SolverConfig

BACKENDS = ("rbpg", "ista", "fista", "svd_wiener")

# Peaks this far below the profile maximum are numerically-zero L1 survivors.
PEAK_FLOOR = 1e-8


@dataclass(frozen=True)
class PipelineConfig:
    """Per-pixel pipeline settings: solver, backend choice, model order cap.

    ``wiener_mu`` is the Tikhonov weight handed to the svd_wiener backend;
    iterative backends ignore it.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    backend: str = "rbpg"
    k_max: int = 2
    wiener_mu: float = 0.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigurationError(
                f"unknown backend {self.backend!r}; known: {BACKENDS}"
            )
        if self.k_max < 1:
            raise ConfigurationError(f"k_max must be >= 1, got {self.k_max}")
        if not (np.isfinite(self.wiener_mu) and self.wiener_mu >= 0):
            raise ConfigurationError(f"wiener_mu must be >= 0, got {self.wiener_mu}")


@dataclass(frozen=True)
class ScattererEstimates:
    """Model order, per-scatterer parameters, and selection telemetry."""

    model_order: int
    elevations: np.ndarray
    motion_params: np.ndarray
    amplitudes: np.ndarray
    selection_scores: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        k = self.model_order
        if not (
            self.elevations.shape[0] == k
            and self.amplitudes.shape[0] == k
            and self.motion_params.shape[0] == k
            and self.support.shape[0] == k
        ):
            raise EstimationError("per-scatterer vectors must have length model_order")


def detect_support(x_hat: np.ndarray, grid: ParameterGrid, k_max: int) -> np.ndarray:
    """Candidate columns: elevation-axis peaks of |x_hat|, strongest first.

    Motion axes are collapsed by maximum before peak picking; each retained
    elevation peak contributes the flat index of the joint maximizer at that
    elevation. Peaks below ``PEAK_FLOOR`` times the global maximum are
    dropped. Returns an empty array for an all-zero profile.
    """
    if k_max < 1:
        raise ConfigurationError(f"k_max must be >= 1, got {k_max}")
    mags = np.abs(np.asarray(x_hat)).reshape(grid.shape)
    profile = grid.elevation_profile(mags)
    peak = float(profile.max(initial=0.0))
    if peak <= 0.0:
        return np.array([], dtype=int)

    n_s = profile.size
    left = np.empty(n_s, dtype=bool)
    right = np.empty(n_s, dtype=bool)
    left[0] = True
    left[1:] = profile[1:] > profile[:-1]
    right[-1] = True
    right[:-1] = profile[:-1] >= profile[1:]
    is_peak = left & right & (profile > PEAK_FLOOR * peak)

    peak_bins = np.flatnonzero(is_peak)
    order = np.argsort(profile[peak_bins])[::-1][:k_max]
    peak_bins = peak_bins[order]

    if not grid.motion_axes:
        return peak_bins.astype(int)
    flat = []
    per_elev = mags.reshape(n_s, -1)
    for i_s in peak_bins:
        inner = int(np.argmax(per_elev[i_s]))
        flat.append(i_s * per_elev.shape[1] + inner)
    return np.asarray(flat, dtype=int)


def _independent_candidates(a: np.ndarray, candidates: np.ndarray) -> list[int]:
    # Drop candidates whose column is numerically dependent on earlier picks.
    usable: list[int] = []
    for cand in candidates:
        cols = a[:, usable + [int(cand)]]
        if np.linalg.matrix_rank(cols) == len(usable) + 1:
            usable.append(int(cand))
    return usable


def model_select(
    obj: Objective, candidates: np.ndarray, k_max: int, params_per_scatterer: int = 3
) -> tuple[int, np.ndarray, np.ndarray]:
    """Pick the model order by BIC over least-squares refits.

    For each order K the top-K candidate columns are fit by least squares
    and scored with  2N ln(RSS_K / 2N) + p K ln(2N)  over the 2N real
    observations, with p real parameters per scatterer (amplitude counts
    two, each parameter axis one). Returns (order, support, scores).
    """
    a = obj.dictionary
    g = obj.measurement
    n2 = 2 * g.size
    usable = _independent_candidates(a, np.asarray(candidates, dtype=int))
    k_cap = min(k_max, len(usable))

    scores = np.empty(k_cap + 1, dtype=float)
    for k in range(k_cap + 1):
        if k == 0:
            rss = float(np.real(np.vdot(g, g)))
        else:
            cols = a[:, usable[:k]]
            coef, _, _, _ = np.linalg.lstsq(cols, g, rcond=None)
            resid = g - cols @ coef
            rss = float(np.real(np.vdot(resid, resid)))
        scores[k] = n2 * np.log(max(rss, 1e-300) / n2) + params_per_scatterer * k * np.log(n2)

    k_hat = int(np.argmin(scores))
    return k_hat, np.asarray(usable[:k_hat], dtype=int), scores


def estimate_params(
    obj: Objective, grid: ParameterGrid, support: np.ndarray
) -> ScattererEstimates:
    """Debiased estimates: least squares on the support, grid-decoded axes."""
    support = np.asarray(support, dtype=int)
    k = support.size
    n_motion = len(grid.motion_axes)
    if k == 0:
        return ScattererEstimates(
            model_order=0,
            elevations=np.empty(0),
            motion_params=np.empty((0, n_motion)),
            amplitudes=np.empty(0, dtype=complex),
            selection_scores=np.empty(0),
            support=support,
        )
    cols = obj.dictionary[:, support]
    coef, _, rank, _ = np.linalg.lstsq(cols, obj.measurement, rcond=None)
    if rank < k:
        raise EstimationError(f"support columns are rank deficient ({rank} < {k})")
    elevations = np.empty(k)
    motion = np.empty((k, n_motion))
    for j, flat in enumerate(support):
        s, p = grid.values_at(int(flat))
        elevations[j] = s
        motion[j] = p
    return ScattererEstimates(
        model_order=k,
        elevations=elevations,
        motion_params=motion,
        amplitudes=coef,
        selection_scores=np.empty(0),
        support=support,
    )


def slimmer_pipeline(
    obj: Objective, grid: ParameterGrid, config: PipelineConfig
) -> ScattererEstimates:
    """Run sparse solve, model selection, and debiasing for one pixel."""
    params_per_scatterer = 3 + len(grid.motion_axes)
    if config.backend == "svd_wiener":
        x_hat = solver.svd_wiener_solve(obj, config.wiener_mu)
    else:
        solve = {
            "rbpg": solver.rbpg_solve,
            "ista": solver.ista_solve,
            "fista": solver.fista_solve,
        }[config.backend]
        x_hat = solve(obj, config.solver).x_hat
    candidates = detect_support(x_hat, grid, config.k_max)
    k_hat, support, scores = model_select(
        obj, candidates, config.k_max, params_per_scatterer
    )
    estimates = estimate_params(obj, grid, support)
    return replace(estimates, selection_scores=scores)


def build_objective(
    dictionary: np.ndarray, measurement: np.ndarray, config: SolverConfig
) -> Objective:
    """Assemble the L1LS instance, resolving the default lambda if unset."""
    lam = config.lambda_reg
    if lam is None:
        lam = prox.default_lambda(dictionary, measurement)
    return Objective(dictionary=dictionary, measurement=measurement, lambda_reg=lam)


def estimates_to_record(pixel_id: int, est: ScattererEstimates) -> dict:
    """JSON-friendly record for one pixel (stable key order)."""
    return {
        "pixel_id": pixel_id,
        "model_order": est.model_order,
        "elevations_m": [float(v) for v in est.elevations],
        "motion_params": [[float(v) for v in row] for row in est.motion_params],
        "amplitudes": [[float(a.real), float(a.imag)] for a in est.amplitudes],
        "support": [int(v) for v in est.support],
    }


def write_estimates_jsonl(records: list[dict], path: str | Path) -> None:
    """One pixel per line; deterministic bytes for identical inputs."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def write_estimates_csv(records: list[dict], path: str | Path) -> None:
    """Point-cloud export: one row per scatterer.

    Columns: pixel_id, k, elevation_m, p1, p2, amp_re, amp_im. Missing
    motion axes are written as 0.0; axes beyond the second are dropped.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pixel_id", "k", "elevation_m", "p1", "p2", "amp_re", "amp_im"])
        for record in records:
            if "error" in record:
                continue
            for k in range(record["model_order"]):
                motion = record["motion_params"][k]
                p = (list(motion) + [0.0, 0.0])[:2]
                amp = record["amplitudes"][k]
                writer.writerow(
                    [
                        record["pixel_id"],
                        k,
                        repr(record["elevations_m"][k]),
                        repr(float(p[0])),
                        repr(float(p[1])),
                        repr(amp[0]),
                        repr(amp[1]),
                    ]
                )
