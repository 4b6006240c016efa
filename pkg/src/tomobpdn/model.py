"""Acquisition geometry, parameter grids, and the steering dictionary.

The forward model maps a reflectivity profile over elevation (and optional
motion coefficients) to a stack of complex interferometric measurements
through an irregularly sampled Fourier dictionary. Each dictionary column
is a pure phase vector

    exp(j 2 pi (xi_n s + sum_m eta_{m,n} p_m))

with spatial frequencies ``xi_n = 2 b_n / (lambda r)`` set by the orbit
baselines and temporal frequencies ``eta_{m,n} = 2 tau_m(t_n) / lambda``
set by the motion base functions. The factor 2 carries the two-way signal
path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CapacityError, ConfigurationError, GeometryError, GridError

# Motion base functions tau_m(t), t in years relative to the master epoch.
MOTION_BASES = {
    "linear": lambda t: t,
    "seasonal": lambda t: np.sin(2.0 * np.pi * t),
}

# Dense dictionary guard: N * L complex entries.
DEFAULT_MAX_ENTRIES = 50_000_000

_GEOMETRY_KEYS = {"baselines_m", "times_yr", "wavelength_m", "range_m"}


@dataclass(frozen=True)
class AcquisitionGeometry:
    """Sensing configuration of a multi-baseline, multi-temporal stack.

    Parameters
    ----------
    baselines : array_like
        Perpendicular baselines b_n in meters, one per acquisition.
    times : array_like
        Acquisition times t_n in years relative to the master.
    wavelength : float
        Radar wavelength in meters.
    slant_range : float
        Slant range r in meters.
    """

    baselines: np.ndarray
    times: np.ndarray
    wavelength: float
    slant_range: float

    def __post_init__(self):
        b = np.asarray(self.baselines, dtype=float)
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "baselines", b)
        object.__setattr__(self, "times", t)
        if b.ndim != 1 or t.ndim != 1 or b.size != t.size:
            raise GeometryError("baselines and times must be 1-d with equal length")
        if b.size < 2:
            raise GeometryError("need at least 2 acquisitions")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(t))):
            raise GeometryError("baselines/times must be finite")
        if not (np.isfinite(self.wavelength) and self.wavelength > 0):
            raise GeometryError(f"wavelength must be > 0, got {self.wavelength}")
        if not (np.isfinite(self.slant_range) and self.slant_range > 0):
            raise GeometryError(f"slant range must be > 0, got {self.slant_range}")
        if self.aperture <= 0:
            raise GeometryError("aperture extent max(b) - min(b) must be > 0")
        b.setflags(write=False)
        t.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, AcquisitionGeometry):
            return NotImplemented
        return (
            np.array_equal(self.baselines, other.baselines)
            and np.array_equal(self.times, other.times)
            and self.wavelength == other.wavelength
            and self.slant_range == other.slant_range
        )

    @property
    def n_acquisitions(self) -> int:
        return self.baselines.size

    @property
    def aperture(self) -> float:
        """Elevation aperture extent delta_b = max(b) - min(b)."""
        return float(np.max(self.baselines) - np.min(self.baselines))

    @property
    def rayleigh_resolution(self) -> float:
        return rayleigh_resolution(self.wavelength, self.slant_range, self.aperture)

    def to_dict(self) -> dict:
        return {
            "baselines_m": self.baselines.tolist(),
            "times_yr": self.times.tolist(),
            "wavelength_m": self.wavelength,
            "range_m": self.slant_range,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AcquisitionGeometry":
        if not isinstance(data, dict):
            raise GeometryError("geometry must be a JSON object")
        unknown = set(data) - _GEOMETRY_KEYS
        if unknown:
            raise GeometryError(f"unknown geometry keys: {sorted(unknown)}")
        missing = _GEOMETRY_KEYS - set(data)
        if missing:
            raise GeometryError(f"missing geometry keys: {sorted(missing)}")
        return cls(
            baselines=np.asarray(data["baselines_m"], dtype=float),
            times=np.asarray(data["times_yr"], dtype=float),
            wavelength=float(data["wavelength_m"]),
            slant_range=float(data["range_m"]),
        )


def load_geometry(path: str | Path) -> AcquisitionGeometry:
    """Read a geometry JSON file (strict schema, unknown keys rejected)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return AcquisitionGeometry.from_dict(data)


def save_geometry(geom: AcquisitionGeometry, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(geom.to_dict(), fh, indent=2)
        fh.write("\n")


def _check_axis(values: np.ndarray, name: str) -> None:
    if values.ndim != 1 or values.size == 0:
        raise GridError(f"{name} axis must be a non-empty 1-d vector")
    if not np.all(np.isfinite(values)):
        raise GridError(f"{name} axis must be finite")
    if values.size >= 2:
        steps = np.diff(values)
        if np.any(steps <= 0):
            raise GridError(f"{name} axis must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise GridError(f"{name} axis must be uniformly spaced")


@dataclass(frozen=True)
class ParameterGrid:
    """Cartesian search grid over elevation and motion coefficients.

    The flat column index of the dictionary enumerates the grid in row-major
    order with elevation as the leading axis: flat index
    ``l = ravel(i_s, i_p1, ..., i_pM)``.
    """

    elevation: np.ndarray
    motion_axes: tuple[np.ndarray, ...] = ()
    motion_bases: tuple[str, ...] = ()

    def __post_init__(self):
        elev = np.asarray(self.elevation, dtype=float)
        axes = tuple(np.asarray(a, dtype=float) for a in self.motion_axes)
        object.__setattr__(self, "elevation", elev)
        object.__setattr__(self, "motion_axes", axes)
        object.__setattr__(self, "motion_bases", tuple(self.motion_bases))
        _check_axis(elev, "elevation")
        if len(axes) != len(self.motion_bases):
            raise GridError("one base function identifier required per motion axis")
        for i, axis in enumerate(axes):
            _check_axis(axis, f"motion[{i}]")
        for name in self.motion_bases:
            if name not in MOTION_BASES:
                raise ConfigurationError(
                    f"unknown base function {name!r}; known: {sorted(MOTION_BASES)}"
                )
        elev.setflags(write=False)
        for axis in axes:
            axis.setflags(write=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.elevation.size,) + tuple(a.size for a in self.motion_axes)

    @property
    def flat_size(self) -> int:
        return int(np.prod(self.shape))

    def flat_to_multi(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.flat_size:
            raise GridError(f"flat index {flat} out of range [0, {self.flat_size})")
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def multi_to_flat(self, multi: tuple[int, ...]) -> int:
        return int(np.ravel_multi_index(multi, self.shape))

    def values_at(self, flat: int) -> tuple[float, tuple[float, ...]]:
        """Return (elevation, motion coefficients) for a flat column index."""
        idx = self.flat_to_multi(flat)
        s = float(self.elevation[idx[0]])
        p = tuple(float(axis[i]) for axis, i in zip(self.motion_axes, idx[1:]))
        return s, p

    def elevation_profile(self, magnitudes: np.ndarray) -> np.ndarray:
        """Collapse a flat magnitude vector onto the elevation axis by max."""
        mags = np.asarray(magnitudes).reshape(self.shape)
        if mags.ndim == 1:
            return mags
        return mags.max(axis=tuple(range(1, mags.ndim)))

    @classmethod
    def uniform(
        cls,
        elevation_span: tuple[float, float],
        elevation_count: int,
        motion: tuple[tuple[str, float, float, int], ...] = (),
    ) -> "ParameterGrid":
        """Build a grid from (min, max, count) axis descriptions."""
        if elevation_count < 1:
            raise GridError("elevation_count must be >= 1")
        elev = np.linspace(elevation_span[0], elevation_span[1], elevation_count)
        axes = []
        bases = []
        for base, lo, hi, count in motion:
            if count < 1:
                raise GridError("motion axis count must be >= 1")
            axes.append(np.linspace(lo, hi, count))
            bases.append(base)
        return cls(elevation=elev, motion_axes=tuple(axes), motion_bases=tuple(bases))


@dataclass(frozen=True)
class SteeringMatrix:
    """Dense N x L pure-phase dictionary plus its provenance."""

    entries: np.ndarray
    geometry: AcquisitionGeometry
    grid: ParameterGrid

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def spatial_frequencies(geom: AcquisitionGeometry) -> np.ndarray:
    """xi_n = 2 b_n / (lambda r), in 1/m."""
    xi = 2.0 * geom.baselines / (geom.wavelength * geom.slant_range)
    if not np.all(np.isfinite(xi)):
        raise GeometryError("non-finite spatial frequencies")
    return xi


def temporal_frequencies(
    geom: AcquisitionGeometry, base_functions: tuple[str, ...]
) -> np.ndarray:
    """eta_{m,n} = 2 tau_m(t_n) / lambda, one row per base function."""
    rows = []
    for name in base_functions:
        try:
            tau = MOTION_BASES[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown base function {name!r}; known: {sorted(MOTION_BASES)}"
            ) from None
        rows.append(2.0 * tau(geom.times) / geom.wavelength)
    if not rows:
        return np.zeros((0, geom.n_acquisitions))
    return np.vstack(rows)


def steering_column(
    geom: AcquisitionGeometry,
    elevation: float,
    motion: tuple[float, ...] = (),
    motion_bases: tuple[str, ...] = (),
) -> np.ndarray:
    """Exact steering vector for one scatterer, on or off the grid."""
    if len(motion) != len(motion_bases):
        raise ConfigurationError("motion values and base functions must pair up")
    phase = spatial_frequencies(geom) * elevation
    if motion:
        eta = temporal_frequencies(geom, tuple(motion_bases))
        phase = phase + eta.T @ np.asarray(motion, dtype=float)
    return np.exp(2j * np.pi * phase)


def build_steering_matrix(
    geom: AcquisitionGeometry,
    grid: ParameterGrid,
    max_entries: int = DEFAULT_MAX_ENTRIES,
) -> SteeringMatrix:
    """Assemble the dense dictionary over all grid nodes.

    Raises
    ------
    CapacityError
        If N * L exceeds ``max_entries``.
    """
    n = geom.n_acquisitions
    l_total = grid.flat_size
    if n * l_total > max_entries:
        raise CapacityError(
            f"dictionary needs {n * l_total} entries, budget is {max_entries}"
        )
    xi = spatial_frequencies(geom)
    eta = temporal_frequencies(geom, grid.motion_bases)

    mesh = np.meshgrid(grid.elevation, *grid.motion_axes, indexing="ij")
    s_flat = mesh[0].reshape(-1)
    phase = np.outer(xi, s_flat)
    for m in range(len(grid.motion_axes)):
        phase += np.outer(eta[m], mesh[m + 1].reshape(-1))
    entries = np.exp(2j * np.pi * phase)
    return SteeringMatrix(entries=entries, geometry=geom, grid=grid)


def rayleigh_resolution(wavelength: float, slant_range: float, aperture: float) -> float:
    """Inherent elevation resolution rho_s = lambda r / delta_b."""
    for name, value in (
        ("wavelength", wavelength),
        ("slant_range", slant_range),
        ("aperture", aperture),
    ):
        if not (np.isfinite(value) and value > 0):
            raise GeometryError(f"{name} must be > 0, got {value}")
    return wavelength * slant_range / aperture


def normalized_distance(separation: float, rho_s: float) -> float:
    """kappa = s / rho_s; kappa < 1 is the super-resolution regime."""
    if not (np.isfinite(rho_s) and rho_s > 0):
        raise GeometryError(f"rho_s must be > 0, got {rho_s}")
    return separation / rho_s


_GRID_KEYS = {"elevation", "motion"}
_GRID_AXIS_KEYS = {"min", "max", "count"}
_GRID_MOTION_KEYS = {"base", "min", "max", "count"}


def grid_from_dict(data: dict) -> ParameterGrid:
    """Build a grid from its JSON description (strict schema)."""
    if not isinstance(data, dict):
        raise GridError("grid config must be a JSON object")
    unknown = set(data) - _GRID_KEYS
    if unknown:
        raise GridError(f"unknown grid keys: {sorted(unknown)}")
    if "elevation" not in data:
        raise GridError("grid config requires an 'elevation' axis")
    elev = data["elevation"]
    if set(elev) != _GRID_AXIS_KEYS:
        raise GridError(f"elevation axis requires exactly keys {sorted(_GRID_AXIS_KEYS)}")
    motion = []
    for axis in data.get("motion", []):
        if set(axis) != _GRID_MOTION_KEYS:
            raise GridError(f"motion axis requires exactly keys {sorted(_GRID_MOTION_KEYS)}")
        motion.append((axis["base"], float(axis["min"]), float(axis["max"]), int(axis["count"])))
    return ParameterGrid.uniform(
        (float(elev["min"]), float(elev["max"])),
        int(elev["count"]),
        tuple(motion),
    )


def grid_to_dict(grid: ParameterGrid) -> dict:
    out: dict = {
        "elevation": {
            "min": float(grid.elevation[0]),
            "max": float(grid.elevation[-1]),
            "count": int(grid.elevation.size),
        }
    }
    if grid.motion_axes:
        out["motion"] = [
            {"base": base, "min": float(ax[0]), "max": float(ax[-1]), "count": int(ax.size)}
            for base, ax in zip(grid.motion_bases, grid.motion_axes)
        ]
    return out
