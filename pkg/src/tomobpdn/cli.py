"""Command-line surface: simulate | solve | montecarlo | bench.

Exit codes are a stable scripting contract: 0 success, 2 input-format
error, 3 consistency error (e.g. stack/geometry dimension mismatch),
4 numerical failure. All data outputs are byte-deterministic for a fixed
seed regardless of worker count; sidecar manifests carry timestamps and
are exempt.
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import simulate, slimmer, solver, stack
from .exceptions import (
    ConfigurationError,
    GeometryError,
    GridError,
    LineSearchError,
    NumericalError,
    StackFormatError,
    TomoError,
)
from .model import ParameterGrid, build_steering_matrix, grid_from_dict, load_geometry
from .prox import Objective
from .rng import derive_seed, substream
from .simulate import MonteCarloSetup, Scenario, monte_carlo_detection
from .slimmer import PipelineConfig
from .solver import SolverConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONSISTENCY = 3
EXIT_NUMERICAL = 4


class ConsistencyError(TomoError):
    """Inputs are individually valid but disagree with each other."""


def _load_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _located_json_error(path, exc) from exc


def _located_json_error(path, exc: json.JSONDecodeError) -> ConfigurationError:
    return ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")


def cmd_simulate(args) -> int:
    scenario = Scenario.from_dict(_load_json(args.scenario))
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    pixel_count = args.pixels if args.pixels is not None else scenario.realizations

    geom = scenario.geometry
    pixels = np.empty((pixel_count, geom.n_acquisitions), dtype=complex)
    for pixel_id in range(pixel_count):
        rng = substream(scenario.seed, pixel_id)
        pixels[pixel_id] = simulate.synthesize_pixel(scenario, rng)
    stack.write_stack(args.out, geom, pixels)

    manifest = stack.ManifestWriter("simulate", scenario.to_dict(), scenario.seed)
    manifest.add_input(args.scenario)
    manifest.add_output(args.out)
    manifest.write(args.out)
    log.info("wrote %d pixels to %s", pixel_count, args.out)
    return EXIT_OK


_SOLVE_STATE: dict = {}


def _solve_worker_init(dictionary, grid, pipe_config, seed):
    _SOLVE_STATE["dictionary"] = dictionary
    _SOLVE_STATE["grid"] = grid
    _SOLVE_STATE["pipe_config"] = pipe_config
    _SOLVE_STATE["seed"] = seed


def _solve_worker(task) -> dict:
    pixel_id, g = task
    dictionary = _SOLVE_STATE["dictionary"]
    grid = _SOLVE_STATE["grid"]
    pipe_config: PipelineConfig = _SOLVE_STATE["pipe_config"]
    pixel_seed = derive_seed(substream(_SOLVE_STATE["seed"], pixel_id))
    config = replace(pipe_config, solver=replace(pipe_config.solver, seed=pixel_seed))
    try:
        obj = slimmer.build_objective(dictionary, np.asarray(g, dtype=complex), config.solver)
        estimates = slimmer.slimmer_pipeline(obj, grid, config)
    except TomoError as exc:
        return {"pixel_id": pixel_id, "error": str(exc)}
    return slimmer.estimates_to_record(pixel_id, estimates)


def cmd_solve(args) -> int:
    geometry, pixels = stack.read_stack(args.stack)
    if args.geometry is not None:
        geometry = load_geometry(args.geometry)
        if geometry.n_acquisitions != pixels.shape[1]:
            raise ConsistencyError(
                f"geometry has {geometry.n_acquisitions} acquisitions but stack "
                f"pixels have {pixels.shape[1]} samples"
            )
    grid = grid_from_dict(_load_json(args.grid))
    solver_config = (
        SolverConfig.from_dict(_load_json(args.config)) if args.config else SolverConfig()
    )
    pipe_config = PipelineConfig(
        solver=solver_config,
        backend=args.backend,
        k_max=args.k_max,
        wiener_mu=args.wiener_mu,
    )
    seed = args.seed if args.seed is not None else solver_config.seed

    dictionary = build_steering_matrix(geometry, grid).entries
    tasks = [(i, np.asarray(pixels[i], dtype=complex)) for i in range(pixels.shape[0])]
    if args.workers > 1 and tasks:
        with ProcessPoolExecutor(
            max_workers=args.workers,
            initializer=_solve_worker_init,
            initargs=(dictionary, grid, pipe_config, seed),
        ) as pool:
            records = list(pool.map(_solve_worker, tasks, chunksize=8))
    else:
        _solve_worker_init(dictionary, grid, pipe_config, seed)
        records = [_solve_worker(task) for task in tasks]

    slimmer.write_estimates_jsonl(records, args.out)
    if args.csv:
        slimmer.write_estimates_csv(records, args.csv)

    manifest = stack.ManifestWriter(
        "solve",
        {
            "grid": _load_json(args.grid),
            "solver": solver_config.to_dict(),
            "backend": args.backend,
            "k_max": args.k_max,
            "wiener_mu": args.wiener_mu,
            "workers": args.workers,
        },
        seed,
    )
    manifest.add_input(args.stack)
    manifest.add_input(args.grid)
    if args.config:
        manifest.add_input(args.config)
    manifest.add_output(args.out)
    if args.csv:
        manifest.add_output(args.csv)
    manifest.write(args.out)

    failures = sum(1 for r in records if "error" in r)
    if failures:
        log.warning("%d of %d pixels failed; see output records", failures, len(records))
    return EXIT_OK


_MC_KEYS = {
    "geometry",
    "kappas",
    "snrs_db",
    "methods",
    "realizations",
    "seed",
    "grid_size",
    "grid_halfspan",
    "tol_factor",
    "delta_phi",
    "k_max",
    "solver",
}


def cmd_montecarlo(args) -> int:
    data = _load_json(args.config)
    unknown = set(data) - _MC_KEYS
    if unknown:
        raise ConfigurationError(f"unknown montecarlo config keys: {sorted(unknown)}")
    for key in ("geometry", "kappas", "snrs_db", "methods", "realizations"):
        if key not in data:
            raise ConfigurationError(f"montecarlo config requires {key!r}")

    from .model import AcquisitionGeometry

    geometry = AcquisitionGeometry.from_dict(data["geometry"])
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    solver_config = (
        SolverConfig.from_dict(data["solver"]) if "solver" in data else SolverConfig()
    )
    setup = MonteCarloSetup(
        grid_size=int(data.get("grid_size", 161)),
        grid_halfspan=float(data.get("grid_halfspan", 2.0)),
        tol_factor=float(data.get("tol_factor", 0.25)),
        delta_phi=float(data.get("delta_phi", 0.0)),
        k_max=int(data.get("k_max", 2)),
        solver=solver_config,
    )
    base = Scenario(geometry=geometry, realizations=int(data["realizations"]), seed=seed)
    results = monte_carlo_detection(
        base,
        kappas=[float(k) for k in data["kappas"]],
        snrs=[float(s) for s in data["snrs_db"]],
        methods=[str(m) for m in data["methods"]],
        realizations=int(data["realizations"]),
        setup=setup,
        workers=args.workers,
    )
    simulate.results_to_csv(results, args.out)

    manifest = stack.ManifestWriter("montecarlo", data, seed)
    manifest.add_input(args.config)
    manifest.add_output(args.out)
    manifest.write(args.out)
    return EXIT_OK


DEFAULT_BENCH = {
    "n_values": [29],
    "l_values": [100, 1000, 10000],
    "solvers": ["rbpg", "ista", "fista"],
    "repeats": 5,
    "tol": 1e-6,
    "max_iters": 20000,
    "num_blocks": 8,
    "block_sweep": [1, 2, 4, 8, 16],
    "seed": 1,
}


def _bench_instance(n: int, l_total: int, seed: int) -> Objective:
    geom = simulate.demo_geometry(n_acquisitions=n, seed=seed)
    rho = geom.rayleigh_resolution
    grid = ParameterGrid.uniform((-2.0 * rho, 2.0 * rho), l_total)
    scenario = Scenario(
        geometry=geom,
        scatterers=(
            simulate.Scatterer(elevation=float(grid.elevation[l_total // 3])),
            simulate.Scatterer(elevation=float(grid.elevation[2 * l_total // 3])),
        ),
        snr_db=(10.0, 10.0),
        seed=seed,
    )
    g = simulate.synthesize_pixel(scenario, substream(seed, 7))
    dictionary = build_steering_matrix(geom, grid).entries
    return slimmer.build_objective(dictionary, g, SolverConfig())


def _loglog_slope(xs: list[float], ys: list[float]) -> float:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.maximum(np.asarray(ys, dtype=float), 1e-12))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def cmd_bench(args) -> int:
    data = dict(DEFAULT_BENCH)
    if args.config:
        overrides = _load_json(args.config)
        unknown = set(overrides) - set(DEFAULT_BENCH)
        if unknown:
            raise ConfigurationError(f"unknown bench config keys: {sorted(unknown)}")
        data.update(overrides)
    seed = args.seed if args.seed is not None else int(data["seed"])

    solvers = {
        "rbpg": solver.rbpg_solve,
        "ista": solver.ista_solve,
        "fista": solver.fista_solve,
    }
    runs = []
    for n in data["n_values"]:
        for l_total in data["l_values"]:
            for name in data["solvers"]:
                walls, iters, finals = [], [], []
                for rep in range(int(data["repeats"])):
                    obj = _bench_instance(int(n), int(l_total), seed + rep)
                    config = SolverConfig(
                        num_blocks=min(int(data["num_blocks"]), int(l_total)),
                        max_iters=int(data["max_iters"]),
                        tol=float(data["tol"]),
                        seed=seed + rep,
                    )
                    sol = solvers[name](obj, config)
                    walls.append(sol.wall_time)
                    iters.append(sol.iterations_used)
                    finals.append(float(sol.objective_history[-1]))
                runs.append(
                    {
                        "solver": name,
                        "n": int(n),
                        "l": int(l_total),
                        "median_wall_s": statistics.median(walls),
                        "median_iters": statistics.median(iters),
                        "median_final_objective": statistics.median(finals),
                    }
                )

    # rbpg per-iteration cost versus block size at the largest instance
    n_ref = int(data["n_values"][-1])
    l_ref = int(data["l_values"][-1])
    obj_ref = _bench_instance(n_ref, l_ref, seed)
    block_rows = []
    for j in data["block_sweep"]:
        j = min(int(j), l_ref)
        config = SolverConfig(num_blocks=j, fixed_iters=200, seed=seed)
        t0 = time.perf_counter()
        solver.rbpg_solve(obj_ref, config)
        per_iter = (time.perf_counter() - t0) / 200.0
        block_rows.append({"num_blocks": j, "block_size": l_ref / j, "per_iter_s": per_iter})

    rbpg_runs = [r for r in runs if r["solver"] == "rbpg" and r["n"] == n_ref]
    report = {
        "config": {**data, "seed": seed},
        "runs": runs,
        "rbpg_block_sweep": block_rows,
        "rbpg_block_size_slope": _loglog_slope(
            [row["block_size"] for row in block_rows],
            [row["per_iter_s"] for row in block_rows],
        )
        if len(block_rows) >= 2
        else None,
        "rbpg_l_scaling_exponent": _loglog_slope(
            [r["l"] for r in rbpg_runs], [r["median_wall_s"] for r in rbpg_runs]
        )
        if len(rbpg_runs) >= 2
        else None,
        "per_pixel_cost_extrapolation": {
            "l": l_ref,
            "seconds_per_pixel": next(
                (r["median_wall_s"] for r in reversed(rbpg_runs) if r["l"] == l_ref), None
            ),
        },
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    manifest = stack.ManifestWriter("bench", data, seed)
    if args.config:
        manifest.add_input(args.config)
    manifest.add_output(args.out)
    manifest.write(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--config", type=str, default=None, help="config JSON file")

    parser = argparse.ArgumentParser(
        prog="tomobpdn",
        description="Sparse spectral estimation experiments for tomographic stacks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[common], help="synthesize a pixel stack")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--out", required=True, help="output stack file")
    p_sim.add_argument("--pixels", type=int, default=None, help="override pixel count")
    p_sim.set_defaults(func=cmd_simulate)

    p_solve = sub.add_parser("solve", parents=[common], help="estimate scatterers per pixel")
    p_solve.add_argument("--stack", required=True, help="input stack file")
    p_solve.add_argument("--geometry", default=None, help="geometry JSON (overrides stack)")
    p_solve.add_argument("--grid", required=True, help="grid config JSON")
    p_solve.add_argument("--out", required=True, help="output estimates JSONL")
    p_solve.add_argument("--csv", default=None, help="optional point-cloud CSV")
    p_solve.add_argument("--backend", default="rbpg", choices=slimmer.BACKENDS)
    p_solve.add_argument("--k-max", type=int, default=2, dest="k_max")
    p_solve.add_argument("--wiener-mu", type=float, default=0.0, dest="wiener_mu")
    p_solve.set_defaults(func=cmd_solve)

    p_mc = sub.add_parser("montecarlo", parents=[common], help="detection-rate sweep")
    p_mc.add_argument("--out", required=True, help="output CSV")
    p_mc.set_defaults(func=cmd_montecarlo)

    p_bench = sub.add_parser("bench", parents=[common], help="solver timing report")
    p_bench.add_argument("--out", required=True, help="output report JSON")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "montecarlo" and not args.config:
        parser.error("montecarlo requires --config")
    try:
        return args.func(args)
    except (json.JSONDecodeError,) as exc:
        print(f"error: {exc.lineno}:{exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (StackFormatError, GeometryError, GridError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (NumericalError, LineSearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
