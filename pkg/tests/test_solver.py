import json

import numpy as np
import pytest

from tomobpdn import (
    BlockPartition,
    ConfigurationError,
    Objective,
    SolverConfig,
    SolverStatus,
    block_partition,
    eval_F,
    fista_solve,
    grad_f,
    ista_solve,
    rbpg_solve,
    sample_block,
    soft_threshold,
    spectral_sq_norm,
    svd_wiener_solve,
)
from tomobpdn.rng import substream
from tomobpdn.solver import config_schema

from conftest import fourier_instance, random_objective


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(tol=0.0)
        with pytest.raises(ConfigurationError):
            SolverConfig(c_alpha=1.0)
        with pytest.raises(ConfigurationError):
            SolverConfig(num_blocks=0)
        with pytest.raises(ConfigurationError):
            SolverConfig(lambda_reg=-1.0)
        with pytest.raises(ConfigurationError):
            SolverConfig(theta_schedule="1/k")

    def test_json_roundtrip(self, tmp_path):
        config = SolverConfig(lambda_reg=0.3, num_blocks=4, seed=9)
        path = tmp_path / "solver.json"
        path.write_text(json.dumps(config.to_dict()))
        assert SolverConfig.from_json(path) == config

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigurationError):
            SolverConfig.from_dict({"momentum": 0.9})

    def test_schema_covers_all_fields(self):
        schema = config_schema()
        assert set(schema) == set(SolverConfig().to_dict())
        assert schema["c_alpha"]["default"] == 0.5


class TestSpectralNorm:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_svd(self, seed):
        obj = random_objective(seed, n=10, l_total=7)
        exact = np.linalg.svd(obj.dictionary, compute_uv=False)[0] ** 2
        assert spectral_sq_norm(obj.dictionary) == pytest.approx(exact, rel=1e-9)

    def test_single_column(self):
        col = np.array([[1.0], [2.0], [2.0]])
        assert spectral_sq_norm(col) == pytest.approx(9.0)


class TestBlockPartition:
    def test_even_split(self):
        a = np.eye(4)
        part = block_partition(4, 2, a)
        assert part.blocks == ((0, 2), (2, 4))

    def test_near_equal_sizes(self):
        a = np.ones((3, 10))
        part = block_partition(10, 3, a)
        sizes = [stop - start for start, stop in part.blocks]
        assert sorted(sizes) == [3, 3, 4]
        assert max(sizes) - min(sizes) <= 1

    def test_orthonormal_blocks_equal_probabilities(self):
        part = block_partition(6, 3, np.eye(6))
        np.testing.assert_allclose(part.probabilities, 1.0 / 3.0)

    def test_probabilities_proportional_to_lipschitz(self):
        part = BlockPartition(blocks=((0, 1), (1, 2)), lipschitz=np.array([1.0, 3.0]))
        np.testing.assert_allclose(part.probabilities, [0.25, 0.75])
        assert abs(part.probabilities.sum() - 1.0) <= 1e-12

    def test_j_bounds(self):
        with pytest.raises(ConfigurationError):
            block_partition(3, 4, np.eye(3))
        with pytest.raises(ConfigurationError):
            block_partition(3, 0, np.eye(3))

    def test_blocks_cover_all_columns(self):
        a = np.ones((2, 13))
        part = block_partition(13, 5, a)
        covered = sorted(i for start, stop in part.blocks for i in range(start, stop))
        assert covered == list(range(13))


class TestSampleBlock:
    def test_single_block_always_zero(self):
        part = BlockPartition(blocks=((0, 5),), lipschitz=np.array([2.0]))
        rng = substream(0)
        assert all(sample_block(part, rng) == 0 for _ in range(20))

    def test_empirical_frequencies(self):
        part = BlockPartition(blocks=((0, 1), (1, 2)), lipschitz=np.array([1.0, 3.0]))
        rng = substream(42)
        draws = np.array([sample_block(part, rng) for _ in range(100_000)])
        freq = np.mean(draws == 1)
        assert abs(freq - 0.75) < 0.01

    def test_fixed_seed_reproducible(self):
        part = BlockPartition(blocks=((0, 1), (1, 2)), lipschitz=np.array([1.0, 3.0]))
        rng_a, rng_b = substream(7, 1), substream(7, 1)
        a = [sample_block(part, rng_a) for _ in range(50)]
        b = [sample_block(part, rng_b) for _ in range(50)]
        assert a == b


def identity_instance(lambda_reg=0.5, seed=0, l_total=6):
    rng = substream(seed, 5)
    b = rng.uniform(-2, 2, l_total) + 1j * rng.uniform(-2, 2, l_total)
    return Objective(dictionary=np.eye(l_total), measurement=b, lambda_reg=lambda_reg), b


class TestRbpg:
    def test_zero_measurement(self):
        obj = Objective(dictionary=np.eye(4), measurement=np.zeros(4), lambda_reg=0.5)
        sol = rbpg_solve(obj, SolverConfig(num_blocks=2, max_iters=50))
        np.testing.assert_array_equal(sol.x_hat, 0.0)
        np.testing.assert_array_equal(sol.objective_history, 0.0)
        assert sol.status == SolverStatus.CONVERGED

    def test_identity_closed_form(self):
        obj, b = identity_instance()
        sol = rbpg_solve(obj, SolverConfig(num_blocks=2, max_iters=2000, tol=1e-12))
        np.testing.assert_allclose(sol.x_hat, soft_threshold(b, 0.25), atol=1e-8)

    def test_monotone_history(self):
        for seed in range(5):
            obj, _, _ = fourier_instance(seed, l_total=60)
            sol = rbpg_solve(obj, SolverConfig(num_blocks=6, max_iters=800))
            assert np.all(np.diff(sol.objective_history) <= 0.0)

    def test_matches_fista_oracle(self):
        obj, _, _ = fourier_instance(21)
        oracle = fista_solve(obj, SolverConfig(tol=1e-12, max_iters=50_000))
        sol = rbpg_solve(obj, SolverConfig(num_blocks=8, max_iters=20_000, tol=1e-10))
        f_star = oracle.objective_history[-1]
        assert abs(sol.objective_history[-1] - f_star) <= 1e-4 * f_star

    def test_seeded_determinism(self):
        obj, _, _ = fourier_instance(22, l_total=50)
        config = SolverConfig(num_blocks=5, max_iters=300, seed=11)
        a = rbpg_solve(obj, config)
        b = rbpg_solve(obj, config)
        assert np.array_equal(a.x_hat, b.x_hat)
        assert np.array_equal(a.objective_history, b.objective_history)

    def test_seed_changes_trajectory(self):
        obj, _, _ = fourier_instance(22, l_total=50)
        a = rbpg_solve(obj, SolverConfig(num_blocks=5, max_iters=300, seed=1))
        b = rbpg_solve(obj, SolverConfig(num_blocks=5, max_iters=300, seed=2))
        assert not np.array_equal(a.objective_history, b.objective_history)

    def test_permutation_equivariance(self):
        obj, _, _ = fourier_instance(23, l_total=40)
        rng = substream(23, 9)
        perm = rng.permutation(40)
        obj_p = Objective(
            dictionary=obj.dictionary[:, perm],
            measurement=obj.measurement,
            lambda_reg=obj.lambda_reg,
        )
        config = SolverConfig(num_blocks=1, max_iters=2000, tol=1e-12, seed=3)
        x = rbpg_solve(obj, config).x_hat
        x_p = rbpg_solve(obj_p, config).x_hat
        assert np.max(np.abs(x_p - x[perm])) <= 1e-10

    def test_fixed_iters_takes_precedence(self):
        obj, _, _ = fourier_instance(24, l_total=30)
        sol = rbpg_solve(obj, SolverConfig(num_blocks=3, fixed_iters=37, tol=1e-1))
        assert sol.iterations_used == 37

    def test_optimality_certificate(self):
        obj, _, _ = fourier_instance(25, l_total=60)
        sol = rbpg_solve(obj, SolverConfig(num_blocks=6, max_iters=30_000, tol=1e-13))
        lam = obj.lambda_reg
        grad = grad_f(obj, sol.x_hat)
        nonzero = np.abs(sol.x_hat) > 1e-9
        if nonzero.any():
            resid = grad[nonzero] + lam * sol.x_hat[nonzero] / np.abs(sol.x_hat[nonzero])
            assert np.max(np.abs(resid)) <= 1e-3 * lam
        if (~nonzero).any():
            assert np.max(np.abs(grad[~nonzero])) <= lam * (1 + 1e-3)


class TestIsta:
    def test_identity_closed_form(self):
        obj, b = identity_instance(seed=1)
        sol = ista_solve(obj, SolverConfig(max_iters=500, tol=1e-13))
        np.testing.assert_allclose(sol.x_hat, soft_threshold(b, 0.25), atol=1e-8)

    def test_monotone_on_many_instances(self):
        for seed in range(100):
            obj = random_objective(seed, n=6, l_total=9, lambda_reg=0.2)
            sol = ista_solve(obj, SolverConfig(max_iters=60, tol=1e-12))
            hist = sol.objective_history
            assert np.all(np.diff(hist) <= 1e-12 * max(hist[0], 1.0))

    def test_agrees_with_rbpg(self):
        obj, _, _ = fourier_instance(26, l_total=50)
        a = ista_solve(obj, SolverConfig(max_iters=30_000, tol=1e-11))
        b = rbpg_solve(obj, SolverConfig(num_blocks=5, max_iters=30_000, tol=1e-11))
        f_a, f_b = a.objective_history[-1], b.objective_history[-1]
        assert abs(f_a - f_b) <= 1e-4 * min(f_a, f_b)


class TestFista:
    def test_identity_closed_form(self):
        obj, b = identity_instance(seed=2)
        sol = fista_solve(obj, SolverConfig(max_iters=500, tol=1e-13))
        np.testing.assert_allclose(sol.x_hat, soft_threshold(b, 0.25), atol=1e-8)

    def test_fewer_iterations_than_ista(self):
        wins = []
        for seed in range(20):
            obj, _, _ = fourier_instance(seed + 200, l_total=50)
            config = SolverConfig(max_iters=50_000, tol=1e-8)
            wins.append(
                fista_solve(obj, config).iterations_used
                <= ista_solve(obj, config).iterations_used
            )
        # paired comparison: acceleration wins in the median (and nearly always)
        assert np.median(wins) == 1.0

    def test_no_randomness(self):
        obj, _, _ = fourier_instance(27, l_total=40)
        a = fista_solve(obj, SolverConfig(seed=1, max_iters=400))
        b = fista_solve(obj, SolverConfig(seed=999, max_iters=400))
        assert np.array_equal(a.x_hat, b.x_hat)


class TestSvdWiener:
    def test_unitary_zero_mu(self):
        rng = substream(3, 2)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
        g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        obj = Objective(dictionary=q, measurement=g, lambda_reg=0.0)
        np.testing.assert_allclose(svd_wiener_solve(obj, 0.0), q.conj().T @ g, atol=1e-10)

    def test_large_mu_shrinks_to_zero(self):
        obj = random_objective(4)
        x = svd_wiener_solve(obj, 1e12)
        assert np.max(np.abs(x)) < 1e-6

    def test_single_scatterer_peak(self):
        import tomobpdn as t
        from tomobpdn import simulate

        geom = t.demo_geometry()
        unit = simulate.separation_unit(geom)
        grid = t.ParameterGrid.uniform((-4 * unit, 4 * unit), 17)
        a = t.build_steering_matrix(geom, grid).entries
        true_bin = 8
        scenario = t.Scenario(
            geometry=geom,
            scatterers=(t.Scatterer(elevation=float(grid.elevation[true_bin])),),
            snr_db=(10.0,),
            seed=1,
        )
        hits = 0
        for r in range(30):
            g = simulate.synthesize_pixel(scenario, substream(1, r))
            obj = Objective(dictionary=a, measurement=g, lambda_reg=0.0)
            x = svd_wiener_solve(obj, scenario.noise_variance * grid.flat_size)
            hits += int(np.argmax(np.abs(x)) == true_bin)
        assert hits >= 28

    def test_mu_validation(self):
        obj = random_objective(5)
        with pytest.raises(ConfigurationError):
            svd_wiener_solve(obj, -1.0)


class TestSolverAgreement:
    def test_all_three_agree_when_converged(self):
        obj, _, _ = fourier_instance(30, l_total=50)
        config = SolverConfig(num_blocks=5, max_iters=50_000, tol=1e-11)
        finals = [
            solve(obj, config).objective_history[-1]
            for solve in (rbpg_solve, ista_solve, fista_solve)
        ]
        spread = (max(finals) - min(finals)) / min(finals)
        assert spread <= 1e-4
