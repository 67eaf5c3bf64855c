import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.linalg import solve_triangular

from bope.core.baselines import BopeConfig, bope_weights
from bope.core.data import build_instance
from bope.core.errors import OracleError
from bope.core.estimator import BoundConfig, RevenueBall, Weights, bernstein_penalty, max_term, mse, variance
from bope.core.kernel import KernelConfig, gram_matrix
from bope.core.wcopt import (
    FeasibleSet,
    SolverConfig,
    brute_force_oracle,
    danskin_gradient,
    solve_inner,
    solve_weights,
    wc_bern_inner,
    wc_mse_inner,
)
from bope.core.wcopt.projection import project_ellipsoid

from tests.conftest import random_instance


def _random_feasible(feasible: FeasibleSet, rng, count: int):
    points = []
    for _ in range(count):
        direction = rng.normal(size=feasible.ball.size)
        points.append(feasible.repair(feasible.center + rng.uniform(0, 3) * direction))
    return points


def test_project_ellipsoid_interior_and_boundary(gram, rng):
    evals, evecs = gram.spectrum
    evecs_t = np.ascontiguousarray(evecs.T)
    center = np.zeros(gram.size)
    inside = 0.1 * np.sqrt(evals[-1]) * evecs[:, -1]
    assert_array_equal(project_ellipsoid(inside, center, evecs, evecs_t, evals, 1.0), inside)

    outside = 10 * rng.normal(size=gram.size)
    projected = project_ellipsoid(outside, center, evecs, evecs_t, evals, 1.0)
    coords = evecs_t @ projected
    assert_allclose(np.sum(coords**2 / evals), 1.0, rtol=1e-6)
    # the residual is normal to the ellipsoid at the projection
    normal = evecs @ (coords / evals)
    cosine = (outside - projected) @ normal / (np.linalg.norm(outside - projected) * np.linalg.norm(normal))
    assert_allclose(cosine, 1.0, atol=1e-6)


def test_feasible_set_projection_and_repair(gram, ball, rng):
    feasible = FeasibleSet(ball, gram)
    for _ in range(10):
        x = ball.r_hat + 5 * rng.normal(size=ball.size)
        assert feasible.is_feasible(feasible.project(x), rtol=1e-2)
        assert feasible.is_feasible(feasible.repair(x))


def test_projection_onto_plane(gram, ball, rng):
    feasible = FeasibleSet(ball, gram)
    normal = rng.normal(size=ball.size)
    offset = float(normal @ ball.r_hat)
    projected = feasible.project(ball.r_hat + rng.normal(size=ball.size), (normal, offset))
    assert_allclose(normal @ projected, offset, atol=1e-6)


def test_feasible_set_size_mismatch(gram):
    with pytest.raises(ValueError):
        FeasibleSet(RevenueBall(np.ones(2), 1.0, np.full(2, 2.0)), gram)


def test_degenerate_ball_returns_center(instance, gram, solver_config, rng):
    w = rng.normal(size=instance.n)
    ball = RevenueBall(0.5 * instance.price_vector, 0.0, instance.price_vector)
    result = wc_mse_inner(w, instance, ball, gram, solver_config)
    assert_array_equal(result.r_wc, ball.r_hat)
    assert_allclose(result.objective, variance(w, ball.r_hat, instance))
    bound = BoundConfig(0.1)
    result = wc_bern_inner(w, instance, ball, gram, solver_config, bound)
    assert_allclose(result.objective, bernstein_penalty(w, ball.r_hat, instance, ball, bound))


def test_mse_inner_dominates_feasible_points(instance, gram, ball, solver_config, rng):
    w = rng.normal(1.0, 1.0, size=instance.n)
    result = wc_mse_inner(w, instance, ball, gram, solver_config)
    feasible = FeasibleSet(ball, gram)
    assert feasible.is_feasible(result.r_wc)
    assert_allclose(result.objective, mse(w, result.r_wc, instance, ball))
    for r in _random_feasible(feasible, rng, 200):
        assert result.objective >= mse(w, r, instance, ball) - 1e-4 * (1 + abs(result.objective))


def test_bern_inner_dominates_feasible_points(instance, gram, ball, solver_config, rng):
    w = rng.normal(1.0, 1.0, size=instance.n)
    bound = BoundConfig(0.1)
    result = wc_bern_inner(w, instance, ball, gram, solver_config, bound)
    feasible = FeasibleSet(ball, gram)
    assert feasible.is_feasible(result.r_wc)
    for r in _random_feasible(feasible, rng, 200):
        assert result.objective >= bernstein_penalty(w, r, instance, ball, bound) - 1e-4 * (1 + abs(result.objective))


def test_solve_inner_dispatch(instance, gram, ball, solver_config):
    w = np.ones(instance.n)
    with pytest.raises(NotImplementedError):
        solve_inner("cvar", w, instance, ball, gram, solver_config)
    with pytest.raises(ValueError):
        solve_inner("bern", w, instance, ball, gram, solver_config)


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_inner_matches_grid_oracle_for_one_customer(kind, solver_config, rng):
    bound = BoundConfig(0.1)
    for _ in range(5):
        inst = random_instance(rng, 1)
        gf = gram_matrix(inst, KernelConfig(rng.uniform(0.5, 4.0, size=3)))
        ball = RevenueBall(rng.uniform(0, 1, size=2) * inst.price_vector, rng.uniform(0.5, 3.0), inst.price_vector)
        w = rng.normal(0.0, 2.0, size=1)
        solver = solve_inner(kind, w, inst, ball, gf, solver_config, bound).objective
        grid = brute_force_oracle(w, inst, ball, gf, kind, 2000, bound)
        assert abs(solver - grid) <= max(1e-2, 2e-2 * abs(grid))


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_inner_is_not_below_grid_oracle(kind, solver_config, rng):
    bound = BoundConfig(0.1)
    for n in (2, 3):
        inst = random_instance(rng, n)
        gf = gram_matrix(inst, KernelConfig(rng.uniform(0.5, 4.0, size=3)))
        ball = RevenueBall(rng.uniform(0, 1, size=2 * n) * inst.price_vector, 2.0, inst.price_vector)
        w = rng.normal(0.0, 2.0, size=n)
        solver = solve_inner(kind, w, inst, ball, gf, solver_config, bound).objective
        grid = brute_force_oracle(w, inst, ball, gf, kind, 8, bound)
        assert solver >= grid - max(1e-2, 2e-2 * abs(grid))


def test_oracle_limits(instance, gram, ball):
    w = np.ones(instance.n)
    with pytest.raises(OracleError, match="n <= 3"):
        brute_force_oracle(w, instance, ball, gram, "mse", 4)
    small = random_instance(np.random.default_rng(0), 3)
    small_gram = gram_matrix(small, KernelConfig(np.ones(3)))
    small_ball = RevenueBall(0.5 * small.price_vector, 1.0, small.price_vector)
    with pytest.raises(OracleError, match="exceeds"):
        brute_force_oracle(np.ones(3), small, small_ball, small_gram, "mse", 60)


def test_oracle_degenerate_ball_uses_nearest_grid_point():
    inst = random_instance(np.random.default_rng(3), 1)
    gf = gram_matrix(inst, KernelConfig(np.ones(3)))
    ball = RevenueBall(0.5 * inst.price_vector, 0.0, inst.price_vector)
    w = np.array([1.5])
    # resolution 3 puts a grid point exactly at p / 2
    assert_allclose(brute_force_oracle(w, inst, ball, gf, "mse", 3), variance(w, ball.r_hat, inst))


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_danskin_gradient_matches_finite_differences(kind, rng):
    bound = BoundConfig(0.1)
    step = 1e-6
    for _ in range(100):
        inst = random_instance(rng, int(rng.integers(1, 6)))
        r = rng.uniform(0.1, 0.9, size=2 * inst.n) * inst.price_vector
        ball = RevenueBall(rng.uniform(0, 1, size=2 * inst.n) * inst.price_vector, 1.0, inst.price_vector)
        w = rng.normal(1.0, 1.0, size=inst.n)

        def phi(v):
            if kind == "mse":
                return mse(v, r, inst, ball)
            return bernstein_penalty(v, r, inst, ball, bound, smoothing_p=16)

        grad = danskin_gradient(w, r, kind, inst, ball, bound, smoothing_p=16)
        numeric = np.array([(phi(w + step * e) - phi(w - step * e)) / (2 * step) for e in np.eye(inst.n)])
        assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)


def test_danskin_gradient_unknown_kind(instance, ball):
    with pytest.raises(NotImplementedError):
        danskin_gradient(np.ones(instance.n), ball.r_hat, "cvar", instance, ball)


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_outer_dominates_its_starts(kind, instance, gram, ball, solver_config):
    bound = BoundConfig(0.1)
    bope = bope_weights(instance, gram, ball.gamma_hat, BopeConfig()).w
    uniform = np.ones(instance.n)
    seen = []
    w, result = solve_weights(
        kind,
        instance,
        ball,
        gram,
        solver_config,
        bound=bound,
        starts=[bope, uniform],
        callback=lambda it, w, res: seen.append((it, res.objective)),
    )
    candidates = [np.zeros(instance.n), bope, uniform]
    cold = [solve_inner(kind, c, instance, ball, gram, solver_config, bound).objective for c in candidates]
    assert result.objective <= min(cold) + 1e-6
    assert seen[0][0] == 0
    assert all(b <= a for (_, a), (_, b) in zip(seen, seen[1:]))
    assert w.n == instance.n


def test_outer_degenerate_ball_keeps_zero_weights(instance, gram, solver_config):
    ball = RevenueBall(0.5 * instance.price_vector, 0.0, instance.price_vector)
    w, result = solve_weights("mse", instance, ball, gram, solver_config)
    assert_array_equal(w.w, np.zeros(instance.n))
    assert result.objective == 0.0


def test_outer_rejects_bad_start(instance, gram, ball, solver_config):
    with pytest.raises(ValueError, match="Start 0"):
        solve_weights("mse", instance, ball, gram, solver_config, starts=[np.ones(instance.n + 1)])


def _rank_one_ball(inst, gf):
    """Ball around p/2 whose rank-one maximizer for zero weights stays inside the box."""
    b = Weights(np.zeros(inst.n)).bias_coefficients()
    gb = gf.matvec(b)
    quad = float(b @ gb)
    gamma_hat = 0.25 * float(np.min(inst.price_vector)) * np.sqrt(quad) / float(np.max(np.abs(gb)))
    return RevenueBall(0.5 * inst.price_vector, gamma_hat, inst.price_vector), quad


def test_zero_weights_match_the_rank_one_closed_form(rng, solver_config):
    for _ in range(3):
        inst = random_instance(rng, 4)
        gf = gram_matrix(inst, KernelConfig(np.full(3, 2.0)))
        ball, quad = _rank_one_ball(inst, gf)
        w = np.zeros(inst.n)
        mse_result = wc_mse_inner(w, inst, ball, gf, solver_config)
        assert_allclose(mse_result.objective, ball.gamma_hat**2 * quad, rtol=1e-5)
        bern_result = wc_bern_inner(w, inst, ball, gf, solver_config, BoundConfig(0.1))
        assert_allclose(bern_result.objective, ball.gamma_hat * np.sqrt(quad), rtol=1e-5)


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_inner_objective_grows_with_the_radius(kind, instance, gram, solver_config, rng):
    bound = BoundConfig(0.1)
    w = rng.normal(1.0, 1.0, size=instance.n)
    values = []
    for gamma_hat in (0.0, 0.5, 1.0, 2.0, 4.0):
        ball = RevenueBall(0.5 * instance.price_vector, gamma_hat, instance.price_vector)
        values.append(solve_inner(kind, w, instance, ball, gram, solver_config, bound).objective)
    for smaller, larger in zip(values, values[1:]):
        assert larger >= smaller - 1e-4 * (1 + abs(smaller))


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_worst_case_objective_is_convex_in_weights(kind, instance, gram, ball, solver_config, rng):
    bound = BoundConfig(0.1)

    def h(w):
        return solve_inner(kind, w, instance, ball, gram, solver_config, bound).objective

    for _ in range(3):
        w1, w2 = rng.normal(1.0, 1.5, size=(2, instance.n))
        average = 0.5 * (h(w1) + h(w2))
        assert h(0.5 * (w1 + w2)) <= average + 1e-4 * (1 + abs(average))


def test_bern_inner_matches_joint_revenue_and_root_grid():
    inst = build_instance(np.array([[0.3, -0.2]]), [5.0], [4.5], [1])
    gf = gram_matrix(inst, KernelConfig(np.full(3, 2.0)))
    ball = RevenueBall(0.5 * inst.price_vector, 1.0, inst.price_vector)
    bound = BoundConfig(0.1)
    w = Weights([1.0])
    solver = wc_bern_inner(w, inst, ball, gf, SolverConfig(), bound).objective

    # grid over (r, t) with t^2 <= Var(w, r); t is kept as its own variable
    axes = [np.linspace(0.0, p, 400) for p in inst.price_vector]
    grid = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    delta = grid - ball.r_hat
    inside = np.sum(solve_triangular(gf.factor, delta.T, lower=True) ** 2, axis=0) <= ball.gamma_hat**2
    grid, delta = grid[inside], delta[inside]
    q = w.variance_diagonal()
    spread = grid @ (q * inst.price_vector) - (grid**2) @ q
    roots = np.linspace(0.0, np.sqrt(np.sum(q * inst.price_vector**2) / 4), 300)
    t = roots[np.searchsorted(roots**2, spread, side="right") - 1]
    joint = delta @ w.bias_coefficients() + np.sqrt(2 * bound.log_inv_eps) * t + max_term(w, inst, bound)

    assert joint.max() <= solver + 1e-6 * (1 + abs(solver))
    assert abs(solver - joint.max()) <= max(1e-2, 2e-2 * abs(solver))


@pytest.mark.parametrize("kind", ["mse", "bern"])
def test_inner_matches_grid_oracle_for_two_customers(kind, rng):
    bound = BoundConfig(0.1)
    cfg = SolverConfig()
    for _ in range(3):
        inst = random_instance(rng, 2)
        # short lengthscales keep the ellipsoid round; the radius covers the whole box
        gf = gram_matrix(inst, KernelConfig(np.full(3, 0.05)))
        evals, _ = gf.spectrum
        gamma_hat = 1.01 * float(np.linalg.norm(inst.price_vector)) / np.sqrt(float(np.min(evals)))
        ball = RevenueBall(rng.uniform(0, 1, size=4) * inst.price_vector, gamma_hat, inst.price_vector)
        w = rng.normal(0.0, 2.0, size=2)
        solver = solve_inner(kind, w, inst, ball, gf, cfg, bound).objective
        grid = brute_force_oracle(w, inst, ball, gf, kind, 60, bound)
        assert abs(solver - grid) <= max(1e-2, 2e-2 * abs(grid))
