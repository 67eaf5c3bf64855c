import numpy as np
import pytest
from numpy.testing import assert_allclose

from bope.core.estimator import (
    BoundConfig,
    RevenueBall,
    Weights,
    bernstein_penalty,
    bias,
    estimate_coefficients,
    lower_bound,
    max_term,
    mse,
    point_estimate,
    smoothed_max,
    smoothed_max_grad,
    variance,
)
from bope.core.synth import draw_instance, make_setting_a, simulate_demands, true_target_revenue
from bope.core.utils import derive_rng

from tests.conftest import random_instance


def test_zero_weights_give_direct_estimate(instance):
    r_hat = 0.4 * instance.price_vector
    assert_allclose(point_estimate(np.zeros(instance.n), instance, r_hat), np.mean(r_hat[instance.n :]))


def test_point_estimate_by_hand():
    from bope.core.data import build_instance

    inst = build_instance(np.zeros((2, 1)), [2.0, 4.0], [3.0, 5.0], [1, 0])
    r_hat = np.array([1.0, 1.0, 1.5, 2.5])
    # (1/2)[1*(2-1) + 2*(0-1)] + (1/2)(1.5+2.5)
    assert_allclose(point_estimate([1.0, 2.0], inst, r_hat), -0.5 + 2.0)


def test_estimate_coefficients_are_affine_in_demands(instance, rng):
    w = rng.normal(size=instance.n)
    r_hat = rng.uniform(0, 1, size=2 * instance.n) * instance.price_vector
    offset, coef = estimate_coefficients(w, instance, r_hat)
    for _ in range(5):
        demands = rng.integers(0, 2, size=instance.n)
        assert_allclose(offset + coef @ demands, point_estimate(w, instance.with_demands(demands), r_hat))


def test_bias_variance_mse(instance, ball, rng):
    w = rng.normal(size=instance.n)
    r = rng.uniform(0, 1, size=2 * instance.n) * instance.price_vector
    n = instance.n
    expected_bias = (w @ (r[:n] - ball.r_hat[:n]) - np.sum(r[n:] - ball.r_hat[n:])) / n
    expected_var = np.sum(w**2 * r[:n] * (instance.logged_prices - r[:n])) / n**2
    assert_allclose(bias(w, r, ball), expected_bias)
    assert_allclose(variance(w, r, instance), expected_var)
    assert_allclose(mse(w, r, instance, ball), expected_bias**2 + expected_var)
    assert bias(w, ball.r_hat, ball) == 0.0


def test_variance_vanishes_at_box_edges(instance):
    w = np.ones(instance.n)
    assert variance(w, np.zeros(2 * instance.n), instance) == 0.0
    assert variance(w, instance.price_vector, instance) == 0.0


def test_variance_is_bounded_by_quarter_price_squares(rng):
    for _ in range(50):
        inst = random_instance(rng, int(rng.integers(1, 8)))
        w = rng.normal(0.0, 3.0, size=inst.n)
        r = rng.uniform(0, 1, size=2 * inst.n) * inst.price_vector
        ceiling = np.sum(w**2 * inst.logged_prices**2) / (4 * inst.n**2)
        assert variance(w, r, inst) <= ceiling
        assert_allclose(variance(w, 0.5 * inst.price_vector, inst), ceiling)


@pytest.mark.parametrize("objective", ["mse", "bern"])
def test_objectives_are_convex_in_weights_at_fixed_revenue(objective, instance, ball, rng):
    cfg = BoundConfig(0.1)
    r = rng.uniform(0, 1, size=2 * instance.n) * instance.price_vector

    def phi(w):
        if objective == "mse":
            return mse(w, r, instance, ball)
        return bernstein_penalty(w, r, instance, ball, cfg)

    for _ in range(20):
        w1, w2 = rng.normal(0.0, 2.0, size=(2, instance.n))
        assert phi(0.5 * (w1 + w2)) <= 0.5 * (phi(w1) + phi(w2)) + 1e-10


def test_bernstein_penalty_terms(instance, ball, rng):
    w = rng.normal(size=instance.n)
    r = 0.3 * instance.price_vector
    cfg = BoundConfig(0.05)
    log_term = np.log(20.0)
    expected = (
        bias(w, r, ball)
        + np.sqrt(2 * variance(w, r, instance) * log_term)
        + np.max(np.abs(w) * instance.logged_prices) * log_term / (3 * instance.n)
    )
    assert_allclose(bernstein_penalty(w, r, instance, ball, cfg), expected)


def test_bernstein_penalty_epsilon_one_is_bias(instance, ball, rng):
    w = rng.normal(size=instance.n)
    r = 0.7 * instance.price_vector
    assert_allclose(bernstein_penalty(w, r, instance, ball, BoundConfig(1.0)), bias(w, r, ball))


def test_smoothed_max_brackets_the_max(rng):
    values = rng.normal(size=7)
    top = np.max(np.abs(values))
    assert smoothed_max(values, None) == top
    smooth = smoothed_max(values, 16)
    assert top <= smooth <= top * 7 ** (1 / 16) + 1e-12
    assert smoothed_max(np.zeros(3), 16) == 0.0


def test_smoothed_max_gradient_matches_finite_differences(rng):
    values = rng.normal(size=5)
    grad = smoothed_max_grad(values, 16)
    step = 1e-6
    numeric = np.array(
        [(smoothed_max(values + step * e, 16) - smoothed_max(values - step * e, 16)) / (2 * step) for e in np.eye(5)]
    )
    assert_allclose(grad, numeric, rtol=1e-5, atol=1e-8)


def test_smoothed_max_term_is_an_upper_bound(instance, rng):
    w = rng.normal(size=instance.n)
    cfg = BoundConfig()
    assert max_term(w, instance, cfg, smoothing_p=16) >= max_term(w, instance, cfg)


def test_lower_bound_is_clipped():
    assert lower_bound(3.0, 1.0) == 2.0
    assert lower_bound(1.0, 3.0) == 0.0


def test_validation():
    with pytest.raises(ValueError):
        Weights([])
    with pytest.raises(ValueError):
        Weights([1.0, np.nan])
    with pytest.raises(ValueError):
        BoundConfig(0.0)
    with pytest.raises(ValueError):
        RevenueBall([1.0], -1.0, [2.0])


def test_ball_clips_reference_into_box():
    ball = RevenueBall([-1.0, 3.0], 1.0, [2.0, 2.0])
    assert_allclose(ball.r_hat, [0.0, 2.0])


def test_bias_and_variance_match_monte_carlo():
    inst, true_r = draw_instance(make_setting_a(2.0, seed=11), 20)
    rng = derive_rng(11, "test-weights")
    w = rng.normal(1.0, 1.0, size=inst.n)
    r_hat = np.clip(true_r + rng.normal(0.0, 0.5, size=2 * inst.n), 0.0, inst.price_vector)
    ball = RevenueBall(r_hat, 1.0, inst.price_vector)

    draws = 200_000
    demands = simulate_demands(inst, true_r, derive_rng(11, "test-demands"), draws)
    offset, coef = estimate_coefficients(w, inst, ball.r_hat)
    estimates = offset + demands @ coef
    errors = estimates - true_target_revenue(true_r)

    mean_error = errors.mean()
    centered = estimates - estimates.mean()
    empirical_var = np.mean(centered**2)
    mean_se = np.sqrt(empirical_var / draws)
    var_se = np.sqrt((np.mean(centered**4) - empirical_var**2) / draws)
    assert abs(mean_error - bias(w, true_r, ball)) <= 3 * mean_se
    assert abs(empirical_var - variance(w, true_r, inst)) <= 3 * var_se


def test_bernstein_bound_covers_fixed_weights():
    inst, true_r = draw_instance(make_setting_a(2.0, seed=5), 50)
    rng = derive_rng(5, "test-weights")
    w = rng.uniform(0.0, 3.0, size=inst.n)
    ball = RevenueBall(0.5 * inst.price_vector, 1.0, inst.price_vector)
    cfg = BoundConfig(0.1)

    demands = simulate_demands(inst, true_r, derive_rng(5, "test-demands"), 5000)
    offset, coef = estimate_coefficients(w, inst, ball.r_hat)
    penalty = bernstein_penalty(w, true_r, inst, ball, cfg)
    misses = np.mean(true_target_revenue(true_r) < offset + demands @ coef - penalty)
    assert misses <= 0.1
