import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.stats import multivariate_normal

from bope.core.baselines import fit_lasso, reference_revenue
from bope.core.data import PricingDataset
from bope.core.hyperfit import (
    HyperParams,
    bernoulli_laplace_evidence,
    bernoulli_log_likelihood,
    fit_hyperparams,
    gaussian_evidence,
    laplace_mode,
    logged_points,
    median_heuristic,
)
from bope.core.hyperfit.search import _EvidenceSearch
from bope.core.kernel import kernel_matrix
from bope.core.synth import draw_instance, make_setting_a


def _dataset(n: int, seed: int):
    inst, _ = draw_instance(make_setting_a(2.0, seed=seed), n)
    ds = PricingDataset(inst.features, inst.logged_prices, inst.demands)
    r_hat = reference_revenue(fit_lasso(ds, l1_penalty=0.01), inst)[:n]
    return ds, r_hat


def test_gaussian_evidence_matches_scipy():
    ds, r_hat = _dataset(12, 1)
    params = HyperParams(np.array([1.0, 2.0, 0.5]), 0.8, 0.3)
    points = logged_points(ds)
    kernel_mat = kernel_matrix(points, points, params.lengthscale_sq)
    covariance = 0.8 * kernel_mat + 0.3 * np.eye(ds.n)
    expected = multivariate_normal(mean=r_hat, cov=covariance).logpdf(ds.revenues)
    assert_allclose(gaussian_evidence(ds, r_hat, params, kernel_mat), expected, rtol=1e-10)


def test_gaussian_evidence_needs_noise():
    ds, r_hat = _dataset(5, 1)
    with pytest.raises(ValueError, match="sigma_sq"):
        gaussian_evidence(ds, r_hat, HyperParams(np.ones(3), 1.0), np.eye(5))


def test_bernoulli_log_likelihood_inside_clip_region(rng):
    prices = rng.uniform(1.0, 5.0, size=6)
    demands = rng.integers(0, 2, size=6)
    r = rng.uniform(0.1, 0.9, size=6) * prices
    value, grad, hess = bernoulli_log_likelihood(r, prices, demands)
    u = r / prices
    assert_allclose(value, np.sum(demands * np.log(u) + (1 - demands) * np.log(1 - u)))
    step = 1e-6

    def loglik(point):
        return bernoulli_log_likelihood(point, prices, demands)[0]

    numeric = np.array([(loglik(r + step * e) - loglik(r - step * e)) / (2 * step) for e in np.eye(6)])
    assert_allclose(grad, numeric, rtol=1e-5)
    assert np.all(hess > 0)


def test_bernoulli_log_likelihood_is_finite_outside_box():
    value, grad, hess = bernoulli_log_likelihood(np.array([-1.0, 3.0]), np.array([2.0, 2.0]), np.array([1, 0]))
    assert np.isfinite(value)
    assert np.all(np.isfinite(grad))
    assert np.all(hess > 0)


@pytest.mark.parametrize("demand,r_hat,gamma_hat_sq", [(1, 1.0, 0.1), (0, 0.8, 0.05), (1, 1.2, 0.05)])
def test_laplace_evidence_matches_quadrature(demand, r_hat, gamma_hat_sq):
    price = 2.0
    ds = PricingDataset(np.zeros((1, 1)), [price], [demand])
    params = HyperParams(np.ones(2), gamma_hat_sq)
    laplace = bernoulli_laplace_evidence(ds, np.array([r_hat]), params, np.ones((1, 1)))

    sd = np.sqrt(gamma_hat_sq)

    def integrand(f):
        loglik = bernoulli_log_likelihood(np.array([r_hat + f]), np.array([price]), np.array([demand]))[0]
        return np.exp(loglik) * np.exp(-0.5 * f**2 / gamma_hat_sq) / (sd * np.sqrt(2 * np.pi))

    exact, _ = quad(integrand, -12 * sd, 12 * sd, points=[0.0], limit=200)
    assert abs(laplace - np.log(exact)) <= 0.1


def test_laplace_mode_moves_towards_data():
    ds = PricingDataset(np.zeros((1, 1)), [2.0], [1])
    mode = laplace_mode(ds, np.array([1.0]), HyperParams(np.ones(2), 0.1), np.ones((1, 1)))
    assert 1.0 < mode[0] < 2.0


def test_median_heuristic():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    assert_allclose(median_heuristic(points), [4.0, 1.0])
    assert_allclose(median_heuristic(np.zeros((1, 3))), np.ones(3))


def test_evidence_search_round_trip():
    ds, r_hat = _dataset(6, 2)
    search = _EvidenceSearch("gaussian", ds, r_hat, logged_points(ds))
    params = HyperParams(np.array([0.5, 2.0, 3.0]), 0.7, 0.2)
    back = search.unpack(search.pack(params))
    assert_allclose(back.lengthscale_sq, params.lengthscale_sq)
    assert_allclose([back.gamma_hat_sq, back.sigma_sq], [0.7, 0.2])


@pytest.mark.parametrize("variant", ["gaussian", "bernoulli"])
def test_fit_improves_on_the_starts(variant):
    ds, r_hat = _dataset(15, 3)
    points = logged_points(ds)
    seen = []
    fitted = fit_hyperparams(variant, ds, r_hat, points=points, budget=40, progress=lambda k, best: seen.append(k))
    assert seen == [0, 1, 2]
    assert np.isfinite(fitted.evidence)

    search = _EvidenceSearch(variant, ds, r_hat, points)
    scale = max(float(np.var(ds.revenues - r_hat)), 1e-3)
    unit = HyperParams(np.ones(3), scale / 2, scale / 2 if variant == "gaussian" else None)
    assert fitted.evidence >= search.evidence(unit) - 1e-9
    assert (fitted.sigma_sq is None) == (variant == "bernoulli")


def test_fit_validation():
    ds, r_hat = _dataset(5, 4)
    with pytest.raises(NotImplementedError):
        fit_hyperparams("poisson", ds, r_hat)
    with pytest.raises(ValueError):
        fit_hyperparams("gaussian", ds, r_hat, budget=0)
    with pytest.raises(ValueError):
        fit_hyperparams("gaussian", ds, r_hat, points=np.zeros((3, 3)))


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        HyperParams(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        HyperParams(np.ones(2), -1.0)
    assert HyperParams(np.ones(2), 4.0).gamma_hat == 2.0
    assert HyperParams(np.ones(2), 4.0).to_dict()["evidence"] is None
