import numpy as np
import pytest
from scipy.stats import norm

from dualcond.acquisition import (
    AcquisitionSpec,
    BoxBounds,
    Surrogates,
    ei_from_moments,
    eval_acquisition,
    expected_improvement,
    maximize_acquisition,
    success_probability,
)
from dualcond.data import Dataset
from dualcond.errors import ConfigError
from dualcond.kernels import Kernel
from dualcond.likelihoods import Bernoulli, Gaussian
from dualcond.model import DualState, fit, predict, predict_y
from oracles import sobol_normals

UNIT = BoxBounds((0.0,), (1.0,))


def quadratic_surrogate(noise=1e-4):
    X = np.linspace(0.0, 1.0, 6)[:, None]
    y = -4.0 * (X[:, 0] - 0.3) ** 2
    state = DualState.fresh(X, Kernel.create("Matern52", 1.0, (0.3,)), Gaussian(noise))
    return fit(state, Dataset(X, y)).state, float(y.max())


def classifier(dim=1, fitted=True):
    Z = np.linspace(0.0, 1.0, 5)[:, None] if dim == 1 else np.random.default_rng(0).uniform(size=(6, dim))
    state = DualState.fresh(Z, Kernel.create("Matern52", 1.0, (0.3,) * dim), Bernoulli())
    if not fitted:
        return state
    X = np.linspace(0.0, 1.0, 20)[:, None]
    return fit(state, Dataset(X, (X[:, 0] < 0.5).astype(float), "binary")).state


def test_ei_worked_examples():
    assert ei_from_moments(0.7, 0.0, 0.7)[()] == 0.0
    assert ei_from_moments(0.7, 1e-13, 0.7)[()] == 0.0
    assert ei_from_moments(0.0, 1.0, 0.0)[()] == pytest.approx(0.398942, abs=1e-6)
    assert ei_from_moments(1.5, 0.0, 1.0)[()] == pytest.approx(0.5)


def test_ei_minimization_mirrors_maximization():
    assert ei_from_moments(-0.3, 0.4, 0.2, maximize=False) == pytest.approx(ei_from_moments(0.3, 0.4, -0.2))


def test_ei_matches_quasi_monte_carlo():
    rng = np.random.default_rng(21)
    z = sobol_normals(20, seed=21)
    for _ in range(20):
        mean, std = rng.normal(), rng.uniform(0.1, 2.0)
        # the draws only resolve incumbents within a few std of the mean
        incumbent = mean + std * rng.uniform(-3.0, 3.0)
        samples = np.maximum(mean + std * z - incumbent, 0.0)
        standard_error = samples.std() / np.sqrt(samples.size)
        value = ei_from_moments(mean, std, incumbent)[()]
        assert abs(value - samples.mean()) <= 3.0 * standard_error + 1e-10


def test_ei_far_below_the_incumbent_is_tiny_but_positive():
    value = ei_from_moments(0.0, 1.0, 5.0)[()]
    assert 0.0 < value < 1e-7
    assert value == pytest.approx(norm.pdf(-5.0) - 5.0 * norm.cdf(-5.0), rel=1e-6)


def test_ei_is_non_negative_and_increases_with_sigma_below_incumbent():
    sigmas = np.linspace(0.01, 3.0, 200)
    values = ei_from_moments(np.full_like(sigmas, -0.5), sigmas, 0.0)
    assert np.all(values >= 0.0)
    assert np.all(np.diff(values) > 0.0)


def test_ei_with_infinite_incumbent_is_zero():
    assert np.all(ei_from_moments(np.array([0.0, 5.0]), np.array([1.0, 0.0]), np.inf) == 0.0)


def test_expected_improvement_uses_latent_prediction():
    state, incumbent = quadratic_surrogate()
    X = np.linspace(0, 1, 7)[:, None]
    pred = predict(state, X)
    expected = ei_from_moments(pred.mean, np.sqrt(pred.variance), incumbent)
    np.testing.assert_array_equal(expected_improvement(state, X, incumbent), expected)


def test_fresh_classifier_success_probability_is_one_half():
    X = np.random.default_rng(1).uniform(size=(9, 1))
    np.testing.assert_allclose(success_probability(classifier(fitted=False), X), 0.5)


def test_success_probability_is_probit_predictive_mean():
    state = classifier()
    X = np.linspace(0, 1, 11)[:, None]
    pred = predict(state, X)
    p = success_probability(state, X)
    np.testing.assert_array_equal(p, predict_y(state, X)[0])
    np.testing.assert_allclose(p, norm.cdf(pred.mean / np.sqrt(1.0 + pred.variance)), rtol=1e-12)
    assert p[0] > 0.5 > p[-1]


def test_product_with_fresh_classifier_is_half_of_ei():
    reg, incumbent = quadratic_surrogate()
    models = Surrogates(reg, classifier(fitted=False))
    X = np.linspace(0, 1, 13)[:, None]
    ei = eval_acquisition(AcquisitionSpec("EI", incumbent), models, X)
    product = eval_acquisition(AcquisitionSpec("ProductEISuccess", incumbent), models, X)
    np.testing.assert_allclose(product, 0.5 * ei, rtol=1e-12)


def test_ei_ignores_classifier_and_product_is_bounded_by_ei():
    reg, incumbent = quadratic_surrogate()
    X = np.random.default_rng(2).uniform(size=(50, 1))
    spec = AcquisitionSpec("EI", incumbent)
    alone = eval_acquisition(spec, Surrogates(regression=reg), X)
    with_clf = eval_acquisition(spec, Surrogates(reg, classifier()), X)
    np.testing.assert_array_equal(alone, with_clf)
    product = eval_acquisition(AcquisitionSpec("ProductEISuccess", incumbent), Surrogates(reg, classifier()), X)
    assert np.all(product >= 0.0)
    assert np.all(product <= alone)


def test_product_is_zero_wherever_ei_is_zero():
    reg, _ = quadratic_surrogate()
    X = np.linspace(0, 1, 5)[:, None]
    values = eval_acquisition(AcquisitionSpec("ProductEISuccess", np.inf), Surrogates(reg, classifier()), X)
    assert np.all(values == 0.0)


def test_missing_model_or_incumbent_is_a_config_error():
    reg, _ = quadratic_surrogate()
    X = np.zeros((1, 1))
    with pytest.raises(ConfigError, match="needs a classification model"):
        eval_acquisition(AcquisitionSpec("ProductEISuccess", 0.0), Surrogates(regression=reg), X)
    with pytest.raises(ConfigError, match="needs a regression model"):
        eval_acquisition(AcquisitionSpec("EI", 0.0), Surrogates(classification=classifier()), X)
    with pytest.raises(ConfigError, match="needs an incumbent"):
        eval_acquisition(AcquisitionSpec("EI"), Surrogates(regression=reg), X)


def test_spec_and_surrogate_validation():
    with pytest.raises(ConfigError, match="unknown acquisition kind"):
        AcquisitionSpec("UCB")
    with pytest.raises(ValueError, match="nan"):
        AcquisitionSpec("EI", float("nan"))
    with pytest.raises(ConfigError, match="Gaussian likelihood"):
        Surrogates(regression=classifier())
    assert AcquisitionSpec("EI").with_incumbent(1.0).incumbent == 1.0


def test_maximizer_on_constant_acquisition_returns_in_bounds_zero():
    reg, _ = quadratic_surrogate()
    bounds = BoxBounds((-2.0,), (3.0,))
    x, value = maximize_acquisition(AcquisitionSpec("EI", np.inf), Surrogates(regression=reg), bounds, budget=4)
    assert bounds.contains(x).all()
    assert value == 0.0


def test_maximizer_finds_dense_grid_argmax():
    reg, incumbent = quadratic_surrogate()
    spec = AcquisitionSpec("EI", incumbent)
    models = Surrogates(regression=reg)
    grid = np.linspace(0.0, 1.0, 10001)[:, None]
    values = eval_acquisition(spec, models, grid)
    x, value = maximize_acquisition(spec, models, UNIT, budget=10, seed=3)
    assert abs(x[0] - grid[np.argmax(values), 0]) < 1e-2
    assert value >= values.max() - 1e-9


def test_maximizer_is_deterministic_and_stays_in_bounds():
    bounds = BoxBounds((0.0, 0.0), (1.0, 1.0))
    models = Surrogates(classification=classifier(dim=2, fitted=False))
    spec = AcquisitionSpec("SuccessProb")
    first = maximize_acquisition(spec, models, bounds, budget=3, seed=8)
    second = maximize_acquisition(spec, models, bounds, budget=3, seed=8)
    assert np.array_equal(first[0], second[0])
    assert first[1] == second[1]
    assert bounds.contains(first[0]).all()


def test_maximizer_rejects_zero_budget():
    reg, incumbent = quadratic_surrogate()
    with pytest.raises(ValueError, match="budget"):
        maximize_acquisition(AcquisitionSpec("EI", incumbent), Surrogates(regression=reg), UNIT, budget=0)
