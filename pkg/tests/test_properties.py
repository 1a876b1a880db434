import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import dualcond.cli as cli
from dualcond.acquisition import ei_from_moments
from dualcond.data import Dataset
from dualcond.kernels import Kernel
from dualcond.likelihoods import Bernoulli, Gaussian
from dualcond.model import DualState, dual_condition, predict
from dualcond.options import parse_options

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
positive = st.floats(min_value=0.05, max_value=5.0, allow_nan=False)


@pytest.mark.unit
@given(
    kind=st.sampled_from(["Matern52", "SquaredExponential"]),
    variance=positive,
    lengthscale=positive,
    points=st.lists(st.tuples(finite, finite), min_size=1, max_size=8),
)
def test_property_gram_is_symmetric_with_variance_diagonal(kind, variance, lengthscale, points):
    kernel = Kernel.create(kind, variance, (lengthscale, 2.0 * lengthscale))
    K = kernel.gram(np.array(points))
    assert np.array_equal(K, K.T)
    np.testing.assert_allclose(np.diag(K), variance, rtol=1e-12)
    assert np.all(K <= variance * (1.0 + 1e-12))


@pytest.mark.unit
@given(mean=finite, std=st.floats(min_value=0.0, max_value=5.0), incumbent=finite, shift=positive)
def test_property_ei_is_non_negative_and_monotone_in_mean(mean, std, incumbent, shift):
    low = ei_from_moments(mean, std, incumbent)[()]
    high = ei_from_moments(mean + shift, std, incumbent)[()]
    assert low >= 0.0
    assert high >= low
    assert low >= max(mean - incumbent, 0.0) - 1e-12


@pytest.mark.unit
@given(seed=st.integers(min_value=0, max_value=2**16), split=st.integers(min_value=1, max_value=11))
def test_property_gaussian_conditioning_is_order_invariant(seed, split):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 3.0, size=(12, 1))
    y = np.cos(X[:, 0]) + rng.normal(0.0, 0.1, 12)
    state = DualState.fresh(np.linspace(0, 3, 5)[:, None], Kernel.create("Matern52", 1.0, (0.8,)), Gaussian(0.1))
    first, second = Dataset(X[:split], y[:split]), Dataset(X[split:], y[split:])
    forward = dual_condition(dual_condition(state, first), second)
    backward = dual_condition(dual_condition(state, second), first)
    scale = max(1.0, float(np.max(np.abs(forward.Lam))))
    np.testing.assert_allclose(forward.Lam, backward.Lam, rtol=0, atol=1e-9 * scale)
    np.testing.assert_allclose(forward.lam, backward.lam, rtol=0, atol=1e-9 * scale)


@pytest.mark.unit
@given(seed=st.integers(min_value=0, max_value=2**16), n=st.integers(min_value=1, max_value=15))
def test_property_bernoulli_conditioning_shrinks_variance(seed, n):
    rng = np.random.default_rng(seed)
    state = DualState.fresh(rng.uniform(-2, 2, size=(4, 2)), Kernel.create("Matern52", 1.0, (1.0, 1.0)), Bernoulli())
    data = Dataset(rng.uniform(-2, 2, size=(n, 2)), rng.integers(0, 2, n), "binary")
    points = rng.uniform(-2, 2, size=(10, 2))
    before = predict(state, points).variance
    after = predict(dual_condition(state, data), points).variance
    assert np.all(after <= before + 1e-10)


@pytest.mark.unit
@given(labels=st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_property_binary_datasets_only_accept_zero_one(labels):
    X = np.zeros((len(labels), 1))
    if all(v in (0.0, 1.0) for v in labels):
        assert Dataset(X, labels, "binary").n == len(labels)
    else:
        with pytest.raises(ValueError, match="labels in \\{0, 1\\}"):
            Dataset(X, labels, "binary")


@pytest.mark.unit
@given(
    args=st.lists(
        st.sampled_from(
            ["fit", "bo", "stream", "--seed", "3", "-1", "--out", "x"]
            + ["--color", "never", "-v", "--batch-size=0", "--wat"]
        ),
        max_size=8,
    )
)
def test_property_option_parser_fails_only_with_value_errors(args):
    try:
        options = parse_options(args, help_text=cli.HELP_TEXT)
    except ValueError as exc:
        assert str(exc)
    else:
        assert options.command in (None, "fit", "bo", "stream")
        assert options.seed is None or options.seed >= 0
