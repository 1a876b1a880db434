import warnings

import numpy as np
import pytest
from scipy.cluster.vq import ClusterError, kmeans2

from dualcond.config import parse_config
from dualcond.data import (
    ConstrainedProblem,
    Dataset,
    StreamClassification,
    generate_banana,
    generate_constrained_problem,
    partition_stream,
)
from dualcond.driver import (
    Standardizer,
    best_feasible,
    build_likelihood,
    fit_dataset,
    refit,
    run_bo,
    run_streaming,
    select_inducing,
    update_hyperparameters,
    update_inducing,
)
from dualcond.errors import ConfigError, ProblemEvaluationError
from dualcond.kernels import Kernel
from dualcond.likelihoods import Bernoulli, Gaussian
from dualcond.model import DualState, elbo, state_fingerprint

SMALL_BO = {
    "model": {"num_inducing": 8},
    "fit": {"max_iters": 30},
    "acquisition": {"budget": 2},
    "bo": {"batch_size": 2, "iterations": 2, "hyper_max_evals": 3},
}


def small_config(**sections):
    payload = {key: dict(value) for key, value in SMALL_BO.items()}
    for key, value in sections.items():
        if isinstance(value, dict):
            payload.setdefault(key, {}).update(value)
        else:
            payload[key] = value
    return parse_config(payload)


def regression_data(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 6.0, size=(n, 1))
    return Dataset(X, np.sin(X[:, 0]) + rng.normal(0.0, 0.1, n))


def test_select_inducing_returns_m_centroids_deterministically():
    X = generate_banana(50, 2, seed=0).concatenate().X
    Z = select_inducing(X, 12, seed=3)
    assert Z.shape == (12, 2)
    np.testing.assert_array_equal(Z, select_inducing(X, 12, seed=3))
    assert np.all(Z.min(axis=0) >= X.min(axis=0)) and np.all(Z.max(axis=0) <= X.max(axis=0))


def test_select_inducing_clamps_to_distinct_inputs(caplog):
    X = np.array([[1.0], [0.0], [1.0], [0.0], [2.0]])
    with caplog.at_level("WARNING", logger="dualcond.driver"):
        Z = select_inducing(X, 10)
    np.testing.assert_array_equal(Z, [[0.0], [1.0], [2.0]])
    assert "3 distinct inputs" in caplog.text
    np.testing.assert_array_equal(select_inducing(X, 3), Z)


def test_select_inducing_restarts_when_a_cluster_empties(monkeypatch, caplog):
    calls = []

    def flaky(*args, **kwargs):
        calls.append(kwargs["missing"])
        if len(calls) == 1:
            raise ClusterError("One of the clusters is empty. Re-run kmeans with a different initialization.")
        return kmeans2(*args, **kwargs)

    monkeypatch.setattr("dualcond.driver.kmeans2", flaky)
    X = generate_banana(50, 2, seed=0).concatenate().X
    with caplog.at_level("WARNING", logger="dualcond.driver"):
        Z = select_inducing(X, 12, seed=3)
    assert calls == ["raise", "raise"]
    assert Z.shape == (12, 2)
    assert "cluster empty" not in caplog.text


def test_select_inducing_falls_back_to_data_points_and_logs(monkeypatch, caplog):
    def always_empty(*args, **kwargs):
        raise ClusterError("One of the clusters is empty. Re-run kmeans with a different initialization.")

    monkeypatch.setattr("dualcond.driver.kmeans2", always_empty)
    X = generate_banana(50, 2, seed=0).concatenate().X
    with caplog.at_level("WARNING", logger="dualcond.driver"):
        Z = select_inducing(X, 12, seed=3)
    assert Z.shape == (12, 2)
    assert len(np.unique(Z, axis=0)) == 12
    assert all(np.any(np.all(X == z, axis=1)) for z in Z)
    assert "cluster empty" in caplog.text


def test_select_inducing_emits_no_scipy_warnings():
    # many more centroids than tight clumps tends to empty a cluster
    rng = np.random.default_rng(12)
    centres = np.array([[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]])
    X = np.vstack([c + rng.normal(0.0, 0.01, size=(20, 2)) for c in centres])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for seed in range(10):
            Z = select_inducing(X, 15, seed=seed)
            assert Z.shape == (15, 2)
            assert np.all(np.isfinite(Z))


def test_select_inducing_errors():
    with pytest.raises(ValueError, match="empty data"):
        select_inducing(np.zeros((0, 2)), 3)
    with pytest.raises(ValueError, match="at least 1"):
        select_inducing(np.zeros((4, 2)), 0)


def test_build_likelihood_follows_domain():
    model = parse_config({}).model
    assert isinstance(build_likelihood(model, "binary"), Bernoulli)
    assert build_likelihood(model, "real") == Gaussian(0.1)
    with pytest.raises(ConfigError, match="Bernoulli needs binary labels"):
        build_likelihood(parse_config({"model": {"likelihood": "Bernoulli"}}).model, "real")


def test_hyperparameter_search_disabled_returns_the_same_state():
    data = regression_data()
    state = DualState.fresh(np.linspace(0, 6, 6)[:, None], Kernel.create("Matern52", 1.0, (1.0,)), Gaussian(0.1))
    assert update_hyperparameters(state, data, parse_config({}).fit, max_evals=0) is state


def test_hyperparameter_search_never_lowers_the_elbo():
    data = regression_data()
    Z = np.linspace(0, 6, 8)[:, None]
    state = DualState.fresh(Z, Kernel.create("Matern52", 5.0, (0.05,)), Gaussian(2.0))
    config = parse_config({}).fit
    before = elbo(refit(state, data, config).state, data)
    tuned = update_hyperparameters(state, data, config, max_evals=40)
    assert elbo(tuned, data) > before
    np.testing.assert_array_equal(tuned.Z, Z)


def test_update_inducing_moves_z_and_keeps_theta():
    data = regression_data()
    state = DualState.fresh(np.zeros((1, 1)), Kernel.create("Matern52", 1.0, (1.0,)), Gaussian(0.1))
    updated = update_inducing(state, data, 6, parse_config({}).fit, seed=1)
    assert updated.m == 6
    assert updated.kernel == state.kernel
    assert state_fingerprint(updated) != state_fingerprint(state)
    assert np.any(updated.lam != 0.0)


def test_fit_dataset_traces_the_elbo():
    data = generate_banana(30, 2, seed=1).concatenate()
    config = small_config(model={"num_inducing": 10}, fit={"hyper_max_evals": 5})
    result = fit_dataset(data, config)
    assert result.state.m == 10
    assert isinstance(result.state.likelihood, Bernoulli)
    assert len(result.elbo_trace) == result.iterations
    assert all(np.isfinite(result.elbo_trace))


def test_standardizer_and_best_feasible():
    scaler = Standardizer.fit([1.0, 3.0])
    np.testing.assert_allclose(scaler.forward([1.0, 3.0]), [-1.0, 1.0])
    np.testing.assert_allclose(scaler.inverse(scaler.forward([2.5])), [2.5])
    assert Standardizer.fit([4.0, 4.0]).scale == 1.0
    assert best_feasible([5.0, 2.0, 3.0], [0.0, 1.0, 1.0]) == 3.0
    assert best_feasible([5.0], [0.0]) is None


def test_gaussian_stream_matches_offline_fit():
    data = regression_data(n=60)
    problem = StreamClassification("sine", partition_stream(data, 20))
    config = parse_config({"model": {"num_inducing": 10}, "stream": {"learn_hyperparameters": False}})
    result = run_streaming(problem, config)
    assert len(result.states) == 3
    np.testing.assert_allclose(result.final.lam, result.offline.lam, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(result.final.Lam, result.offline.Lam, rtol=1e-8, atol=1e-10)
    assert result.gap < 1e-8
    assert len(result.xs) == 0
    assert result.accuracy_stream is None


def test_single_batch_stream_equals_offline():
    problem = StreamClassification.banana(40, 1, seed=2)
    config = parse_config({"model": {"num_inducing": 8}, "stream": {"learn_hyperparameters": False}})
    result = run_streaming(problem, config)
    assert len(result.states) == 1
    assert result.gap == 0.0


def test_banana_stream_keeps_anchor_and_predicts_well():
    problem = StreamClassification.banana(50, 4, seed=0)
    config = parse_config(
        {"model": {"num_inducing": 15}, "stream": {"learn_hyperparameters": False, "grid_resolution": 12}}
    )
    result = run_streaming(problem, config)
    assert len(result.states) == 4
    assert len({state_fingerprint(s) for s in result.states}) == 1
    assert state_fingerprint(result.offline) == state_fingerprint(result.final)
    assert result.summary()["grid_shape"] == [12, 12]
    for probs in result.batch_probs:
        assert probs.shape == (144,)
        assert np.all((probs >= 0.0) & (probs <= 1.0))
    assert result.accuracy_stream >= 0.7
    assert result.gap < 0.25


def test_bo_with_zero_iterations_records_only_the_initial_design():
    problem = generate_constrained_problem("noisy-branin-disk", seed=0)
    history = run_bo(problem, small_config(bo={"iterations": 0}))
    assert len(history.records) == 1
    assert history.iterations == []
    assert history.initial.points.shape == (6, 2)
    assert history.final_incumbent == best_feasible(history.initial.observed_y, history.initial.observed_success)


def test_bo_incumbent_never_decreases_and_lengths_match():
    problem = generate_constrained_problem("noisy-branin-disk", seed=1)
    history = run_bo(problem, small_config())
    assert history.error is None
    assert len(history.iterations) == 2
    for record in history.iterations:
        assert record.points.shape == (2, 2)
        assert record.observed_y.shape == (2,)
        assert record.batch.k == 2
    seen = [v for v in history.incumbents() if v is not None]
    assert seen == sorted(seen)
    if history.initial.incumbent is not None:
        assert all(v is not None for v in history.incumbents())


def _without_timings(payload):
    for record in payload["iterations"]:
        record.pop("wall_ms")
    return payload


def test_bo_is_deterministic_given_seed():
    problem = generate_constrained_problem("noisy-branin-disk", seed=2)
    config = small_config(bo={"iterations": 1})
    first = _without_timings(run_bo(problem, config).to_dict())
    second = _without_timings(run_bo(problem, config).to_dict())
    assert first == second


def test_bo_records_evaluation_failure(monkeypatch):
    calls = {"n": 0}
    original = ConstrainedProblem.evaluate

    def flaky(self, X, eval_seeds):
        calls["n"] += 1
        if calls["n"] > 1:
            raise ProblemEvaluationError("simulator crashed")
        return original(self, X, eval_seeds)

    monkeypatch.setattr(ConstrainedProblem, "evaluate", flaky)
    history = run_bo(generate_constrained_problem("noisy-branin-disk"), small_config())
    assert history.error == "iteration 1: simulator crashed"
    assert len(history.records) == 1
    assert history.to_dict()["error"] == history.error


def test_sequential_baseline_uses_single_point_batches():
    history = run_bo(generate_constrained_problem("noisy-branin-disk", seed=3), small_config(bo={"batch_size": 1}))
    assert [r.points.shape[0] for r in history.iterations] == [1, 1]


def test_bo_warns_when_inducing_points_outnumber_the_initial_design(caplog):
    problem = generate_constrained_problem("noisy-branin-disk", seed=4)
    config = small_config(model={"num_inducing": 25}, bo={"init_size": 6, "iterations": 1})
    with caplog.at_level("WARNING", logger="dualcond.driver"):
        history = run_bo(problem, config)
    assert history.error is None
    assert "asked for 25 inducing points but data has 6 distinct inputs" in caplog.text
