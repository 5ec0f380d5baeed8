import math

import numpy as np
import pytest
from scipy import stats

from probboost.boosting import (
    BoostConfig,
    BoostModel,
    NumericalError,
    Stage,
    line_search,
    predict_params,
    staged_nll,
    staged_params,
    train,
    train_homoscedastic,
    truncate,
)
from probboost.data import Dataset, make_synthetic
from probboost.distributions import LOG_SCALE_MAX, LOG_SCALE_MIN, ConfigError, Family, Rule, fit_marginal, log_pdf
from probboost.natgrad import Direction, natural_gradient
from probboost.scoring import score
from probboost.trees import RegressionTree, TreeConfig, fit_tree

N, L = Family.NORMAL, Family.LAPLACE
LOG, CRPS = Rule.LOGSCORE, Rule.CRPS


def marginal_nll(train_y, test_y):
    theta = fit_marginal(N, LOG, train_y)
    return -float(np.mean(log_pdf(N, np.broadcast_to(theta, (len(test_y), 2)), test_y)))


def mean_nll(model, ds):
    return -float(np.mean(log_pdf(model.config.family, predict_params(model, ds.features), ds.targets)))


@pytest.fixture(scope="module")
def small_model():
    ds = make_synthetic("heteroscedastic", 300, seed=5)
    cfg = BoostConfig(n_stages=60, learning_rate=0.1, seed=3)
    return ds, train(ds, cfg)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_stages": 0},
            {"learning_rate": 0.0},
            {"minibatch_frac": 0.0},
            {"minibatch_frac": 1.5},
            {"line_search": "sometimes"},
            {"seed": -1},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            BoostConfig(**kwargs)

    def test_rejects_unsupported_pairs(self):
        with pytest.raises(ConfigError):
            BoostConfig(rule=CRPS, family=L)
        with pytest.raises(ConfigError):
            BoostConfig(rule=CRPS, direction=Direction.SADDLE_FREE)


class TestTrainExamples:
    def test_constant_targets(self):
        ds = Dataset.from_arrays(np.linspace(0, 1, 20), np.full(20, 3.0))
        model = train(ds, BoostConfig(n_stages=10))
        assert model.theta0[0] == 3.0 and model.theta0[1] == LOG_SCALE_MIN
        for stage in model.stages:
            for tree in stage.trees:
                assert tree.node_count == 1
                assert abs(tree.value[0]) < 1e-12
        theta = predict_params(model, np.linspace(-5, 5, 7)[:, None])
        assert np.all(theta[:, 0] == 3.0)

    def test_linear_fixture_beats_marginal(self):
        ds = make_synthetic("linear", 500, seed=1)
        test = make_synthetic("linear", 500, seed=2)
        model = train(ds, BoostConfig(n_stages=300, learning_rate=0.01))
        assert mean_nll(model, test) < marginal_nll(ds.targets, test.targets)

    def test_linear_fixture_fast_rate(self):
        # at rate 0.1 the scale collapses in narrow leaves long before stage 300,
        # so only the best staged prefix is compared with the marginal
        ds = make_synthetic("linear", 500, seed=1)
        test = make_synthetic("linear", 500, seed=2)
        model = train(ds, BoostConfig(n_stages=300, learning_rate=0.1))
        curve = staged_nll(model, test.features, test.targets)
        assert curve[0] == pytest.approx(marginal_nll(ds.targets, test.targets), rel=1e-12)
        assert curve.min() < curve[0] - 0.5
        grid = np.linspace(0, 1, 50)[:, None]
        mu = predict_params(model, grid)[:, 0]
        assert stats.spearmanr(grid[:, 0], mu).statistic > 0.95

    def test_scale_ramp_learns_increasing_scale(self):
        ds = make_synthetic("scale-ramp", 2000, seed=0)
        model = train(ds, BoostConfig(n_stages=300, learning_rate=0.01))
        log_scale = predict_params(model, ds.features)[:, 1]
        assert stats.spearmanr(ds.features[:, 0], log_scale).statistic > 0.9

    def test_every_stage_has_one_tree_per_parameter(self, small_model):
        _, model = small_model
        for stage in model.stages:
            assert len(stage.trees) == 2
            assert 0 < stage.rho <= 1

    def test_training_params_equal_prediction(self, small_model):
        ds, model = small_model
        assert np.max(np.abs(predict_params(model, ds.features) - model.train_theta)) <= 1e-12

    def test_training_params_equal_prediction_minibatch(self):
        ds = make_synthetic("heteroscedastic", 300, seed=2)
        model = train(ds, BoostConfig(n_stages=40, learning_rate=0.1, minibatch_frac=0.3, seed=9))
        assert np.max(np.abs(predict_params(model, ds.features) - model.train_theta)) <= 1e-12

    def test_non_finite_targets_rejected(self):
        ds = Dataset.from_arrays([0.0, 1.0], [0.0, 1.0])
        object.__setattr__(ds, "targets", np.array([0.0, np.inf]))
        with pytest.raises(ValueError):
            train(ds, BoostConfig(n_stages=2))

    def test_non_finite_direction_reports_stage_and_example(self, monkeypatch):
        from probboost import boosting

        def bad_direction(kind, rule, family, theta, y):
            g = np.zeros_like(theta)
            g[4, 0] = np.nan
            return g

        monkeypatch.setattr(boosting, "direction", bad_direction)
        ds = make_synthetic("linear", 20, seed=0)
        with pytest.raises(NumericalError, match="stage 1, example 4"):
            train(ds, BoostConfig(n_stages=3))

    @pytest.mark.parametrize("rule,family", [(CRPS, N), (LOG, L)])
    def test_other_rules_and_families_train(self, rule, family):
        ds = make_synthetic("heteroscedastic", 300, seed=4)
        model = train(ds, BoostConfig(n_stages=50, learning_rate=0.1, rule=rule, family=family))
        base = float(np.sum(score(rule, family, np.broadcast_to(model.theta0, (300, 2)), ds.targets)))
        assert model.metadata["final_train_score"] < base


class TestLineSearch:
    def test_full_step_accepted(self):
        before = score(LOG, N, [0, 0], 1.0)
        after = score(LOG, N, [1, 0], 1.0)
        assert before == pytest.approx(1.41894, abs=1e-5) and after == pytest.approx(0.91894, abs=1e-5)
        assert line_search([[0.0, 0.0]], [[-1.0, 0.0]], [1.0], LOG, N) == 1.0

    def test_zero_direction_fails(self):
        theta = np.zeros((5, 2))
        assert line_search(theta, np.zeros((5, 2)), np.arange(5.0), LOG, N) is None

    def test_no_decrease_from_the_optimum(self):
        # the mean is already optimal for y = 0, so every scaled step is worse
        rhos = [0.5**k for k in range(31)]
        assert all(score(LOG, N, [-10 * r, 0], 0.0) >= score(LOG, N, [0, 0], 0.0) for r in rhos)
        assert line_search([[0.0, 0.0]], [[10.0, 0.0]], [0.0], LOG, N) is None

    def test_overshoot_is_halved(self):
        rhos = [0.5**k for k in range(31)]
        ref = next(r for r in rhos if score(LOG, N, [10 * r, 0], 1.0) < score(LOG, N, [0, 0], 1.0))
        rho = line_search([[0.0, 0.0]], [[-10.0, 0.0]], [1.0], LOG, N)
        assert rho == ref == 0.125

    def test_best_mode_never_worse_than_first(self):
        rng = np.random.default_rng(0)
        theta = np.column_stack([rng.normal(size=50), rng.normal(size=50)])
        y = rng.normal(size=50)
        f = natural_gradient(LOG, N, theta, y) * 3
        first = line_search(theta, f, y, LOG, N, mode="first")
        best = line_search(theta, f, y, LOG, N, mode="best")

        def total(r):
            return np.sum(score(LOG, N, theta - r * f, y))

        assert first is not None and best is not None
        assert total(best) <= total(first)

    def test_clamps_log_scale_inside_trials(self):
        rho = line_search([[0.0, 0.0]], [[0.0, -1e6]], [50.0], LOG, N)
        assert rho == 1.0  # trial log-scale is clamped to the ceiling and improves the score
        assert score(LOG, N, [0, LOG_SCALE_MAX], 50.0) < score(LOG, N, [0, 0], 50.0)

    def test_none_mode(self):
        assert line_search([[0.0, 0.0]], [[0.0, 0.0]], [0.0], LOG, N, mode="none") == 1.0


class TestPredict:
    def test_zero_stage_model(self):
        model = BoostModel(BoostConfig(), np.array([1.5, -0.5]))
        assert np.array_equal(predict_params(model, [0.3, 2.0]), [1.5, -0.5])

    def test_one_stage_arithmetic(self):
        stage = Stage((RegressionTree.constant(2.0), RegressionTree.constant(0.0)), rho=1.0)
        model = BoostModel(BoostConfig(learning_rate=0.1), np.zeros(2), [stage])
        assert np.allclose(predict_params(model, [0.0]), [-0.2, 0.0], atol=1e-15)

    def test_finite_on_extreme_inputs(self, small_model):
        _, model = small_model
        X = np.array([[1e300, -1e300], [0.0, 0.0], [-5.0, 5.0]])
        assert np.all(np.isfinite(predict_params(model, X)))

    def test_extreme_stage_output_is_clamped(self):
        stage = Stage((RegressionTree.constant(0.0), RegressionTree.constant(-1e12)), rho=1.0)
        model = BoostModel(BoostConfig(learning_rate=1.0), np.zeros(2), [stage])
        assert predict_params(model, [0.0])[1] == LOG_SCALE_MAX


class TestStaged:
    def test_zero_stage_entry_is_marginal(self):
        model = BoostModel(BoostConfig(), np.array([0.0, 0.0]))
        out = staged_nll(model, np.zeros((2, 1)), [0.0, 1.0])
        assert out.shape == (1,)
        assert out[0] == pytest.approx((0.91894 + 1.41894) / 2, abs=1e-5)

    def test_matches_truncated_reevaluation(self, small_model):
        ds, model = small_model
        val = make_synthetic("heteroscedastic", 200, seed=6)
        curve = staged_nll(model, val.features, val.targets)
        assert curve.shape == (model.n_stages + 1,)
        assert np.all(np.isfinite(curve))
        direct = np.array([mean_nll(truncate(model, m), val) for m in range(model.n_stages + 1)])
        assert np.max(np.abs(curve - direct)) < 1e-12
        assert int(np.argmin(curve)) == int(np.argmin(direct))

    def test_truncate(self, small_model):
        ds, model = small_model
        assert np.array_equal(predict_params(truncate(model, 0), ds.features), np.tile(model.theta0, (len(ds), 1)))
        assert np.array_equal(predict_params(truncate(model, model.n_stages), ds.features), predict_params(model, ds.features))
        for m, theta in enumerate(staged_params(model, ds.features)):
            if m % 15 == 0:
                assert np.array_equal(predict_params(truncate(model, m), ds.features), theta)
        with pytest.raises(ValueError):
            truncate(model, model.n_stages + 1)
        with pytest.raises(ValueError):
            truncate(model, -1)


class TestHomoscedastic:
    def test_recovers_noise_scale(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, 1000)
        ds = Dataset.from_arrays(x, x + rng.normal(0, 0.5, 1000))
        model = train_homoscedastic(ds, BoostConfig(n_stages=200, learning_rate=0.01))
        assert math.exp(model.theta0[1]) == pytest.approx(0.5, abs=0.05)
        for stage in model.stages:
            assert stage.trees[1].node_count == 1 and stage.trees[1].value[0] == 0.0
        scales = predict_params(model, rng.uniform(0, 1, (50, 1)))[:, 1]
        assert np.all(scales == model.theta0[1])

    def test_constant_targets_hit_floor(self):
        ds = Dataset.from_arrays(np.arange(10.0), np.full(10, -2.0))
        model = train_homoscedastic(ds, BoostConfig(n_stages=5))
        assert model.theta0[1] == LOG_SCALE_MIN

    def test_loses_to_full_model_on_heteroscedastic_data(self):
        ds = make_synthetic("heteroscedastic", 1000, seed=0)
        test = make_synthetic("heteroscedastic", 1000, seed=1)
        cfg = BoostConfig(n_stages=500, learning_rate=0.01)
        assert mean_nll(train_homoscedastic(ds, cfg), test) > mean_nll(train(ds, cfg), test)

    def test_requires_normal_logscore(self):
        ds = make_synthetic("linear", 30, seed=0)
        with pytest.raises(ValueError):
            train_homoscedastic(ds, BoostConfig(family=L))


class TestInvariants:
    @pytest.mark.parametrize("rule,family", [(LOG, N), (CRPS, N), (LOG, L)])
    def test_monotone_training_score(self, rule, family):
        ds = make_synthetic("heteroscedastic", 300, seed=8)
        totals = []
        train(
            ds,
            BoostConfig(n_stages=80, learning_rate=0.5, rule=rule, family=family),
            on_stage=lambda m, s: totals.append(s),
        )
        init = fit_marginal(family, rule, ds.targets)
        start = float(np.sum(score(rule, family, np.broadcast_to(init, (len(ds), 2)), ds.targets)))
        seq = [start] + totals
        assert all(b <= a for a, b in zip(seq, seq[1:]))

    def test_least_squares_boosting_recovery(self):
        rng = np.random.default_rng(42)
        X = rng.uniform(-2, 2, (200, 3))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + 0.3 * rng.normal(size=200)
        ds = Dataset.from_arrays(X, y)
        eta, M, tree_cfg = 0.1, 100, TreeConfig(max_depth=3)

        # reference loop: fit trees to residuals and add them
        mu0 = float(np.mean(y))
        mu_ref = np.full(200, mu0)
        ref_trees = []
        for _ in range(M):
            tree = fit_tree(X, y - mu_ref, tree_cfg)
            ref_trees.append(tree)
            mu_ref = mu_ref + eta * tree.predict(X)

        seen_targets = []
        from probboost import boosting

        original = boosting.fit_tree

        def spy(Xb, t, cfg, order=None):
            seen_targets.append(np.array(t))
            return original(Xb, t, cfg, order)

        cfg = BoostConfig(n_stages=M, learning_rate=eta, tree=tree_cfg, line_search="none")
        boosting.fit_tree = spy
        try:
            model = train(ds, cfg, theta0=(mu0, 0.0), trainable=(True, False))
        finally:
            boosting.fit_tree = original

        assert model.n_stages == M
        assert all(s.rho == 1.0 for s in model.stages)
        # first-stage targets are the negative residuals
        assert np.allclose(seen_targets[0], -(y - mu0), rtol=0, atol=1e-14)
        probe = rng.uniform(-2.5, 2.5, (300, 3))
        ref_probe = mu0 + eta * sum(t.predict(probe) for t in ref_trees)
        assert np.max(np.abs(predict_params(model, X)[:, 0] - mu_ref)) < 1e-10
        assert np.max(np.abs(predict_params(model, probe)[:, 0] - ref_probe)) < 1e-10
        assert np.all(predict_params(model, probe)[:, 1] == 0.0)

    def test_determinism(self):
        ds = make_synthetic("heteroscedastic", 400, seed=1)
        cfg = BoostConfig(n_stages=40, learning_rate=0.1, minibatch_frac=0.5, seed=77)
        a, b = train(ds, cfg), train(ds, cfg)
        assert np.array_equal(a.theta0, b.theta0)
        assert [s.rho for s in a.stages] == [s.rho for s in b.stages]
        for sa, sb in zip(a.stages, b.stages):
            for ta, tb in zip(sa.trees, sb.trees):
                for attr in ("feature", "threshold", "left", "right", "value"):
                    assert np.array_equal(getattr(ta, attr), getattr(tb, attr))
        assert np.array_equal(a.train_theta, b.train_theta)

    def test_seed_changes_minibatches(self):
        ds = make_synthetic("heteroscedastic", 400, seed=1)
        a = train(ds, BoostConfig(n_stages=10, learning_rate=0.1, minibatch_frac=0.5, seed=1))
        b = train(ds, BoostConfig(n_stages=10, learning_rate=0.1, minibatch_frac=0.5, seed=2))
        assert not np.array_equal(a.train_theta, b.train_theta)

    def test_natural_not_worse_than_ordinary(self):
        ds = make_synthetic("heteroscedastic", 2000, seed=0)
        val = make_synthetic("heteroscedastic", 1000, seed=1)
        cfg = BoostConfig(n_stages=500, learning_rate=0.01, seed=0)
        nat = mean_nll(train(ds, cfg), val)
        ordi = mean_nll(train(ds, BoostConfig(n_stages=500, learning_rate=0.01, seed=0, direction=Direction.ORDINARY)), val)
        assert nat <= ordi + 0.0
