from decimal import Decimal

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from transopt.errors import ConfigError, ShapeError, StratificationError
from transopt.model import ModelConfig
from transopt.training import (
    AdamState,
    EarlyStopping,
    TrainConfig,
    accuracy,
    adam_step,
    cross_validate,
    stack_dataset,
    stopping_epoch,
    stratified_kfold,
    train_fold,
)

SYNTHETIC_LOSSES = [1.0, 0.9, 0.899, 0.898, 0.897, 0.8969, 0.8968]


def reference_stopping(losses, patience, min_delta):
    """Independent oracle in exact decimal arithmetic.

    Returns (stop epoch or None, epoch of the best value seen so far).
    """
    best, best_epoch, stale = None, 0, 0
    delta = Decimal(str(min_delta))
    for epoch, raw in enumerate(losses, start=1):
        loss = Decimal(str(raw))
        if best is None or loss < best - delta:
            best, best_epoch, stale = loss, epoch, 0
        else:
            stale += 1
        if stale >= patience:
            return epoch, best_epoch
    return None, best_epoch


def toy_dataset(n_per_class, seed, s=10, d=2):
    """Two classes told apart by the y column alone: all zeros vs 0/1 alternating."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for label in (0, 1):
        col = np.zeros(s) if label == 0 else (np.arange(s) % 2).astype(float)
        for _ in range(n_per_class):
            X.append(np.column_stack([rng.uniform(-5, 5, (s, d)), col]))
            y.append(label)
    return np.stack(X), np.array(y)


def small_dataset(n_per_class=3, s=6, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (24 * n_per_class, s, d + 1))
    y = np.repeat(np.arange(24), n_per_class)
    return X, y


class TestStratifiedFolds:
    def test_equal_fold_composition(self):
        labels = np.repeat(np.arange(1, 25), 50)
        folds = stratified_kfold(labels, 10, seed=3)
        for k in range(10):
            members = labels[folds == k]
            assert len(members) == 120
            assert np.all(np.bincount(members, minlength=25)[1:] == 5)

    def test_full_scale_fold_sizes(self):
        labels = np.repeat(np.arange(1, 25), 999)
        folds = stratified_kfold(labels, 10, seed=0)
        for c in range(1, 25):
            sizes = np.bincount(folds[labels == c], minlength=10)
            assert set(sizes.tolist()) <= {99, 100}

    def test_two_folds_two_classes(self):
        folds = stratified_kfold(np.array(["A", "A", "B", "B"]), 2, seed=1)
        for k in range(2):
            assert sorted(np.array(["A", "A", "B", "B"])[folds == k]) == ["A", "B"]

    def test_seeded(self):
        labels = np.repeat(np.arange(24), 20)
        assert np.array_equal(stratified_kfold(labels, 10, 4), stratified_kfold(labels, 10, 4))
        assert not np.array_equal(stratified_kfold(labels, 10, 4), stratified_kfold(labels, 10, 5))

    def test_too_few_members(self):
        with pytest.raises(StratificationError):
            stratified_kfold(np.array([0, 0, 0, 1]), 2, seed=0)

    @given(
        counts=st.lists(st.integers(min_value=3, max_value=40), min_size=1, max_size=6),
        k=st.integers(min_value=2, max_value=3),
        seed=st.integers(min_value=0, max_value=2**32),
    )
    @settings(max_examples=60, deadline=None)
    def test_balanced_and_covering(self, counts, k, seed):
        labels = np.repeat(np.arange(len(counts)), counts)
        folds = stratified_kfold(labels, k, seed)
        assert folds.shape == labels.shape
        assert set(folds.tolist()) <= set(range(k))
        for c in range(len(counts)):
            sizes = np.bincount(folds[labels == c], minlength=k)
            assert sizes.max() - sizes.min() <= 1


class TestAdam:
    def test_first_step_golden_value(self):
        # m_hat = v_hat = 1 at t=1, so the step is lr / (1 + eps)
        expected = 0.001 / (1.0 + 1e-8)
        assert abs(expected - 0.000999999990) < 1e-12
        p = [np.zeros((3, 2)), np.zeros(4)]
        adam_step(p, [np.ones((3, 2)), np.ones(4)], AdamState.zeros_like(p), t=1, lr=0.001)
        for arr in p:
            assert np.max(np.abs(-arr - 0.000999999990)) < 1e-12

    def test_zero_gradient_leaves_parameters(self):
        p = [np.arange(6.0).reshape(2, 3)]
        before = p[0].copy()
        state = AdamState.zeros_like(p)
        for t in range(1, 4):
            adam_step(p, [np.zeros((2, 3))], state, t)
        assert np.array_equal(p[0], before)

    def test_matches_textbook_recurrence(self):
        rng = np.random.default_rng(0)
        grads = [rng.normal(size=5) for _ in range(6)]
        p = [np.ones(5)]
        state = AdamState.zeros_like(p)
        ref, m, v = np.ones(5), np.zeros(5), np.zeros(5)
        for t, g in enumerate(grads, start=1):
            adam_step(p, [g], state, t, lr=0.01)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(p[0], ref, rtol=0, atol=1e-15)
        assert state.t == 6

    def test_deterministic(self):
        def run():
            p = [np.ones(3)]
            state = AdamState.zeros_like(p)
            for t in range(1, 5):
                adam_step(p, [np.array([0.5, -1.0, 2.0]) * t], state, t)
            return p[0]

        assert np.array_equal(run(), run())

    def test_rejects_bad_input(self):
        p = [np.zeros(2)]
        with pytest.raises(ValueError):
            adam_step(p, [np.zeros(2)], AdamState.zeros_like(p), t=0)
        with pytest.raises(ShapeError):
            adam_step(p, [np.zeros(3)], AdamState.zeros_like(p), t=1)


class TestEarlyStopping:
    def test_synthetic_sequence(self):
        expected_stop, expected_best = reference_stopping(SYNTHETIC_LOSSES, 5, 0.001)
        rule = EarlyStopping(5, 0.001)
        fired = [rule.update(v) for v in SYNTHETIC_LOSSES]
        assert stopping_epoch(SYNTHETIC_LOSSES, 5, 0.001) == expected_stop
        assert rule.best_epoch == expected_best
        assert any(fired) == (expected_stop is not None)

    def test_stops_five_epochs_after_plateau(self):
        losses = [1.0, 0.9, 0.8995, 0.8992, 0.8991, 0.89905, 0.8999]
        assert reference_stopping(losses, 5, 0.001) == (7, 2)
        rule = EarlyStopping(5, 0.001)
        fired = [rule.update(v) for v in losses]
        assert fired == [False] * 6 + [True]
        assert rule.best_epoch == 2

    def test_monotone_losses_run_to_cap(self):
        losses = [1.0 - 0.004 * i for i in range(200)]
        assert stopping_epoch(losses, 5, 0.001) is None

    @given(
        st.lists(st.floats(min_value=0.0, max_value=3.0), min_size=1, max_size=40),
        st.integers(min_value=1, max_value=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_agrees_with_oracle(self, losses, patience):
        # exact ties (a drop of exactly min_delta) depend on float rounding; skip them
        gaps = np.subtract.outer(losses, losses)
        assume(np.all(np.abs(gaps - 0.001) > 1e-9))
        assert stopping_epoch(losses, patience, 0.001) == reference_stopping(losses, patience, 0.001)[0]


class TestAccuracy:
    def test_examples(self):
        logits = np.array([[2.0, 1.0], [0.0, 3.0], [1.0, 1.0]])
        assert accuracy(logits, [0, 1, 0]) == 1.0
        assert accuracy(logits, [1, 1, 1]) == pytest.approx(1 / 3)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            accuracy(np.zeros((0, 24)), [])


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"lr": 0.0}, {"patience": 0}, {"folds": 1}, {"val_fraction": 0.5}, {"val_fraction": 0.0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.lr, cfg.max_epochs, cfg.patience, cfg.min_delta, cfg.folds) == (0.001, 200, 5, 0.001, 10)


class TestTrainFold:
    def test_separable_toy_reaches_full_accuracy(self):
        X, y = toy_dataset(400, seed=0)
        # a one-feature linear probe (std of the y column) separates the classes
        probe = X[:, :, -1].std(axis=1)
        assert probe[y == 0].max() < probe[y == 1].min()
        cfg = TrainConfig(folds=2, max_epochs=5)
        report = cross_validate(ModelConfig(d=2), (X, y), cfg)
        for fold in report.folds:
            assert fold.epochs_run <= 5
            assert fold.test_accuracy == 1.0

    def test_fold_result_contract(self):
        X, y = small_dataset()
        folds = stratified_kfold(y, 3, seed=0)
        cfg = TrainConfig(folds=3, max_epochs=4, val_fraction=0.3)
        result = train_fold(ModelConfig(d=2, e=4, head_hidden=8), (X, y), folds, 1, cfg)
        assert result.epochs_run == len(result.val_loss_curve) == len(result.train_loss_curve) <= 4
        assert result.best_val_loss == min(result.val_loss_curve)
        assert result.val_loss_curve[result.best_epoch - 1] == result.best_val_loss
        assert sorted(result.test_indices) == np.flatnonzero(folds == 1).tolist()
        assert all(1 <= p <= 24 for p in result.test_predictions)
        assert 0.0 <= result.test_accuracy <= 1.0

    def test_accepts_design_label_pairs(self):
        X, y = small_dataset(n_per_class=2)
        pairs = [(x, label + 1) for x, label in zip(X, y)]
        Xs, ys = stack_dataset(pairs)
        assert np.array_equal(Xs, X) and np.array_equal(ys, y)


@pytest.fixture(scope="module")
def reports():
    X, y = small_dataset()
    cfg = TrainConfig(folds=3, max_epochs=3, val_fraction=0.3, seed=7)
    model_cfg = ModelConfig(d=2, e=4, head_hidden=8)
    return (X, y), cross_validate(model_cfg, (X, y), cfg), cross_validate(model_cfg, (X, y), cfg)


class TestCrossValidate:
    def test_aggregates(self, reports):
        (_, y), report, _ = reports
        accs = [f.test_accuracy for f in report.folds]
        assert [f.fold_index for f in report.folds] == [0, 1, 2]
        assert abs(report.mean_accuracy - np.mean(accs)) < 1e-15
        assert abs(report.std_accuracy - np.std(accs)) < 1e-15
        cm = np.array(report.confusion_matrix)
        assert cm.shape == (24, 24)
        assert np.array_equal(cm.sum(axis=1), np.bincount(y, minlength=24))
        correct = sum(round(f.test_accuracy * len(f.test_indices)) for f in report.folds)
        assert np.trace(cm) == correct

    def test_test_folds_partition_dataset(self, reports):
        (_, y), report, _ = reports
        seen = sorted(i for f in report.folds for i in f.test_indices)
        assert seen == list(range(len(y)))

    def test_seeded_determinism(self, reports):
        _, a, b = reports
        for fa, fb in zip(a.folds, b.folds):
            assert fa.train_loss_curve == fb.train_loss_curve
            assert fa.val_loss_curve == fb.val_loss_curve
            assert fa.test_predictions == fb.test_predictions

    def test_report_round_trip(self, reports):
        _, report, _ = reports
        assert type(report).from_dict(report.to_dict()) == report

    def test_fold_test_sizes(self):
        X, y = small_dataset(n_per_class=10, s=3)
        report = cross_validate(
            ModelConfig(d=2, e=4, head_hidden=8), (X, y), TrainConfig(folds=10, max_epochs=1, val_fraction=0.2)
        )
        assert len(report.folds) == 10
        assert all(len(f.test_indices) == 24 for f in report.folds)
