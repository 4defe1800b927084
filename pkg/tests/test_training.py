import numpy as np
import pytest

import oracles
from pcc import models, training
from pcc.contour_data import split_kfold
from pcc.errors import DataError

# ---------------------------------------------------------------------------
# summaries


def test_summarize_1234():
    s = training.summarize([1, 2, 3, 4])
    assert (s.minimum, s.maximum) == (1.0, 4.0)
    assert (s.q1, s.median, s.q3) == (1.75, 2.5, 3.25)


def test_summarize_matches_order_statistic_oracle():
    rng = np.random.default_rng(41)
    for _ in range(30):
        vals = rng.uniform(size=int(rng.integers(1, 20))).tolist()
        s = training.summarize(vals)
        assert s.q1 == pytest.approx(oracles.quantile_ref(vals, 0.25), abs=1e-12)
        assert s.median == pytest.approx(oracles.quantile_ref(vals, 0.5), abs=1e-12)
        assert s.q3 == pytest.approx(oracles.quantile_ref(vals, 0.75), abs=1e-12)


def test_summarize_single_value():
    s = training.summarize([0.8])
    assert s.minimum == s.q1 == s.median == s.q3 == s.maximum == 0.8


def test_summarize_empty_rejected():
    with pytest.raises(ValueError):
        training.summarize([])


def test_select_best_epoch():
    assert training.select_best_epoch([0.5, 0.3, 0.4]) == 2
    assert training.select_best_epoch([0.5, 0.3, 0.3]) == 2  # earliest tie
    assert training.select_best_epoch([0.1]) == 1


# ---------------------------------------------------------------------------
# config


def test_train_config_defaults():
    cfg = training.TrainConfig()
    assert cfg.epochs == 18
    assert cfg.batch_size == 32
    assert cfg.optimizer == "adam"
    assert cfg.learning_rate == 1e-3
    assert cfg.shuffle is True


def test_train_config_validation():
    with pytest.raises(ValueError):
        training.TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        training.TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        training.TrainConfig(learning_rate=0.0)


# ---------------------------------------------------------------------------
# the protocol


def _quick_cfg(**kw):
    base = dict(epochs=3, batch_size=16, seed=5)
    base.update(kw)
    return training.TrainConfig(**base)


def test_history_has_exactly_epochs_records(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(1))
    _, history = training.train(m, tiny_corpus, _quick_cfg(epochs=4))
    assert len(history) == 4
    assert [r.epoch for r in history] == [1, 2, 3, 4]


def test_kept_snapshot_has_min_loss(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(2))
    best, history = training.train(m, tiny_corpus, _quick_cfg())
    losses = [r.mean_loss for r in history]
    assert best.provenance["selected_epoch"] == int(np.argmin(losses)) + 1
    assert min(losses) <= max(losses)


def test_train_does_not_mutate_input_model(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(3))
    before = [p.copy() for p in models.param_list(m)]
    training.train(m, tiny_corpus, _quick_cfg(epochs=1))
    for b, p in zip(before, models.param_list(m)):
        assert np.array_equal(b, p)


def test_train_deterministic(tiny_corpus):
    cfg = _quick_cfg()
    m1, h1 = training.train(models.build_convnet(rng=np.random.default_rng(4)),
                            tiny_corpus, cfg)
    m2, h2 = training.train(models.build_convnet(rng=np.random.default_rng(4)),
                            tiny_corpus, cfg)
    assert h1 == h2
    assert models.model_bytes(m1) == models.model_bytes(m2)


def test_train_single_class_rejected(tiny_corpus):
    only_stmt = tiny_corpus.subset(np.nonzero(tiny_corpus.labels() == 0)[0])
    m = models.build_convnet(rng=np.random.default_rng(5))
    with pytest.raises(DataError, match="single class"):
        training.train(m, only_stmt, _quick_cfg())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_reports_nonfinite_location(tiny_corpus):
    from pcc.errors import NumericError
    m = models.build_convnet(rng=np.random.default_rng(6))
    blow_up = training.TrainConfig(epochs=2, batch_size=16, optimizer="sgd",
                                   learning_rate=1e18, seed=5)
    with pytest.raises(NumericError, match="epoch"):
        training.train(m, tiny_corpus, blow_up)


def test_training_improves_loss(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(7))
    _, history = training.train(m, tiny_corpus, _quick_cfg(epochs=6))
    assert history[-1].mean_loss < history[0].mean_loss


# ---------------------------------------------------------------------------
# evaluation


def test_evaluate_confusion_layout(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(8))
    # zero head forces logits to zero: every argmax is class 0 (statement)
    m.weights.head.weights[:] = 0.0
    result = training.evaluate(m, tiny_corpus)
    labels = tiny_corpus.labels()
    n0 = int((labels == 0).sum())
    n1 = int((labels == 1).sum())
    assert result.confusion.tolist() == [[n0, 0], [n1, 0]]
    assert result.accuracy == pytest.approx(n0 / (n0 + n1))
    assert result.recall(0) == 1.0
    assert result.recall(1) == 0.0


def test_evaluate_batching_invariant(tiny_corpus):
    m = models.build_convnet(rng=np.random.default_rng(9))
    full = training.evaluate(m, tiny_corpus, batch_size=1000)
    small = training.evaluate(m, tiny_corpus, batch_size=7)
    assert full.accuracy == small.accuracy
    assert np.array_equal(full.confusion, small.confusion)


# ---------------------------------------------------------------------------
# cross-validation


def test_run_fold_report_shape(tiny_corpus):
    split = split_kfold(len(tiny_corpus), 5, 3)
    rep = training.run_fold("convnet", models.ConvNetConfig(), tiny_corpus,
                            split, 2, _quick_cfg(epochs=2))
    assert rep.fold == 2
    assert rep.test_size == split.folds[2].size
    assert 0.0 <= rep.accuracy <= 1.0
    assert 1 <= rep.selected_epoch <= 2
    assert rep.confusion.sum() == rep.test_size


def test_cross_validate_reports(tiny_corpus):
    summary, reports = training.cross_validate(
        "convnet", models.ConvNetConfig(), tiny_corpus, k=4,
        cfg=_quick_cfg(epochs=2))
    assert len(reports) == 4
    assert [r.fold for r in reports] == [0, 1, 2, 3]
    assert sum(r.test_size for r in reports) == len(tiny_corpus)
    assert summary.minimum <= summary.median <= summary.maximum
    assert summary.accuracies == tuple(r.accuracy for r in reports)


def test_cross_validate_parallel_identical(tiny_corpus):
    cfg = _quick_cfg(epochs=2)
    s1, r1 = training.cross_validate("convnet", models.ConvNetConfig(),
                                     tiny_corpus, k=4, cfg=cfg, jobs=1)
    s2, r2 = training.cross_validate("convnet", models.ConvNetConfig(),
                                     tiny_corpus, k=4, cfg=cfg, jobs=3)
    assert s1 == s2
    for a, b in zip(r1, r2):
        assert a.fold == b.fold
        assert a.accuracy == b.accuracy
        assert np.array_equal(a.confusion, b.confusion)


def test_cross_validate_lstm_arch(tiny_corpus):
    summary, reports = training.cross_validate(
        "lstm", models.LstmConfig(hidden_size=8, input_downsample=32),
        tiny_corpus, k=3, cfg=_quick_cfg(epochs=1))
    assert len(reports) == 3


def test_unknown_arch_rejected(tiny_corpus):
    with pytest.raises(ValueError, match="architecture"):
        training.cross_validate("mlp", None, tiny_corpus, k=3,
                                cfg=_quick_cfg(epochs=1))


def test_holdout_split_default_sizes():
    train_idx, test_idx = training.holdout_split(4826, 42)
    assert train_idx.size == 4343
    assert test_idx.size == 483
    merged = np.sort(np.concatenate([train_idx, test_idx]))
    assert np.array_equal(merged, np.arange(4826))
