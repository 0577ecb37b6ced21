"""Acceptance criteria. Each test records one PASS/FAIL line, printed in the
pytest terminal summary (or directly when run as a script)."""

import math
import time

import numpy as np
import pytest

from conceptdetect.gradcheck import network_gradient_error, random_instance
from conceptdetect.labels import (
    Dataset,
    LabeledSample,
    LabelVocabulary,
    concept_frequency_histogram,
    cui_count_histogram,
    label_cardinality,
    label_density,
)
from conceptdetect.losses import (
    LOSS_KINDS,
    LossSpec,
    bce,
    one_minus_soft_f1,
    product_loss,
    soft_f1_components,
    sum_loss,
)
from conceptdetect.metrics import mean_f1, sample_f1
from conceptdetect.model import HeadConfig, init_model, predict_scores
from conceptdetect.pipeline import (
    SubmissionRecord,
    read_submission,
    records_from_scores,
    validate_submission,
    write_submission,
)
from conceptdetect.synthetic import make_separable
from conceptdetect.training import (
    EpochRecord,
    PlateauPolicy,
    TrainingConfig,
    augment_hflip,
    evaluate_model,
    history_to_csv,
    reduce_lr_on_plateau,
    split_validation,
    train,
)

RESULTS = []


def report(name, ok, detail):
    RESULTS.append((name, ok, detail))
    assert ok, f"{name}: {detail}"


# 1 -------------------------------------------------------------------------

def test_c1_gradient_fidelity():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = {}
    for kind in LOSS_KINDS:
        worst[kind] = max(network_gradient_error(kind, *random_instance(rng, input_dim=3, hidden=(2,), k=4, batch=3))
                          for _ in range(100))
    elapsed = time.perf_counter() - t0
    ok = all(e < 1e-4 for e in worst.values()) and elapsed < 10.0
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f"; {elapsed:.2f}s (< 10s)"
    report("C1 gradient fidelity (rel err < 1e-4, h=1e-6)", ok, detail)


# 2 -------------------------------------------------------------------------

def test_c2_soft_hard_consistency():
    rng = np.random.default_rng(7)
    k = 32
    y = (rng.random((1000, k)) < rng.uniform(0.0, 0.3, size=(1000, 1))).astype(np.float64)
    p = (rng.random((1000, k)) < rng.uniform(0.0, 0.3, size=(1000, 1))).astype(np.float64)
    # make sure every degenerate case is present
    y[0], p[0] = 0, 0
    y[1], p[1] = 0, 0
    p[1, 3] = 1
    y[2], p[2] = 0, 0
    y[2, 5] = 1
    *_, soft = soft_f1_components(y, p)
    hard = np.array([sample_f1(a, b).f1 for a, b in zip(y, p)])
    both_empty = ~y.any(axis=1) & ~p.any(axis=1)
    one_empty = y.any(axis=1) ^ p.any(axis=1)
    regular = ~both_empty
    gap = np.abs((1 - soft[regular]) - (1 - hard[regular])).max()
    ok = (gap < 1e-5
          and np.all(hard[both_empty] == 1.0) and np.all(soft[both_empty] == 0.0)
          and np.all(hard[one_empty] == 0.0) and np.all(soft[one_empty] == 0.0))
    detail = (f"max gap {gap:.1e} over {regular.sum()} rows; both-empty rows {both_empty.sum()} "
              f"(hard=1, soft=0); one-empty rows {one_empty.sum()} (both 0)")
    report("C2 soft/hard F1 consistency (< 1e-5)", ok, detail)


# 3 -------------------------------------------------------------------------

def _set_f1(t, p):
    if not t and not p:
        return 1.0
    inter = len(t & p)
    if not inter:
        return 0.0
    prec, rec = inter / len(p), inter / len(t)
    return 2 * prec * rec / (prec + rec)


def test_c3_metric_oracle():
    rng = np.random.default_rng(11)
    truths = (rng.random((200, 40)) < 0.15).astype(np.uint8)
    preds = (rng.random((200, 40)) < 0.15).astype(np.uint8)
    oracle = sum(_set_f1(set(np.flatnonzero(t)), set(np.flatnonzero(p))) for t, p in zip(truths, preds)) / 200
    got = mean_f1(list(truths), list(preds))
    diff = abs(got - oracle)
    report("C3 mean_f1 vs set oracle (< 1e-12)", diff < 1e-12, f"mean_f1={got:.15f} diff={diff:.1e}")


# 4 -------------------------------------------------------------------------

def test_c4_hand_valued_losses():
    y, p = [[1, 0, 0]], [[0.5, 0.5, 0.0]]
    got = {
        "sF1-loss": one_minus_soft_f1(y, p).value,
        "bce": bce(y, p).value,
        "product": product_loss(y, p).value,
        "sum": sum_loss(y, p).value,
    }
    want = {"sF1-loss": 0.5, "bce": -math.log(0.5), "product": 0.34657, "sum": 1.19315}
    bad = {k: got[k] for k in want if abs(got[k] - want[k]) >= 1e-4}
    detail = ", ".join(f"{k}={got[k]:.5f} (want {want[k]:.5f})" for k in want)
    report("C4 hand-valued losses at y=[1,0,0], p=[.5,.5,0] (1e-4)", not bad, detail)


# 5 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def separable_task():
    d = make_separable(n_samples=500, n_features=32, n_labels=16, mean_labels=3.0, seed=0)
    rest, held = split_validation(d, seed=1)
    # 250 train; the other 250 split into 125 validation (early stopping) and 125 held-out test
    val, test = split_validation(held, seed=2)
    return rest, val, test


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["bce", "sum", "product"])
def test_c5_synthetic_convergence(separable_task, kind):
    tr, val, test = separable_task
    cfg = TrainingConfig(early_stopping_patience=20, loss=LossSpec(kind), batch_size=32, learning_rate=1e-2,
                         max_epochs=200, seed=3)
    model = init_model(HeadConfig((32,), 16, 0.0, seed=4), 32)
    t0 = time.perf_counter()
    best, hist = train(model, tr, val, cfg)
    elapsed = time.perf_counter() - t0
    _, f1 = evaluate_model(best, test, cfg.loss, cfg.threshold)
    ok = f1 >= 0.95 and elapsed < 60.0 and len(hist) <= 200
    report(f"C5 synthetic convergence [{kind}] (held-out F1 >= 0.95, < 60s)", ok,
           f"held-out F1={f1:.4f} after {len(hist)} epochs in {elapsed:.2f}s")


# 6 -------------------------------------------------------------------------

def test_c6_statistics():
    d = Dataset.from_label_sets({"s1": {"C1", "C2"}, "s2": {"C1", "C2", "C3", "C4"},
                                 "s3": {"C3", "C4", "C5", "C6", "C7", "C8"}})
    lc, ld = label_cardinality(d), label_density(d)
    rng = np.random.default_rng(5)
    pool = [f"C{i:02d}" for i in range(20)]
    sets = {f"s{i}": set(rng.choice(pool, size=rng.integers(1, 9), replace=False)) for i in range(60)}
    r = Dataset.from_label_sets(sets)
    freq = {}
    sizes = {}
    for s in sets.values():
        sizes[len(s)] = sizes.get(len(s), 0) + 1
        for c in s:
            freq[c] = freq.get(c, 0) + 1
    freq_ok = concept_frequency_histogram(r, 30) == sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:30]
    count_ok = cui_count_histogram(r, 5) == {c: n for c, n in sorted(sizes.items()) if c <= 5}

    vocab = LabelVocabulary(["C1", "C2"])
    imgs = Dataset(vocab, tuple(LabeledSample(f"i{i}", rng.random((4, 5)), np.array([1, i % 2], dtype=np.uint8))
                                for i in range(20)))
    aug = augment_hflip(imgs)
    back = augment_hflip(Dataset(vocab, aug.samples[1::2])).samples[1::2]
    involution = all(np.array_equal(a.features, b.features) for a, b in zip(imgs.samples, back))
    ok = lc == 4.0 and ld == 0.5 and freq_ok and count_ok and len(aug) == 2 * len(imgs) and involution
    report("C6 statistics, histograms, hflip", ok,
           f"LC={lc} LD={ld} freq_hist={freq_ok} count_hist={count_ok} size {len(imgs)}->{len(aug)} "
           f"involution={involution}")


# 7 -------------------------------------------------------------------------

def _scripted(values, monitor):
    return [EpochRecord(i, 0.0, v if monitor == "loss" else 0.0, v if monitor == "f1" else 0.0, 1e-5)
            for i, v in enumerate(values)]


def test_c7_protocol_mechanics():
    f1_pol = PlateauPolicy.parse("0.2/5/f1")
    loss_pol = PlateauPolicy.parse("0.2/3/loss")
    f1_series = [0.30, 0.32, 0.33, 0.33, 0.33, 0.33, 0.33, 0.33]   # best at 2; stagnant 3..7
    loss_series = [0.9, 0.7, 0.7, 0.71, 0.7, 0.7]                  # best at 1; stagnant 2..4
    f1_lrs = [reduce_lr_on_plateau(_scripted(f1_series[:n], "f1"), f1_pol) for n in range(1, 9)]
    loss_lrs = [reduce_lr_on_plateau(_scripted(loss_series[:n], "loss"), loss_pol) for n in range(1, 7)]
    f1_ok = f1_lrs == [1e-5] * 7 + [1e-5 * 0.2]
    loss_ok = loss_lrs == [1e-5] * 4 + [1e-5 * 0.2] * 2

    d = make_separable(n_samples=160, n_features=10, n_labels=6, mean_labels=2.0, seed=9)
    tr, va = split_validation(d, 0)
    cfg = TrainingConfig(early_stopping_patience=4, loss=LossSpec("sum"), batch_size=16, learning_rate=1e-2,
                         lr_reduction=f1_pol, max_epochs=40, seed=8)
    runs = [train(init_model(HeadConfig((8,), 6, 0.3, seed=2), 10), tr, va, cfg) for _ in range(2)]
    csvs = [history_to_csv(h) for _, h in runs]
    identical = csvs[0] == csvs[1] and runs[0][0].equals(runs[1][0])
    best, hist = runs[0]
    top = max(range(len(hist)), key=lambda i: (hist[i].val_f1, -i))
    argmax_ok = evaluate_model(best, va, cfg.loss, cfg.threshold)[1] == hist[top].val_f1
    stopped_ok = len(hist) == cfg.max_epochs or len(hist) - 1 - top == cfg.early_stopping_patience
    ok = f1_ok and loss_ok and identical and argmax_ok and stopped_ok
    report("C7 plateau / early stopping / determinism", ok,
           f"0.2/5/f1={f1_ok} 0.2/3/loss={loss_ok} argmax-epoch={top} ({argmax_ok}) "
           f"stopped after {len(hist)} epochs ({stopped_ok}) identical-csv={identical}")


# 8 -------------------------------------------------------------------------

def test_c8_submission_hygiene(tmp_path):
    (tmp_path / "over.tsv").write_text("a\t" + ";".join(f"C{i}" for i in range(101)) + "\n")
    (tmp_path / "dup.tsv").write_text("a\tC1;C2;C1\n")
    (tmp_path / "ids.tsv").write_text("a\tC1\na\tC2\n")
    rejects = (any("concept limit exceeded" in v for v in validate_submission(tmp_path / "over.tsv"))
               and any("repeated concept" in v for v in validate_submission(tmp_path / "dup.tsv"))
               and any("repeated sample_id" in v for v in validate_submission(tmp_path / "ids.tsv")))

    rng = np.random.default_rng(4)
    k = 240
    vocab = LabelVocabulary([f"C{i:04d}" for i in range(k)])
    predicts_ok = True
    for trial in range(20):
        model = init_model(HeadConfig((6,), k, seed=trial), 5)
        model.biases[-1] = rng.normal(scale=3.0, size=k)
        ids = [f"img{i:03d}" for i in range(12)]
        scores = predict_scores(model, rng.normal(size=(12, 5)))
        path = tmp_path / f"pred{trial}.tsv"
        write_submission(path, records_from_scores(ids, scores, vocab, float(rng.uniform(0.05, 0.95))))
        predicts_ok &= validate_submission(path, vocab) == []

    round_trip = True
    for trial in range(50):
        recs = [SubmissionRecord(f"s{i:03d}", tuple(rng.permutation(vocab.concepts)[:rng.integers(1, 101)]))
                for i in rng.choice(500, size=rng.integers(1, 10), replace=False)]
        path = tmp_path / f"rt{trial}.tsv"
        write_submission(path, recs)
        round_trip &= read_submission(path) == sorted(recs, key=lambda r: r.sample_id)
    ok = rejects and predicts_ok and round_trip
    report("C8 submission hygiene", ok, f"rejects={rejects} predict-validates={predicts_ok} round-trip={round_trip}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
