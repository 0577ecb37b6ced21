"""Command-line interface: ``conceptdetect <command> ...``.

Exit codes: 0 success, 1 validation or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .labels import (
    Dataset,
    build_vocabulary,
    concept_frequency_histogram,
    cui_count_histogram,
    encode,
    label_cardinality,
    label_density,
)
from .losses import LossSpec
from .metrics import mean_f1
from .model import HeadConfig, init_model, load_checkpoint, predict_scores, save_checkpoint
from .pipeline import (
    CONCEPTS_FILE,
    load_dataset,
    load_inputs,
    read_concepts_file,
    records_from_scores,
    validate_submission,
    write_concepts_file,
    write_submission,
)
from .training import PlateauPolicy, TrainingConfig, history_to_csv, split_validation, train

log = logging.getLogger("conceptdetect")


class UsageError(Exception):
    pass


# -- config -------------------------------------------------------------------

# key -> (parser, default)
CONFIG_KEYS = {
    "loss": (str, "bce"),
    "epsilon": (float, 1e-7),
    "batch_size": (int, 32),
    "learning_rate": (float, 1e-5),
    "beta1": (float, 0.9),
    "beta2": (float, 0.999),
    "eps_opt": (float, 1e-8),
    "augmentation": (str, "none"),
    "lr_reduction": (str, "none"),
    "early_stopping_patience": (int, 5),
    "max_epochs": (int, 100),
    "threshold": (float, 0.5),
    "hidden_sizes": (str, "64"),
    "dropout": (float, 0.5),
}

CONFIG_TEMPLATE = """\
# conceptdetect training config (key = value)
loss = bce
epsilon = 1e-7
batch_size = 32
learning_rate = 1e-5
beta1 = 0.9
beta2 = 0.999
eps_opt = 1e-8
augmentation = none
lr_reduction = 0.2/5/f1
early_stopping_patience = 5
max_epochs = 100
threshold = 0.5
hidden_sizes = 64
dropout = 0.5
"""


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in CONFIG_KEYS:
            raise UsageError(f"{source}:{lineno}: unknown or malformed entry {line!r}")
        values[key] = value.strip()
    return values


def build_training_config(values: dict[str, str], seed: int):
    """Returns ``(TrainingConfig, hidden_sizes, dropout)`` from raw key=value strings."""
    v = {}
    for key, (conv, default) in CONFIG_KEYS.items():
        raw = values.get(key)
        try:
            v[key] = conv(raw) if raw is not None else default
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    hidden = tuple(int(h) for h in str(v["hidden_sizes"]).replace(" ", "").split(",") if h)
    try:
        cfg = TrainingConfig(
            early_stopping_patience=v["early_stopping_patience"],
            loss=LossSpec(v["loss"], v["epsilon"]),
            batch_size=v["batch_size"],
            learning_rate=v["learning_rate"],
            beta1=v["beta1"],
            beta2=v["beta2"],
            eps_opt=v["eps_opt"],
            augmentation=v["augmentation"],
            lr_reduction=PlateauPolicy.parse(v["lr_reduction"]),
            max_epochs=v["max_epochs"],
            threshold=v["threshold"],
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg, hidden, v["dropout"]


# -- commands -----------------------------------------------------------------

def _label_dataset(args) -> Dataset:
    concepts = Path(args.concepts) if args.concepts else Path(args.data) / CONCEPTS_FILE
    if not concepts.is_file():
        raise FileNotFoundError(f"concepts file not found: {concepts}")
    rows = read_concepts_file(concepts)
    if not rows:
        raise ValueError(f"{concepts}: empty concepts file")
    vocab = None
    if getattr(args, "vocab", None):
        vocab = build_vocabulary(read_concepts_file(args.vocab).values())
    return Dataset.from_label_sets(rows, vocab)


def cmd_stats(args) -> int:
    d = _label_dataset(args)
    lc, ld = label_cardinality(d), label_density(d)
    freq = concept_frequency_histogram(d, args.top_n)
    counts = cui_count_histogram(d, args.max_count)
    summary = ("metric,value\n"
               f"samples,{len(d)}\n"
               f"concepts,{len(d.vocabulary)}\n"
               f"label_cardinality,{lc!r}\n"
               f"label_density,{ld!r}\n")
    freq_csv = "concept,images\n" + "".join(f"{c},{n}\n" for c, n in freq)
    count_csv = "cui_count,images\n" + "".join(f"{c},{n}\n" for c, n in counts.items())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(summary)
        (out / "concept_frequency.csv").write_text(freq_csv)
        (out / "cui_counts.csv").write_text(count_csv)
    sys.stdout.write(summary)
    if not args.out:
        sys.stdout.write("\n" + freq_csv + "\n" + count_csv)
    return 0


def cmd_split(args) -> int:
    d = _label_dataset(args)
    val1, val2 = split_validation(d, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("val1.tsv", val1), ("val2.tsv", val2)):
        write_concepts_file(out / name, {s.sample_id: sorted(ls) for s, ls in zip(part.samples, part.label_sets())})
    print(f"val1: {len(val1)} samples -> {out / 'val1.tsv'}")
    print(f"val2: {len(val2)} samples -> {out / 'val2.tsv'}")
    return 0


def cmd_train(args) -> int:
    values = parse_config_text(Path(args.config).read_text(), args.config) if args.config else {}
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)
    cfg, hidden, dropout = build_training_config(values, args.seed)

    train_rows = read_concepts_file(args.train_concepts)
    val_rows = read_concepts_file(args.val_concepts)
    vocab = build_vocabulary(list(train_rows.values()) + list(val_rows.values()))
    train_set = load_dataset(args.data, vocab, args.train_concepts)
    val_set = load_dataset(args.val_data or args.data, vocab, args.val_concepts)

    input_shape = train_set.samples[0].features.shape
    input_dim = int(np.prod(input_shape))
    head = HeadConfig(hidden, len(vocab), dropout, args.seed)
    model = init_model(head, input_dim)
    log.info("training %s head on %d samples (k=%d, backend=%s)", hidden, len(train_set), len(vocab), BACKEND)
    t0 = time.perf_counter()
    best, history = train(model, train_set, val_set, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"threshold": cfg.threshold, "loss": cfg.loss.kind, "training": values, "seed": args.seed}
    save_checkpoint(out / "model.ckpt", best, vocab, input_shape, extra)
    (out / "history.csv").write_text(history_to_csv(history))
    if history:
        top = max(history, key=lambda r: (r.val_f1, -r.epoch))
        print(f"best epoch {top.epoch}: val_f1={top.val_f1:.6f} ({time.perf_counter() - t0:.1f}s)")
    print(f"wrote {out / 'model.ckpt'} and {out / 'history.csv'}")
    return 0


def cmd_predict(args) -> int:
    params, vocab, header = load_checkpoint(args.checkpoint)
    threshold = args.threshold if args.threshold is not None else header["extra"].get("threshold", 0.5)
    inputs = load_inputs(args.data)
    if not inputs:
        raise ValueError(f"no samples found under {args.data}")
    ids = [sid for sid, _, _ in inputs]
    scores = predict_scores(params, [f for _, f, _ in inputs])
    records = records_from_scores(ids, scores, vocab, threshold)
    write_submission(args.out, records)
    print(f"wrote {len(records)} records ({len(ids) - len(records)} samples without concepts) to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    truth = read_concepts_file(args.truth)
    pred = read_concepts_file(args.pred)
    extra = sorted(set(pred) - set(truth))
    if extra:
        raise ValueError(f"predictions for unknown samples: {', '.join(extra[:5])}")
    if not truth:
        raise ValueError(f"{args.truth}: empty concepts file")
    vocab = build_vocabulary(list(truth.values()) + list(pred.values()))
    ids = sorted(truth)
    score = mean_f1([encode(truth[i], vocab) for i in ids], [encode(pred.get(i, ()), vocab) for i in ids])
    print(repr(score))
    return 0


def cmd_validate(args) -> int:
    vocab = None
    if args.vocab:
        if str(args.vocab).endswith(".ckpt"):
            vocab = load_checkpoint(args.vocab)[1]
        else:
            vocab = build_vocabulary(read_concepts_file(args.vocab).values())
    problems = validate_submission(args.submission, vocab)
    for p in problems:
        print(p)
    print("OK" if not problems else f"{len(problems)} violation(s)")
    return 0 if not problems else 1


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    t0 = time.perf_counter()
    worst = run_suite(args.seed, args.instances)
    ok = True
    for kind, err in worst.items():
        flag = "ok" if err < args.tolerance else "FAIL"
        ok &= err < args.tolerance
        print(f"{kind:>18}  max_rel_err={err:.3e}  {flag}")
    print(f"{args.instances} instances per loss in {time.perf_counter() - t0:.2f}s (backend={BACKEND})")
    return 0 if ok else 1


def cmd_config_template(args) -> int:
    sys.stdout.write(CONFIG_TEMPLATE)
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conceptdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def labels_source(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--data", help="dataset directory holding concepts.tsv")
        src.add_argument("--concepts", help="concepts file")

    p = sub.add_parser("stats", help="label cardinality, density and histograms")
    labels_source(p)
    p.add_argument("--vocab", help="concepts file whose union defines the label space")
    p.add_argument("--top-n", type=int, default=30)
    p.add_argument("--max-count", type=int, default=50)
    p.add_argument("--out", help="directory for the CSV reports")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="seeded split into val1/val2 manifests")
    labels_source(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a classification head")
    p.add_argument("--data", required=True, help="directory with training samples")
    p.add_argument("--val-data", help="directory with validation samples (default: --data)")
    p.add_argument("--train-concepts", required=True)
    p.add_argument("--val-concepts", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    for key, (conv, _) in CONFIG_KEYS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=conv)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write a submission file from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="sample-averaged F1 between two concepts files")
    p.add_argument("truth")
    p.add_argument("pred")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate-submission", help="check a submission file")
    p.add_argument("submission")
    p.add_argument("--vocab", help="checkpoint (.ckpt) or concepts file defining known concepts")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("config-template", help="print a training config template")
    p.set_defaults(func=cmd_config_template)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"conceptdetect: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"conceptdetect: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"conceptdetect: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
