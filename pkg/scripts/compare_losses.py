"""Train the same head with each loss on a sparse synthetic task and report
held-out F1 per epoch budget.

    python scripts/compare_losses.py --seed 0 [--labels 64] [--mean-labels 3]

Sparse label spaces make plain bce settle on predicting almost nothing, while
the soft-F1 terms push towards recall. Results vary with the seed; nothing
here is asserted.
"""

import argparse
import time

from conceptdetect.losses import LOSS_KINDS, LossSpec
from conceptdetect.model import HeadConfig, init_model
from conceptdetect.synthetic import make_separable
from conceptdetect.training import PlateauPolicy, TrainingConfig, evaluate_model, split_validation, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--samples", type=int, default=1200)
    ap.add_argument("--labels", type=int, default=64)
    ap.add_argument("--features", type=int, default=96)
    ap.add_argument("--mean-labels", type=float, default=3.0)
    ap.add_argument("--margin", type=float, default=0.2)
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--patience", type=int, default=25)
    args = ap.parse_args()

    d = make_separable(args.samples, args.features, args.labels, args.mean_labels, args.margin, seed=args.seed)
    train_set, held = split_validation(d, args.seed)
    val, test = split_validation(held, args.seed + 1)
    print(f"{len(train_set)} train / {len(val)} val / {len(test)} test, k={args.labels}")
    print(f"{'loss':<20}{'best epoch':>11}{'val F1':>9}{'test F1':>9}{'time':>8}")
    for kind in LOSS_KINDS:
        cfg = TrainingConfig(early_stopping_patience=args.patience, loss=LossSpec(kind), batch_size=48,
                             learning_rate=args.lr, lr_reduction=PlateauPolicy(0.2, 5, "f1"),
                             max_epochs=args.epochs, seed=args.seed)
        model = init_model(HeadConfig((128, 128), args.labels, 0.5, seed=args.seed), args.features)
        t0 = time.perf_counter()
        best, hist = train(model, train_set, val, cfg)
        top = max(hist, key=lambda r: (r.val_f1, -r.epoch))
        _, f1 = evaluate_model(best, test, cfg.loss, cfg.threshold)
        print(f"{kind:<20}{top.epoch:>11}{top.val_f1:>9.4f}{f1:>9.4f}{time.perf_counter() - t0:>7.1f}s")


if __name__ == "__main__":
    main()
