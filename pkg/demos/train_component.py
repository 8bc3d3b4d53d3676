"""Train a Stacked-GRU component decoder on all-zero codewords.

    python demos/train_component.py "bch(4,2)" --minutes 45 --out runs/bch15

Writes ``bce.nfec`` (checkpoint), ``bce_history.csv`` and ``bce_timing.csv``
into the output directory after every epoch, so the run can be stopped early.
"""

import argparse
import logging

from softdec import nn, training
from softdec.gf2 import build_code

parser = argparse.ArgumentParser()
parser.add_argument("code")
parser.add_argument("--minutes", type=float, default=30.0)
parser.add_argument("--out", required=True)
parser.add_argument("--batch", type=int, default=1024)
parser.add_argument("--layers", type=int, default=4)
parser.add_argument("--steps", type=int, default=5)
parser.add_argument("--hidden", type=int, default=None)
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--patience", type=int, default=10)
args = parser.parse_args()

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

code = build_code(args.code)
model = nn.DecoderModel.init(code, L=args.layers, T=args.steps, h=args.hidden, seed=args.seed)
print(f"{code.name}: n={code.n} k={code.k}, {model.num_params()} parameters")

cfg = training.TrainConfig(
    batch_size=args.batch,
    epochs_bce=10**6,  # bounded by the time budget
    seed=args.seed,
    plateau_patience=args.patience,
    max_seconds=60.0 * args.minutes,
)
model, hist = training.train(model, cfg, out_dir=args.out)
print(hist.to_csv())
print(f"trained for {hist.wall_time / 60:.1f} min")
