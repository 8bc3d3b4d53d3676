"""Fine-tune a neural component decoder inside a turbo product code.

    python demos/tpc_finetune.py tests/data/hamming7_bce.nfec --epochs 500 --esn0 -1

Runs the end-to-end fine-tuning of the component model and of the per-iteration
extrinsic scales alpha, then compares the held-out loss and the frame error
rate against the starting model with alpha frozen at its initial value.
"""

import argparse
from pathlib import Path

from softdec import training
from softdec.channel import RngStream
from softdec.harness import SimSetup, TpcScheme, simulate
from softdec.tpc import NeuralComponent, TpcCode, TpcFinetuneConfig, tpc_batch, tpc_eval_loss, tpc_finetune

parser = argparse.ArgumentParser()
parser.add_argument("checkpoint")
parser.add_argument("--epochs", type=int, default=500)
parser.add_argument("--iters", type=int, default=2)
parser.add_argument("--lr", type=float, default=1e-3)
parser.add_argument("--batch", type=int, default=256)
parser.add_argument("--esn0", type=float, default=-1.0)
parser.add_argument("--frames", type=int, default=40_000)
parser.add_argument("--out", default=None, help="where to write tpc.nfec (optional)")
args = parser.parse_args()

model, _ = training.load_checkpoint(Path(args.checkpoint).read_bytes())
tpc = TpcCode(model.code, model.code)
cfg = TpcFinetuneConfig(N=args.iters, lr=args.lr, epochs=args.epochs, batch=args.batch,
                        esn0_range_db=(args.esn0, args.esn0))
tuned, a_c, a_r, hist = tpc_finetune(model, tpc, cfg)
print(hist.to_csv().splitlines()[-1])

frozen = [cfg.alpha_init] * args.iters
_, C, G = tpc_batch(tpc, 4096, (args.esn0, args.esn0), RngStream(808, 1))
print(f"held-out loss {tpc_eval_loss(model, tpc, frozen, frozen, C, G):.5f} -> "
      f"{tpc_eval_loss(tuned, tpc, a_c, a_r, C, G):.5f}")

setup = SimSetup([args.esn0], max_frames=args.frames, target_frame_errors=None, block_frames=4000)
for label, m, ac, ar in (("frozen", model, frozen, frozen), ("tuned", tuned, list(a_c), list(a_r))):
    D = NeuralComponent(m)
    r = simulate(TpcScheme(tpc, D, D, ac, ar), setup, seed=88)[-1]
    print(f"{label}: FER {r.fer:.3e} BER {r.ber:.3e}  alpha_c {ac}  alpha_r {ar}")

if args.out:
    Path(args.out).write_bytes(training.save_checkpoint(tuned, {"alpha_c": a_c, "alpha_r": a_r}))
