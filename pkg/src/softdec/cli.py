"""Command-line entry point: ``python -m softdec <subcommand> [--config c.json] [--seed N] [--out DIR]``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 when
the run itself fails. Every CSV and checkpoint depends only on the config and
the seed; wall-clock times go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import harness, nn, tpc, training
from .channel import RngStream, esn0_db_to_sigma2
from .decoders import map_bitwise, map_bitwise_enum, map_bitwise_trellis
from .gf2 import build_code, encode, write_alist

log = logging.getLogger("softdec")

COMMANDS = ("train", "finetune-map", "tpc-finetune", "sim-ber", "sim-tpc", "soft-stats", "hist",
            "map-check", "grad-check", "make-code")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="softdec", description="Soft-output neural decoding workbench")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config; missing keys take defaults")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--workers", type=int, help="overrides sim.workers")
        s.add_argument("--svg", action="store_true", help="also write SVG plots (needs matplotlib)")
        if name == "map-check":
            s.add_argument("--vectors", type=int, default=1000)
    return p


def _load_config(args):
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        cfg = cfgmod.parse_config(path.read_text())
        base = path.parent
    else:
        cfg = cfgmod.parse_config("{}")
        base = Path(".")
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be >= 0")
        cfg["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg["sim"]["workers"] = args.workers
    if args.svg:
        cfg["sim"]["svg"] = True
    return cfg, base


def _resolve(base: Path, p):
    p = Path(p)
    return p if p.is_absolute() or p.exists() else base / p


def _load_model(cfg, base, code, required=True):
    ck = cfg["model"]["checkpoint"]
    if ck is None:
        if required:
            raise RuntimeError("model.checkpoint is required for this command")
        return None, {}
    path = _resolve(base, ck)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return training.load_checkpoint(path.read_bytes(), code)


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    print(f"wrote {out / name}")


def _svg(path: Path, draw):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping SVG", file=sys.stderr)
        return
    plt.rcParams["svg.hashsalt"] = "softdec"
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {path}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_make_code(cfg, base, out):
    code = build_code(cfg["code"]["spec"])
    _write(out, "H.alist", write_alist(code.H))
    _write(out, "G.alist", write_alist(code.G))
    info = {"name": code.name, "n": code.n, "k": code.k, "spec": cfg["code"]["spec"],
            "perm": None if code.perm is None else [int(i) for i in code.perm],
            "meta": {k: v for k, v in code.meta.items() if isinstance(v, (int, str))}}
    _write(out, "code.json", json.dumps(info, indent=2, sort_keys=True) + "\n")


def cmd_map_check(cfg, base, out, vectors=1000):
    code = build_code(cfg["code"]["spec"])
    rng = RngStream(cfg["seed"], 0)
    worst = 0.0
    rows = ["esn0_db,vectors,max_abs_diff"]
    for snr in cfg["channel"]["esn0_db"]:
        u = rng.bits((vectors, code.k))
        sigma2 = float(esn0_db_to_sigma2(snr))
        y = (1.0 - 2.0 * encode(code, u)) + np.sqrt(sigma2) * rng.normal((vectors, code.n))
        g = 2.0 * y / sigma2
        d = float(np.max(np.abs(map_bitwise_enum(code, g) - map_bitwise_trellis(code, g))))
        worst = max(worst, d)
        rows.append(f"{snr:g},{vectors},{d:.3e}")
    _write(out, "map_check.csv", "\n".join(rows) + "\n")
    print(f"{code.name}: max |trellis - enumeration| = {worst:.3e}")
    return 0 if worst <= 1e-9 else 2


def cmd_grad_check(cfg, base, out):
    code = build_code(cfg["code"]["spec"])
    model = nn.DecoderModel.init(code, L=2, T=2, h=8, seed=cfg["seed"], dtype=np.float64)
    rng = RngStream(cfg["seed"], 0)
    gamma = 2.0 * (1.0 + rng.normal((8, code.n)))
    labels = np.zeros((8, code.n), dtype=np.uint8)
    gstar = map_bitwise(code, gamma)
    rows = ["loss,max_rel_err"]
    worst = 0.0
    for kind in ("none", "mse", "kl", "moments"):
        err = nn.model_grad_check(model, gamma, labels, gstar, kind, alpha_reg=1.0, seed=cfg["seed"])
        rows.append(f"{'bce' if kind == 'none' else 'bce+' + kind},{err:.3e}")
        worst = max(worst, err)
    _write(out, "grad_check.csv", "\n".join(rows) + "\n")
    print(f"max rel err {worst:.3e}")
    return 0 if worst < 1e-5 else 2


def cmd_train(cfg, base, out):
    code = build_code(cfg["code"]["spec"])
    m = cfg["model"]
    model = nn.DecoderModel.init(code, L=m["L"], T=m["T"], h=m["h"], seed=cfg["seed"], dtype=np.dtype(m["dtype"]))
    tc = cfgmod.train_config(cfg)
    model, hist = training.train(model, tc, out_dir=out)
    print(f"bce phase: {len(hist.rows)} epochs, final val {hist.rows[-1]['val_bce']}")
    if tc.epochs_reg > 0:
        model, hist = training.finetune_map(model, tc, out_dir=out)
        print(f"reg phase: {len(hist.rows)} epochs")


def cmd_finetune_map(cfg, base, out):
    code = build_code(cfg["code"]["spec"])
    model, _ = _load_model(cfg, base, code)
    model, hist = training.finetune_map(model, cfgmod.train_config(cfg), out_dir=out)
    print(f"reg phase: {len(hist.rows)} epochs")


def _tpc_code(cfg):
    p = cfg["tpc"]
    spec = cfg["code"]["spec"]
    return tpc.TpcCode(build_code(p["col_code"] or spec), build_code(p["row_code"] or spec))


def _alphas(cfg, extras):
    p = cfg["tpc"]
    N = p["N"]
    a_c = p["alpha_c"] or (extras["alpha_c"].tolist() if "alpha_c" in extras else [p["alpha_init"]] * N)
    a_r = p["alpha_r"] or (extras["alpha_r"].tolist() if "alpha_r" in extras else [p["alpha_init"]] * N)
    if len(a_c) != N or len(a_r) != N:
        raise RuntimeError(f"checkpoint holds {len(a_c)} extrinsic scales, tpc.N = {N}")
    return [float(a) for a in a_c], [float(a) for a in a_r]


def cmd_tpc_finetune(cfg, base, out):
    T = _tpc_code(cfg)
    if T.col_code.meta.get("spec") != T.row_code.meta.get("spec"):
        raise RuntimeError("fine-tuning shares one model, so row and column codes must match")
    model, extras = _load_model(cfg, base, T.row_code)
    fc = cfgmod.tpc_finetune_config(cfg)
    a_c, a_r = _alphas(cfg, extras)
    model, a_c, a_r, hist = tpc.tpc_finetune(model, T, fc, a_c, a_r)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tpc.nfec").write_bytes(training.save_checkpoint(model, {"alpha_c": a_c, "alpha_r": a_r}))
    print(f"wrote {out / 'tpc.nfec'}")
    _write(out, "tpc_history.csv", hist.to_csv())
    print("alpha_c", " ".join(f"{a:.4f}" for a in a_c), "alpha_r", " ".join(f"{a:.4f}" for a in a_r))


def _sim_setup(cfg):
    s = cfg["sim"]
    return harness.SimSetup(esn0_db=list(cfg["channel"]["esn0_db"]), max_frames=s["max_frames"],
                            target_frame_errors=s["target_frame_errors"], block_frames=s["block_frames"],
                            workers=s["workers"])


def _plot_ber(path, curves, ylabel="BER"):
    def draw(ax):
        for label, res in curves.items():
            pts = [(r.esn0_db, r.ber) for r in res if r.ber > 0]
            if pts:
                ax.semilogy(*zip(*pts), marker="o", label=label)
        ax.set_xlabel("Es/N0 [dB]")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    _svg(path, draw)


def cmd_sim_ber(cfg, base, out):
    code = build_code(cfg["code"]["spec"])
    s = cfg["sim"]
    model = None
    if "nn" in s["decoders"]:
        model, _ = _load_model(cfg, base, code)
    setup = _sim_setup(cfg)
    curves = {}
    for name in s["decoders"]:
        dec = harness.block_decoder(code, name, bp_iters=s["bp_iters"], chase_p=s["chase_p"],
                                    table_t=s["table_t"], model=model)
        t0 = time.perf_counter()
        res = harness.simulate(harness.BlockScheme(code, dec, name), setup, cfg["seed"])
        print(f"{name}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        curves[name] = res
        _write(out, f"ber_{name}.csv", harness.results_csv(res))
    if s["svg"]:
        _plot_ber(out / "ber.svg", curves)


def _component(cfg, code, model):
    p = cfg["tpc"]
    if p["component"] == "map":
        return tpc.MapComponent(code)
    if p["component"] == "chase":
        return tpc.ChaseComponent(code, p=p["chase_p"], normalize=p["normalize"])
    return tpc.NeuralComponent(model, normalize=p["normalize"])


def cmd_sim_tpc(cfg, base, out):
    T = _tpc_code(cfg)
    model, extras = (None, {})
    if cfg["tpc"]["component"] == "nn":
        model, extras = _load_model(cfg, base, T.row_code)
        if T.col_code.n != T.row_code.n or T.col_code.k != T.row_code.k:
            raise RuntimeError("the neural component needs identical row and column codes")
    a_c, a_r = _alphas(cfg, extras)
    scheme = harness.TpcScheme(T, _component(cfg, T.col_code, model), _component(cfg, T.row_code, model),
                               a_c, a_r, cfg["tpc"]["component"])
    res = harness.simulate(scheme, _sim_setup(cfg), cfg["seed"])
    _write(out, "tpc_ber.csv", harness.results_csv(res, with_tap=True))
    if cfg["sim"]["svg"]:
        curves = {f"N={i + 1}": [r for r in res if r.tap == i] for i in range(scheme.N)}
        _plot_ber(out / "tpc_ber.svg", curves)


def _soft_pair(cfg, base):
    code = build_code(cfg["code"]["spec"])
    model, _ = _load_model(cfg, base, code)
    s = cfg["sim"]
    rng = RngStream(cfg["seed"], 0)
    B = s["soft_frames"]
    u = rng.bits((B, code.k))
    sigma2 = float(esn0_db_to_sigma2(s["soft_esn0_db"]))
    y = (1.0 - 2.0 * encode(code, u)) + np.sqrt(sigma2) * rng.normal((B, code.n))
    g = 2.0 * y / sigma2
    return nn.nn_soft(model)(g), training.map_oracle(code)(g)


def cmd_soft_stats(cfg, base, out):
    gh, gs = _soft_pair(cfg, base)
    _write(out, "soft_stats.csv", harness.soft_stats(gh, gs).to_csv())


def cmd_hist(cfg, base, out):
    gh, gs = _soft_pair(cfg, base)
    s = cfg["sim"]
    rng_ = s["hist_range"] or [float(min(gh.min(), gs.min())), float(max(gh.max(), gs.max()))]
    hists = {}
    for name, x in (("gamma_hat", gh), ("gamma_star", gs)):
        edges, counts = harness.histogram(x, s["hist_bins"], rng_)
        hists[name] = (edges, counts)
        _write(out, f"hist_{name}.csv", harness.histogram_csv(edges, counts))
    if s["svg"]:
        def draw(ax):
            for name, (edges, counts) in hists.items():
                ax.stairs(counts, edges, label=name)
            ax.set_xlabel("LLR")
            ax.set_ylabel("count")
            ax.legend()
        _svg(out / "hist.svg", draw)


HANDLERS = {
    "train": cmd_train, "finetune-map": cmd_finetune_map, "tpc-finetune": cmd_tpc_finetune,
    "sim-ber": cmd_sim_ber, "sim-tpc": cmd_sim_tpc, "soft-stats": cmd_soft_stats, "hist": cmd_hist,
    "map-check": cmd_map_check, "grad-check": cmd_grad_check, "make-code": cmd_make_code,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "softdec: error: a subcommand is required")
        cfg, base = _load_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    out = Path(args.out)
    try:
        kw = {"vectors": args.vectors} if args.command == "map-check" else {}
        rc = HANDLERS[args.command](cfg, base, out, **kw)
    except Exception as exc:  # noqa: BLE001 - report any pipeline failure as exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
