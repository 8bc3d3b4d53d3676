"""Zero-codeword training, MAP-regularized fine-tuning and checkpoints."""

from __future__ import annotations

import csv
import io
import json
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import nn
from .channel import RngStream, esn0_db_to_sigma2
from .decoders import DecoderGuardError, ENUM_GUARD, TRELLIS_MAX_CHECKS, map_bitwise
from .gf2 import LinearCode, build_code

log = logging.getLogger(__name__)

MAGIC = b"NFEC1\n"
VAL_STREAM = 1 << 32


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 2**13
    esn0_range_db: tuple = (0.0, 6.0)
    lr_init: float = 1e-3
    lr_floor: float = 1e-6
    epochs_bce: int = 10
    epochs_reg: int = 0
    steps_per_epoch: int = 100
    reg_kind: str = "moments"
    alpha_reg: float | None = None
    rho: float = 0.95
    seed: int = 0
    val_esn0_db: tuple = (0.0, 2.0, 4.0, 6.0)
    val_frames: int = 2048
    plateau_factor: float = 0.1
    plateau_patience: int = 10
    plateau_min_delta: float = 1e-4
    max_seconds: float | None = None

    def __post_init__(self):
        lo, hi = self.esn0_range_db
        if lo > hi:
            raise ValueError("esn0_range_db must satisfy low <= high")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_floor > self.lr_init and self.lr_init > 0:
            raise ValueError("lr_floor must not exceed lr_init")
        if self.reg_kind not in nn.DEFAULT_ALPHA:
            raise ValueError(f"unknown reg_kind {self.reg_kind!r}")


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)
    val_esn0_db: tuple = ()

    def append(self, **row):
        if self.rows and row["epoch"] <= self.rows[-1]["epoch"]:
            raise ValueError("epoch indices must increase")
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "bce", "reg", *[f"val_bce@{s:g}" for s in self.val_esn0_db], "lr"])
        for r in self.rows:
            w.writerow([r["epoch"], f"{r['loss']:.8g}", f"{r['bce']:.8g}", f"{r['reg']:.8g}",
                        *[f"{v:.8g}" for v in r["val_bce"]], f"{r['lr']:.3g}"])
        return buf.getvalue()

    def timing_csv(self) -> str:
        """Wall-clock times, kept apart from the reproducible history CSV."""
        return "epoch,wall_time\n" + "".join(f"{r['epoch']},{r['wall_time']:.3f}\n" for r in self.rows)

    @property
    def wall_time(self) -> float:
        return self.rows[-1]["wall_time"] if self.rows else 0.0


def map_oracle(code: LinearCode):
    """Exact bitwise MAP for desk-scale codes; raises if the code is too large."""
    if (1 << code.k) > ENUM_GUARD and code.H.rows > TRELLIS_MAX_CHECKS:
        raise DecoderGuardError(f"no exact MAP oracle for [{code.n},{code.k}]")
    return lambda g: map_bitwise(code, g)


def sample_batch(code: LinearCode, cfg: TrainConfig, rng: RngStream, with_map: bool = False,
                 batch_size: int | None = None):
    """All-zero codewords over AWGN at per-frame uniform Es/N0.

    Returns ``(gamma, labels, gamma_star)``; ``gamma_star`` is ``None`` unless
    ``with_map``.
    """
    B = cfg.batch_size if batch_size is None else batch_size
    oracle = map_oracle(code) if with_map else None
    lo, hi = cfg.esn0_range_db
    snr = rng.uniform(lo, hi, size=B) if hi > lo else np.full(B, float(lo))
    sigma2 = esn0_db_to_sigma2(snr)[:, None]
    y = 1.0 + np.sqrt(sigma2) * rng.normal((B, code.n))
    gamma = 2.0 * y / sigma2
    labels = np.zeros((B, code.n), dtype=np.uint8)
    gstar = oracle(gamma) if oracle else None
    return gamma, labels, gstar


def validation_set(code: LinearCode, cfg: TrainConfig):
    out = []
    for i, snr in enumerate(cfg.val_esn0_db):
        rng = RngStream(cfg.seed, VAL_STREAM + i)
        sub = TrainConfig(**{**cfg.__dict__, "esn0_range_db": (snr, snr), "reg_kind": "none"})
        out.append(sample_batch(code, sub, rng, batch_size=cfg.val_frames)[:2])
    return out


def validation_bce(model: nn.DecoderModel, vset) -> list[float]:
    res = []
    for gamma, labels in vset:
        gh = nn.nn_soft(model)(gamma)
        res.append(float(nn.bce_loss(gh, labels).data))
    return res


def _run(model, cfg: TrainConfig, epochs: int, reg_kind: str, out_dir=None, phase="bce"):
    model = model.copy()
    code = model.code
    params = model.params()
    opt = ad.AdamState(lr=cfg.lr_init)
    plateau = ad.PlateauState(lr=cfg.lr_init, factor=cfg.plateau_factor, patience=cfg.plateau_patience,
                              min_delta=cfg.plateau_min_delta, floor=cfg.lr_floor)
    rng = RngStream(cfg.seed, 0 if phase == "bce" else 1)
    vset = validation_set(code, cfg)
    hist = TrainHistory(val_esn0_db=tuple(cfg.val_esn0_db))
    use_map = reg_kind != "none"
    start = time.perf_counter()
    for epoch in range(1, epochs + 1):
        acc = {"loss": 0.0, "bce": 0.0, "reg": 0.0}
        for _ in range(cfg.steps_per_epoch):
            gamma, labels, gstar = sample_batch(code, cfg, rng, with_map=use_map)
            parts: dict = {}
            with ad.Tape() as tape:
                gh = nn.forward(gamma.astype(model.dtype), model)
                loss = nn.total_loss(gh, labels, gstar, reg_kind, cfg.alpha_reg, cfg.rho, parts)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(f"loss became {value} in epoch {epoch}")
            grads = tape.gradient(loss, params)
            opt.lr = plateau.lr
            if opt.lr > 0:
                ad.adam_step(params, grads, opt)
            acc["loss"] += value
            acc["bce"] += parts["bce"]
            acc["reg"] += parts["reg"]
        val = validation_bce(model, vset)
        lr = ad.reduce_on_plateau(plateau, float(np.mean(val))) if cfg.lr_init > 0 else 0.0
        steps = cfg.steps_per_epoch
        hist.append(epoch=epoch, loss=acc["loss"] / steps, bce=acc["bce"] / steps, reg=acc["reg"] / steps,
                    val_bce=val, lr=lr, wall_time=time.perf_counter() - start)
        log.info("%s epoch %d loss %.5f val %s lr %.2g", phase, epoch, acc["loss"] / steps,
                 " ".join(f"{v:.4f}" for v in val), lr)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{phase}.nfec").write_bytes(save_checkpoint(model))
            (out / f"{phase}_history.csv").write_text(hist.to_csv())
            (out / f"{phase}_timing.csv").write_text(hist.timing_csv())
        if cfg.max_seconds is not None and time.perf_counter() - start >= cfg.max_seconds:
            break
    return model, hist


def train(model: nn.DecoderModel, cfg: TrainConfig, out_dir=None):
    """BCE-only phase; returns a trained copy and its history."""
    if cfg.epochs_bce < 1:
        raise ValueError("epochs_bce must be >= 1")
    return _run(model, cfg, cfg.epochs_bce, "none", out_dir, "bce")


def finetune_map(model: nn.DecoderModel, cfg: TrainConfig, out_dir=None):
    """BCE + MAP-referenced regularizer phase."""
    map_oracle(model.code)
    return _run(model, cfg, max(1, cfg.epochs_reg), cfg.reg_kind, out_dir, "reg")


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

_DTYPES = {"f32": "<f4", "f64": "<f8"}


def save_checkpoint(model: nn.DecoderModel, extra: dict | None = None) -> bytes:
    """Serialize parameters (plus optional extra named tensors) to bytes."""
    tensors = [(name, t.data) for name, t in model.named_params()]
    for name, arr in (extra or {}).items():
        tensors.append((name, np.asarray(arr)))
    entries, payload = [], []
    for name, arr in tensors:
        tag = "f64" if arr.dtype == np.float64 else "f32"
        entries.append({"name": name, "shape": list(arr.shape), "dtype": tag})
        payload.append(np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes())
    header = {
        "code": model.code.meta.get("spec", model.code.name),
        "n": model.code.n, "k": model.code.k,
        "L": model.L, "T": model.T, "h": model.h,
        "tensors": entries,
        "meta": {k: v for k, v in model.meta.items() if isinstance(v, (int, float, str))},
    }
    hb = json.dumps(header, sort_keys=True).encode()
    return MAGIC + struct.pack("<I", len(hb)) + hb + b"".join(payload)


def load_checkpoint(blob: bytes, code: LinearCode | None = None):
    """Inverse of :func:`save_checkpoint`; returns ``(model, extra_tensors)``."""
    if not blob.startswith(MAGIC):
        raise CheckpointError("bad magic")
    pos = len(MAGIC)
    if len(blob) < pos + 4:
        raise CheckpointError("truncated header")
    (hlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    try:
        header = json.loads(blob[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from None
    pos += hlen
    if code is None:
        code = build_code(header["code"])
    if code.n != header["n"] or code.k != header["k"]:
        raise CheckpointError(f"checkpoint is for [{header['n']},{header['k']}], got [{code.n},{code.k}]")
    arrays = {}
    for e in header["tensors"]:
        dt = np.dtype(_DTYPES[e["dtype"]])
        size = int(np.prod(e["shape"], dtype=np.int64)) * dt.itemsize
        if pos + size > len(blob):
            raise CheckpointError("truncated payload")
        arrays[e["name"]] = np.frombuffer(blob, dtype=dt, count=size // dt.itemsize, offset=pos) \
            .reshape(e["shape"]).astype(dt.newbyteorder("="))
        pos += size
    if pos != len(blob):
        raise CheckpointError("trailing bytes after payload")
    L, T, h = header["L"], header["T"], header["h"]
    layers = []
    try:
        for i in range(L):
            kw = {f: ad.Tensor(arrays.pop(f"gru{i}.{f}"), True, f) for f in
                  ("W_g", "W_r", "W_h", "U_g", "U_r", "U_h", "b_g", "b_r", "b_h")}
            layers.append(nn.GruLayerParams(**kw))
        fc_W = ad.Tensor(arrays.pop("fc.W"), True, "fc_W")
        fc_b = ad.Tensor(arrays.pop("fc.b"), True, "fc_b")
    except KeyError as exc:
        raise CheckpointError(f"missing tensor {exc}") from None
    try:
        model = nn.DecoderModel(code, layers, fc_W, fc_b, T)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    if model.h != h:
        raise CheckpointError("hidden size mismatch")
    model.meta.update(header.get("meta", {}))
    return model, arrays
