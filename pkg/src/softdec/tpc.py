"""Turbo product codes: encoding, iterative column/row decoding, fine-tuning.

A codeword is an ``n1 x n2`` bit matrix whose columns belong to the column
code ``(n1, k1)`` and whose rows belong to the row code ``(n2, k2)``; the
information bits sit in the top-left ``k1 x k2`` block. All routines work on
batches shaped ``(B, n1, n2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .channel import RngStream, esn0_db_to_sigma2
from .decoders import DEFAULT_BETA, chase_pyndiah, default_table, map_bitwise
from .gf2 import CodeError, LinearCode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TpcCode:
    col_code: LinearCode
    row_code: LinearCode

    def __post_init__(self):
        for c in (self.col_code, self.row_code):
            if not c.is_systematic():
                raise CodeError(f"component {c.name} is not systematic")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.col_code.n, self.row_code.n)

    @property
    def info_shape(self) -> tuple[int, int]:
        return (self.col_code.k, self.row_code.k)

    @property
    def rate(self) -> float:
        return (self.col_code.k * self.row_code.k) / (self.col_code.n * self.row_code.n)


def tpc_encode(tpc: TpcCode, U) -> np.ndarray:
    """Encode columns of the information block, then every full row."""
    U = np.asarray(U, dtype=np.int64)
    if U.shape[-2:] != tpc.info_shape:
        raise CodeError(f"information block has shape {U.shape[-2:]}, expected {tpc.info_shape}")
    Gc = tpc.col_code.G.dense().astype(np.int64)
    Gr = tpc.row_code.G.dense().astype(np.int64)
    cols = (np.swapaxes(U, -1, -2) @ Gc) & 1  # (..., k2, n1)
    C = (np.swapaxes(cols, -1, -2) @ Gr) & 1  # (..., n1, n2)
    return C.astype(np.uint8)


def l1_normalize(gamma):
    """Scale each (…, r, c) matrix to unit mean absolute value.

    Returns ``(scaled, kappa)`` with kappa shaped (…, 1, 1). All-zero matrices
    get kappa = 1. Tensors stay on the tape.
    """
    g = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma, dtype=np.float64))
    count = g.shape[-1] * g.shape[-2]
    total = ad.reduce_sum(ad.abs_(g), axis=(-2, -1), keepdims=True)
    zero = total.data == 0
    if np.any(zero):
        total = total + zero.astype(g.dtype) * count  # kappa = 1 where all-zero
    kappa = count / total
    return g * kappa, kappa


# --------------------------------------------------------------------------
# component decoders: callables (A, iteration) -> (L0, failed)
# --------------------------------------------------------------------------

def _rows(x):
    return x.reshape(-1, x.shape[-1])


class MapComponent:
    """Exact bitwise MAP applied to every row of the input matrix."""

    differentiable = False

    def __init__(self, code: LinearCode):
        self.code = code

    def __call__(self, A, it=0):
        a = A.data if isinstance(A, Tensor) else np.asarray(A)
        out = map_bitwise(self.code, _rows(a)).reshape(a.shape)
        return out, np.zeros(a.shape[0], dtype=bool)


class ChaseComponent:
    """Chase-II with Pyndiah soft output, on L1-normalized input."""

    differentiable = False

    def __init__(self, code: LinearCode, p: int = 4, t_max: int | None = None,
                 beta_schedule=DEFAULT_BETA, normalize: bool = True):
        self.code = code
        self.p = p
        self.table = default_table(code, code.meta.get("t") if t_max is None else t_max)
        self.beta_schedule = tuple(beta_schedule)
        self.normalize = normalize

    def __call__(self, A, it=0):
        a = A.data if isinstance(A, Tensor) else np.asarray(A, dtype=np.float64)
        kappa = np.ones(a.shape[:-2] + (1, 1))
        if self.normalize:
            scaled, k = l1_normalize(a)
            a, kappa = scaled.data, k.data
        soft, failed = chase_pyndiah(self.code, _rows(a), self.p, self.table, it, self.beta_schedule)
        soft = soft.reshape(a.shape) / kappa
        return soft, failed.reshape(a.shape[:-1]).any(axis=-1)


class NeuralComponent:
    """Soft-output neural decoder; input L1-normalized, output rescaled by 1/kappa."""

    differentiable = True

    def __init__(self, model: nn.DecoderModel, normalize: bool = True):
        self.model = model
        self.normalize = normalize

    def __call__(self, A, it=0):
        a = A if isinstance(A, Tensor) else Tensor(np.asarray(A, dtype=self.model.dtype))
        shape = a.shape
        if self.normalize:
            a, kappa = l1_normalize(a)
        out = nn.forward(ad.reshape(a, (-1, shape[-1])), self.model)
        out = ad.reshape(out, shape)
        if self.normalize:
            out = out / kappa
        return out, np.zeros(shape[0], dtype=bool)


@dataclass
class TpcResult:
    gamma_hat: np.ndarray
    outputs: list  # 2N intermediate matrices (Tensors when decoded on a tape)
    failed: np.ndarray  # (B,) any component failure in the final iteration
    alphas: tuple = ()


def _swap(x):
    return ad.swapaxes(x, -1, -2) if isinstance(x, Tensor) else np.swapaxes(x, -1, -2)


def tpc_decode(gamma, tpc: TpcCode | None, D_c, D_r, alpha_c, alpha_r, N: int | None = None) -> TpcResult:
    """Iterative column-then-row decoding with scaled extrinsic exchange.

    ``gamma`` is (B, n1, n2) (or a single n1 x n2 matrix). ``alpha_c`` and
    ``alpha_r`` hold one scale per iteration (floats or a length-N Tensor).
    """
    G = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma, dtype=np.float64))
    single = G.ndim == 2
    if single:
        G = ad.reshape(G, (1,) + G.shape)
    if tpc is not None and G.shape[-2:] != tpc.shape:
        raise ValueError(f"LLR matrix shape {G.shape[-2:]} != {tpc.shape}")
    N = len(alpha_c) if N is None else N
    if len(alpha_c) < N or len(alpha_r) < N:
        raise ValueError("need one scale per iteration and direction")
    B, n1, n2 = G.shape
    L_c = np.zeros((B, n2, n1), dtype=G.dtype)
    L_r = np.zeros((B, n1, n2), dtype=G.dtype)
    gh = G
    outputs = []
    failed = np.zeros(B, dtype=bool)
    for i in range(N):
        A = _swap(gh) - L_c
        L0, f_c = D_c(A, i)
        L_c = alpha_c[i] * (L0 - A)
        gh = _swap(A) + _swap(L_c)
        outputs.append(gh)
        A = gh - L_r
        L0, f_r = D_r(A, i)
        L_r = alpha_r[i] * (L0 - A)
        gh = A + L_r
        outputs.append(gh)
        failed = f_c | f_r
    final = gh.data if isinstance(gh, Tensor) else np.asarray(gh)
    if single:
        final = final[0]
    return TpcResult(np.asarray(final, dtype=np.float64), outputs, failed)


def tpc_finetune_loss(outputs, C) -> Tensor:
    """Exponentially weighted BCE over the 2N half-iteration outputs."""
    if not outputs:
        raise ValueError("no decoder outputs")
    M = len(outputs)
    beta = np.exp(np.arange(M, dtype=np.float64))
    total = None
    for b, out in zip(beta, outputs):
        term = float(b) * nn.bce_loss(out, C)
        total = term if total is None else total + term
    return total * (1.0 / (M * beta.sum()))


# --------------------------------------------------------------------------
# fine-tuning
# --------------------------------------------------------------------------

@dataclass
class TpcFinetuneConfig:
    N: int = 2
    lr: float = 1e-6
    epochs: int = 4000
    batch: int = 256
    alpha_init: float = 0.7
    esn0_range_db: tuple = (2.0, 2.0)
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.esn0_range_db[0] > self.esn0_range_db[1]:
            raise ValueError("esn0_range_db must satisfy low <= high")


def tpc_batch(tpc: TpcCode, B: int, esn0_range_db, rng: RngStream, zero: bool = False):
    """Random (or all-zero) information blocks through BPSK/AWGN; returns (U, C, gamma)."""
    k1, k2 = tpc.info_shape
    U = np.zeros((B, k1, k2), np.uint8) if zero else rng.bits((B, k1, k2))
    C = tpc_encode(tpc, U)
    lo, hi = esn0_range_db
    snr = rng.uniform(lo, hi, size=B) if hi > lo else np.full(B, float(lo))
    sigma2 = esn0_db_to_sigma2(snr)[:, None, None]
    y = (1.0 - 2.0 * C) + np.sqrt(sigma2) * rng.normal(C.shape)
    return U, C, 2.0 * y / sigma2


@dataclass
class TpcFinetuneHistory:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        if not self.rows:
            return "epoch,loss\n"
        N = len(self.rows[0]["alpha_c"])
        head = ["epoch", "loss"] + [f"alpha_c{i + 1}" for i in range(N)] + [f"alpha_r{i + 1}" for i in range(N)]
        lines = [",".join(head)]
        for r in self.rows:
            vals = [str(r["epoch"]), f"{r['loss']:.8g}"] + [f"{a:.6g}" for a in r["alpha_c"]] + \
                   [f"{a:.6g}" for a in r["alpha_r"]]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def tpc_finetune(model: nn.DecoderModel, tpc: TpcCode, cfg: TpcFinetuneConfig, alpha_c=None, alpha_r=None):
    """Joint Adam descent on the TPC loss over model weights and 2N extrinsic scales.

    One epoch is one batch of ``cfg.batch`` random TPC frames. Returns
    ``(model, alpha_c, alpha_r, history)`` with the scales as numpy arrays.
    """
    if tpc.col_code is not model.code and tpc.row_code is not model.code:
        if (tpc.col_code.n, tpc.col_code.k) != (model.code.n, model.code.k):
            raise ValueError("model does not match the component codes")
    model = model.copy()
    init = np.full(cfg.N, cfg.alpha_init, dtype=model.dtype)
    a_c = Tensor(init.copy() if alpha_c is None else np.asarray(alpha_c, model.dtype).copy(), True, "alpha_c")
    a_r = Tensor(init.copy() if alpha_r is None else np.asarray(alpha_r, model.dtype).copy(), True, "alpha_r")
    params = model.params() + [a_c, a_r]
    opt = ad.AdamState(lr=cfg.lr)
    rng = RngStream(cfg.seed, 2)
    D = NeuralComponent(model, cfg.normalize)
    hist = TpcFinetuneHistory()
    for epoch in range(1, cfg.epochs + 1):
        _, C, gamma = tpc_batch(tpc, cfg.batch, cfg.esn0_range_db, rng)
        with ad.Tape() as tape:
            g = Tensor(gamma.astype(model.dtype))
            alphas_c = [a_c[i] for i in range(cfg.N)]
            alphas_r = [a_r[i] for i in range(cfg.N)]
            res = tpc_decode(g, tpc, D, D, alphas_c, alphas_r, cfg.N)
            loss = tpc_finetune_loss(res.outputs, C)
        value = float(loss.data)
        if not math.isfinite(value):
            from .training import TrainingDiverged
            raise TrainingDiverged(f"TPC loss became {value} in epoch {epoch}")
        grads = tape.gradient(loss, params)
        if cfg.lr > 0:
            ad.adam_step(params, grads, opt)
        hist.rows.append({"epoch": epoch, "loss": value,
                          "alpha_c": a_c.data.astype(float).tolist(), "alpha_r": a_r.data.astype(float).tolist()})
        if epoch % 50 == 0:
            log.info("tpc epoch %d loss %.5f alpha_c %s alpha_r %s", epoch, value, a_c.data, a_r.data)
    return model, a_c.data.astype(np.float64), a_r.data.astype(np.float64), hist


def tpc_eval_loss(model, tpc: TpcCode, alpha_c, alpha_r, C, gamma, normalize: bool = True) -> float:
    D = NeuralComponent(model, normalize)
    res = tpc_decode(Tensor(np.asarray(gamma, dtype=model.dtype)), tpc, D, D,
                     [float(a) for a in alpha_c], [float(a) for a in alpha_r], len(alpha_c))
    return float(tpc_finetune_loss(res.outputs, C).data)
