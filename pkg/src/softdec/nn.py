"""Syndrome-based soft-output neural decoder.

Pipeline for a batch of channel LLRs ``gamma`` (B, n):

1. features ``d = [|gamma|, soft_syndrome(gamma)]`` of length 2n - k,
2. a stack of ``L`` GRU layers unrolled for ``T`` steps, fed ``d`` at every step,
3. a linear head on the concatenated last-layer outputs giving the noise
   estimate ``z_hat`` (B, n),
4. ``gamma_hat = gamma - sign(gamma) * z_hat`` with sign(0) = +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .gf2 import LinearCode

GATES = ("g", "r", "h")
DEFAULT_ALPHA = {"none": 0.0, "mse": 0.01, "kl": 1e10, "moments": 0.1}
PROB_FLOOR = 1e-12


def sign_pos(x) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    x = x.data if isinstance(x, Tensor) else np.asarray(x)
    return np.where(x < 0, -1.0, 1.0).astype(x.dtype if x.dtype.kind == "f" else np.float64)


@dataclass
class GruLayerParams:
    W_g: Tensor
    W_r: Tensor
    W_h: Tensor
    U_g: Tensor
    U_r: Tensor
    U_h: Tensor
    b_g: Tensor
    b_r: Tensor
    b_h: Tensor

    def named(self):
        return [(f, getattr(self, f)) for f in
                ("W_g", "W_r", "W_h", "U_g", "U_r", "U_h", "b_g", "b_r", "b_h")]

    @classmethod
    def init(cls, in_dim: int, h: int, rng: np.random.Generator, dtype=np.float32):
        bound = 1.0 / np.sqrt(h)

        def u(*shape, name):
            return Tensor(rng.uniform(-bound, bound, shape).astype(dtype), requires_grad=True, name=name)

        kw = {}
        for gate in GATES:
            kw[f"W_{gate}"] = u(h, in_dim, name=f"W_{gate}")
            kw[f"U_{gate}"] = u(h, h, name=f"U_{gate}")
            kw[f"b_{gate}"] = u(h, name=f"b_{gate}")
        return cls(**kw)


class DecoderModel:
    """Stacked-GRU noise estimator with a single fully connected head."""

    def __init__(self, code: LinearCode, layers, fc_W: Tensor, fc_b: Tensor, T: int):
        self.code = code
        self.layers = list(layers)
        self.fc_W = fc_W
        self.fc_b = fc_b
        self.T = T
        self.h = fc_W.shape[1] // T
        self.L = len(self.layers)
        self.meta: dict = {}
        self._validate()

    def _validate(self):
        n, k = self.code.n, self.code.k
        feat = n + self.code.H.rows
        for i, layer in enumerate(self.layers):
            in_dim = feat if i == 0 else self.h
            for name, t in layer.named():
                want = {"W": (self.h, in_dim), "U": (self.h, self.h), "b": (self.h,)}[name[0]]
                if t.shape != want:
                    raise ValueError(f"layer {i} {name}: shape {t.shape}, expected {want}")
        if self.fc_W.shape != (n, self.h * self.T) or self.fc_b.shape != (n,):
            raise ValueError("fully connected head does not match (n, h*T)")

    @classmethod
    def init(cls, code: LinearCode, L: int = 4, T: int = 5, h: int | None = None,
             seed: int = 0, dtype=np.float32) -> "DecoderModel":
        h = 5 * code.n if h is None else h
        rng = np.random.default_rng(seed)
        feat = code.n + code.H.rows
        layers = [GruLayerParams.init(feat if i == 0 else h, h, rng, dtype) for i in range(L)]
        bound = 1.0 / np.sqrt(h * T)
        fc_W = Tensor(rng.uniform(-bound, bound, (code.n, h * T)).astype(dtype), requires_grad=True, name="fc_W")
        fc_b = Tensor(np.zeros(code.n, dtype=dtype), requires_grad=True, name="fc_b")
        return cls(code, layers, fc_W, fc_b, T)

    @property
    def dtype(self):
        return self.fc_W.dtype

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            out += [(f"gru{i}.{name}", t) for name, t in layer.named()]
        return out + [("fc.W", self.fc_W), ("fc.b", self.fc_b)]

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def num_params(self) -> int:
        return int(sum(t.data.size for t in self.params()))

    def copy(self) -> "DecoderModel":
        clone = DecoderModel.__new__(DecoderModel)
        clone.code, clone.T, clone.h, clone.L = self.code, self.T, self.h, self.L
        clone.layers = [GruLayerParams(**{n: Tensor(t.data.copy(), True, t.name) for n, t in layer.named()})
                        for layer in self.layers]
        clone.fc_W = Tensor(self.fc_W.data.copy(), True, "fc_W")
        clone.fc_b = Tensor(self.fc_b.data.copy(), True, "fc_b")
        clone.meta = dict(self.meta)
        return clone

    def astype(self, dtype) -> "DecoderModel":
        clone = self.copy()
        for t in clone.params():
            t.data = t.data.astype(dtype)
        return clone


# --------------------------------------------------------------------------
# preprocessing
# --------------------------------------------------------------------------

def _support_index(code: LinearCode):
    cached = code.__dict__.get("_support_index")
    if cached is None:
        sup = code.row_supports
        w = max(len(s) for s in sup)
        idx = np.zeros((len(sup), w), dtype=np.int64)
        mask = np.zeros((len(sup), w), dtype=bool)
        for i, s in enumerate(sup):
            idx[i, : len(s)] = s
            idx[i, len(s):] = s[0]
            mask[i, : len(s)] = True
        cached = (idx, mask)
        object.__setattr__(code, "_support_index", cached)
    return cached


def soft_syndrome(code: LinearCode, gamma):
    """min_{j in M(i)} |gamma_j| * prod_{j in M(i)} sign(gamma_j), sign(0) = +1.

    Accepts arrays or Tensors of shape (n,) or (B, n); Tensors stay on the tape.
    """
    idx, mask = _support_index(code)
    g = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma))
    signs = np.where(mask, sign_pos(g)[..., idx], 1.0).prod(axis=-1).astype(g.dtype)
    return ad.gather_min(ad.abs_(g), idx, mask) * signs


def build_features(gamma, s_tilde):
    """d = [|gamma|, s_tilde]."""
    g = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma))
    s = s_tilde if isinstance(s_tilde, Tensor) else Tensor(np.asarray(s_tilde, dtype=g.dtype))
    if g.shape[:-1] != s.shape[:-1]:
        raise ValueError("batch dimensions of gamma and soft syndrome differ")
    return ad.concat([ad.abs_(g), s], axis=-1)


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------

def gru_cell(d_t, q_prev, p: GruLayerParams, wd=None):
    """One GRU step. ``wd`` optionally carries precomputed input projections."""
    if wd is None:
        wd = [d_t @ p.W_g.T, d_t @ p.W_r.T, d_t @ p.W_h.T]
    q = q_prev if isinstance(q_prev, Tensor) else Tensor(q_prev)
    g = ad.sigmoid(wd[0] + q @ p.U_g.T + p.b_g)
    r = ad.sigmoid(wd[1] + q @ p.U_r.T + p.b_r)
    q_hat = ad.tanh(wd[2] + (r * q) @ p.U_h.T + p.b_h)
    return g * q_hat + (1.0 - g) * q


def stacked_gru(d, model: DecoderModel) -> list[Tensor]:
    """Last-layer outputs q_1..q_T (each (B, h)); the same d is fed at every step."""
    d = d if isinstance(d, Tensor) else Tensor(np.asarray(d, dtype=model.dtype))
    lead = d.shape[:-1]
    zero = Tensor(np.zeros(lead + (model.h,), dtype=model.dtype))
    hidden = [zero] * model.L
    first = model.layers[0]
    wd0 = [d @ first.W_g.T, d @ first.W_r.T, d @ first.W_h.T]
    outs = []
    for _ in range(model.T):
        x = None
        for li, layer in enumerate(model.layers):
            if li == 0:
                hidden[0] = gru_cell(d, hidden[0], layer, wd0)
            else:
                hidden[li] = gru_cell(x, hidden[li], layer)
            x = hidden[li]
        outs.append(x)
    return outs


def estimate_noise(gamma, model: DecoderModel) -> Tensor:
    """z_hat = fc_W · vec(Q) + fc_b with vec stacking time steps in order."""
    g = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma, dtype=model.dtype))
    if g.shape[-1] != model.code.n:
        raise ValueError(f"LLR length {g.shape[-1]} != n = {model.code.n}")
    d = build_features(g, soft_syndrome(model.code, g))
    Q = stacked_gru(d, model)
    return ad.concat(Q, axis=-1) @ model.fc_W.T + model.fc_b


def forward(gamma, model: DecoderModel) -> Tensor:
    """gamma_hat on the tape (gradients reach the model and, if tracked, gamma)."""
    g = gamma if isinstance(gamma, Tensor) else Tensor(np.asarray(gamma, dtype=model.dtype))
    z = estimate_noise(g, model)
    return g - sign_pos(g) * z


@dataclass
class SoftDecodeTrace:
    d: np.ndarray
    z_hat: np.ndarray
    gamma_hat: np.ndarray


def decode_soft(gamma, model: DecoderModel) -> SoftDecodeTrace:
    g = Tensor(np.asarray(gamma, dtype=model.dtype))
    d = build_features(g, soft_syndrome(model.code, g))
    z = ad.concat(stacked_gru(d, model), axis=-1) @ model.fc_W.T + model.fc_b
    gh = g.data - sign_pos(g) * z.data
    return SoftDecodeTrace(d.data, z.data, gh)


def nn_soft(model: DecoderModel, batch: int = 4096):
    """Plain ``gamma -> gamma_hat`` numpy callable, evaluated in chunks."""
    def run(gamma):
        G = np.asarray(gamma)
        single = G.ndim == 1
        G2 = G.reshape(-1, G.shape[-1])
        out = np.empty(G2.shape, dtype=np.float64)
        for i in range(0, G2.shape[0], batch):
            out[i : i + batch] = decode_soft(G2[i : i + batch], model).gamma_hat
        return out[0] if single else out.reshape(G.shape)
    return run


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype if like is not None else None))


def bce_loss(gamma_hat, c) -> Tensor:
    """Binary cross-entropy of sigmoid(-gamma_hat) against bits, averaged."""
    gh = _as_tensor(gamma_hat)
    c = np.asarray(c, dtype=gh.dtype)
    c = np.broadcast_to(c, gh.shape)
    log_p1 = ad.log(ad.clamp_min(ad.sigmoid(-gh), PROB_FLOOR))  # P(bit = 1)
    log_p0 = ad.log(ad.clamp_min(ad.sigmoid(gh), PROB_FLOOR))
    return -ad.reduce_mean(log_p1 * c + log_p0 * (1.0 - c))


def reg_mse(gamma_star, gamma_hat) -> Tensor:
    gh = _as_tensor(gamma_hat)
    diff = _as_tensor(gamma_star, gh) - gh
    return ad.reduce_mean(diff * diff)


def reg_kl(gamma_star, gamma_hat, floor: float = PROB_FLOOR) -> Tensor:
    """sum_i a_i log(a_i / b_i) on clamped magnitudes, averaged over frames."""
    gh = _as_tensor(gamma_hat)
    a = np.maximum(np.abs(np.asarray(gamma_star.data if isinstance(gamma_star, Tensor) else gamma_star,
                                     dtype=gh.dtype)), floor)
    b = ad.clamp_min(ad.abs_(gh), floor)
    per = ad.reduce_sum(a * (np.log(a) - ad.log(b)), axis=-1)
    return ad.reduce_mean(per)


def reg_moments(gamma_star, gamma_hat, rho: float = 0.95) -> Tensor:
    """rho·(E|g*| - E|g^|)^2 + (1-rho)·(Var|g*| - Var|g^|)^2, pooled over the batch."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    gh = _as_tensor(gamma_hat)
    a = np.abs(np.asarray(gamma_star.data if isinstance(gamma_star, Tensor) else gamma_star, dtype=np.float64))
    b = ad.abs_(gh)
    mean_gap = float(a.mean()) - ad.reduce_mean(b)
    var_gap = float(a.var(ddof=1)) - ad.reduce_var(b, ddof=1)
    return rho * (mean_gap * mean_gap) + (1.0 - rho) * (var_gap * var_gap)


REGULARIZERS = {"mse": reg_mse, "kl": reg_kl, "moments": reg_moments}


def total_loss(gamma_hat, c, gamma_star=None, reg_kind: str = "none", alpha_reg: float | None = None,
               rho: float = 0.95, parts: dict | None = None) -> Tensor:
    """BCE plus ``alpha_reg`` times the selected regularizer.

    ``parts``, when given, receives the float values of both terms.
    """
    if reg_kind not in DEFAULT_ALPHA:
        raise ValueError(f"unknown regularizer {reg_kind!r}")
    bce = bce_loss(gamma_hat, c)
    if parts is not None:
        parts["bce"] = float(bce.data)
        parts["reg"] = 0.0
    if reg_kind == "none":
        return bce
    alpha = DEFAULT_ALPHA[reg_kind] if alpha_reg is None else alpha_reg
    if gamma_star is None:
        raise ValueError("regularized loss needs MAP reference LLRs")
    reg = reg_moments(gamma_star, gamma_hat, rho) if reg_kind == "moments" else REGULARIZERS[reg_kind](gamma_star, gamma_hat)
    if parts is not None:
        parts["reg"] = float(reg.data)
    if alpha == 0:
        return bce
    return bce + alpha * reg


# --------------------------------------------------------------------------
# finite-difference check of the whole pipeline
# --------------------------------------------------------------------------

def _swap_param(model: DecoderModel, name: str, t: Tensor) -> DecoderModel:
    clone = DecoderModel.__new__(DecoderModel)
    clone.__dict__.update(model.__dict__)
    if name == "fc.W":
        clone.fc_W = t
    elif name == "fc.b":
        clone.fc_b = t
    else:
        layer, field_ = name.split(".")
        i = int(layer[3:])
        clone.layers = list(model.layers)
        clone.layers[i] = GruLayerParams(**{**dict(model.layers[i].named()), field_: t})
    return clone


def model_grad_check(model: DecoderModel, gamma, c, gamma_star=None, reg_kind: str = "none",
                     alpha_reg: float | None = None, coords_per_param: int = 4, seed: int = 0,
                     eps: float = 1e-6) -> float:
    """Worst relative gradient error of ``total_loss(forward(gamma))`` over sampled coordinates.

    The model should be float64; each parameter tensor is checked at up to
    ``coords_per_param`` random flat indices.
    """
    rng = np.random.default_rng(seed)
    gamma = np.asarray(gamma, dtype=np.float64)
    worst = 0.0
    for name, p in model.named_params():
        def f(x, name=name):
            return total_loss(forward(gamma, _swap_param(model, name, x)), c, gamma_star, reg_kind, alpha_reg)
        k = min(coords_per_param, p.data.size)
        coords = rng.choice(p.data.size, size=k, replace=False)
        worst = max(worst, ad.grad_check(f, p, eps=eps, coords=coords))
    return worst
