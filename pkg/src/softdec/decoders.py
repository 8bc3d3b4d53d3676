"""Reference decoders: exact bitwise MAP, sum-product BP, syndrome table, Chase-II.

All soft decoders take LLRs shaped ``(n,)`` or ``(B, n)`` and return the same
shape. Positive LLR favours bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf2 import CosetTable, LinearCode, coset_leader_table, syndrome_int, unpack_patterns

ENUM_GUARD = 1 << 24
TRELLIS_MAX_CHECKS = 20
BP_CLIP = 30.0
DEFAULT_BETA = (0.2, 0.4, 0.6, 0.8, 1.0)
FAST_ENUM_MAX = 1 << 12  # codebooks small enough for a single probability-domain matmul


class DecoderGuardError(ValueError):
    """The requested exact decoder is too large for this code."""


def _as_batch(gamma):
    g = np.asarray(gamma, dtype=np.float64)
    return (g[None, :], True) if g.ndim == 1 else (g, False)


def _lse(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True)) + safe
    return np.squeeze(out, axis=axis)


def gray_codebook(code: LinearCode, start: int, stop: int) -> np.ndarray:
    """Codewords ``start..stop-1`` in Gray order of the information word."""
    idx = np.arange(start, stop, dtype=np.int64)
    gray = idx ^ (idx >> 1)
    u = ((gray[:, None] >> np.arange(code.k)) & 1).astype(np.int64)
    return ((u @ code.G.dense().astype(np.int64)) & 1).astype(np.uint8)


def map_bitwise_enum(code: LinearCode, gamma, guard: int = ENUM_GUARD) -> np.ndarray:
    """Exact bitwise a-posteriori LLRs by enumerating all 2^k codewords.

    The correlation of codeword c is ``(1 - c)·gamma``; each output is the
    log-sum-exp over codewords with ``c_i = 0`` minus that over ``c_i = 1``.
    """
    total = 1 << code.k
    if total > guard:
        raise DecoderGuardError(f"2^k = {total} exceeds enumeration guard {guard}")
    G, single = _as_batch(gamma)
    B, n = G.shape
    if n != code.n:
        raise ValueError(f"LLR length {n} != n = {code.n}")
    out = np.empty_like(G)
    if total <= FAST_ENUM_MAX:
        C = gray_codebook(code, 0, total).astype(np.float64)
        fb = max(1, (1 << 22) // total)
        for f0 in range(0, B, fb):
            g = G[f0 : f0 + fb]
            S = g @ (1.0 - C).T
            W = np.exp(S - S.max(axis=1, keepdims=True))
            p0 = W @ (1.0 - C)
            p1 = W @ C
            with np.errstate(divide="ignore"):
                out[f0 : f0 + fb] = np.log(p0) - np.log(p1)
        # frames whose shifted sums underflowed get the exact log-domain pass
        bad = np.flatnonzero(~np.isfinite(out).all(axis=1) | (np.abs(out) > 600).any(axis=1))
        if bad.size:
            out[bad] = _enum_logdomain(code, G[bad], total)
    else:
        out = _enum_logdomain(code, G, total)
    return out[0] if single else out


def _enum_logdomain(code, G, total):
    B, n = G.shape
    out = np.empty_like(G)
    fb = max(1, min(B, (1 << 22) // max(1, min(total, 4096) * n)))
    for f0 in range(0, B, fb):
        g = G[f0 : f0 + fb]
        acc0 = np.full(g.shape, -np.inf)
        acc1 = np.full(g.shape, -np.inf)
        chunk = max(1, min(total, (1 << 22) // (g.shape[0] * n)))
        for c0 in range(0, total, chunk):
            C = gray_codebook(code, c0, min(total, c0 + chunk))
            S = g @ (1.0 - C).T  # (b, chunk)
            zero = (C == 0)[None, :, :]
            s3 = S[:, :, None]
            part0 = _lse(np.where(zero, s3, -np.inf), axis=1)
            part1 = _lse(np.where(~zero, s3, -np.inf), axis=1)
            acc0 = np.logaddexp(acc0, part0)
            acc1 = np.logaddexp(acc1, part1)
        out[f0 : f0 + fb] = acc0 - acc1
    return out


def map_bitwise_trellis(code: LinearCode, gamma, max_checks: int = TRELLIS_MAX_CHECKS) -> np.ndarray:
    """Exact bitwise MAP by forward-backward on the syndrome trellis.

    States are partial syndromes (2^(n-k) of them), start and end in state 0.
    Only two alpha buffers are live during the forward sweep; alphas are
    checkpointed every ceil(sqrt(n)) stages and recomputed per segment while
    the backward sweep runs.
    """
    m = code.H.rows
    if m > max_checks:
        raise DecoderGuardError(f"n-k = {m} exceeds trellis guard {max_checks}")
    G, single = _as_batch(gamma)
    B, n = G.shape
    if n != code.n:
        raise ValueError(f"LLR length {n} != n = {code.n}")
    S = 1 << m
    states = np.arange(S, dtype=np.int64)
    partner = [states ^ int(h) for h in code.column_syndromes]
    out = np.empty_like(G)
    fb = max(1, min(B, (1 << 21) // S))
    for f0 in range(0, B, fb):
        out[f0 : f0 + fb] = _trellis_chunk(G[f0 : f0 + fb], S, partner)
    return out[0] if single else out


def _trellis_chunk(g, S, partner):
    b, n = g.shape
    seg = max(1, math.isqrt(n - 1) + 1)
    start = np.full((b, S), -np.inf)
    start[:, 0] = 0.0

    def step_fwd(alpha, j):
        return np.logaddexp(alpha + g[:, j : j + 1], alpha[:, partner[j]])

    checkpoints = {}
    alpha = start
    for j in range(n):
        if j % seg == 0:
            checkpoints[j] = alpha
        alpha = step_fwd(alpha, j)

    out = np.empty((b, n))
    beta = start.copy()  # beta_n: end in the all-zero syndrome
    for s0 in sorted(checkpoints, reverse=True):
        s1 = min(n, s0 + seg)
        alphas = [checkpoints[s0]]
        for j in range(s0, s1 - 1):
            alphas.append(step_fwd(alphas[-1], j))
        for j in range(s1 - 1, s0 - 1, -1):
            a = alphas[j - s0]
            num = _lse(a + g[:, j : j + 1] + beta, axis=1)
            den = _lse(a + beta[:, partner[j]], axis=1)
            out[:, j] = num - den
            beta = np.logaddexp(g[:, j : j + 1] + beta, beta[:, partner[j]])
    return out


def map_bitwise(code: LinearCode, gamma) -> np.ndarray:
    """Cheaper of enumeration and trellis for this code."""
    if (1 << code.k) <= FAST_ENUM_MAX or (code.k <= code.H.rows and (1 << code.k) <= ENUM_GUARD):
        return map_bitwise_enum(code, gamma)
    if code.H.rows <= TRELLIS_MAX_CHECKS:
        return map_bitwise_trellis(code, gamma)
    return map_bitwise_enum(code, gamma)


# --------------------------------------------------------------------------
# belief propagation
# --------------------------------------------------------------------------

class _TannerGraph:
    def __init__(self, code: LinearCode):
        supports = code.row_supports
        self.m = len(supports)
        self.dc = max(len(s) for s in supports)
        self.var = np.zeros((self.m, self.dc), dtype=np.int64)
        self.mask = np.zeros((self.m, self.dc), dtype=bool)
        for i, s in enumerate(supports):
            self.var[i, : len(s)] = s
            self.mask[i, : len(s)] = True
        scatter = np.zeros((self.m * self.dc, code.n))
        flat = np.flatnonzero(self.mask.ravel())
        scatter[flat, self.var.ravel()[flat]] = 1.0
        self.scatter = scatter


def bp_sum_product(code: LinearCode, gamma, iters: int = 50) -> np.ndarray:
    """Flooding sum-product on the Tanner graph of H; returns posterior LLRs."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    G, single = _as_batch(gamma)
    graph = code.__dict__.get("_tanner")
    if graph is None:
        graph = _TannerGraph(code)
        object.__setattr__(code, "_tanner", graph)
    B = G.shape[0]
    limit = math.tanh(BP_CLIP / 2)
    v2c = np.where(graph.mask, G[:, graph.var], 0.0)
    total = G
    for _ in range(iters):
        t = np.where(graph.mask, np.tanh(np.clip(v2c, -BP_CLIP, BP_CLIP) / 2), 1.0)
        pre = np.cumprod(np.concatenate([np.ones((B, graph.m, 1)), t[:, :, :-1]], axis=2), axis=2)
        suf = _suffix_products(t)
        loo = np.clip(pre * suf, -limit, limit)
        c2v = np.where(graph.mask, 2.0 * np.arctanh(loo), 0.0)
        total = G + c2v.reshape(B, -1) @ graph.scatter
        v2c = np.where(graph.mask, total[:, graph.var] - c2v, 0.0)
    return total[0] if single else total


def _suffix_products(t):
    # product of t[..., j+1:] for each j
    rev = np.cumprod(t[:, :, ::-1], axis=2)[:, :, ::-1]
    return np.concatenate([rev[:, :, 1:], np.ones(t.shape[:2] + (1,))], axis=2)


# --------------------------------------------------------------------------
# syndrome table and Chase-II
# --------------------------------------------------------------------------

def hard_decode_syndrome_table(code: LinearCode, table: CosetTable, v):
    """``v ⊕ leader(v·Hᵀ)``; returns ``(decoded, failed)``.

    For a single word ``decoded`` is ``None`` on failure; for a batch the
    failed rows are returned unchanged and flagged in the boolean mask.
    """
    v = np.asarray(v, dtype=np.uint8)
    single = v.ndim == 1
    V = v[None, :] if single else v
    syn = syndrome_int(code, V)
    ok = table.weights[syn] >= 0
    err = unpack_patterns(table.leaders[syn], code.n)
    dec = np.where(ok[..., None], V ^ err, V)
    if single:
        return (dec[0] if ok[0] else None), bool(~ok[0])
    return dec, ~ok


def default_table(code: LinearCode, t_max: int | None = None) -> CosetTable:
    """Coset table cached on the code; ``t_max=None`` covers every coset."""
    key = ("_table", t_max)
    cache = code.__dict__.setdefault("_tables", {})
    if key not in cache:
        cache[key] = coset_leader_table(code, code.n if t_max is None else t_max)
    return cache[key]


@dataclass
class ChaseResult:
    decision: np.ndarray | None
    candidates: np.ndarray  # (c, n) distinct codewords in test-pattern order
    metrics: np.ndarray  # (c,)
    soft: np.ndarray | None = None

    @property
    def failed(self) -> bool:
        return self.decision is None


def correlation(gamma, c) -> np.ndarray:
    """M(c) = sum_i gamma_i (1 - 2 c_i)."""
    return np.sum(np.asarray(gamma) * (1.0 - 2.0 * np.asarray(c, dtype=np.float64)), axis=-1)


def _chase_candidates(code, G, p, table):
    B, n = G.shape
    p = min(p, n)
    hard = (G < 0).astype(np.uint8)
    order = np.argsort(np.abs(G), axis=1, kind="stable")[:, :p]
    pats = ((np.arange(1 << p)[:, None] >> np.arange(p)) & 1).astype(np.uint8)  # (P, p)
    flips = np.zeros((B, 1 << p, n), dtype=np.uint8)
    rows = np.arange(B)[:, None, None]
    flips[rows, np.arange(1 << p)[None, :, None], order[:, None, :]] = pats[None, :, :]
    trial = hard[:, None, :] ^ flips
    dec, fail = hard_decode_syndrome_table(code, table, trial.reshape(-1, n))
    cands = dec.reshape(B, 1 << p, n)
    valid = ~fail.reshape(B, 1 << p)
    metrics = np.where(valid, np.einsum("bn,bpn->bp", G, 1.0 - 2.0 * cands), -np.inf)
    return cands, metrics, valid


def chase2(code: LinearCode, gamma, p: int = 4, table: CosetTable | None = None) -> ChaseResult:
    """Chase-II on a single LLR vector: all 2^p flips of the p least reliable bits."""
    if p > 16:
        raise ValueError("p must be <= 16")
    table = table or default_table(code, code.meta.get("t"))
    g = np.asarray(gamma, dtype=np.float64)
    cands, metrics, valid = _chase_candidates(code, g[None, :], p, table)
    cands, metrics, valid = cands[0][valid[0]], metrics[0][valid[0]], valid[0]
    if cands.shape[0] == 0:
        return ChaseResult(None, np.zeros((0, code.n), np.uint8), np.zeros(0))
    _, first = np.unique(cands, axis=0, return_index=True)
    keep = np.sort(first)
    cands, metrics = cands[keep], metrics[keep]
    best = int(np.argmax(metrics))
    return ChaseResult(cands[best].copy(), cands, metrics)


def pyndiah_soft(code: LinearCode, gamma, result: ChaseResult, iter_idx: int = 0,
                 beta_schedule=DEFAULT_BETA) -> np.ndarray:
    """Soft output from the Chase decision and its best competitor per bit."""
    if result.decision is None:
        raise ValueError("Chase result has no decision")
    beta = beta_schedule[min(iter_idx, len(beta_schedule) - 1)]
    g = np.asarray(gamma, dtype=np.float64)[None]
    return _pyndiah(g, result.decision[None], result.candidates[None], result.metrics[None], beta)[0]


def _pyndiah(g, D, cands, metrics, beta):
    # with a competitor: half the metric gap, signed by the decision; without
    # one the extrinsic part is beta * sign, i.e. the output is g + beta * sign
    sign = 1.0 - 2.0 * D
    mD = np.max(metrics, axis=1, keepdims=True)
    differs = cands != D[:, None, :]
    comp = np.max(np.where(differs, metrics[:, :, None], -np.inf), axis=1)
    have = np.isfinite(comp)
    return np.where(have, (mD - np.where(have, comp, 0.0)) / 2.0 * sign, g + beta * sign)


def chase_pyndiah(code: LinearCode, gamma, p: int = 4, table: CosetTable | None = None,
                  iter_idx: int = 0, beta_schedule=DEFAULT_BETA):
    """Batched Chase-II + Pyndiah soft output; returns ``(soft, failed)``.

    Rows with no valid candidate return their input LLRs and are flagged.
    """
    if p > 16:
        raise ValueError("p must be <= 16")
    table = table or default_table(code, code.meta.get("t"))
    G, single = _as_batch(gamma)
    B = G.shape[0]
    soft = G.copy()
    failed = np.zeros(B, dtype=bool)
    beta = beta_schedule[min(iter_idx, len(beta_schedule) - 1)]
    fb = max(1, (1 << 20) // ((1 << min(p, code.n)) * code.n))
    for f0 in range(0, B, fb):
        g = G[f0 : f0 + fb]
        cands, metrics, valid = _chase_candidates(code, g, p, table)
        ok = valid.any(axis=1)
        best = np.argmax(metrics, axis=1)
        D = cands[np.arange(g.shape[0]), best]
        out = _pyndiah(g, D, cands, metrics, beta)
        soft[f0 : f0 + fb][ok] = out[ok]
        failed[f0 : f0 + fb] = ~ok
    return (soft[0], failed[0]) if single else (soft, failed)


def chase_decide(code: LinearCode, gamma, p: int = 4, table: CosetTable | None = None):
    """Batched Chase-II hard decisions; returns ``(decisions, failed)``."""
    table = table or default_table(code, code.meta.get("t"))
    G, single = _as_batch(gamma)
    cands, metrics, valid = _chase_candidates(code, G, p, table)
    best = np.argmax(metrics, axis=1)
    D = cands[np.arange(G.shape[0]), best]
    failed = ~valid.any(axis=1)
    D = np.where(failed[:, None], (G < 0).astype(np.uint8), D)
    return (D[0], failed[0]) if single else (D, failed)
