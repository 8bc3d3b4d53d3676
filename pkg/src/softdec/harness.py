"""Monte-Carlo BER/FER engine, soft-output statistics and histograms."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .autodiff import Tensor
from .channel import RngStream, esn0_db_to_sigma2
from .decoders import (bp_sum_product, chase_decide, default_table, hard_decode_syndrome_table,
                       map_bitwise, map_bitwise_enum, map_bitwise_trellis)
from .gf2 import LinearCode, encode
from .tpc import TpcCode, tpc_decode, tpc_encode

Z95 = 1.959963984540054


def wilson(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (max(0.0, centre - half), min(1.0, centre + half))


# --------------------------------------------------------------------------
# schemes: what gets encoded, sent and decoded per frame
# --------------------------------------------------------------------------

def soft_to_hard(soft_fn):
    def decide(gamma):
        return (np.asarray(soft_fn(gamma)) < 0).astype(np.uint8), np.zeros(len(gamma), dtype=bool)
    return decide


def block_decoder(code: LinearCode, name: str, *, bp_iters: int = 50, chase_p: int = 4,
                  table_t: int | None = None, model: nn.DecoderModel | None = None):
    """Hard-decision callable ``gamma (B, n) -> (bits (B, n), failed (B,))``."""
    if name == "hard":
        return lambda g: ((g < 0).astype(np.uint8), np.zeros(len(g), dtype=bool))
    if name == "map":
        return soft_to_hard(lambda g: map_bitwise(code, g))
    if name == "map-enum":
        return soft_to_hard(lambda g: map_bitwise_enum(code, g))
    if name == "map-trellis":
        return soft_to_hard(lambda g: map_bitwise_trellis(code, g))
    if name == "bp":
        return soft_to_hard(lambda g: bp_sum_product(code, g, bp_iters))
    if name == "table":
        table = default_table(code, table_t)
        return lambda g: hard_decode_syndrome_table(code, table, (g < 0).astype(np.uint8))
    if name == "chase":
        table = default_table(code, code.meta.get("t") if table_t is None else table_t)
        return lambda g: chase_decide(code, g, chase_p, table)
    if name == "nn":
        if model is None:
            raise ValueError("decoder 'nn' needs a model checkpoint")
        return soft_to_hard(nn.nn_soft(model))
    raise ValueError(f"unknown decoder {name!r}")


@dataclass
class BlockScheme:
    code: LinearCode
    decide: object
    name: str = ""

    @property
    def k_info(self) -> int:
        return self.code.k

    taps = (0,)

    def run_block(self, esn0_db: float, B: int, rng: RngStream):
        u = rng.bits((B, self.code.k))
        c = encode(self.code, u)
        sigma2 = float(esn0_db_to_sigma2(esn0_db))
        y = (1.0 - 2.0 * c) + math.sqrt(sigma2) * rng.normal(c.shape)
        hard, failed = self.decide(2.0 * y / sigma2)
        wrong = hard[:, self.code.info_positions] != u
        wrong[failed] = True
        return (np.array([wrong.sum()]), np.array([wrong.any(axis=1).sum()]), np.array([failed.sum()]))


@dataclass
class TpcScheme:
    """TPC over AWGN; counts errors after every iteration (one tap each)."""

    tpc: TpcCode
    D_c: object
    D_r: object
    alpha_c: list
    alpha_r: list
    name: str = ""

    @property
    def N(self) -> int:
        return len(self.alpha_c)

    @property
    def taps(self):
        return tuple(range(self.N))

    @property
    def k_info(self) -> int:
        k1, k2 = self.tpc.info_shape
        return k1 * k2

    def run_block(self, esn0_db: float, B: int, rng: RngStream):
        k1, k2 = self.tpc.info_shape
        U = rng.bits((B, k1, k2))
        C = tpc_encode(self.tpc, U)
        sigma2 = float(esn0_db_to_sigma2(esn0_db))
        y = (1.0 - 2.0 * C) + math.sqrt(sigma2) * rng.normal(C.shape)
        res = tpc_decode(2.0 * y / sigma2, self.tpc, self.D_c, self.D_r, self.alpha_c, self.alpha_r)
        bit_err, frame_err = [], []
        for i in range(self.N):
            out = res.outputs[2 * i + 1]
            out = out.data if isinstance(out, Tensor) else out
            wrong = (np.asarray(out)[:, :k1, :k2] < 0) != U.astype(bool)
            if i == self.N - 1:
                wrong[res.failed] = True
            bit_err.append(wrong.sum())
            frame_err.append(wrong.any(axis=(1, 2)).sum())
        return np.array(bit_err), np.array(frame_err), np.array([res.failed.sum()] * self.N)


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

@dataclass
class SimResult:
    esn0_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    failures: int
    k: int
    wall_time: float = 0.0
    tap: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.k) if self.frames else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ber_ci(self):
        return wilson(self.bit_errors, self.frames * self.k)

    @property
    def fer_ci(self):
        return wilson(self.frame_errors, self.frames)

    @property
    def ber_sigma(self) -> float:
        n = self.frames * self.k
        return math.sqrt(max(self.ber * (1 - self.ber), 1.0 / n) / n) if n else 1.0


@dataclass
class SimSetup:
    esn0_db: list
    max_frames: int = 100_000
    target_frame_errors: int | None = 100
    block_frames: int = 1000
    workers: int = 1
    meta: dict = field(default_factory=dict)


FAILURE_CONVENTION = "decoder failure counts as a frame error with every information bit wrong"


def simulate(scheme, setup: SimSetup, seed: int) -> list[SimResult]:
    """Monte-Carlo over the SNR grid; returns one result per (point, tap).

    Frames are processed in blocks; block ``b`` at grid point ``p`` always uses
    stream ``(seed, p << 32 | b)``. Blocks are aggregated in index order and the
    run stops after the first block at which the stop rule fires, so results
    are identical for any worker count.
    """
    results = []
    taps = scheme.taps
    pool = ThreadPoolExecutor(max_workers=setup.workers) if setup.workers > 1 else None
    try:
        for p, snr in enumerate(setup.esn0_db):
            t0 = time.perf_counter()
            frames = 0
            bits = np.zeros(len(taps), dtype=np.int64)
            frms = np.zeros(len(taps), dtype=np.int64)
            fails = np.zeros(len(taps), dtype=np.int64)
            b = 0
            done = False
            while not done:
                wave = []
                for _ in range(max(1, setup.workers)):
                    start = (b + len(wave)) * setup.block_frames
                    if start >= setup.max_frames:
                        break
                    size = min(setup.block_frames, setup.max_frames - start)
                    wave.append((b + len(wave), size))
                if not wave:
                    break

                def job(item, snr=snr, p=p):
                    idx, size = item
                    return scheme.run_block(snr, size, RngStream(seed, (p << 32) | idx))

                outs = list(pool.map(job, wave)) if pool else [job(w) for w in wave]
                for (idx, size), (be, fe, fl) in zip(wave, outs):
                    frames += size
                    bits += be
                    frms += fe
                    fails += fl
                    b = idx + 1
                    if (setup.target_frame_errors is not None and frms[-1] >= setup.target_frame_errors) \
                            or frames >= setup.max_frames:
                        done = True
                        break
            wall = time.perf_counter() - t0
            for t, tap in enumerate(taps):
                results.append(SimResult(float(snr), frames, int(bits[t]), int(frms[t]), int(fails[t]),
                                         scheme.k_info, wall, tap))
    finally:
        if pool:
            pool.shutdown()
    return results


BER_FIELDS = ["esn0_db", "frames", "bit_errors", "frame_errors", "ber", "fer", "ci_low", "ci_high"]


def results_csv(results, with_tap: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["iteration"] if with_tap else []) + BER_FIELDS)
    for r in results:
        lo, hi = r.ber_ci
        row = [f"{r.esn0_db:g}", r.frames, r.bit_errors, r.frame_errors,
               f"{r.ber:.6e}", f"{r.fer:.6e}", f"{lo:.6e}", f"{hi:.6e}"]
        w.writerow(([r.tap + 1] if with_tap else []) + row)
    return buf.getvalue()


def snr_at_ber(results, target: float) -> float | None:
    """Es/N0 at which the BER curve crosses ``target`` (log-linear interpolation)."""
    pts = sorted((r.esn0_db, r.ber) for r in results)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 >= target >= y1 and y1 > 0:
            if y0 == y1:
                return x0
            f = (math.log(y0) - math.log(target)) / (math.log(y0) - math.log(y1))
            return x0 + f * (x1 - x0)
    return None


# --------------------------------------------------------------------------
# soft-output statistics
# --------------------------------------------------------------------------

@dataclass
class SoftStats:
    rows: dict  # basis -> {"mean", "var", "kl", "mse"}

    def __getitem__(self, basis):
        return self.rows[basis]

    def to_csv(self) -> str:
        lines = ["basis,mean,var,kl,mse"]
        for basis, r in self.rows.items():
            lines.append(f"{basis},{r['mean']:.8g},{r['var']:.8g},{r['kl']:.8g},{r['mse']:.8g}")
        return "\n".join(lines) + "\n"


def soft_stats(gamma_hat, gamma_star) -> SoftStats:
    """Moments, KL-style divergence and MSE of decoder LLRs against MAP LLRs.

    Rows: ``gamma_hat``, ``gamma_star``, ``difference`` (gamma_hat - gamma_star)
    and ``abs_gap`` (E|gamma_hat| - E|gamma_star| and the same for variances).
    """
    gh = np.atleast_2d(np.asarray(gamma_hat, dtype=np.float64))
    gs = np.atleast_2d(np.asarray(gamma_star, dtype=np.float64))
    if gh.shape != gs.shape:
        raise ValueError("batches must match")
    kl = float(nn.reg_kl(gs, gh).data)
    mse = float(np.mean((gs - gh) ** 2))
    diff = gh - gs
    ah, as_ = np.abs(gh), np.abs(gs)
    rows = {
        "gamma_hat": {"mean": gh.mean(), "var": gh.var(ddof=1), "kl": kl, "mse": mse},
        "gamma_star": {"mean": gs.mean(), "var": gs.var(ddof=1), "kl": 0.0, "mse": 0.0},
        "difference": {"mean": diff.mean(), "var": diff.var(ddof=1), "kl": kl, "mse": mse},
        "abs_gap": {"mean": ah.mean() - as_.mean(), "var": ah.var(ddof=1) - as_.var(ddof=1), "kl": kl, "mse": mse},
    }
    return SoftStats({b: {k: float(v) for k, v in r.items()} for b, r in rows.items()})


def histogram(samples, bins: int, range_=None):
    """Fixed-width histogram; samples outside ``range_`` land in the edge bins."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("histogram of an empty sample")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = (float(x.min()), float(x.max())) if range_ is None else map(float, range_)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.floor((x - lo) / (hi - lo) * bins).astype(np.int64), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return edges, counts


def histogram_csv(edges, counts) -> str:
    lines = ["left,right,count"]
    for l, r, c in zip(edges[:-1], edges[1:], counts):
        lines.append(f"{l:.8g},{r:.8g},{int(c)}")
    return "\n".join(lines) + "\n"
