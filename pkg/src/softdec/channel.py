"""BPSK over AWGN: SNR conversion, modulation, noise and channel LLRs.

Sign convention throughout the package: a positive LLR favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("noise variance must be positive")

    @classmethod
    def from_esn0_db(cls, esn0_db: float) -> "ChannelParams":
        return cls(esn0_db_to_sigma2(esn0_db))

    @property
    def esn0_db(self) -> float:
        return sigma2_to_esn0_db(self.sigma2)


def esn0_db_to_sigma2(esn0_db):
    """Es/N0 = 1 / (2 sigma^2) with Es/N0 given in dB."""
    return 1.0 / (2.0 * 10.0 ** (np.asarray(esn0_db, dtype=np.float64) / 10.0))


def sigma2_to_esn0_db(sigma2):
    return 10.0 * np.log10(1.0 / (2.0 * np.asarray(sigma2, dtype=np.float64)))


def bpsk(c) -> np.ndarray:
    """Map bits to +-1: 0 -> +1, 1 -> -1."""
    c = np.asarray(c)
    if c.size and not np.all((c == 0) | (c == 1)):
        raise ValueError("bpsk expects bits")
    return 1.0 - 2.0 * c.astype(np.float64)


class RngStream:
    """Counter-based Philox stream keyed by ``seed``.

    ``stream_id`` occupies the top 64-bit word of the 256-bit Philox counter,
    so distinct streams are 2**192 blocks apart and never overlap in practice.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self.stream_id = int(stream_id) & (2**64 - 1)
        counter = np.array([0, 0, 0, self.stream_id], dtype=np.uint64)
        key = np.array([self.seed, 0x5DEECE66D], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(counter=counter, key=key))

    def normal(self, size, dtype=np.float64) -> np.ndarray:
        return self.gen.standard_normal(size, dtype=dtype)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.gen.uniform(low, high, size)

    def bits(self, size) -> np.ndarray:
        return self.gen.integers(0, 2, size=size, dtype=np.uint8)

    def spawn(self, sub_id: int) -> "RngStream":
        """Derived stream for a sub-task; keyed on (seed, stream_id, sub_id)."""
        mixed = np.random.SeedSequence([self.seed, self.stream_id, int(sub_id)]).generate_state(1, np.uint64)[0]
        return RngStream(int(mixed), sub_id)


def rng_stream(seed: int, stream_id: int = 0) -> RngStream:
    return RngStream(seed, stream_id)


def transmit(x, params: ChannelParams | float, rng: RngStream) -> np.ndarray:
    """``y = x + z`` with ``z ~ N(0, sigma2)``; sigma2 may broadcast per frame."""
    sigma2 = params.sigma2 if isinstance(params, ChannelParams) else params
    x = np.asarray(x, dtype=np.float64)
    sigma = np.sqrt(np.asarray(sigma2, dtype=np.float64))
    return x + sigma * rng.normal(x.shape)


def channel_llr(y, sigma2) -> np.ndarray:
    """gamma_i = 2 y_i / sigma2."""
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if np.any(sigma2 <= 0):
        raise ValueError("noise variance must be positive")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma2
