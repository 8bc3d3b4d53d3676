"""GF(2) linear algebra and binary linear block codes.

Matrices are kept bit-packed (64-bit words, row-major, LSB-first inside a
word) in :class:`BinaryMatrix`; a dense ``uint8`` view is cached for the
batched numpy paths used by the decoders and the Monte-Carlo harness.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WORD = 64

# Primitive polynomials, bit i = coefficient of x^i.
PRIMITIVE_POLYS = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
}


class CodeError(ValueError):
    """Raised for malformed code specifications, matrices or alist text."""


def _pack_rows(dense: np.ndarray) -> np.ndarray:
    rows, cols = dense.shape
    nwords = max(1, -(-cols // WORD))
    padded = np.zeros((rows, nwords * WORD), dtype=np.uint8)
    padded[:, :cols] = dense
    # little-endian bit order: column j -> word j // 64, bit j % 64
    bytes_ = np.packbits(padded, axis=1, bitorder="little")
    return bytes_.view("<u8").reshape(rows, nwords).astype(np.uint64)


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    """Bit-packed GF(2) matrix."""

    rows: int
    cols: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        nwords = max(1, -(-self.cols // WORD))
        if self.bits.shape != (self.rows, nwords) or self.bits.dtype != np.uint64:
            raise CodeError("packed storage does not match matrix dimensions")
        self.bits.setflags(write=False)

    @classmethod
    def from_dense(cls, a) -> "BinaryMatrix":
        a = np.asarray(a)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2:
            raise CodeError("expected a 2-D array")
        if a.size and not np.all((a == 0) | (a == 1)):
            raise CodeError("entries must be 0 or 1")
        a = a.astype(np.uint8)
        return cls(a.shape[0], a.shape[1], _pack_rows(a))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinaryMatrix":
        return cls.from_dense(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "BinaryMatrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def dense(self) -> np.ndarray:
        """Dense ``uint8`` copy of the matrix."""
        cached = self.__dict__.get("_dense")
        if cached is None:
            as_bytes = np.ascontiguousarray(self.bits.astype("<u8")).view(np.uint8)
            full = np.unpackbits(as_bytes.reshape(self.rows, -1), axis=1, bitorder="little")
            cached = full[:, : self.cols].copy()
            cached.setflags(write=False)
            object.__setattr__(self, "_dense", cached)
        return cached

    def __getitem__(self, idx):
        i, j = idx
        return int((int(self.bits[i, j // WORD]) >> (j % WORD)) & 1)

    def __eq__(self, other):
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.rows, self.cols, self.bits.tobytes()))

    def T(self) -> "BinaryMatrix":
        return BinaryMatrix.from_dense(self.dense().T)

    def row_support(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.dense()[i])]

    def matmul(self, other: "BinaryMatrix") -> "BinaryMatrix":
        if self.cols != other.rows:
            raise CodeError(f"shape mismatch {self.shape} @ {other.shape}")
        prod = self.dense().astype(np.int64) @ other.dense().astype(np.int64)
        return BinaryMatrix.from_dense(prod & 1)

    def mul_vec(self, v) -> np.ndarray:
        """Return ``M @ v`` over GF(2) via word-wise AND and popcount parity."""
        v = np.asarray(v, dtype=np.uint8).reshape(-1)
        if v.size != self.cols:
            raise CodeError(f"vector length {v.size} != {self.cols}")
        packed = _pack_rows(v[None, :])[0]
        anded = self.bits & packed[None, :]
        return (np.bitwise_count(anded).sum(axis=1) & 1).astype(np.uint8)


def gf2_rref(M) -> tuple[BinaryMatrix, int, list[int]]:
    """Reduced row echelon form over GF(2).

    Returns ``(rref, rank, pivots)``; the first ``rank`` rows of ``rref`` are
    the pivot rows and ``pivots[i]`` is the pivot column of row ``i``.
    """
    a = M.dense() if isinstance(M, BinaryMatrix) else np.asarray(M, dtype=np.uint8)
    if a.size == 0:
        raise CodeError("empty matrix")
    R = (a.astype(np.uint8) & 1).copy()
    m, n = R.shape
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.flatnonzero(R[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        hits = np.flatnonzero(R[:, c])
        hits = hits[hits != r]
        R[hits] ^= R[r]
        pivots.append(c)
        r += 1
    return BinaryMatrix.from_dense(R), len(pivots), pivots


def gf2_rank(M) -> int:
    return gf2_rref(M)[1]


def gf2_nullspace(M) -> np.ndarray:
    """Basis of the right null space of ``M`` (rows of the returned array)."""
    R, rank, pivots = gf2_rref(M)
    R = R.dense()
    n = R.shape[1]
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for b, f in enumerate(free):
        basis[b, f] = 1
        for i, p in enumerate(pivots):
            basis[b, p] = R[i, f]
    return basis


def _int_of_bits(bits) -> int:
    out = 0
    for i, b in enumerate(bits):
        if b:
            out |= 1 << i
    return out


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Binary linear ``[n, k]`` code with generator and parity-check matrices.

    ``perm`` maps coordinates of this code to the coordinates of the code it
    was derived from (``make_systematic`` may reorder columns); it is the
    identity for freshly built codes.
    """

    n: int
    k: int
    G: BinaryMatrix
    H: BinaryMatrix
    name: str = ""
    meta: dict = field(default_factory=dict)
    perm: tuple = ()

    def __post_init__(self):
        if self.G.shape != (self.k, self.n):
            raise CodeError(f"G has shape {self.G.shape}, expected ({self.k}, {self.n})")
        if self.H.shape != (self.n - self.k, self.n) and not (
            self.H.rows >= self.n - self.k and self.H.cols == self.n
        ):
            raise CodeError(f"H has shape {self.H.shape}, expected ({self.n - self.k}, {self.n})")
        if not self.perm:
            object.__setattr__(self, "perm", tuple(range(self.n)))

    @property
    def m(self) -> int:
        """Number of parity checks (rows of H)."""
        return self.H.rows

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def row_supports(self) -> list[list[int]]:
        cached = self.__dict__.get("_supports")
        if cached is None:
            cached = [self.H.row_support(i) for i in range(self.H.rows)]
            object.__setattr__(self, "_supports", cached)
        return cached

    @property
    def column_syndromes(self) -> np.ndarray:
        """Integer syndrome of each unit vector: bit i set iff H[i, j] = 1."""
        cached = self.__dict__.get("_colsyn")
        if cached is None:
            Hd = self.H.dense().astype(np.int64)
            weights = np.left_shift(np.int64(1), np.arange(self.H.rows, dtype=np.int64))
            cached = (Hd * weights[:, None]).sum(axis=0).astype(np.int64)
            cached.setflags(write=False)
            object.__setattr__(self, "_colsyn", cached)
        return cached

    def is_systematic(self) -> bool:
        return np.array_equal(self.G.dense()[:, : self.k], np.eye(self.k, dtype=np.uint8))

    @property
    def info_positions(self) -> np.ndarray:
        if not self.is_systematic():
            raise CodeError(f"{self.name or 'code'} is not in systematic form")
        return np.arange(self.k)

    def check(self) -> None:
        """Validate ``G·Hᵀ = 0``, the ranks and non-empty check supports."""
        if np.any(self.G.dense().astype(np.int64) @ self.H.dense().T.astype(np.int64) & 1):
            raise CodeError("G·Hᵀ != 0")
        if gf2_rank(self.G) != self.k:
            raise CodeError("rank(G) != k")
        if gf2_rank(self.H) != self.n - self.k:
            raise CodeError("rank(H) != n - k")
        if any(len(s) == 0 for s in self.row_supports):
            raise CodeError("H has an all-zero row")


def make_systematic(code: LinearCode) -> LinearCode:
    """Bring ``G`` to ``[I_k | P]``, permuting columns when pivots require it."""
    R, rank, pivots = gf2_rref(code.G)
    if rank < code.k:
        raise CodeError("generator matrix is rank deficient")
    Gs = R.dense()[: code.k]
    if pivots == list(range(code.k)):
        if Gs.tobytes() == code.G.dense().tobytes():
            return code
        return LinearCode(code.n, code.k, BinaryMatrix.from_dense(Gs), code.H,
                          code.name, dict(code.meta), code.perm)
    rest = [c for c in range(code.n) if c not in set(pivots)]
    order = list(pivots) + rest
    Gp = Gs[:, order]
    Hp = code.H.dense()[:, order]
    perm = tuple(code.perm[c] for c in order)
    return LinearCode(code.n, code.k, BinaryMatrix.from_dense(Gp), BinaryMatrix.from_dense(Hp),
                      code.name, dict(code.meta), perm)


def encode(code: LinearCode, u) -> np.ndarray:
    """``c = u·G`` over GF(2); ``u`` may be a single word or a batch (…, k)."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != code.k:
        raise CodeError(f"information word has length {u.shape[-1]}, expected {code.k}")
    return ((u.astype(np.int64) @ code.G.dense().astype(np.int64)) & 1).astype(np.uint8)


def hard_syndrome(code: LinearCode, v) -> np.ndarray:
    """``s = v·Hᵀ`` over GF(2) for a word or a batch of words."""
    v = np.asarray(v, dtype=np.uint8)
    if v.shape[-1] != code.n:
        raise CodeError(f"word has length {v.shape[-1]}, expected {code.n}")
    if v.ndim == 1:
        return code.H.mul_vec(v)
    return ((v.astype(np.int64) @ code.H.dense().T.astype(np.int64)) & 1).astype(np.uint8)


def syndrome_int(code: LinearCode, v) -> np.ndarray:
    """Syndromes packed into integers (bit i = check i); batched over leading axes."""
    v = np.asarray(v, dtype=np.uint8)
    return np.bitwise_xor.reduce(
        np.where(v.astype(bool), code.column_syndromes, 0), axis=-1
    )


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------

def _from_G(G, name, meta=None, H=None) -> LinearCode:
    G = np.asarray(G, dtype=np.uint8)
    k, n = G.shape
    if H is None:
        H = gf2_nullspace(G)
    code = LinearCode(n, k, BinaryMatrix.from_dense(G), BinaryMatrix.from_dense(H), name, meta or {})
    code.check()
    return code


def repetition(n: int) -> LinearCode:
    if n < 2:
        raise CodeError("repetition code needs n >= 2")
    H = np.zeros((n - 1, n), dtype=np.uint8)
    for i in range(n - 1):
        H[i, i] = H[i, i + 1] = 1
    return _from_G(np.ones((1, n), dtype=np.uint8), f"repetition({n})", {"spec": f"repetition({n})"}, H)


def spc(n: int) -> LinearCode:
    if n < 2:
        raise CodeError("single parity-check code needs n >= 2")
    G = np.concatenate([np.eye(n - 1, dtype=np.uint8), np.ones((n - 1, 1), dtype=np.uint8)], axis=1)
    return _from_G(G, f"spc({n})", {"spec": f"spc({n})"}, np.ones((1, n), dtype=np.uint8))


class GF2m:
    """Log/antilog tables for GF(2^m) with a fixed primitive polynomial."""

    def __init__(self, m: int, prim: int | None = None):
        if prim is None:
            if m not in PRIMITIVE_POLYS:
                raise CodeError(f"no primitive polynomial tabulated for m={m}")
            prim = PRIMITIVE_POLYS[m]
        self.m = m
        self.prim = prim
        self.order = (1 << m) - 1
        self.exp = [0] * (2 * self.order)
        self.log = [0] * (1 << m)
        x = 1
        for i in range(self.order):
            self.exp[i] = x
            self.log[x] = i
            x <<= 1
            if x >> m:
                x ^= prim
        if x != 1:
            raise CodeError(f"polynomial {prim:#b} is not primitive for m={m}")
        for i in range(self.order, 2 * self.order):
            self.exp[i] = self.exp[i - self.order]

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def cyclotomic_coset(self, i: int) -> list[int]:
        coset, j = [], i % self.order
        while j not in coset:
            coset.append(j)
            j = (2 * j) % self.order
        return coset

    def minimal_polynomial(self, i: int) -> int:
        """Minimal polynomial of alpha^i as a bit mask over GF(2)."""
        poly = [1]  # coefficients in GF(2^m), lowest degree first
        for j in self.cyclotomic_coset(i):
            root = self.exp[j]
            nxt = [0] * (len(poly) + 1)
            for d, a in enumerate(poly):
                nxt[d + 1] ^= a
                nxt[d] ^= self.mul(a, root)
            poly = nxt
        if any(c not in (0, 1) for c in poly):
            raise CodeError("minimal polynomial has coefficients outside GF(2)")
        return _int_of_bits(poly)


def _poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def bch_generator_poly(m: int, t: int) -> int:
    """lcm of the minimal polynomials of alpha^1..alpha^(2t)."""
    field_ = GF2m(m)
    seen: set[int] = set()
    g = 1
    for i in range(1, 2 * t + 1):
        rep = min(field_.cyclotomic_coset(i))
        if rep in seen:
            continue
        seen.add(rep)
        g = _poly_mul(g, field_.minimal_polynomial(rep))
    return g


def cyclic_code(n: int, g: int, name: str, meta=None) -> LinearCode:
    deg = g.bit_length() - 1
    k = n - deg
    if k < 1:
        raise CodeError("generator polynomial degree leaves no information bits")
    gbits = np.array([(g >> i) & 1 for i in range(deg + 1)], dtype=np.uint8)
    G = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        G[i, i : i + deg + 1] = gbits
    return _from_G(G, name, meta)


def bch(m: int, t: int) -> LinearCode:
    if t < 1:
        raise CodeError("BCH designed distance needs t >= 1")
    g = bch_generator_poly(m, t)
    n = (1 << m) - 1
    meta = {"spec": f"bch({m},{t})", "primitive_poly": PRIMITIVE_POLYS[m], "generator_poly": g, "t": t}
    return cyclic_code(n, g, f"bch({m},{t})", meta)


def hamming(m: int) -> LinearCode:
    """Cyclic Hamming code of length 2^m - 1 (BCH with t = 1)."""
    code = bch(m, 1)
    meta = dict(code.meta, spec=f"hamming({m})")
    return LinearCode(code.n, code.k, code.G, code.H, f"hamming({m})", meta)


def extend(code: LinearCode, name: str | None = None, meta=None) -> LinearCode:
    """Append an overall parity coordinate; H gains an all-ones row."""
    G = code.G.dense()
    Ge = np.concatenate([G, (G.sum(axis=1, keepdims=True) & 1).astype(np.uint8)], axis=1)
    Hd = code.H.dense()
    He = np.concatenate([Hd, np.zeros((Hd.shape[0], 1), dtype=np.uint8)], axis=1)
    He = np.concatenate([He, np.ones((1, code.n + 1), dtype=np.uint8)], axis=0)
    return _from_G(Ge, name or f"extended({code.name})", meta or {}, He)


def extended_bch(m: int, t: int) -> LinearCode:
    base = bch(m, t)
    meta = dict(base.meta, spec=f"extended_bch({m},{t})")
    return extend(base, f"extended_bch({m},{t})", meta)


def from_H(H, name: str = "custom", meta=None) -> LinearCode:
    """Code defined as the null space of ``H`` (rows of H may be dependent)."""
    Hd = H.dense() if isinstance(H, BinaryMatrix) else np.asarray(H, dtype=np.uint8)
    G = gf2_nullspace(Hd)
    n = Hd.shape[1]
    k = G.shape[0]
    code = LinearCode(n, k, BinaryMatrix.from_dense(G), BinaryMatrix.from_dense(Hd), name, meta or {})
    if np.any(G.astype(np.int64) @ Hd.T.astype(np.int64) & 1):
        raise CodeError("null-space construction failed")
    return code


_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\(\s*([^)]*)\)\s*$")


def build_code(spec: str, systematic: bool = True) -> LinearCode:
    """Build a code from a textual spec such as ``"bch(4,2)"``.

    Supported: ``repetition(n)``, ``spc(n)``, ``hamming(m)``, ``bch(m,t)``,
    ``extended_bch(m,t)`` and ``from_alist(path)``. With ``systematic`` the
    generator matrix is brought to ``[I | P]`` form.
    """
    mt = _SPEC_RE.match(spec)
    if not mt:
        raise CodeError(f"unsupported code spec {spec!r}")
    kind, args = mt.group(1), mt.group(2)
    if kind == "from_alist":
        path = args.strip().strip("'\"")
        try:
            H = parse_alist(Path(path).read_text())
        except OSError as exc:
            raise CodeError(f"cannot read alist file {path}: {exc}") from exc
        code = from_H(H, f"from_alist({path})", {"spec": spec.strip()})
    else:
        try:
            ints = [int(a) for a in args.split(",") if a.strip()]
        except ValueError:
            raise CodeError(f"non-integer arguments in {spec!r}") from None
        builders = {"repetition": (repetition, 1), "spc": (spc, 1), "hamming": (hamming, 1),
                    "bch": (bch, 2), "extended_bch": (extended_bch, 2)}
        if kind not in builders or len(ints) != builders[kind][1]:
            raise CodeError(f"unsupported code spec {spec!r}")
        code = builders[kind][0](*ints)
    if systematic:
        code = make_systematic(code)
    return code


# --------------------------------------------------------------------------
# coset leaders
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CosetTable:
    """Syndrome -> minimum-weight error pattern, for patterns up to ``t_max``.

    ``leaders[s]`` holds the pattern packed into an integer (bit j = position
    j); ``weights[s]`` is -1 when no pattern of weight <= t_max reaches s.
    """

    n: int
    t_max: int
    leaders: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def covered(self) -> int:
        return int(np.count_nonzero(self.weights >= 0))

    def lookup(self, s: int):
        """Leader bits for syndrome ``s`` or ``None`` when the coset is not covered."""
        if self.weights[s] < 0:
            return None
        pat = int(self.leaders[s])
        return np.array([(pat >> j) & 1 for j in range(self.n)], dtype=np.uint8)


MAX_TABLE_CHECKS = 24


def coset_leader_table(code: LinearCode, t_max: int) -> CosetTable:
    m = code.H.rows
    if m > MAX_TABLE_CHECKS:
        raise CodeError(f"n-k={m} exceeds the coset table guard of {MAX_TABLE_CHECKS}")
    if code.n > 64:
        raise CodeError("coset table patterns are limited to n <= 64")
    size = 1 << m
    leaders = np.zeros(size, dtype=np.uint64)
    weights = np.full(size, -1, dtype=np.int8)
    weights[0] = 0
    colsyn = code.column_syndromes
    for w in range(1, t_max + 1):
        for combo in _combinations_chunks(code.n, w):
            syn = np.bitwise_xor.reduce(colsyn[combo], axis=1)
            pats = np.bitwise_or.reduce(np.left_shift(np.uint64(1), combo.astype(np.uint64)), axis=1)
            # first pattern in BFS order wins
            uniq, first = np.unique(syn, return_index=True)
            fresh = weights[uniq] < 0
            leaders[uniq[fresh]] = pats[first[fresh]]
            weights[uniq[fresh]] = w
        if np.all(weights >= 0):
            break
    leaders.setflags(write=False)
    weights.setflags(write=False)
    return CosetTable(code.n, t_max, leaders, weights)


def _combinations_chunks(n: int, w: int, chunk: int = 1 << 16):
    it = itertools.combinations(range(n), w)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def unpack_patterns(pats: np.ndarray, n: int) -> np.ndarray:
    """Unpack integer patterns (bit j = position j) into an (..., n) bit array."""
    pats = np.asarray(pats, dtype=np.uint64)
    shifts = np.arange(n, dtype=np.uint64)
    return ((pats[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


# --------------------------------------------------------------------------
# alist
# --------------------------------------------------------------------------

def write_alist(M: BinaryMatrix) -> str:
    """Serialize a matrix in MacKay's alist layout (zero-padded index lists)."""
    d = M.dense()
    m, n = d.shape
    col_lists = [list(np.flatnonzero(d[:, j]) + 1) for j in range(n)]
    row_lists = [list(np.flatnonzero(d[i]) + 1) for i in range(m)]
    max_c = max((len(c) for c in col_lists), default=0)
    max_r = max((len(r) for r in row_lists), default=0)
    lines = [f"{n} {m}", f"{max_c} {max_r}",
             " ".join(str(len(c)) for c in col_lists),
             " ".join(str(len(r)) for r in row_lists)]
    for c in col_lists:
        lines.append(" ".join(str(x) for x in c + [0] * (max_c - len(c))))
    for r in row_lists:
        lines.append(" ".join(str(x) for x in r + [0] * (max_r - len(r))))
    return "\n".join(lines) + "\n"


def parse_alist(text: str) -> BinaryMatrix:
    """Parse alist text; column and row lists must describe the same matrix."""
    try:
        tokens = [int(t) for t in text.split()]
    except ValueError:
        raise CodeError("alist contains non-integer tokens") from None
    pos = 0

    def take(count):
        nonlocal pos
        if pos + count > len(tokens):
            raise CodeError("alist is truncated")
        out = tokens[pos : pos + count]
        pos += count
        return out

    if len(tokens) < 4:
        raise CodeError("malformed alist header")
    n, m = take(2)
    max_c, max_r = take(2)
    if n <= 0 or m <= 0 or max_c < 0 or max_r < 0:
        raise CodeError("malformed alist header")
    col_deg = take(n)
    row_deg = take(m)
    if max(col_deg) > max_c or max(row_deg) > max_r:
        raise CodeError("declared maximum degree is smaller than an actual degree")
    padded = len(tokens) - pos == n * max_c + m * max_r
    dense_c = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        idx = take(max_c if padded else col_deg[j])
        real = [i for i in idx if i != 0]
        if len(real) != col_deg[j]:
            raise CodeError(f"column {j + 1}: degree mismatch")
        for i in real:
            if not 1 <= i <= m:
                raise CodeError(f"column {j + 1}: row index {i} out of range")
            dense_c[i - 1, j] = 1
    dense_r = np.zeros((m, n), dtype=np.uint8)
    for i in range(m):
        idx = take(max_r if padded else row_deg[i])
        real = [j for j in idx if j != 0]
        if len(real) != row_deg[i]:
            raise CodeError(f"row {i + 1}: degree mismatch")
        for j in real:
            if not 1 <= j <= n:
                raise CodeError(f"row {i + 1}: column index {j} out of range")
            dense_r[i, j - 1] = 1
    if pos != len(tokens):
        raise CodeError("trailing data after alist body")
    if not np.array_equal(dense_c, dense_r):
        raise CodeError("row and column lists disagree")
    return BinaryMatrix.from_dense(dense_r)


def n_choose_upto(n: int, t: int) -> int:
    return sum(math.comb(n, w) for w in range(t + 1))
