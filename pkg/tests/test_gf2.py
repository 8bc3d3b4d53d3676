import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softdec.gf2 import (BinaryMatrix, CodeError, LinearCode, bch, bch_generator_poly, build_code,
                         coset_leader_table, encode, extended_bch, gf2_nullspace, gf2_rank, gf2_rref,
                         hamming, hard_syndrome, make_systematic, n_choose_upto, parse_alist, repetition,
                         spc, syndrome_int, unpack_patterns, write_alist)


def rank_oracle(dense):
    """Plain Gaussian elimination on rows stored as Python ints."""
    rows = [int("".join(str(int(b)) for b in r), 2) for r in np.asarray(dense)]
    rank = 0
    while rows:
        pivot = max(rows)
        rows.remove(pivot)
        if pivot == 0:
            break
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank


ALL_CODES = ["repetition(3)", "repetition(5)", "spc(3)", "spc(8)", "hamming(3)", "hamming(4)",
             "bch(4,2)", "bch(5,2)", "extended_bch(4,2)", "extended_bch(6,3)"]


def test_rref_identity():
    I = BinaryMatrix.identity(4)
    R, rank, piv = gf2_rref(I)
    assert R == I and rank == 4 and piv == [0, 1, 2, 3]


def test_rref_duplicate_rows():
    R, rank, piv = gf2_rref(BinaryMatrix.from_dense([[1, 1], [1, 1]]))
    assert R.dense().tolist() == [[1, 1], [0, 0]]
    assert rank == 1 and piv == [0]


def test_extended_bch_h_rank_matches_oracle():
    code = extended_bch(6, 3)
    assert (code.n, code.k) == (64, 45)
    assert gf2_rank(code.H) == 19
    assert rank_oracle(code.H.dense()) == 19


@given(st.integers(1, 9), st.integers(1, 70), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_rref_rank_matches_oracle(r, c, seed):
    M = np.random.default_rng(seed).integers(0, 2, (r, c))
    R, rank, piv = gf2_rref(BinaryMatrix.from_dense(M))
    assert rank == rank_oracle(M) == len(piv)
    # row-equivalent: same row space as M
    assert gf2_rank(np.vstack([M, R.dense()])) == rank


@given(st.integers(1, 6), st.integers(2, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_nullspace_is_orthogonal(r, c, seed):
    M = np.random.default_rng(seed).integers(0, 2, (r, c)).astype(np.uint8)
    N = gf2_nullspace(M)
    assert N.shape[0] == c - rank_oracle(M)
    if N.size:
        assert not np.any((M.astype(int) @ N.T.astype(int)) & 1)


def test_packed_matmul_and_mul_vec_match_dense():
    rng = np.random.default_rng(3)
    A = rng.integers(0, 2, (5, 130))
    B = rng.integers(0, 2, (130, 9))
    got = BinaryMatrix.from_dense(A).matmul(BinaryMatrix.from_dense(B)).dense()
    assert np.array_equal(got, (A @ B) & 1)
    v = rng.integers(0, 2, 130)
    assert np.array_equal(BinaryMatrix.from_dense(A).mul_vec(v), (A @ v) & 1)


@pytest.mark.parametrize("spec", ALL_CODES)
def test_constructed_codes_are_consistent(spec):
    code = build_code(spec)
    code.check()
    G, H = code.G.dense().astype(int), code.H.dense().astype(int)
    assert not np.any((G @ H.T) & 1)
    assert rank_oracle(G) == code.k
    assert rank_oracle(H) == code.n - code.k
    assert code.is_systematic()
    assert all(len(s) > 0 for s in code.row_supports)


def test_build_code_dimensions():
    assert (build_code("repetition(3)").n, build_code("repetition(3)").k) == (3, 1)
    c = build_code("extended_bch(6,3)")
    assert (c.n, c.k) == (64, 45)
    c = build_code("bch(4,2)")
    assert (c.n, c.k) == (15, 7)
    assert c.meta["generator_poly"].bit_length() - 1 == 8


def test_bch_generator_is_product_of_minimal_polynomials():
    # independent oracle: g must vanish at alpha^1..alpha^(2t) in GF(16) with x^4+x+1
    g = bch_generator_poly(4, 2)
    exp = [1]
    for _ in range(14):
        x = exp[-1] << 1
        if x & 0x10:
            x ^= 0b10011
        exp.append(x)

    def gf_mul(a, b):
        if a == 0 or b == 0:
            return 0
        return exp[(exp.index(a) + exp.index(b)) % 15]

    for i in range(1, 5):
        acc = 0
        for d in range(g.bit_length()):
            if (g >> d) & 1:
                acc ^= exp[(i * d) % 15]
        assert acc == 0
    assert g == 0b111010001  # x^8 + x^7 + x^6 + x^4 + 1
    assert gf_mul(exp[3], exp[14]) == exp[2]


def test_unknown_spec_rejected():
    with pytest.raises(CodeError):
        build_code("turbo(3)")
    with pytest.raises(CodeError):
        build_code("bch(4)")


def test_make_systematic_examples():
    rep = repetition(3)
    assert rep.G.dense().tolist() == [[1, 1, 1]]
    assert make_systematic(rep) is rep
    s = spc(3)
    assert s.G.dense().tolist() == [[1, 0, 1], [0, 1, 1]]
    assert make_systematic(s) is s
    cyc = build_code("hamming(3)", systematic=False)
    sys_ = make_systematic(cyc)
    assert sys_.is_systematic()
    assert not np.any((sys_.G.dense().astype(int) @ sys_.H.dense().T.astype(int)) & 1)
    # same code: the systematic generator spans the (permuted) original code
    orig = cyc.G.dense()[:, list(sys_.perm)]
    assert gf2_rank(np.vstack([orig, sys_.G.dense()])) == 4


def test_make_systematic_with_column_permutation():
    G = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=np.uint8)
    code = LinearCode(4, 2, BinaryMatrix.from_dense(G), BinaryMatrix.from_dense(gf2_nullspace(G)), "perm")
    s = make_systematic(code)
    assert s.is_systematic()
    assert sorted(s.perm) == [0, 1, 2, 3] and s.perm != (0, 1, 2, 3)
    assert np.array_equal(s.G.dense(), G[:, list(s.perm)])


def test_make_systematic_rejects_rank_deficiency():
    G = BinaryMatrix.from_dense([[1, 1, 0], [1, 1, 0]])
    H = BinaryMatrix.from_dense([[1, 1, 0]])
    bad = LinearCode.__new__(LinearCode)
    object.__setattr__(bad, "n", 3)
    object.__setattr__(bad, "k", 2)
    object.__setattr__(bad, "G", G)
    object.__setattr__(bad, "H", H)
    object.__setattr__(bad, "perm", (0, 1, 2))
    object.__setattr__(bad, "meta", {})
    object.__setattr__(bad, "name", "bad")
    with pytest.raises(CodeError):
        make_systematic(bad)


def test_encode_examples():
    assert encode(repetition(3), [1]).tolist() == [1, 1, 1]
    assert encode(spc(3), [1, 0]).tolist() == [1, 0, 1]
    h = hamming(3)
    assert encode(h, np.zeros(4, np.uint8)).tolist() == [0] * 7
    with pytest.raises(CodeError):
        encode(h, [1, 0, 1])


@pytest.mark.parametrize("spec", ["hamming(3)", "bch(4,2)", "extended_bch(6,3)"])
def test_encode_is_linear(spec):
    code = build_code(spec)
    rng = np.random.default_rng(0)
    u, v = rng.integers(0, 2, (2, 50, code.k))
    assert np.array_equal(encode(code, u ^ v), encode(code, u) ^ encode(code, v))
    assert not np.any(hard_syndrome(code, encode(code, u)))


def test_hard_syndrome_examples():
    rep = repetition(3)
    assert rep.H.dense().tolist() == [[1, 1, 0], [0, 1, 1]]
    assert hard_syndrome(rep, [1, 0, 0]).tolist() == [1, 0]
    h = hamming(3)
    c = encode(h, [1, 0, 1, 1])
    assert not hard_syndrome(h, c).any()
    for j in range(7):
        v = c.copy()
        v[j] ^= 1
        assert np.array_equal(hard_syndrome(h, v), h.H.dense()[:, j])
    with pytest.raises(CodeError):
        hard_syndrome(h, [0, 1])


def test_syndrome_int_matches_bits():
    code = bch(4, 2)
    v = np.random.default_rng(1).integers(0, 2, (20, 15))
    bits = hard_syndrome(code, v).astype(np.int64)
    assert np.array_equal(syndrome_int(code, v), (bits << np.arange(code.m)).sum(axis=1))


def test_coset_table_small_cases():
    h = hamming(3)
    t = coset_leader_table(h, 1)
    assert t.covered == 8
    assert t.lookup(0).tolist() == [0] * 7
    for s in range(8):
        e = t.lookup(s)
        assert e.sum() <= 1
        assert int(syndrome_int(h, e)) == s


@pytest.mark.parametrize("spec,t", [("hamming(3)", 1), ("bch(4,2)", 4), ("spc(5)", 1), ("repetition(5)", 2)])
def test_coset_leaders_are_minimum_weight(spec, t):
    code = build_code(spec)
    table = coset_leader_table(code, t)
    best = {}
    for pat in itertools.product([0, 1], repeat=code.n):
        s = int(syndrome_int(code, np.array(pat)))
        best[s] = min(best.get(s, code.n + 1), sum(pat))
    for s, w in best.items():
        if w <= t:
            assert table.weights[s] == w
            assert table.lookup(s).sum() == w
            assert int(syndrome_int(code, table.lookup(s))) == s
        else:
            assert table.weights[s] == -1


def test_extended_bch_coset_coverage():
    code = extended_bch(6, 3)
    table = coset_leader_table(code, 3)
    assert table.covered >= n_choose_upto(64, 3) == 1 + 64 + math.comb(64, 2) + math.comb(64, 3)
    sample = np.flatnonzero(table.weights >= 0)[::997]
    pats = unpack_patterns(table.leaders[sample], 64)
    assert np.array_equal(syndrome_int(code, pats), sample)


def test_alist_roundtrip_small():
    M = BinaryMatrix.from_dense([[1, 0, 1], [0, 1, 1]])
    assert parse_alist(write_alist(M)) == M


def test_alist_max_degree_too_small():
    text = "3 2\n1 2\n1 1 2\n2 2\n1 0\n2 0\n1 2\n1 3\n2 3\n"
    with pytest.raises(CodeError, match="maximum degree"):
        parse_alist(text)


@pytest.mark.parametrize("bad", ["", "3 2\n2 2\n", "3 2\n1 2\n1 1 1\n2 1\n1\n2\n3\n1 2\n3 0\n",
                                 "3 2\n1 2\n1 1 1\n2 1\n1\n2\n9\n1 2\n3 0\n"])
def test_alist_malformed(bad):
    with pytest.raises(CodeError):
        parse_alist(bad)


def test_alist_hamming_preserves_syndromes():
    h = hamming(3)
    H2 = parse_alist(write_alist(h.H))
    v = np.random.default_rng(4).integers(0, 2, (100, 7))
    assert np.array_equal((v @ H2.dense().T.astype(int)) & 1, hard_syndrome(h, v))


def test_from_alist_spec(tmp_path):
    p = tmp_path / "h.alist"
    p.write_text(write_alist(bch(4, 2).H))
    code = build_code(f"from_alist({p})")
    assert (code.n, code.k) == (15, 7)
    code.check()
