import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softdec import autodiff as ad
from softdec import nn
from softdec.autodiff import Tensor
from softdec.channel import RngStream
from softdec.decoders import map_bitwise
from softdec.gf2 import build_code, encode, hamming, hard_syndrome, repetition


def zero_model(code, L=2, T=3, h=4):
    m = nn.DecoderModel.init(code, L=L, T=T, h=h, dtype=np.float64)
    for t in m.params():
        t.data[...] = 0.0
    return m


def test_soft_syndrome_example():
    s = nn.soft_syndrome(repetition(3), np.array([2.0, -1.0, 3.0]))
    assert s.data.tolist() == [-1.0, -1.0]


def test_soft_syndrome_positive_input():
    code = hamming(3)
    g = np.array([0.5, 2.0, 1.5, 3.0, 0.7, 0.9, 4.0])
    s = nn.soft_syndrome(code, g).data
    for i, sup in enumerate(code.row_supports):
        assert s[i] == pytest.approx(min(g[sup]))


@given(st.lists(st.floats(-20, 20).filter(lambda x: x != 0), min_size=15, max_size=15))
@settings(max_examples=60, deadline=None)
def test_soft_syndrome_sign_matches_hard_syndrome(vals):
    code = build_code("bch(4,2)")
    g = np.array(vals)
    s = nn.soft_syndrome(code, g).data
    hard = hard_syndrome(code, (g < 0).astype(np.uint8))
    assert np.array_equal(s < 0, hard.astype(bool))


def test_soft_syndrome_sign_of_zero_is_positive():
    s = nn.soft_syndrome(repetition(3), np.array([0.0, -1.0, 2.0])).data
    assert s.tolist() == [0.0, -1.0]
    assert nn.sign_pos(np.array([0.0, -0.0, -1.0, 2.0])).tolist() == [1, 1, -1, 1]


def test_build_features_examples():
    d = nn.build_features(np.array([1.0, -2.0]), np.array([0.5]))
    assert d.data.tolist() == [1.0, 2.0, 0.5]
    code = build_code("bch(4,2)")
    g = np.random.default_rng(0).normal(size=(5, 15))
    d = nn.build_features(g, nn.soft_syndrome(code, g)).data
    assert d.shape == (5, 2 * 15 - 7)
    assert np.all(d[:, :15] >= 0)


def test_features_invariant_under_codeword():
    code = build_code("bch(4,2)")
    rng = np.random.default_rng(1)
    c = encode(code, rng.integers(0, 2, (20, 7)))
    z = rng.normal(0, 0.8, c.shape)
    x = 1.0 - 2.0 * c
    g1 = 2 * (x + z) / 0.64
    g0 = 2 * (1.0 + z * x) / 0.64
    d1 = nn.build_features(g1, nn.soft_syndrome(code, g1)).data
    d0 = nn.build_features(g0, nn.soft_syndrome(code, g0)).data
    assert np.array_equal(d1, d0)


def test_gru_cell_zero_params_halves_state():
    code = hamming(3)
    m = zero_model(code, h=3)
    v = np.array([[1.0, -2.0, 0.5]])
    q = nn.gru_cell(Tensor(np.ones((1, 10))), Tensor(v), m.layers[0])
    assert np.allclose(q.data, v / 2)


def test_gru_cell_gate_at_half():
    code = hamming(3)
    m = zero_model(code, h=3)
    p = m.layers[0]
    rng = np.random.default_rng(2)
    p.W_h.data[...] = rng.normal(size=p.W_h.shape)
    d = rng.normal(size=(1, 10))
    q = nn.gru_cell(Tensor(d), Tensor(np.zeros((1, 3))), p)
    assert np.allclose(q.data, 0.5 * np.tanh(d @ p.W_h.data.T))


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_gru_cell_bounded(seed):
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=1, T=1, h=5, seed=seed % 1000, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for t in m.params():
        t.data[...] = rng.normal(0, 3, t.shape)
    q_prev = rng.normal(0, 2, (4, 5))
    q = nn.gru_cell(Tensor(rng.normal(size=(4, 10))), Tensor(q_prev), m.layers[0]).data
    assert np.all(np.abs(q) <= np.maximum(np.abs(q_prev), 1.0) + 1e-12)


def test_stacked_gru_T1_is_chained_cells():
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=3, T=1, h=4, seed=3, dtype=np.float64)
    d = Tensor(np.random.default_rng(3).normal(size=(2, 10)))
    x = d
    for layer in m.layers:
        x = nn.gru_cell(x, np.zeros((2, 4)), layer)
    assert np.allclose(nn.stacked_gru(d, m)[0].data, x.data)


def test_stacked_gru_zero_params():
    m = zero_model(hamming(3))
    outs = nn.stacked_gru(np.ones((2, 10)), m)
    assert len(outs) == 3 and all(np.all(o.data == 0) for o in outs)


def test_stacked_gru_hand_trace():
    # L=1, T=2, h=2, scalar loop written independently of the library
    code = repetition(2)  # n=2, k=1 -> features of length 3
    m = nn.DecoderModel.init(code, L=1, T=2, h=2, seed=5, dtype=np.float64)
    p = {name: t.data for name, t in m.layers[0].named()}
    d = [0.3, -0.7, 1.1]

    def sig(x):
        return 1 / (1 + math.exp(-x))

    q = [0.0, 0.0]
    trace = []
    for _ in range(2):
        g = [sig(sum(p["W_g"][u][j] * d[j] for j in range(3)) + sum(p["U_g"][u][v] * q[v] for v in range(2))
                 + p["b_g"][u]) for u in range(2)]
        r = [sig(sum(p["W_r"][u][j] * d[j] for j in range(3)) + sum(p["U_r"][u][v] * q[v] for v in range(2))
                 + p["b_r"][u]) for u in range(2)]
        qh = [math.tanh(sum(p["W_h"][u][j] * d[j] for j in range(3))
                        + sum(p["U_h"][u][v] * r[v] * q[v] for v in range(2)) + p["b_h"][u]) for u in range(2)]
        q = [g[u] * qh[u] + (1 - g[u]) * q[u] for u in range(2)]
        trace.append(q)
    outs = nn.stacked_gru(np.array([d]), m)
    assert np.allclose([o.data[0] for o in outs], trace, atol=1e-14)


def test_estimate_noise_zero_model_returns_bias():
    code = hamming(3)
    m = zero_model(code)
    m.fc_b.data[...] = np.arange(7.0)
    z = nn.estimate_noise(np.random.default_rng(0).normal(size=(3, 7)), m).data
    assert np.allclose(z, np.arange(7.0))


def test_estimate_noise_row_permutation():
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=1, T=2, h=4, seed=0, dtype=np.float64)
    g = np.random.default_rng(1).normal(size=(4, 7))
    z = nn.estimate_noise(g, m).data
    perm = np.random.default_rng(2).permutation(7)
    m.fc_W.data[...] = m.fc_W.data[perm]
    m.fc_b.data[...] = m.fc_b.data[perm]
    assert np.allclose(nn.estimate_noise(g, m).data, z[:, perm])
    assert np.all(np.isfinite(z))


def test_decode_soft_examples():
    code = repetition(2)
    m = zero_model(code)
    m.fc_b.data[...] = [0.5, 1.0]
    assert np.allclose(nn.decode_soft(np.array([[2.0, -3.0]]), m).gamma_hat, [[1.5, -2.0]])
    m.fc_b.data[...] = 0.0
    g = np.array([[0.3, -4.0]])
    assert np.array_equal(nn.decode_soft(g, m).gamma_hat, g)
    m.fc_b.data[...] = [1.0, 0.0]
    assert nn.decode_soft(g, m).gamma_hat[0, 0] < 0


def test_decode_soft_magnitude_rule():
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=1, T=2, h=4, seed=9, dtype=np.float64)
    g = np.random.default_rng(4).normal(0, 1.5, (50, 7))
    tr = nn.decode_soft(g, m)
    keep = tr.z_hat <= np.abs(g)
    assert np.allclose(np.abs(tr.gamma_hat), np.abs(np.abs(g) - tr.z_hat))
    assert np.all(np.sign(tr.gamma_hat[keep & (tr.gamma_hat != 0)]) == np.sign(g[keep & (tr.gamma_hat != 0)]))
    flip = tr.z_hat > np.abs(g)
    assert np.all(np.sign(tr.gamma_hat[flip]) == -nn.sign_pos(g)[flip])


def test_forward_matches_decode_soft():
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=2, T=2, h=6, seed=1)
    g = np.random.default_rng(5).normal(size=(8, 7)).astype(np.float32)
    assert np.allclose(nn.forward(g, m).data, nn.decode_soft(g, m).gamma_hat, atol=1e-6)
    assert np.allclose(nn.nn_soft(m, batch=3)(g), nn.decode_soft(g, m).gamma_hat, atol=1e-6)


def test_bce_examples():
    assert float(nn.bce_loss(np.zeros(5), [0, 1, 0, 1, 1]).data) == pytest.approx(math.log(2))
    assert float(nn.bce_loss(np.full(4, 60.0), np.zeros(4)).data) < 1e-12
    assert float(nn.bce_loss(np.array([-2.0]), [1]).data) == pytest.approx(-math.log(1 / (1 + math.exp(-2))))
    assert float(nn.bce_loss(np.array([-2.0]), [1]).data) == pytest.approx(0.1269, abs=1e-4)


def test_bce_finite_at_extremes():
    v = float(nn.bce_loss(np.array([-1e4, 1e4], dtype=np.float32), [0, 1]).data)
    assert math.isfinite(v) and v == pytest.approx(-math.log(1e-12), rel=1e-3)


def test_mse_examples():
    assert float(nn.reg_mse([2.0, 0.0], np.zeros(2)).data) == 2.0
    a = np.random.default_rng(0).normal(size=(3, 4))
    b = np.random.default_rng(1).normal(size=(3, 4))
    assert float(nn.reg_mse(a, a).data) == 0.0
    assert float(nn.reg_mse(a, b).data) == pytest.approx(float(nn.reg_mse(-a, -b).data))


def test_kl_examples():
    a = np.random.default_rng(0).normal(size=(3, 4))
    assert float(nn.reg_kl(a, a).data) == 0.0
    assert float(nn.reg_kl(np.array([[math.e]]), np.array([[1.0]])).data) == pytest.approx(math.e)


def test_kl_gradient_away_from_clamp():
    a = np.random.default_rng(2).normal(2, 1, (3, 5))
    b = np.random.default_rng(3).normal(2, 1, (3, 5))
    b = np.where(np.abs(b) < 0.2, 0.5, b)
    assert ad.grad_check(lambda x: nn.reg_kl(a, x), b) < 1e-6


def test_moments_examples():
    g = np.random.default_rng(0).normal(size=(4, 7))
    perm = np.random.default_rng(1).permutation(g.size)
    assert float(nn.reg_moments(g, g.ravel()[perm].reshape(g.shape)).data) == pytest.approx(0.0, abs=1e-20)
    assert float(nn.reg_moments(g, -g).data) == 0.0
    assert float(nn.reg_moments(np.ones(6), np.zeros(6), rho=0.95).data) == pytest.approx(0.95)
    with pytest.raises(ValueError):
        nn.reg_moments(g, g, rho=2.0)


def test_total_loss_examples():
    rng = np.random.default_rng(0)
    gh, gs = rng.normal(size=(4, 7)), rng.normal(size=(4, 7))
    c = np.zeros((4, 7))
    bce = float(nn.bce_loss(gh, c).data)
    assert float(nn.total_loss(gh, c, gs, "mse", alpha_reg=0.0).data) == bce
    assert float(nn.total_loss(gh, c, gh, "mse").data) == bce
    parts = {}
    val = float(nn.total_loss(gh, c, gs, "mse", alpha_reg=0.01, parts=parts).data)
    assert val == pytest.approx(parts["bce"] + 0.01 * parts["reg"])
    with pytest.raises(ValueError):
        nn.total_loss(gh, c, None, "moments")
    with pytest.raises(ValueError):
        nn.total_loss(gh, c, gs, "huber")


def test_default_alpha_weights():
    assert nn.DEFAULT_ALPHA == {"none": 0.0, "mse": 0.01, "kl": 1e10, "moments": 0.1}


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_bce_mse_moments_non_negative(seed):
    rng = np.random.default_rng(seed)
    gh, gs = rng.normal(0, 5, (3, 7)), rng.normal(0, 5, (3, 7))
    c = rng.integers(0, 2, (3, 7))
    assert float(nn.bce_loss(gh, c).data) >= 0
    assert float(nn.reg_mse(gs, gh).data) >= 0
    assert float(nn.reg_moments(gs, gh).data) >= 0


def test_kl_literal_form_can_be_negative():
    # the pointwise a·log(a/b) form is not a divergence between distributions;
    # with |gamma_hat| > |gamma_star| everywhere it is negative
    assert float(nn.reg_kl(np.ones((1, 3)), np.full((1, 3), 2.0)).data) < 0


def test_model_shapes_and_defaults():
    code = build_code("bch(4,2)")
    m = nn.DecoderModel.init(code)
    assert (m.L, m.T, m.h) == (4, 5, 75)
    assert m.fc_W.shape == (15, 75 * 5)
    assert m.dtype == np.float32
    with pytest.raises(ValueError):
        nn.estimate_noise(np.zeros((1, 7)), m)


@pytest.mark.parametrize("kind", ["none", "mse", "kl", "moments"])
def test_full_pipeline_gradient(kind):
    code = hamming(3)
    model = nn.DecoderModel.init(code, L=2, T=2, h=8, seed=1, dtype=np.float64)
    rng = RngStream(0, 0)
    gamma = 2.0 * (1.0 + rng.normal((6, 7)))
    gs = map_bitwise(code, gamma)
    err = nn.model_grad_check(model, gamma, np.zeros((6, 7)), gs, kind, alpha_reg=1.0, coords_per_param=3)
    assert err < 1e-5
