import math

import numpy as np
import pytest

from softdec import nn, training
from softdec.autodiff import Tensor
from softdec.channel import RngStream
from softdec.decoders import map_bitwise
from softdec.gf2 import build_code, hard_syndrome
from softdec.tpc import (ChaseComponent, MapComponent, NeuralComponent, TpcCode, TpcFinetuneConfig,
                         l1_normalize, tpc_batch, tpc_decode, tpc_encode, tpc_eval_loss, tpc_finetune,
                         tpc_finetune_loss)


def hamming(m):
    return build_code(f"hamming({m})")


def spc(n):
    return build_code(f"spc({n})")


def bch(m, t):
    return build_code(f"bch({m},{t})")


def identity(A, it=0):
    a = A.data if isinstance(A, Tensor) else np.asarray(A)
    return a.copy(), np.zeros(a.shape[0], dtype=bool)


def test_encode_spc_example():
    T = TpcCode(spc(3), spc(3))
    C = tpc_encode(T, [[1, 0], [0, 1]])
    assert C.tolist() == [[1, 0, 1], [0, 1, 1], [1, 1, 0]]
    assert not tpc_encode(T, np.zeros((2, 2))).any()


@pytest.mark.parametrize("codes", [(hamming(3), hamming(3)), (spc(4), hamming(3)), (bch(4, 2), spc(3))])
def test_every_row_and_column_is_a_codeword(codes):
    T = TpcCode(*codes)
    U = RngStream(1).bits((200,) + T.info_shape)
    C = tpc_encode(T, U)
    assert C.shape == (200,) + T.shape
    assert np.array_equal(C[:, : T.info_shape[0], : T.info_shape[1]], U)
    for b in range(200):
        assert not hard_syndrome(T.row_code, C[b]).any()
        assert not hard_syndrome(T.col_code, C[b].T).any()


def test_encode_shape_check():
    with pytest.raises(ValueError):
        tpc_encode(TpcCode(spc(3), spc(3)), np.zeros((3, 2)))


def test_l1_normalize_examples():
    G = np.array([[4.0, -4.0], [2.0, -6.0]])
    scaled, kappa = l1_normalize(G)
    assert float(kappa.data.squeeze()) == pytest.approx(0.25)
    assert np.array_equal(np.sign(scaled.data), np.sign(G))
    unit = np.array([[1.0, -1.0], [0.5, 1.5]])
    assert float(l1_normalize(unit)[1].data.squeeze()) == pytest.approx(1.0)
    _, k0 = l1_normalize(np.zeros((2, 2)))
    assert float(k0.data.squeeze()) == 1.0
    batch = np.stack([G, unit])
    assert l1_normalize(batch)[1].data.ravel().tolist() == pytest.approx([0.25, 1.0])


def test_identity_decoder_leaves_input_unchanged():
    T = TpcCode(hamming(3), hamming(3))
    G = np.random.default_rng(0).normal(size=(5, 7, 7))
    for N in (1, 3):
        res = tpc_decode(G, T, identity, identity, [1.0] * N, [1.0] * N)
        assert np.array_equal(res.gamma_hat, G)


def test_zero_alpha_keeps_extrinsics_zero():
    T = TpcCode(hamming(3), hamming(3))
    G = np.random.default_rng(1).normal(size=(4, 7, 7))
    seen = []

    def recording(code):
        inner = MapComponent(code)

        def call(A, it=0):
            seen.append(np.asarray(A.data if isinstance(A, Tensor) else A).copy())
            return inner(A, it)
        return call

    res = tpc_decode(G, T, recording(T.col_code), recording(T.row_code), [0.0, 0.0], [0.0, 0.0])
    # every decoder call sees the raw channel LLRs (transposed for columns)
    for i, A in enumerate(seen):
        assert np.array_equal(A, np.swapaxes(G, 1, 2) if i % 2 == 0 else G)
    assert np.array_equal(res.gamma_hat, G)


def test_first_half_iteration_is_plain_column_decode():
    T = TpcCode(hamming(3), hamming(3))
    G = np.random.default_rng(2).normal(1, 2, (3, 7, 7))
    res = tpc_decode(G, T, MapComponent(T.col_code), MapComponent(T.row_code), [1.0], [1.0])
    cols = map_bitwise(T.col_code, np.swapaxes(G, 1, 2).reshape(-1, 7)).reshape(3, 7, 7)
    assert np.allclose(np.asarray(getattr(res.outputs[0], 'data', res.outputs[0])), np.swapaxes(cols, 1, 2))


def test_map_tpc_is_deterministic():
    T = TpcCode(spc(3), spc(3))
    G = np.random.default_rng(3).normal(1, 1, (10, 3, 3))
    a = tpc_decode(G, T, MapComponent(spc(3)), MapComponent(spc(3)), [1.0, 1.0], [1.0, 1.0])
    b = tpc_decode(G, T, MapComponent(spc(3)), MapComponent(spc(3)), [1.0, 1.0], [1.0, 1.0])
    assert a.gamma_hat.tobytes() == b.gamma_hat.tobytes()
    assert len(a.outputs) == 4


def test_single_matrix_input():
    T = TpcCode(spc(3), spc(3))
    G = np.random.default_rng(4).normal(size=(3, 3))
    res = tpc_decode(G, T, MapComponent(spc(3)), MapComponent(spc(3)), [0.5], [0.5])
    assert res.gamma_hat.shape == (3, 3)


def test_alpha_count_checked():
    T = TpcCode(spc(3), spc(3))
    with pytest.raises(ValueError):
        tpc_decode(np.zeros((1, 3, 3)), T, identity, identity, [1.0], [1.0], N=2)


def test_chase_component_shapes():
    code = bch(4, 2)
    T = TpcCode(code, code)
    _, C, G = tpc_batch(T, 4, (3.0, 3.0), RngStream(5))
    D = ChaseComponent(code)
    res = tpc_decode(G, T, D, D, [0.5, 0.5], [0.5, 0.5])
    assert res.gamma_hat.shape == (4, 15, 15) and np.all(np.isfinite(res.gamma_hat))


def test_finetune_loss_examples():
    C = np.zeros((2, 3, 3))
    good = [np.full((2, 3, 3), 50.0)] * 4
    assert float(tpc_finetune_loss(good, C).data) < 1e-12
    zero = [np.zeros((2, 3, 3))] * 2
    assert float(tpc_finetune_loss(zero, C).data) == pytest.approx(math.log(2) / 2)
    # weights e^0..e^3 for N=2: only the last output is wrong
    outs = [np.full((1, 1, 1), 60.0)] * 3 + [np.zeros((1, 1, 1))]
    want = math.e**3 * math.log(2) / (4 * sum(math.e**j for j in range(4)))
    assert float(tpc_finetune_loss(outs, np.zeros((1, 1, 1))).data) == pytest.approx(want)
    with pytest.raises(ValueError):
        tpc_finetune_loss([], C)


def _small_model():
    code = hamming(3)
    m = nn.DecoderModel.init(code, L=1, T=2, h=8, seed=0)
    cfg = training.TrainConfig(batch_size=256, epochs_bce=2, steps_per_epoch=30, val_frames=128, seed=0)
    return training.train(m, cfg)[0]


def test_finetune_zero_lr_is_a_no_op():
    model = _small_model()
    T = TpcCode(model.code, model.code)
    cfg = TpcFinetuneConfig(N=2, lr=0.0, epochs=2, batch=8)
    tuned, a_c, a_r, hist = tpc_finetune(model, T, cfg)
    assert a_c.tolist() == pytest.approx([0.7, 0.7]) and a_r.tolist() == pytest.approx([0.7, 0.7])
    for a, b in zip(model.params(), tuned.params()):
        assert np.array_equal(a.data, b.data)
    assert len(hist.rows) == 2


def test_finetune_lowers_heldout_loss():
    model = _small_model()
    T = TpcCode(model.code, model.code)
    cfg = TpcFinetuneConfig(N=2, lr=3e-3, epochs=40, batch=64, esn0_range_db=(1.0, 1.0))
    _, C, G = tpc_batch(T, 512, (1.0, 1.0), RngStream(123, 9))
    before = tpc_eval_loss(model, T, [0.7, 0.7], [0.7, 0.7], C, G)
    tuned, a_c, a_r, hist = tpc_finetune(model, T, cfg)
    after = tpc_eval_loss(tuned, T, a_c, a_r, C, G)
    assert after < before
    assert np.all(np.isfinite(a_c)) and np.all(np.isfinite(a_r))
    head = hist.to_csv().splitlines()[0]
    assert head == "epoch,loss,alpha_c1,alpha_c2,alpha_r1,alpha_r2"


def test_neural_component_rescales_output():
    model = _small_model()
    D = NeuralComponent(model)
    G = np.random.default_rng(6).normal(2, 1, (2, 7, 7)).astype(np.float32)
    out, failed = D(G)
    scaled, kappa = l1_normalize(G)
    direct = nn.nn_soft(model)(scaled.data.reshape(-1, 7)).reshape(G.shape) / kappa.data
    assert np.allclose(out.data, direct, atol=1e-4)
    assert not failed.any()


def test_non_systematic_component_rejected():
    from softdec.gf2 import CodeError
    with pytest.raises(CodeError):
        TpcCode(build_code("hamming(3)", systematic=False), hamming(3))
