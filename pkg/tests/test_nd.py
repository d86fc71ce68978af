"""Tensor-library tests: op oracles, gradient checks, layers, checkpointing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navlab import nd
from navlab._kernels import available_backends, get_impl
from navlab.errors import ConfigurationError, UsageError
from navlab.nd import ops
from navlab.nd.tensor import Tensor

from oracles import conv2d_naive, film_scalar_loop, finite_diff, gru_hand_unrolled, relative_error


def rand(shape, rng, dtype=np.float32):
    return rng.standard_normal(shape).astype(dtype)


# -- conv2d -------------------------------------------------------------------

def test_conv_identity_kernel():
    x = Tensor(np.arange(16, dtype=np.float32).reshape(1, 4, 4))
    w = Tensor(np.ones((1, 1, 1, 1), dtype=np.float32))
    b = Tensor(np.zeros(1, dtype=np.float32))
    out = ops.conv2d(x, w, b, 1, 0)
    np.testing.assert_array_equal(out.data, x.data)


def test_conv_shape_arithmetic():
    rng = np.random.default_rng(0)
    x = Tensor(rand((3, 8, 8), rng))
    w = Tensor(rand((16, 3, 3, 3), rng))
    b = Tensor(np.zeros(16, dtype=np.float32))
    assert ops.conv2d(x, w, b, stride=2, padding=1).shape == (16, 4, 4)


@pytest.mark.parametrize("stride", [1, 2])
@pytest.mark.parametrize("pad", [0, 1])
def test_conv_matches_naive_oracle(stride, pad):
    rng = np.random.default_rng(stride * 10 + pad)
    x = rand((2, 2, 5, 5), rng, np.float64)
    w = rand((3, 2, 3, 3), rng, np.float64)
    b = rand((3,), rng, np.float64)
    got = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data
    want = conv2d_naive(x, w, b, stride, pad)
    assert np.abs(got - want).max() < 1e-6


def test_conv_channel_mismatch_raises():
    x = Tensor(np.zeros((1, 3, 4, 4), dtype=np.float32))
    w = Tensor(np.zeros((2, 4, 3, 3), dtype=np.float32))
    b = Tensor(np.zeros(2, dtype=np.float32))
    with pytest.raises(ConfigurationError):
        ops.conv2d(x, w, b, 1, 0)


def test_conv_backends_agree():
    if "cython" not in available_backends():
        pytest.skip("compiled kernels unavailable")
    rng = np.random.default_rng(3)
    x = rand((2, 4, 9, 9), rng)
    w = rand((6, 4, 3, 3), rng)
    b = rand((6,), rng)
    cy, py = get_impl("cython"), get_impl("python")
    for s in (1, 2):
        for p in (0, 1):
            oc = cy.conv2d_forward(x, w, b, s, p)
            on = py.conv2d_forward(x, w, b, s, p)
            np.testing.assert_allclose(oc, on, atol=2e-5)
            dout = rand(oc.shape, rng)
            np.testing.assert_allclose(
                cy.conv2d_backward_input(dout, w, s, p, 9, 9),
                py.conv2d_backward_input(dout, w, s, p, 9, 9), atol=2e-5)
            dwc, dbc = cy.conv2d_backward_params(dout, x, 3, 3, s, p)
            dwn, dbn = py.conv2d_backward_params(dout, x, 3, 3, s, p)
            np.testing.assert_allclose(dwc, dwn, atol=5e-5)
            np.testing.assert_allclose(dbc, dbn, atol=5e-5)


# -- film_affine ---------------------------------------------------------------

def test_film_identity_and_annihilation():
    rng = np.random.default_rng(1)
    z = Tensor(rand((4, 3, 3), rng))
    ones = Tensor(np.ones((4, 3, 3), dtype=np.float32))
    zeros = Tensor(np.zeros((4, 3, 3), dtype=np.float32))
    np.testing.assert_array_equal(ops.film_affine(z, ones, zeros).data, z.data)
    beta = Tensor(rand((4, 3, 3), rng))
    np.testing.assert_array_equal(ops.film_affine(z, zeros, beta).data, beta.data)


def test_film_matches_scalar_loop_exactly():
    rng = np.random.default_rng(2)
    z = rand((4, 3, 3), rng)
    gamma = rand((4, 3, 3), rng)
    beta = rand((4, 3, 3), rng)
    got = ops.film_affine(Tensor(z), Tensor(gamma), Tensor(beta)).data
    np.testing.assert_array_equal(got, film_scalar_loop(z, gamma, beta))
    # per-channel (semantic) broadcast
    gc, bc = rand((4,), rng), rand((4,), rng)
    got = ops.film_affine(Tensor(z), Tensor(gc), Tensor(bc)).data
    np.testing.assert_array_equal(got, film_scalar_loop(z, gc, bc))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_film_identity_property(c, h, w, seed):
    rng = np.random.default_rng(seed)
    z = rand((c, h, w), rng)
    out = ops.film_affine(Tensor(z), Tensor(np.ones(c, np.float32)), Tensor(np.zeros(c, np.float32)))
    np.testing.assert_array_equal(out.data, z)


def test_film_shape_mismatch_raises():
    z = Tensor(np.zeros((4, 3, 3), dtype=np.float32))
    bad = Tensor(np.zeros((5,), dtype=np.float32))
    with pytest.raises(ConfigurationError):
        ops.film_affine(z, bad, bad)


# -- recurrent cell -------------------------------------------------------------

def _zeroed_cell(din, dh):
    cell = nd.GRUCell(din, dh, rng=np.random.default_rng(0))
    for p in cell.parameters().values():
        p.data = np.zeros_like(p.data)
    return cell


def test_gru_zero_fixed_point():
    cell = _zeroed_cell(3, 4)
    h = cell.step(Tensor(np.zeros(4, np.float32)), Tensor(np.zeros(3, np.float32)))
    np.testing.assert_array_equal(h.data, np.zeros(4, np.float32))


def test_gru_matches_hand_unrolled():
    rng = np.random.default_rng(7)
    cell = nd.GRUCell(5, 6, rng=rng)
    x, h = rand((2, 5), rng), rand((2, 6), rng)
    got = cell.step(Tensor(h), Tensor(x)).data
    p = {k: v.data for k, v in cell.parameters().items()}
    want = gru_hand_unrolled(x.astype(np.float64), h.astype(np.float64),
                             {k: v.astype(np.float64) for k, v in p.items()})
    assert np.abs(got - want).max() < 1e-6


def test_gru_rejects_non_finite_input():
    from navlab.errors import NumericalError
    cell = nd.GRUCell(3, 4, rng=np.random.default_rng(0))
    bad = np.zeros((1, 3), np.float32)
    bad[0, 0] = np.inf
    with pytest.raises(NumericalError):
        cell.step(Tensor(np.zeros((1, 4), np.float32)), Tensor(bad))


def test_gru_composition_is_referentially_transparent():
    rng = np.random.default_rng(8)
    cell = nd.GRUCell(4, 4, rng=rng)
    x1, x2, h0 = Tensor(rand((1, 4), rng)), Tensor(rand((1, 4), rng)), Tensor(rand((1, 4), rng))
    h1 = cell.step(h0, x1)
    h2 = cell.step(h1, x2)
    h1_again = cell.step(h0, x1)
    h2_again = cell.step(h1_again, x2)
    np.testing.assert_array_equal(h2.data, h2_again.data)


# -- backward ------------------------------------------------------------------

def test_power_rule():
    x = Tensor(np.array(3.0, dtype=np.float32), requires_grad=True)
    (x ** 2).backward()
    assert x.grad == pytest.approx(6.0)


def test_backward_requires_scalar():
    x = Tensor(np.zeros(3, np.float32), requires_grad=True)
    with pytest.raises(UsageError):
        (x * 2.0).backward()


def test_disconnected_parameter_gets_no_grad():
    a = Tensor(np.array(2.0, np.float32), requires_grad=True)
    b = Tensor(np.array(5.0, np.float32), requires_grad=True)
    (a * a).backward()
    assert b.grad is None


def test_backward_accumulates_across_calls():
    x = Tensor(np.array(3.0, dtype=np.float32), requires_grad=True)
    (x ** 2).backward()
    (x ** 2).backward()
    assert x.grad == pytest.approx(12.0)


def _gradcheck_op(build, shapes, seed, eps=1e-3, tol=1e-3):
    """Generic FD gradient check in float64 for a scalarized op output."""
    rng = np.random.default_rng(seed)
    arrays = {name: rng.standard_normal(shape) for name, shape in shapes.items()}
    probe = {name: rng.standard_normal(build(
        {k: Tensor(v, requires_grad=True, dtype=np.float64) for k, v in arrays.items()}).shape)
        for name in ["_probe"]}["_probe"]

    def run():
        tensors = {k: Tensor(v, requires_grad=True, dtype=np.float64) for k, v in arrays.items()}
        out = build(tensors)
        loss = ops.sum_(ops.mul(out, Tensor(probe, dtype=np.float64)))
        return tensors, loss

    tensors, loss = run()
    loss.backward()
    idx = []
    for name, shape in shapes.items():
        n = int(np.prod(shape))
        for flat in rng.choice(n, size=min(5, n), replace=False):
            idx.append((name, int(flat)))
    fd = finite_diff(lambda: run()[1].item(), arrays, idx, eps=eps)
    analytic = np.array([tensors[name].grad.flat[flat] for name, flat in idx])
    assert relative_error(analytic, fd).max() < tol


@pytest.mark.parametrize("seed", range(10))
def test_gradcheck_all_layer_types(seed):
    _gradcheck_op(lambda t: ops.conv2d(t["x"], t["w"], t["b"], 2, 1),
                  {"x": (2, 3, 6, 6), "w": (4, 3, 3, 3), "b": (4,)}, seed)
    _gradcheck_op(lambda t: ops.group_norm(t["x"], t["g"], t["b"], groups=2),
                  {"x": (2, 4, 3, 3), "g": (4,), "b": (4,)}, seed)
    _gradcheck_op(lambda t: ops.film_affine(t["z"], t["g"], t["b"]),
                  {"z": (2, 4, 3, 3), "g": (4,), "b": (4,)}, seed)
    _gradcheck_op(lambda t: ops.matmul(ops.tanh(t["a"]), t["w"]),
                  {"a": (3, 4), "w": (4, 2)}, seed)
    _gradcheck_op(lambda t: ops.log_softmax(t["x"], axis=-1), {"x": (3, 5)}, seed)
    _gradcheck_op(lambda t: ops.sigmoid(ops.concat([t["a"], t["b"]], axis=1)),
                  {"a": (2, 3), "b": (2, 2)}, seed)
    _gradcheck_op(lambda t: ops.minimum(t["a"], ops.clip(t["b"], -0.5, 0.5)),
                  {"a": (4, 4), "b": (4, 4)}, seed)


def test_gradcheck_gru():
    def build(t):
        cell = nd.GRUCell(3, 4, rng=np.random.default_rng(0), dtype=np.float64)
        for name, p in cell.parameters().items():
            p.data = t[name].data
            t[name] = p  # route grads through the live parameters
        return cell.step(t["h"], t["x"])

    shapes = {"h": (2, 4), "x": (2, 3)}
    cell_ref = nd.GRUCell(3, 4, rng=np.random.default_rng(0), dtype=np.float64)
    shapes.update({name: p.shape for name, p in cell_ref.parameters().items()})
    _gradcheck_op(build, shapes, seed=11)


def test_forward_determinism_within_process():
    rng = np.random.default_rng(5)
    x = Tensor(rand((2, 3, 8, 8), rng))
    w = Tensor(rand((4, 3, 3, 3), rng))
    b = Tensor(rand((4,), rng))
    a = ops.conv2d(x, w, b, 1, 1).data
    bq = ops.conv2d(x, w, b, 1, 1).data
    np.testing.assert_array_equal(a, bq)


# -- modules and registry --------------------------------------------------------

def test_parameter_registry_paths_and_uniqueness():
    class Inner(nd.Module):
        def __init__(self, rng):
            self.conv = nd.Conv2d(3, 4, 3, rng=rng)

    class Outer(nd.Module):
        def __init__(self):
            rng = np.random.default_rng(0)
            self.block1 = Inner(rng)
            self.head = nd.Linear(4, 2, rng=rng)

    params = Outer().parameters()
    assert "block1.conv.w" in params and "head.b" in params
    assert len(set(params)) == len(params)


def test_tied_module_registers_once():
    class Tied(nd.Module):
        def __init__(self):
            rng = np.random.default_rng(0)
            self.enc_a = nd.Linear(3, 3, rng=rng)
            self.enc_b = self.enc_a

    params = Tied().parameters()
    assert set(params) == {"enc_a.w", "enc_a.b"}


def test_adam_step_moves_parameters():
    p = nd.Parameter(np.ones(3, np.float32))
    opt = nd.Adam({"p": p}, lr=0.1)
    p.grad = np.ones(3, np.float32)
    opt.step()
    assert (p.data < 1.0).all()


def test_clip_grad_norm():
    p = nd.Parameter(np.zeros(4, np.float32))
    p.grad = np.full(4, 3.0, np.float32)
    norm = nd.clip_grad_norm({"p": p}, 0.5)
    assert norm == pytest.approx(6.0)
    assert np.linalg.norm(p.grad) == pytest.approx(0.5, rel=1e-5)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.w": rand((3, 4), rng), "b": rand((2,), rng)}
    meta = {"step": 17, "pose": [1.25, 3.0, 0.5235987755982988]}
    path = tmp_path / "ck.bin"
    nd.save_checkpoint(path, tensors, meta=meta, config_hash="cafe01")
    loaded, got_meta, h = nd.load_checkpoint(path)
    assert h == "cafe01"
    assert got_meta == meta
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], tensors[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"\x00\x01binarygarbage")
    with pytest.raises(ConfigurationError):
        nd.load_checkpoint(path)
