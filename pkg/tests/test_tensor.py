import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radarseg.tensor import (
    BenchReport, CorrectnessError, ShapeError, bench, bench_case, bmm, bmm_backward, broadcast_binop,
    broadcast_binop_backward, concat, concat_backward, conv1d_k1, conv1d_k1_backward, conv1d_k1_naive,
    cross_entropy, log_softmax, matmul, matmul_backward, matmul_reference, maxpool_points,
    maxpool_points_backward, relu, relu_backward, softmax, softmax_backward,
)

from oracles import conv_max_diff, conv_shapes, finite_difference, rel_error

finite = st.floats(-50, 50, allow_nan=False, width=32)


def test_matmul_examples():
    a = np.array([[1.0, 2.0], [3.0, 4.0]], np.float32)
    assert matmul(a, np.array([[5.0], [6.0]])).tolist() == [[17.0], [39.0]]
    assert np.array_equal(matmul(a, np.eye(2, dtype=np.float32)), a)
    assert not matmul(np.zeros((3, 2)), a).any()
    with pytest.raises(ShapeError):
        matmul(a, np.ones((3, 1)))


def test_matmul_reference_agrees(rng):
    a, b = rng.standard_normal((17, 33)).astype(np.float32), rng.standard_normal((33, 9)).astype(np.float32)
    assert np.abs(matmul(a, b) - matmul_reference(a, b)).max() < 1e-4


def test_conv_examples():
    x = np.array([[[1.0, 1.0]]], np.float32)
    assert conv1d_k1(x, np.array([[2.0], [3.0]]), np.zeros(1, np.float32)).item() == 5.0
    r = np.random.default_rng(0).standard_normal((2, 7, 4)).astype(np.float32)
    assert np.array_equal(conv1d_k1(r, np.eye(4, dtype=np.float32), np.zeros(4, np.float32)), r)
    with pytest.raises(ShapeError):
        conv1d_k1(r, np.ones((3, 2)))
    with pytest.raises(ShapeError):
        conv1d_k1(r, np.ones((4, 2)), np.ones(3))


def test_conv_dual_implementation_small(rng):
    x = rng.standard_normal((4, 256, 5)).astype(np.float32)
    w = rng.standard_normal((5, 64)).astype(np.float32)
    b = rng.standard_normal(64).astype(np.float32)
    assert np.abs(conv1d_k1(x, w, b) - conv1d_k1_naive(x, w, b)).max() <= 1e-6


def test_conv_equivalence_100_shapes():
    shapes = conv_shapes(100, seed=3)
    assert (32, 256, 64, 128) in shapes and len(shapes) == 100
    assert conv_max_diff(shapes, seed=4) <= 1e-6


def test_maxpool_examples():
    v, arg = maxpool_points(np.array([[[1.0], [5.0], [3.0]]]))
    assert v.tolist() == [[5.0]] and arg.tolist() == [[1]]
    one = np.array([[[2.0, -1.0]]])
    assert maxpool_points(one)[0].tolist() == [[2.0, -1.0]]
    with pytest.raises(ShapeError):
        maxpool_points(np.zeros((1, 0, 3)))


def test_maxpool_gradient_routes_to_argmax(rng):
    x = rng.standard_normal((2, 6, 3))
    v, arg = maxpool_points(x)
    dv = rng.standard_normal(v.shape)
    dx = maxpool_points_backward(dv, arg, 6)
    fd = finite_difference(lambda: float((maxpool_points(x)[0] * dv).sum()), x)
    assert rel_error(dx, fd) <= 1e-3
    assert np.count_nonzero(dx) == 6


def test_softmax_examples():
    assert softmax(np.zeros((2, 5))) == pytest.approx(np.full((2, 5), 0.2))
    assert softmax(np.array([0.0, math.log(3.0)])) == pytest.approx([0.25, 0.75])
    with pytest.raises(ShapeError):
        softmax(np.zeros((3, 0)))


@given(arrays(np.float32, (3, 5), elements=finite), st.floats(-100, 100))
def test_softmax_properties(x, c):
    y = softmax(x)
    assert np.allclose(y.sum(-1), 1.0, atol=1e-6)
    assert np.all((y >= 0) & (y <= 1))  # float32 may saturate at these logit spreads
    assert np.allclose(softmax(x + np.float32(c)), y, atol=1e-5)


def test_softmax_outputs_open_interval():
    y = softmax(np.array([[1.0, 2.0, 3.0, -4.0, 0.5]]))
    assert np.all((y > 0) & (y < 1))


def test_log_softmax_stable():
    big = np.array([[1000.0, 0.0]])
    assert np.isfinite(log_softmax(big)).all()
    assert softmax(big)[0, 0] == pytest.approx(1.0)


def test_cross_entropy_uniform_is_ln_k():
    loss, grad = cross_entropy(np.zeros((4, 10, 5)), np.zeros((4, 10), int))
    assert loss == pytest.approx(math.log(5))
    assert grad.sum() == pytest.approx(0.0, abs=1e-12)


def test_concat_examples():
    out = concat(np.zeros((2, 4, 64)), np.ones((2, 4, 1024)))
    assert out.shape == (2, 4, 1088)
    a, b = concat_backward(out, 64)
    assert a.shape == (2, 4, 64) and b.shape == (2, 4, 1024)
    with pytest.raises(ShapeError):
        concat(np.zeros((2, 4, 3)), np.zeros((2, 5, 3)))


def test_broadcast_examples(rng):
    x = rng.standard_normal((2, 3, 4)).astype(np.float32)
    assert np.array_equal(broadcast_binop(x, np.zeros(1), "+"), x)
    s = np.array([[[1.0, 2.0, 3.0, 4.0]]], np.float32)
    got = broadcast_binop(x, s, "×")
    for i in range(2):
        for j in range(3):
            for k in range(4):
                assert got[i, j, k] == x[i, j, k] * s[0, 0, k]
    with pytest.raises(ShapeError):
        broadcast_binop(x, np.ones(3), "+")
    with pytest.raises(ValueError):
        broadcast_binop(x, x, "/")


# -- gradients against central differences -----------------------------------------

def test_conv_gradient(rng):
    x, w, b = rng.standard_normal((2, 5, 3)), rng.standard_normal((3, 4)), rng.standard_normal(4)
    up = rng.standard_normal((2, 5, 4))
    dx, dw, db = conv1d_k1_backward(x, w, up)

    def f():
        return float((conv1d_k1(x, w, b) * up).sum())
    assert rel_error(dx, finite_difference(f, x)) <= 1e-3
    assert rel_error(dw, finite_difference(f, w)) <= 1e-3
    assert rel_error(db, finite_difference(f, b)) <= 1e-3


def test_matmul_and_bmm_gradients(rng):
    a, b, up = rng.standard_normal((3, 4)), rng.standard_normal((4, 2)), rng.standard_normal((3, 2))
    da, db = matmul_backward(a, b, up)
    assert rel_error(da, finite_difference(lambda: float((matmul(a, b) * up).sum()), a)) <= 1e-3
    assert rel_error(db, finite_difference(lambda: float((matmul(a, b) * up).sum()), b)) <= 1e-3
    A, B, U = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 4, 3)), rng.standard_normal((2, 3, 3))
    dA, dB = bmm_backward(A, B, U)
    assert rel_error(dA, finite_difference(lambda: float((bmm(A, B) * U).sum()), A)) <= 1e-3
    assert rel_error(dB, finite_difference(lambda: float((bmm(A, B) * U).sum()), B)) <= 1e-3


def test_softmax_and_ce_gradients(rng):
    x, up = rng.standard_normal((3, 5)), rng.standard_normal((3, 5))
    dx = softmax_backward(softmax(x), up)
    assert rel_error(dx, finite_difference(lambda: float((softmax(x) * up).sum()), x)) <= 1e-3
    t = rng.integers(0, 5, 3)
    _, g = cross_entropy(x, t)
    assert rel_error(g, finite_difference(lambda: cross_entropy(x, t)[0], x)) <= 1e-3


def test_relu_and_broadcast_gradients(rng):
    x = rng.standard_normal((4, 3))
    x[np.abs(x) < 0.05] = 0.5  # keep away from the kink
    up = rng.standard_normal((4, 3))
    assert rel_error(relu_backward(x, up), finite_difference(lambda: float((relu(x) * up).sum()), x)) <= 1e-3
    a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((1, 1, 4))
    U = rng.standard_normal((2, 3, 4))
    for op in ("+", "-", "*"):
        da, db = broadcast_binop_backward(a, b, op, U)

        def f():
            return float((broadcast_binop(a, b, op) * U).sum())
        assert rel_error(da, finite_difference(f, a)) <= 1e-3
        assert rel_error(db, finite_difference(f, b)) <= 1e-3


# -- bench harness ---------------------------------------------------------------------

def test_bench_conv_report():
    rep = bench_case("conv1d", reps=10, shape=(4, 64, 16, 32))
    rows = rep.by_impl()
    assert set(rows) == {"naive", "matmul"}
    assert rows["naive"].checksum == rows["matmul"].checksum
    text = rep.to_csv("schema=1 config_hash=x")
    assert text.splitlines()[0] == "# schema=1 config_hash=x"
    assert text.splitlines()[1] == "op,impl,shape,median_us,mean_us,reps,checksum"


def test_bench_refuses_disagreement_and_few_reps():
    x = np.ones((3, 3))
    with pytest.raises(CorrectnessError):
        bench("id", (3, 3), 10, {"a": lambda v: v, "b": lambda v: v + 1}, (x,))
    with pytest.raises(ValueError):
        bench("id", (3, 3), 0, {"a": lambda v: v}, (x,))


def test_bench_same_impl_twice():
    rep = bench("id", (3,), 10, {"a": np.sort, "b": np.sort}, (np.array([3.0, 1.0, 2.0]),))
    assert isinstance(rep, BenchReport) and rep.rows[0].checksum == rep.rows[1].checksum


@pytest.mark.parametrize("op", ["matmul", "softmax", "maxpool", "concat"])
def test_bench_cases_agree(op):
    rep = bench_case(op, reps=10, shape={"matmul": (16, 8, 4), "softmax": (2, 8, 5), "maxpool": (2, 8, 4),
                                         "concat": (2, 8, 4, 16, 6)}[op])
    assert len({r.checksum for r in rep.rows}) == 1
