"""Each primitive's adjoint against central differences, plus tape mechanics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadecite import autodiff as ad
from cascadecite.errors import ContractError, NumericError, ShapeError


def check(f, params, tol=1e-6, seed=0):
    report = ad.grad_check(f, params, eps=1e-5, tol=tol, seed=seed)
    assert report.passed, (
        f"max rel error {report.max_rel_error:.3e} at param {report.worst_param} "
        f"coord {report.worst_coord}"
    )
    return report


def tensors(rng, *shapes):
    return [ad.Tensor(rng.standard_normal(s), name=f"p{i}") for i, s in enumerate(shapes)]


def test_add_sub_mul_adjoints():
    rng = np.random.default_rng(1)
    a, b = tensors(rng, (3, 4), (3, 4))
    check(lambda: ad.total(ad.add(ad.mul(a, b), ad.sub(a, b))), [a, b])


def test_scale_and_one_minus_adjoints():
    rng = np.random.default_rng(2)
    (a,) = tensors(rng, (5,))
    check(lambda: ad.total(ad.scale(ad.one_minus(a), -2.5)), [a])


def test_matvec_adjoint():
    rng = np.random.default_rng(3)
    w, x = tensors(rng, (4, 6), (6,))
    check(lambda: ad.total(ad.matvec(w, x)), [w, x])


def test_matmul_and_add_rowvec_adjoints():
    rng = np.random.default_rng(4)
    a, b, v = tensors(rng, (3, 5), (5, 4), (4,))
    check(lambda: ad.total(ad.tanh(ad.add_rowvec(ad.matmul(a, b), v))), [a, b, v])


def test_sigmoid_tanh_adjoints():
    rng = np.random.default_rng(5)
    (a,) = tensors(rng, (7,))
    check(lambda: ad.total(ad.mul(ad.sigmoid(a), ad.tanh(a))), [a])


def test_sigmoid_is_stable_for_large_magnitudes():
    big = ad.Tensor(np.array([-800.0, -30.0, 0.0, 30.0, 800.0]))
    s = ad.sigmoid(big).values
    assert np.all(np.isfinite(s))
    assert s[0] == 0.0 and s[-1] == 1.0
    assert abs(s[2] - 0.5) < 1e-15


def test_relu_adjoint_away_from_kink():
    rng = np.random.default_rng(6)
    a = ad.Tensor(rng.standard_normal(40))
    a.values[np.abs(a.values) < 1e-3] = 0.5  # keep FD away from the kink
    check(lambda: ad.total(ad.relu(a)), [a])


def test_relu_subgradient_at_zero_is_zero():
    a = ad.Tensor(np.array([0.0, -1.0, 2.0]))
    with ad.Tape() as tape:
        out = ad.total(ad.relu(a))
    tape.backward(out, params=[a])
    assert a.grad.tolist() == [0.0, 0.0, 1.0]


def test_concat_adjoint_both_axes():
    rng = np.random.default_rng(7)
    a, b, c = tensors(rng, (2, 3), (2, 2), (2, 3))
    check(lambda: ad.total(ad.concat([a, b], axis=1)), [a, b])
    check(lambda: ad.total(ad.concat([a, c], axis=0)), [a, c])


@pytest.mark.parametrize("stride", [1, 2, 3])
@pytest.mark.parametrize("width", [1, 2, 4])
def test_conv1d_adjoint_vector_input(stride, width):
    rng = np.random.default_rng(8)
    x, k = tensors(rng, (9,), (width,))
    bias = ad.Tensor(np.array(0.3))
    check(lambda: ad.total(ad.conv1d(x, k, stride=stride, bias=bias)), [x, k, bias])


def test_conv1d_adjoint_batched_rows():
    rng = np.random.default_rng(9)
    x, k = tensors(rng, (5, 8), (2,))
    bias = ad.Tensor(np.array(-0.1))
    check(lambda: ad.total(ad.conv1d(x, k, stride=2, bias=bias)), [x, k, bias])


def test_conv1d_forward_matches_explicit_loop():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((3, 10))
    k = rng.standard_normal(2)
    out = ad.conv1d(ad.Tensor(x), ad.Tensor(k), stride=2, bias=ad.Tensor(0.5)).values
    expect = np.array(
        [[x[b, 2 * i] * k[0] + x[b, 2 * i + 1] * k[1] + 0.5 for i in range(5)] for b in range(3)]
    )
    np.testing.assert_allclose(out, expect, rtol=0, atol=0)


def test_gather_adjoint_accumulates_repeats():
    v = ad.Tensor(np.array([1.0, 2.0, 3.0]))
    idx = np.array([[0, 2], [2, 2]])
    with ad.Tape() as tape:
        out = ad.total(ad.gather(v, idx))
    tape.backward(out, params=[v])
    assert v.grad.tolist() == [1.0, 0.0, 3.0]


def test_gather_checks_index_range():
    v = ad.Tensor(np.zeros(3))
    with pytest.raises(ContractError):
        ad.gather(v, np.array([3]))
    with pytest.raises(ContractError):
        ad.gather(v, np.array([-1]))


def test_mean_total_adjoints():
    rng = np.random.default_rng(11)
    (a,) = tensors(rng, (4, 3))
    check(lambda: ad.mean(ad.mul(a, a)), [a])


def test_shape_mismatches_raise():
    a, b = ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((3, 2)))
    for op in (ad.add, ad.sub, ad.mul):
        with pytest.raises(ShapeError):
            op(a, b)
    with pytest.raises(ShapeError):
        ad.matmul(a, a)
    with pytest.raises(ShapeError):
        ad.conv1d(ad.Tensor(np.zeros(2)), ad.Tensor(np.zeros(5)))


def test_tapes_do_not_nest():
    with ad.Tape():
        with pytest.raises(ContractError):
            with ad.Tape():
                pass


def test_no_tape_means_no_recording_and_same_values():
    rng = np.random.default_rng(12)
    a = ad.Tensor(rng.standard_normal((3, 3)))
    bare = ad.tanh(a).values
    with ad.Tape() as tape:
        taped = ad.tanh(a).values
    assert len(tape) == 1
    np.testing.assert_array_equal(bare, taped)


def test_backward_requires_scalar_and_finite_loss():
    a = ad.Tensor(np.ones(3))
    with ad.Tape() as tape:
        out = ad.scale(a, 2.0)
    with pytest.raises(ContractError):
        tape.backward(out)
    a2 = ad.Tensor(np.array(np.inf))
    with ad.Tape() as tape2:
        out2 = ad.scale(a2, 1.0)
    with pytest.raises(NumericError):
        tape2.backward(out2)


def test_repeated_backward_does_not_accumulate():
    a = ad.Tensor(np.array([2.0]))
    with ad.Tape() as tape:
        out = ad.total(ad.mul(a, a))
    (g1,) = tape.backward(out, params=[a])
    first = g1.copy()
    (g2,) = tape.backward(out, params=[a])
    np.testing.assert_array_equal(first, g2)


def test_untouched_params_get_exact_zeros():
    a = ad.Tensor(np.array([1.0]))
    b = ad.Tensor(np.array([1.0, 2.0]))
    with ad.Tape() as tape:
        out = ad.total(ad.mul(a, a))
    ga, gb = tape.backward(out, params=[a, b])
    assert ga.tolist() == [2.0]
    assert gb.tolist() == [0.0, 0.0]


def test_shared_subexpression_gradients_add():
    # loss = sum(x*x + x) so dloss/dx = 2x + 1
    x = ad.Tensor(np.array([3.0, -1.0]))
    with ad.Tape() as tape:
        out = ad.total(ad.add(ad.mul(x, x), x))
    (g,) = tape.backward(out, params=[x])
    assert g.tolist() == [7.0, -1.0]


@settings(max_examples=40, deadline=None)
@given(
    rows=st.integers(1, 4),
    cols=st.integers(1, 4),
    seed=st.integers(0, 2**31 - 1),
)
def test_chain_of_smooth_primitives_passes_grad_check(rows, cols, seed):
    rng = np.random.default_rng(seed)
    a = ad.Tensor(rng.standard_normal((rows, cols)))
    w = ad.Tensor(rng.standard_normal((cols, 3)))
    v = ad.Tensor(rng.standard_normal(3))

    def f():
        z = ad.add_rowvec(ad.matmul(ad.tanh(a), w), v)
        return ad.mean(ad.mul(ad.sigmoid(z), z))

    report = ad.grad_check(f, [a, w, v], eps=1e-5, tol=1e-5, seed=seed)
    assert report.passed, report


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 12), stride=st.integers(1, 3))
def test_conv1d_output_length_formula(seed, n, stride):
    rng = np.random.default_rng(seed)
    w = int(rng.integers(1, n + 1))
    x = ad.Tensor(rng.standard_normal(n))
    k = ad.Tensor(rng.standard_normal(w))
    out = ad.conv1d(x, k, stride=stride)
    assert out.shape == ((n - w) // stride + 1,)
