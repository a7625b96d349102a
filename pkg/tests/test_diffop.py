"""Tests for the matrix-jet differential-operator calculus.

Oracles: exponential-type functions exp(a.xi) M have closed-form jets and
closed-form images under coefficient * d^beta operators, so application
and composition can be checked exactly; finite differences provide an
independent cross-check for first-order actions.
"""

import math

import numpy as np
import pytest

from ellgaudin.diffop import (
    DiffOperator,
    MatrixJet,
    MAX_TOTAL_ORDER,
    constant_coeff,
    total_degree_indices,
)
from ellgaudin.elliptic import ScalarJet

RNG = np.random.default_rng(20240817)


def rand_matrix(dim):
    return RNG.normal(size=(dim, dim)) + 1j * RNG.normal(size=(dim, dim))


def rand_vector(dim):
    return RNG.normal(size=dim) + 1j * RNG.normal(size=dim)


def exp_jet_fn(a, mat):
    """Closure H, order -> jet of exp(a.xi) * mat, exact to all orders."""
    a = np.asarray(a, dtype=complex)
    mat = np.asarray(mat, dtype=complex)

    def fn(H, order):
        H = np.asarray(H, dtype=complex)
        val = np.exp(a @ H)
        coeffs = {}
        for m in total_degree_indices(len(a), order):
            c = val
            for ai, mi in zip(a, m):
                c *= ai**mi / math.factorial(mi)
            coeffs[m] = c * mat
        return MatrixJet(len(a), order, coeffs)

    return fn


def exp_apply(a, mat, beta, b, vec, H):
    """Value of (exp(a.xi) mat d^beta) exp(b.xi) vec at H, closed form."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    H = np.asarray(H, dtype=complex)
    scale = np.exp(a @ H) * np.exp(b @ H)
    for bi, k in zip(b, beta):
        scale *= bi**k
    return scale * (np.asarray(mat) @ np.asarray(vec))


# ---------------------------------------------------------------------------
# MatrixJet basics
# ---------------------------------------------------------------------------


def test_matrix_jet_constant_and_value():
    m = rand_matrix(3)
    jet = MatrixJet.constant(m, nvars=2, order=2)
    assert np.allclose(jet.value, m)
    assert np.allclose(jet.coeff((1, 0)), 0)
    assert jet.shape == (3, 3)


def test_matrix_jet_empty_shift_keeps_shape():
    m = rand_matrix(2)
    jet = MatrixJet.constant(m, nvars=2, order=2)
    shifted = jet.shift((1, 0))
    assert shifted.coeffs == {} or np.allclose(shifted.value, 0)
    assert np.allclose(shifted.value, np.zeros((2, 2)))


def test_matrix_jet_product_is_noncommutative_convolution():
    a = exp_jet_fn([0.3, -0.2], rand_matrix(2))
    b = exp_jet_fn([0.1, 0.7], rand_matrix(2))
    H = np.array([0.2, -0.4])
    ja, jb = a(H, 2), b(H, 2)
    prod = ja * jb
    # value and first derivatives follow the Leibniz rule
    assert np.allclose(prod.value, ja.value @ jb.value)
    for r in range(2):
        e = tuple(1 if i == r else 0 for i in range(2))
        expect = ja.deriv(e) @ jb.value + ja.value @ jb.deriv(e)
        assert np.allclose(prod.deriv(e), expect)
    # matrix factors do not commute
    anti = jb * ja
    assert not np.allclose(prod.value, anti.value)


def test_matrix_jet_shift_matches_analytic_derivative():
    a = np.array([0.4 + 0.1j, -0.3 + 0.2j])
    mat = rand_matrix(2)
    H = np.array([0.1, 0.3])
    jet = exp_jet_fn(a, mat)(H, 3)
    shifted = jet.shift((1, 1))
    # d^2/dxi1 dxi2 exp(a.xi) mat = a1 a2 exp(a.H) mat
    expect = a[0] * a[1] * np.exp(a @ H) * mat
    assert np.allclose(shifted.value, expect)
    # remaining first derivative of the shifted jet
    expect1 = a[0] ** 2 * a[1] * np.exp(a @ H) * mat
    assert np.allclose(shifted.deriv((1, 0)), expect1)


def test_matrix_jet_from_scalar():
    caps, total = (2, 2), 2
    s = ScalarJet(caps, total, {(0, 0): 1.5, (1, 0): 2.0, (0, 2): -1.0})
    m = rand_matrix(2)
    jet = MatrixJet.from_scalar(s, m)
    assert np.allclose(jet.value, 1.5 * m)
    assert np.allclose(jet.coeff((1, 0)), 2.0 * m)
    assert np.allclose(jet.coeff((0, 2)), -1.0 * m)
    assert np.allclose(jet.coeff((1, 1)), 0)


# ---------------------------------------------------------------------------
# DiffOperator application
# ---------------------------------------------------------------------------


def test_apply_zeroth_order_multiplication():
    dim, nvars = 3, 2
    mat = rand_matrix(dim)
    a = np.array([0.2, -0.5])
    b = np.array([0.3, 0.1])
    vec = rand_vector(dim)
    op = DiffOperator(nvars, dim, {(0, 0): exp_jet_fn(a, mat)})
    f = exp_jet_fn(b, vec)
    H = np.array([0.7, -0.2])
    got = op.apply(f, H)
    expect = exp_apply(a, mat, (0, 0), b, vec, H)
    assert np.allclose(got, expect)


def test_apply_matches_finite_difference_gradient():
    dim, nvars = 2, 2
    mat = rand_matrix(dim)
    vec = rand_vector(dim)
    a = np.array([0.15, -0.4])
    b = np.array([-0.2, 0.55])
    op = DiffOperator(nvars, dim, {(1, 0): exp_jet_fn(a, mat)})
    f = exp_jet_fn(b, vec)
    H = np.array([0.3, 0.2])
    got = op.apply(f, H)

    def pointwise(x):
        return np.exp(b @ x) * vec

    h = 1e-6
    Hp = H.copy().astype(complex)
    Hm = H.copy().astype(complex)
    Hp[0] += h
    Hm[0] -= h
    fd = (pointwise(Hp) - pointwise(Hm)) / (2 * h)
    expect = np.exp(a @ H) * mat @ fd
    assert np.max(np.abs(got - expect)) < 1e-7


def test_apply_second_order_closed_form():
    dim, nvars = 2, 3
    mat = rand_matrix(dim)
    vec = rand_vector(dim)
    a = np.array([0.1, 0.2, -0.3])
    b = np.array([0.4, -0.1, 0.25])
    beta = (1, 0, 1)
    op = DiffOperator(nvars, dim, {beta: exp_jet_fn(a, mat)})
    f = exp_jet_fn(b, vec)
    H = np.array([0.0, 0.5, -0.2])
    got = op.apply(f, H)
    expect = exp_apply(a, mat, beta, b, vec, H)
    assert np.allclose(got, expect)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def test_compose_matches_sequential_application():
    dim, nvars = 2, 2
    m1, m2 = rand_matrix(dim), rand_matrix(dim)
    a1 = np.array([0.3, -0.1])
    a2 = np.array([-0.2, 0.4])
    b = np.array([0.15, 0.25])
    vec = rand_vector(dim)
    beta1, beta2 = (1, 0), (0, 1)
    op1 = DiffOperator(nvars, dim, {beta1: exp_jet_fn(a1, m1)})
    op2 = DiffOperator(nvars, dim, {beta2: exp_jet_fn(a2, m2)})
    comp = op1.compose(op2)
    f = exp_jet_fn(b, vec)
    H = np.array([0.6, -0.3])
    got = comp.apply(f, H)
    # op2 f = exp((a2+b).xi) * b_2 * m2 vec, then apply op1 in closed form
    inner_vec = b[1] * (m2 @ vec)
    expect = exp_apply(a1, m1, beta1, a2 + b, inner_vec, H)
    assert np.allclose(got, expect)


def test_compose_derivative_of_coefficient():
    # d_1 (coeff(xi) f) needs the coefficient's own derivative; check the
    # mixed term survives with the right weight.
    dim, nvars = 2, 1
    mat = rand_matrix(dim)
    a = np.array([0.8])
    b = np.array([-0.3])
    vec = rand_vector(dim)
    dop = DiffOperator(nvars, dim, {(1,): constant_coeff(np.eye(dim))})
    mul = DiffOperator(nvars, dim, {(0,): exp_jet_fn(a, mat)})
    comp = dop.compose(mul)
    f = exp_jet_fn(b, vec)
    H = np.array([0.2])
    got = comp.apply(f, H)
    expect = (a[0] + b[0]) * np.exp((a + b) @ H) * (mat @ vec)
    assert np.allclose(got, expect)


def test_compose_associative():
    dim, nvars = 2, 2
    ops = []
    for beta in [(1, 0), (0, 1), (0, 0)]:
        a = RNG.normal(size=nvars) * 0.4
        ops.append(DiffOperator(nvars, dim, {beta: exp_jet_fn(a, rand_matrix(dim))}))
    lhs = ops[0].compose(ops[1]).compose(ops[2])
    rhs = ops[0].compose(ops[1].compose(ops[2]))
    H = np.array([0.1, -0.7])
    va, vb = lhs.evaluate(H), rhs.evaluate(H)
    keys = set(va) | set(vb)
    for k in keys:
        x = va.get(k, np.zeros((dim, dim)))
        y = vb.get(k, np.zeros((dim, dim)))
        assert np.max(np.abs(x - y)) < 1e-12


def test_canonical_commutator_is_identity():
    # [d_r, xi_r .] = 1
    dim, nvars = 3, 2
    r = 1

    def coordinate(H, order):
        H = np.asarray(H, dtype=complex)
        jet = MatrixJet.constant(np.eye(dim) * H[r], nvars, order)
        if order >= 1:
            e = tuple(1 if i == r else 0 for i in range(nvars))
            jet.coeffs[e] = np.eye(dim, dtype=complex)
        return jet

    e_r = tuple(1 if i == r else 0 for i in range(nvars))
    dop = DiffOperator(nvars, dim, {e_r: constant_coeff(np.eye(dim))})
    xop = DiffOperator(nvars, dim, {(0,) * nvars: coordinate})
    comm = dop.commutator(xop)
    H = np.array([0.4, -0.9])
    vals = comm.evaluate(H)
    assert np.allclose(vals[(0, 0)], np.eye(dim))
    for m, v in vals.items():
        if m != (0, 0):
            assert np.max(np.abs(v)) < 1e-14


def test_commutator_jacobi_identity():
    dim, nvars = 2, 2
    ops = []
    for beta in [(1, 0), (0, 1), (1, 0)]:
        a = RNG.normal(size=nvars) * 0.3
        ops.append(DiffOperator(nvars, dim, {beta: exp_jet_fn(a, rand_matrix(dim))}))
    A, B, C = ops
    total = (
        A.commutator(B).commutator(C)
        + B.commutator(C).commutator(A)
        + C.commutator(A).commutator(B)
    )
    H = np.array([-0.2, 0.35])
    scale = max(op.max_coeff_norm(H) for op in ops) ** 3
    for v in total.evaluate(H).values():
        assert np.max(np.abs(v)) < 1e-12 * max(scale, 1.0)


def test_operator_linear_combinations():
    dim, nvars = 2, 1
    m1, m2 = rand_matrix(dim), rand_matrix(dim)
    op1 = DiffOperator(nvars, dim, {(1,): constant_coeff(m1)})
    op2 = DiffOperator(nvars, dim, {(1,): constant_coeff(m2), (0,): constant_coeff(m1)})
    combo = op1 * 2.0 - op2
    H = np.array([0.0])
    vals = combo.evaluate(H)
    assert np.allclose(vals[(1,)], 2.0 * m1 - m2)
    assert np.allclose(vals[(0,)], -m1)


def test_compose_order_cap():
    dim, nvars = 2, 1
    second = DiffOperator(nvars, dim, {(2,): constant_coeff(np.eye(dim))})
    third = DiffOperator(nvars, dim, {(3,): constant_coeff(np.eye(dim))})
    with pytest.raises(ValueError, match="order"):
        second.compose(third)
    assert second.order + third.order > MAX_TOTAL_ORDER


def test_second_order_commutator_top_terms_cancel():
    # two pure second-order operators with scalar (identity) coefficients
    # commute exactly; the implementation must produce explicit zeros
    dim, nvars = 2, 2
    f1 = exp_jet_fn([0.3, -0.2], np.eye(dim))
    f2 = exp_jet_fn([-0.1, 0.5], np.eye(dim))
    op1 = DiffOperator(nvars, dim, {(2, 0): f1})
    op2 = DiffOperator(nvars, dim, {(0, 2): f2})
    comm = op1.commutator(op2)
    H = np.array([0.25, 0.4])
    vals = comm.evaluate(H)
    for m, v in vals.items():
        if sum(m) == 4:
            # top-degree coefficients are identical sums and cancel exactly
            assert np.max(np.abs(v)) == 0.0
