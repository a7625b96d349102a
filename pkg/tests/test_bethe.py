"""Tests for the Bethe ansatz layer.

Key oracles:
- direct theta-series sums for the residuals (no argument reduction);
- closed-form roots of the rank-1 symmetric instances, where oddness and
  1-periodicity of the zeta kernel force the residual to vanish;
- a brute-force enumeration of the Bethe covector (every root-to-site
  map, every ordering, literal kernel chains) coded independently of the
  library's partition machinery;
- finite differences for all jets;
- the transfer operator itself: the eigen-residual ties the covector,
  the eigenvalue formula, and the operator together with no free knobs.
"""

import math

import numpy as np
import pytest

from ellgaudin.bethe import (
    BetheError,
    BetheSystem,
    default_assignment,
    root_multiplicities,
)
from ellgaudin.elliptic import EllipticError, ModularData
from ellgaudin.gaudin import GaudinProblem, sample_regular_cartan
from ellgaudin.liealg import build_dual_verma, build_root_system

from oracles import (
    bethe_residual_direct,
    bethe_vector_bruteforce_a1,
    fd_multi,
    w_direct,
)

RNG = np.random.default_rng(20240817)

RS1 = build_root_system("A", 1)
MD = ModularData(0.8j)
TAU = 0.8j
ALPHA = np.asarray(RS1.simple_roots[0], dtype=complex)
OMEGA = np.asarray(RS1.fundamental_weights[0], dtype=complex)

Z2 = [0.11 + 0j, 0.43 + 0.27j]


def dual_verma_sites(cs, depth):
    return [
        build_dual_verma(RS1, tuple(c * a for a in ALPHA), depth=depth)
        for c in cs
    ]


def make_system(cs, depth=4, zs=Z2):
    prob = GaudinProblem(RS1, MD, list(zs), dual_verma_sites(cs, depth))
    return BetheSystem(prob)


# ---------------------------------------------------------------------------
# charge bookkeeping
# ---------------------------------------------------------------------------


def test_root_multiplicities_counts_simple_roots():
    mult = root_multiplicities(RS1, [OMEGA, OMEGA])
    assert list(mult) == [1]
    mult2 = root_multiplicities(RS1, [ALPHA, ALPHA])
    assert list(mult2) == [2]


def test_root_multiplicities_rejects_non_lattice_sum():
    with pytest.raises(BetheError):
        root_multiplicities(RS1, [OMEGA, np.zeros(1)])


def test_root_multiplicities_accepts_any_complex_split():
    c = 0.37 + 0.11j
    mult = root_multiplicities(RS1, [c * ALPHA, (1 - c) * ALPHA])
    assert list(mult) == [1]


def test_default_assignment_orders_labels():
    rs2 = build_root_system("A", 2)
    a0 = np.asarray(rs2.simple_roots[0], dtype=complex)
    a1 = np.asarray(rs2.simple_roots[1], dtype=complex)
    assert default_assignment(rs2, [a0 + a1, a1]) == (0, 1, 1)


def test_charge_mismatch_raises():
    prob = GaudinProblem(RS1, MD, Z2, dual_verma_sites([1.0, 1.0], depth=4))
    with pytest.raises(BetheError):
        # weights sum to twice the simple root; a single-root assignment
        # cannot balance the charge
        BetheSystem(prob, assignment=(0,))


def test_shallow_modules_rejected():
    # M = 2 needs one level above the maximal occupation, i.e. depth >= 3.
    c = 0.73 + 0.21j
    prob = GaudinProblem(RS1, MD, Z2, dual_verma_sites([c, 2 - c], depth=2))
    with pytest.raises(BetheError):
        BetheSystem(prob)


# ---------------------------------------------------------------------------
# the algebraic system
# ---------------------------------------------------------------------------


def test_residual_zero_at_half_period_single_site():
    mods = dual_verma_sites([1.0], depth=3)
    prob = GaudinProblem(RS1, MD, [0.13 + 0.05j], mods)
    sysb = BetheSystem(prob)
    res, _ = sysb.equations([0.13 + 0.05j + 0.5])
    assert np.max(np.abs(res)) < 1e-12


def test_residual_zero_at_symmetric_midpoints():
    sysb = make_system([0.5, 0.5], depth=3)
    mid = (Z2[0] + Z2[1]) / 2
    for t in (mid, mid + 0.5):
        res, _ = sysb.equations([t])
        assert np.max(np.abs(res)) < 1e-12


def test_residual_matches_direct_series():
    c = 0.73 + 0.21j
    sysb = make_system([c, 2 - c])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    res, _ = sysb.equations(t)
    expect = bethe_residual_direct(
        t, Z2, [c * ALPHA, (2 - c) * ALPHA], [ALPHA, ALPHA], TAU
    )
    assert np.max(np.abs(res - expect)) < 1e-10


def test_jacobian_matches_finite_differences():
    c = 0.73 + 0.21j
    sysb = make_system([c, 2 - c])
    t0 = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    _, jac = sysb.equations(t0)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2, dtype=complex)
        e[k] = h
        col = (sysb.equations(t0 + e)[0] - sysb.equations(t0 - e)[0]) / (2 * h)
        assert np.max(np.abs(col - jac[:, k])) / np.max(np.abs(jac)) < 1e-6


def test_residual_permutation_covariance():
    c = 0.73 + 0.21j
    sysb = make_system([c, 2 - c])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    res, _ = sysb.equations(t)
    swapped, _ = sysb.equations(t[::-1])
    assert np.max(np.abs(res - swapped[::-1])) == 0.0


def test_equations_raise_on_pole_collision():
    sysb = make_system([0.5, 0.5], depth=3)
    with pytest.raises(EllipticError):
        sysb.equations([Z2[0]])


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def test_solver_converges_to_half_period_root():
    mods = dual_verma_sites([1.0], depth=3)
    z = 0.13 + 0.05j
    prob = GaudinProblem(RS1, MD, [z], mods)
    sysb = BetheSystem(prob)
    sols = sysb.solve(seeds=[np.array([z + 0.47 + 0.03j])])
    assert len(sols) == 1
    sol = sols[0]
    assert sol.residual < 1e-12
    d = sol.t[0] - (z + 0.5)
    assert abs(d - round(d.real)) < 1e-9


def test_solver_finds_symmetric_closed_form_and_dedups():
    sysb = make_system([0.5, 0.5], depth=3)
    mid = (Z2[0] + Z2[1]) / 2
    seed = np.array([mid + 0.51 + 0.01j])
    sols = sysb.solve(seeds=[seed, seed.copy(), seed + 1.0])
    assert len(sols) == 1  # unit shifts and copies collapse
    d = sols[0].t[0] - (mid + 0.5)
    assert abs(d - round(d.real)) < 1e-9


def test_solver_quasirandom_seeds_find_m2_roots():
    c = 0.73 + 0.21j
    sysb = make_system([c, 2 - c])
    sols = sysb.solve(n_seeds=12)
    assert sols, "no Bethe roots found from the default seed grid"
    for s in sols:
        assert s.residual < 1e-12
        assert s.iterations >= 0


# ---------------------------------------------------------------------------
# the Bethe covector
# ---------------------------------------------------------------------------


def test_vector_no_roots_is_constant_unit():
    mods = dual_verma_sites([0.0, 0.0], depth=2)
    prob = GaudinProblem(RS1, MD, Z2, mods)
    sysb = BetheSystem(prob, assignment=())
    H = np.array([0.23 - 0.17j])
    jet = sysb.vector_jet(np.array([]), H, order=2)
    assert jet.coeffs[(0,)].shape == (1,)
    assert abs(jet.coeffs[(0,)][0] - 1.0) < 1e-14
    for m, mat in jet.coeffs.items():
        if sum(m):
            assert np.max(np.abs(mat)) < 1e-14
    assert abs(sysb.eigenvalue(np.array([]), 0.31 + 0.22j)) < 1e-14


def test_vector_single_root_closed_form():
    c1 = 0.37 + 0.11j
    c2 = 1 - c1
    sysb = make_system([c1, c2], depth=3)
    t = np.array([0.2 + 0.15j])
    H = np.array([0.21 - 0.16j])
    cval = complex(ALPHA @ H)
    psi = sysb.vector_jet(t, H).value
    tuples = sysb.problem.space.zero_tuples()
    expected = {
        (1, 0): 2 * c1 * w_direct(-cval, complex(t[0] - Z2[0]), TAU),
        (0, 1): 2 * c2 * w_direct(-cval, complex(t[0] - Z2[1]), TAU),
    }
    for tup, comp in zip(tuples, psi):
        assert abs(comp - expected[tup]) < 1e-10


def test_vector_two_roots_match_bruteforce_enumeration():
    c1 = 0.73 + 0.21j
    c2 = 2 - c1
    sysb = make_system([c1, c2])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    tuples = sysb.problem.space.zero_tuples()
    for H in sample_regular_cartan(RS1, MD, RNG, 5):
        cval = complex(ALPHA @ H)
        psi = sysb.vector_jet(t, H).value
        oracle = bethe_vector_bruteforce_a1(t, Z2, [c1, c2], cval, TAU)
        scale = max(abs(v) for v in oracle.values())
        for tup, comp in zip(tuples, psi):
            assert abs(comp - oracle[tup]) / scale < 1e-10


def test_vector_jets_match_finite_differences():
    c1 = 0.73 + 0.21j
    sysb = make_system([c1, 2 - c1])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    H0 = np.array([0.31 - 0.22j])
    jet = sysb.vector_jet(t, H0, order=2)

    def comp(idx):
        return lambda H: sysb.vector_jet(t, H).value[idx]

    dim = len(sysb.problem.space.zero_tuples())
    for idx in range(dim):
        for m, h in [((1,), 1e-5), ((2,), 1e-4)]:
            fd = fd_multi(comp(idx), H0, m, h=h)
            an = jet.coeffs.get(m, np.zeros(dim))[idx] * math.factorial(
                sum(m)
            )
            assert abs(an - fd) / max(1.0, abs(fd)) < 1e-6


# ---------------------------------------------------------------------------
# eigenvalue and verification
# ---------------------------------------------------------------------------


def test_zeta_bar_is_linear_in_direction():
    c1 = 0.73 + 0.21j
    sysb = make_system([c1, 2 - c1])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    u = 0.62 + 0.3j
    a, b = 0.7 - 0.2j, -1.3 + 0.4j
    h1, h2 = np.array([1.0]), np.array([0.6 + 0.1j])
    lhs = sysb.zeta_bar(a * h1 + b * h2, t, u)
    rhs = a * sysb.zeta_bar(h1, t, u) + b * sysb.zeta_bar(h2, t, u)
    assert abs(lhs - rhs) < 1e-12


def test_eigenvalue_period_one_in_u():
    c1 = 0.73 + 0.21j
    sysb = make_system([c1, 2 - c1])
    t = np.array([0.21 + 0.13j, 0.52 + 0.4j])
    u = 0.62 + 0.3j
    v1, v2 = sysb.eigenvalue(t, u), sysb.eigenvalue(t, u + 1)
    assert abs(v1 - v2) / abs(v1) < 1e-10


def test_eigenvalue_matches_rayleigh_quotient():
    sysb = make_system([0.5, 0.5], depth=3)
    sols = sysb.solve(seeds=[np.array([(Z2[0] + Z2[1]) / 2 + 0.49 + 0.02j])])
    t = sols[0].t
    u = 0.62 + 0.3j
    H = np.array([0.31 - 0.22j])
    psi = sysb.vector_jet(t, H).value
    lhs = sysb.problem.transfer(u).apply(sysb.vector_function(t), H)
    quotients = lhs[np.abs(psi) > 1e-8] / psi[np.abs(psi) > 1e-8]
    eig = sysb.eigenvalue(t, u)
    assert np.max(np.abs(quotients - eig)) / abs(eig) < 1e-7


def test_eigen_residual_single_root_instances():
    for cs in ([0.5, 0.5], [0.37 + 0.11j, 0.63 - 0.11j]):
        sysb = make_system(cs, depth=3)
        sols = sysb.solve(n_seeds=8)
        assert sols
        hpts = sample_regular_cartan(RS1, MD, RNG, 2)
        upts = [0.62 + 0.3j, 0.25 + 0.55j]
        report = sysb.verify_eigenvector(sols[0].t, hpts, upts)
        assert report["status"] == "ok"
        assert report["max_rel"] < 1e-7


def test_eigen_residual_two_roots():
    c1 = 0.73 + 0.21j
    sysb = make_system([c1, 2 - c1])
    sols = sysb.solve(n_seeds=8)
    assert sols
    hpts = sample_regular_cartan(RS1, MD, RNG, 2)
    upts = [0.62 + 0.3j, -0.1 + 0.2j]
    report = sysb.verify_eigenvector(sols[0].t, hpts, upts)
    assert report["status"] == "ok"
    assert report["max_rel"] < 1e-6


def test_perturbed_roots_fail_verification():
    sysb = make_system([0.5, 0.5], depth=3)
    sols = sysb.solve(seeds=[np.array([(Z2[0] + Z2[1]) / 2 + 0.49 + 0.02j])])
    t_bad = sols[0].t + 1e-3
    hpts = sample_regular_cartan(RS1, MD, RNG, 2)
    upts = [0.62 + 0.3j, 0.25 + 0.55j]
    report = sysb.verify_eigenvector(t_bad, hpts, upts)
    assert report["max_rel"] > 1e-4


def test_verification_inconclusive_below_threshold():
    sysb = make_system([0.5, 0.5], depth=3)
    sols = sysb.solve(n_seeds=8)
    hpts = sample_regular_cartan(RS1, MD, RNG, 1)
    report = sysb.verify_eigenvector(
        sols[0].t, hpts, [0.62 + 0.3j], tiny=np.inf
    )
    assert report["status"] == "inconclusive"
