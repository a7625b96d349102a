"""Elliptic Gaudin transfer operator at the critical level.

Sites on an elliptic curve carry modules of a simple Lie algebra; the
transfer operator acts on functions of a Cartan element H = sum xi_r h_r
valued in the zero-weight subspace of the tensor product of dual modules.
It combines a flat connection nabla_r = d_r - sum_i zeta(z_i - u) h_r^(i)
with an elliptic-kernel exchange potential, and the whole family over the
spectral parameter u commutes.  A Weyl-Kac denominator conjugation yields
the equivalent form produced by the underlying conformal field theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffop import DiffOperator, MatrixJet, constant_coeff
from .elliptic import (
    ModularData,
    ScalarJet,
    jet_indices,
    nearest_lattice_point,
    theta11,  # noqa: F401  (re-exported convenience)
    w_kernel,
    zeta11,
)
from .liealg import RepresentedModule, RootSystemData, TensorSpace


class GaudinError(Exception):
    """Raised for invalid Gaudin-model configurations or domain errors."""


# ---------------------------------------------------------------------------
# jets of elementary functions of a linear form alpha(H)
# ---------------------------------------------------------------------------


def _exp_linear_jet(
    prefactor: complex, rate: complex, direction, H, order: int
) -> ScalarJet:
    """Jet of prefactor * exp(rate * (direction . xi)) around xi = H."""
    direction = np.asarray(direction, dtype=complex)
    H = np.asarray(H, dtype=complex)
    nvars = len(direction)
    caps = (order,) * nvars
    val = prefactor * np.exp(rate * (direction @ H))
    coeffs = {}
    for m in jet_indices(caps, order):
        c = val
        for dr, mi in zip(direction, m):
            if mi:
                c *= (rate * dr) ** mi / math.factorial(mi)
        if c != 0:
            coeffs[m] = c
    return ScalarJet(caps, order, coeffs)


def _linear_substitution(values, direction, H, order: int) -> ScalarJet:
    """Jet of g(direction . xi) from univariate coefficients of g at c0.

    ``values[k]`` is the k-th Taylor coefficient of g at c0 = direction.H;
    the multinomial weights distribute each power of the increment over
    the xi variables.
    """
    direction = np.asarray(direction, dtype=complex)
    nvars = len(direction)
    caps = (order,) * nvars
    coeffs = {}
    for m in jet_indices(caps, order):
        k = sum(m)
        a = values[k]
        if a == 0:
            continue
        c = a * math.factorial(k)
        for dr, mi in zip(direction, m):
            c *= dr**mi / math.factorial(mi)
        if c != 0:
            coeffs[m] = c
    return ScalarJet(caps, order, coeffs)


def _univariate_w(c0: complex, z: complex, md: ModularData, order: int):
    """Taylor coefficients in c of w_c(z) at c0, as a list."""
    jet = w_kernel(c0, z, md, order_c=order, order_z=0)
    return [jet.coeff((k, 0)) for k in range(order + 1)]


def _convolve(a, b, order: int):
    out = [0j] * (order + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(order + 1 - i):
            out[i + j] += ai * b[j]
    return out


# ---------------------------------------------------------------------------
# regularity of the Cartan point
# ---------------------------------------------------------------------------


def check_regular(rs: RootSystemData, md: ModularData, H, guard: float = 1e-9):
    """Require alpha(H) to stay away from the period lattice for all roots.

    The exchange kernels w_{alpha(H)} and the Weyl-Kac denominator are
    singular when any root takes a lattice value on H.
    """
    H = np.asarray(H, dtype=complex)
    for k, alpha in enumerate(rs.positive_roots):
        c = complex(alpha @ H)
        lam = nearest_lattice_point(c, md)
        if abs(c - lam) < guard:
            raise GaudinError(
                f"Cartan point is singular: root #{k} takes the value "
                f"{c:.6g}, within {abs(c - lam):.2e} of the lattice point "
                f"{lam:.6g}"
            )


def sample_regular_cartan(
    rs: RootSystemData,
    md: ModularData,
    rng: np.random.Generator,
    count: int,
    box: float = 0.8,
    guard: float = 0.05,
    max_tries: int = 10_000,
):
    """Random complex Cartan coordinates avoiding all root-lattice walls."""
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise GaudinError("could not sample enough regular Cartan points")
        H = rng.uniform(-box, box, rs.rank) + 1j * rng.uniform(-box, box, rs.rank)
        try:
            check_regular(rs, md, H, guard)
        except GaudinError:
            continue
        out.append(H)
    return out


def sample_spectral_points(
    md: ModularData,
    positions,
    rng: np.random.Generator,
    count: int,
    guard: float = 0.05,
    max_tries: int = 10_000,
):
    """Random spectral parameters in the fundamental cell away from sites."""
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise GaudinError("could not sample enough spectral points")
        u = rng.uniform(0.0, 1.0) + rng.uniform(0.05, 0.95) * md.tau
        if any(
            abs((z - u) - nearest_lattice_point(z - u, md)) < guard
            for z in positions
        ):
            continue
        out.append(u)
    return out


# ---------------------------------------------------------------------------
# Weyl-Kac denominator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeylKacData:
    """Value, log-jet in xi, and tau-derivative jet of the denominator."""

    value: complex
    log_jet: ScalarJet
    dtau_log: ScalarJet

    @property
    def dtau_log_value(self) -> complex:
        return self.dtau_log.value


def weyl_kac_pi(
    rs: RootSystemData,
    md: ModularData,
    H,
    order: int = 0,
    eps: float = 1e-18,
    n_max: int = 800,
) -> WeylKacData:
    """Normalised Weyl-Kac denominator Pi(H, tau) with its log-jets.

    Pi = q^{dim g/24} (q;q)_inf^l  prod_{alpha>0} (e^{pi i a(H)}-e^{-pi i a(H)})
         prod_{alpha} (q e^{2 pi i a(H)}; q)_inf ,  q = e^{2 pi i tau}.

    Returns the scalar value, the jet of log Pi in the xi coordinates to
    the requested order, and the jet of d/dtau log Pi.
    """
    H = np.asarray(H, dtype=complex)
    check_regular(rs, md, H)
    l = rs.rank
    caps = (order,) * l
    q = md.q

    log_const = (rs.dim_g / 24.0) * (2j * np.pi * md.tau)
    dtau_const = (rs.dim_g / 24.0) * (2j * np.pi)
    n = 1
    while n <= n_max:
        qn = q**n
        if abs(qn) < eps:
            break
        log_const += l * np.log(1 - qn)
        dtau_const += l * (-2j * np.pi * n * qn / (1 - qn))
        n += 1

    log_jet = ScalarJet.constant(log_const, caps, order)
    dtau_jet = ScalarJet.constant(dtau_const, caps, order)

    for alpha in rs.positive_roots:
        plus = _exp_linear_jet(1.0, 1j * np.pi, alpha, H, order)
        minus = _exp_linear_jet(1.0, -1j * np.pi, alpha, H, order)
        log_jet = log_jet + (plus - minus).log()

    one = ScalarJet.constant(1.0, caps, order)
    for alpha in rs.roots:
        scale = abs(np.exp(2j * np.pi * complex(alpha @ H)))
        n = 1
        while n <= n_max:
            qn = q**n
            if abs(qn) * max(scale, 1.0) < eps:
                break
            x = _exp_linear_jet(qn, 2j * np.pi, alpha, H, order)
            log_jet = log_jet + (one - x).log()
            dtau_jet = dtau_jet - (
                (2j * np.pi * n) * (x * (one - x).reciprocal())
            )
            n += 1

    return WeylKacData(np.exp(log_jet.value), log_jet, dtau_jet)


# ---------------------------------------------------------------------------
# the Gaudin problem
# ---------------------------------------------------------------------------


class GaudinProblem:
    """Sites, modules, and the associated transfer operator family.

    ``positions`` are the marked points z_i; ``modules`` the site modules.
    All operators act on the zero-weight subspace of the tensor product of
    dual spaces, where the dual pairing turns each module action into its
    transpose.
    """

    def __init__(
        self,
        rs: RootSystemData,
        md: ModularData,
        positions,
        modules,
        pole_guard: float = 1e-9,
    ):
        if len(positions) != len(modules):
            raise GaudinError("one position per module is required")
        if not modules:
            raise GaudinError("at least one site is required")
        for mod in modules:
            if mod.rs is not rs:
                raise GaudinError("all modules must share the root system")
        self.rs = rs
        self.md = md
        self.positions = [complex(z) for z in positions]
        self.modules = list(modules)
        self.pole_guard = pole_guard
        self.space = TensorSpace(modules)
        if self.space.dim0 == 0:
            raise GaudinError("the zero-weight subspace is trivial")
        self._build_site_operators()

    # -- site operators on the zero-weight subspace ---------------------

    def star_matrix(self, i: int, x: np.ndarray) -> np.ndarray:
        """Transpose action of x on the dual of site i's underlying space.

        Irreducible site modules are stored by their own action, so the
        dual action is the plain transpose.  Dual Verma modules are stored
        already acting on the dual space via the transpose-compose-
        involution construction; undoing the involution (transposing the
        defining matrix) recovers the plain transpose action.
        """
        mod = self.modules[i]
        if mod.kind == "dual_verma":
            return mod.represent(np.asarray(x).T)
        return mod.represent(x).T

    def _build_site_operators(self):
        rs, space = self.rs, self.space
        nsites = len(self.modules)
        self._hstar = [
            [
                space.restrict_zero(
                    space.op_full(i, self.star_matrix(i, rs.h_ortho[r]))
                )
                for r in range(rs.rank)
            ]
            for i in range(nsites)
        ]
        nroots = len(rs.chevalley.roots_ab)
        self._pair = {}
        for k in range(nroots):
            e_plus = rs.chevalley.root_vectors[k]
            e_minus = rs.chevalley.root_vectors[rs.negative_of(k)]
            for i in range(nsites):
                lower = space.op_full(i, self.star_matrix(i, e_plus))
                for j in range(nsites):
                    raise_ = space.op_full(j, self.star_matrix(j, e_minus))
                    self._pair[(i, j, k)] = space.restrict_zero(raise_ @ lower)

    # -- coefficient data ------------------------------------------------

    def cartan_matrices(self, u: complex):
        """A_r(u) = sum_i zeta(z_i - u) h_r^(i) on the zero-weight space."""
        u = complex(u)
        zvals = [zeta11(z - u, self.md).value for z in self.positions]
        out = []
        for r in range(self.rs.rank):
            m = np.zeros((self.space.dim0, self.space.dim0), dtype=complex)
            for i, zv in enumerate(zvals):
                m = m + zv * self._hstar[i][r]
            out.append(m)
        return out

    def potential_jet(self, H, u: complex, order: int = 0) -> MatrixJet:
        """Jet of the exchange potential
        (1/2) sum_{i,j,alpha} w_{a(H)}(z_i-u) w_{-a(H)}(z_j-u) e_{-a}^(j) e_a^(i).
        """
        H = np.asarray(H, dtype=complex)
        check_regular(self.rs, self.md, H, self.pole_guard)
        u = complex(u)
        rs, md = self.rs, self.md
        dim0 = self.space.dim0
        acc = MatrixJet.zeros((dim0, dim0), rs.rank, order)
        for k in range(len(rs.chevalley.roots_ab)):
            alpha = rs.roots[k]
            c0 = complex(alpha @ H)
            lower = [
                _univariate_w(c0, z - u, md, order) for z in self.positions
            ]
            flip = [(-1.0) ** m for m in range(order + 1)]
            upper = []
            for z in self.positions:
                vals = _univariate_w(-c0, z - u, md, order)
                upper.append([f * v for f, v in zip(flip, vals)])
            for i in range(len(self.positions)):
                for j in range(len(self.positions)):
                    prod = _convolve(lower[i], upper[j], order)
                    jet = _linear_substitution(prod, alpha, H, order)
                    acc = acc + MatrixJet.from_scalar(
                        jet, 0.5 * self._pair[(i, j, k)], order
                    )
        return acc

    # -- operators ---------------------------------------------------------

    def transfer(self, u: complex) -> DiffOperator:
        """The transfer operator at spectral parameter u,
        (1/2) sum_r nabla_r^2 + potential, as a differential operator in xi.
        """
        u = complex(u)
        l = self.rs.rank
        dim0 = self.space.dim0
        eye = np.eye(dim0, dtype=complex)
        A = self.cartan_matrices(u)
        coeffs = {}
        for r in range(l):
            two = tuple(2 if s == r else 0 for s in range(l))
            one = tuple(1 if s == r else 0 for s in range(l))
            coeffs[two] = constant_coeff(0.5 * eye)
            coeffs[one] = constant_coeff(-A[r])
        const0 = sum((Ar @ Ar for Ar in A), np.zeros_like(eye)) * 0.5

        def zero_fn(H, order, _const=const0, _u=u):
            jet = self.potential_jet(H, _u, order)
            return jet + MatrixJet.constant(_const, l, order)

        coeffs[(0,) * l] = zero_fn
        return DiffOperator(l, dim0, coeffs)

    def nabla(self, u: complex) -> list:
        """The flat-connection operators nabla_r = d_r - A_r(u)."""
        l = self.rs.rank
        dim0 = self.space.dim0
        eye = np.eye(dim0, dtype=complex)
        A = self.cartan_matrices(u)
        out = []
        for r in range(l):
            one = tuple(1 if s == r else 0 for s in range(l))
            out.append(
                DiffOperator(
                    l,
                    dim0,
                    {one: constant_coeff(eye), (0,) * l: constant_coeff(-A[r])},
                )
            )
        return out

    def _mult_denominator(self, sign: int, extra_order: int = 0) -> DiffOperator:
        l = self.rs.rank
        dim0 = self.space.dim0
        eye = np.eye(dim0, dtype=complex)

        def fn(H, order):
            data = weyl_kac_pi(self.rs, self.md, H, order + extra_order)
            jet = data.log_jet if sign > 0 else -data.log_jet
            return MatrixJet.from_scalar(
                jet.truncate((order,) * l, order).exp(), eye, order
            )

        return DiffOperator(l, dim0, {(0,) * l: fn})

    def tilde_transfer(self, u: complex, route: str = "explicit") -> DiffOperator:
        """Denominator-conjugated transfer operator.

        'conjugation' computes Pi^{-1} o transfer o Pi with generic
        operator composition; 'explicit' adds the log-derivative terms
        sum_r (d_r log Pi) nabla_r + 2 pi i h_vee (d_tau log Pi) directly.
        Both must agree; the equality encodes a heat-type identity for the
        denominator.
        """
        base = self.transfer(u)
        l = self.rs.rank
        dim0 = self.space.dim0
        eye = np.eye(dim0, dtype=complex)
        if route == "conjugation":
            left = self._mult_denominator(-1)
            right = self._mult_denominator(+1)
            return left.compose(base.compose(right))
        if route != "explicit":
            raise GaudinError(f"unknown route {route!r}")
        A = self.cartan_matrices(u)
        hvee = self.rs.dual_coxeter

        def first_factory(r):
            def fn(H, order):
                data = weyl_kac_pi(self.rs, self.md, H, order + 1)
                return MatrixJet.from_scalar(
                    data.log_jet.deriv_jet(r), eye, order
                )

            return fn

        def zero_fn(H, order):
            data = weyl_kac_pi(self.rs, self.md, H, order + 1)
            acc = MatrixJet.from_scalar(
                (2j * np.pi * hvee)
                * data.dtau_log.truncate((order,) * l, order),
                eye,
                order,
            )
            for r in range(l):
                acc = acc + MatrixJet.from_scalar(
                    data.log_jet.deriv_jet(r), -A[r], order
                )
            return acc

        coeffs = {(0,) * l: zero_fn}
        for r in range(l):
            one = tuple(1 if s == r else 0 for s in range(l))
            coeffs[one] = first_factory(r)
        extra = DiffOperator(l, dim0, coeffs)
        return base + extra


# ---------------------------------------------------------------------------
# commutativity diagnostics
# ---------------------------------------------------------------------------


def commutativity_residual(
    problem: GaudinProblem,
    u1: complex,
    u2: complex,
    h_points,
) -> dict:
    """Relative size of [transfer(u1), transfer(u2)] at sample points.

    Returns the maximum relative residual over the sample points together
    with the largest absolute top-degree (order 3 and 4) coefficients,
    which must vanish identically.
    """
    t1 = problem.transfer(u1)
    t2 = problem.transfer(u2)
    comm = t1.commutator(t2)
    max_rel = 0.0
    max_abs34 = {3: 0.0, 4: 0.0}
    for H in h_points:
        H = np.asarray(H, dtype=complex)
        vals = comm.evaluate(H)
        scale = t1.max_coeff_norm(H) * t2.max_coeff_norm(H)
        worst = max(float(np.max(np.abs(v))) for v in vals.values())
        max_rel = max(max_rel, worst / max(scale, 1e-300))
        for m, v in vals.items():
            if sum(m) in (3, 4):
                max_abs34[sum(m)] = max(
                    max_abs34[sum(m)], float(np.max(np.abs(v)))
                )
    return {
        "max_rel": max_rel,
        "max_abs_order3": max_abs34[3],
        "max_abs_order4": max_abs34[4],
    }
