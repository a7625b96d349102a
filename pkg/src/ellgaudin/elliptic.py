"""Odd Jacobi theta function and relatives on a fixed elliptic curve.

Everything here is a function of a point on the curve C/(Z + tau*Z) with
Im(tau) > 0.  Values are produced as truncated Taylor jets so that callers
can differentiate analytically instead of by finite differences.

The evaluation strategy for the theta series is always: reduce the
argument to the fundamental cell, sum the defining series there (it
converges in a handful of terms), then restore the exact quasi-periodicity
factor.  This keeps magnitudes bounded for arbitrary arguments.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as _iproduct

_PI = math.pi
_TWO_PI_I = 2j * math.pi

# Relative floor under which theta11 counts as "at a pole of 1/theta11".
POLE_FLOOR = 1e-12

_MAX_JET_ORDER = 6


class EllipticError(ValueError):
    """Domain problem in the elliptic layer."""


class PoleProximityError(EllipticError):
    """An argument landed too close to a lattice point.

    Attributes
    ----------
    argument : str
        Which function argument hit the pole ('z' or 'c').
    nearest : complex
        The offending lattice point m*tau + n.
    """

    def __init__(self, message: str, *, argument: str, nearest: complex):
        super().__init__(message)
        self.argument = argument
        self.nearest = nearest


class SeriesConvergenceError(EllipticError):
    """Theta series missed the term cutoff within the term cap.

    In practice this signals |q| too close to 1 (Im tau too small).
    """


@dataclass(frozen=True)
class ModularData:
    """Curve parameter plus series truncation policy.

    Parameters
    ----------
    tau : complex
        Modulus of the curve, Im(tau) > 0.
    eps_term : float
        Relative term cutoff for the theta series.
    n_max : int
        Hard cap on the number of series terms.
    """

    tau: complex
    eps_term: float = 1e-16
    n_max: int = 64
    q: complex = field(init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if not tau.imag > 0:
            raise ValueError(f"Im(tau) must be positive, got tau={tau}")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0 < self.eps_term < 1:
            raise ValueError("eps_term must lie in (0, 1)")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "q", cmath.exp(_TWO_PI_I * tau))


@dataclass(frozen=True)
class LatticeReduction:
    """Decomposition z = z0 + m*tau + n with z0 in the fundamental cell."""

    z0: complex
    m: int
    n: int


def reduce_to_cell(z: complex, md: ModularData) -> LatticeReduction:
    """Split z into a cell representative and exact lattice multiples.

    The representative satisfies 0 <= Re(z0) < 1 and
    0 <= Im(z0)/Im(tau) < 1 (up to roundoff at the boundary), and
    z0 + m*tau + n reconstructs z.
    """
    z = complex(z)
    tau = md.tau
    m = math.floor(z.imag / tau.imag)
    z1 = z - m * tau
    n = math.floor(z1.real)
    return LatticeReduction(z0=z1 - n, m=m, n=n)


def nearest_lattice_point(z: complex, md: ModularData) -> complex:
    """Lattice point m*tau + n closest to z (candidates from reduction)."""
    red = reduce_to_cell(z, md)
    best = None
    for dm, dn in _iproduct((0, 1), (0, 1)):
        cand = (red.m + dm) * md.tau + (red.n + dn)
        if best is None or abs(z - cand) < abs(z - best):
            best = cand
    return best


# ---------------------------------------------------------------------------
# Truncated multivariate Taylor jets.
# ---------------------------------------------------------------------------

Multi = tuple


@lru_cache(maxsize=None)
def jet_indices(caps: tuple, total: int) -> tuple:
    """All multi-indices m with m <= caps componentwise and |m| <= total.

    Sorted by total degree, then lexicographically; the zero index comes
    first.
    """
    out = [
        m
        for m in _iproduct(*(range(c + 1) for c in caps))
        if sum(m) <= total
    ]
    out.sort(key=lambda m: (sum(m), m))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_set(caps: tuple, total: int) -> frozenset:
    return frozenset(jet_indices(caps, total))


def _multi_factorial(m: Multi) -> float:
    out = 1.0
    for k in m:
        out *= math.factorial(k)
    return out


class ScalarJet:
    """Truncated Taylor expansion of a scalar function of several variables.

    ``coeffs[m]`` is the Taylor coefficient d^m f / m! at the expansion
    point.  Retained multi-indices are those with m <= caps componentwise
    and |m| <= total; everything else is treated as zero.  Arithmetic
    truncates back to the same scheme, which is exact for the retained
    degrees.
    """

    __slots__ = ("caps", "total", "coeffs")

    def __init__(self, caps, total, coeffs=None):
        self.caps = tuple(int(c) for c in caps)
        self.total = int(total)
        self.coeffs = {} if coeffs is None else dict(coeffs)

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, value, caps, total):
        zero = (0,) * len(caps)
        return cls(caps, total, {zero: complex(value)})

    @classmethod
    def affine(cls, value, grads, caps, total):
        """Jet of value + sum_r grads[r] * h_r."""
        caps = tuple(caps)
        coeffs = {(0,) * len(caps): complex(value)}
        for r, g in enumerate(grads):
            if g == 0:
                continue
            m = tuple(1 if s == r else 0 for s in range(len(caps)))
            if m in _index_set(caps, total):
                coeffs[m] = complex(g)
        return cls(caps, total, coeffs)

    # -- basic accessors ----------------------------------------------

    @property
    def nvars(self) -> int:
        return len(self.caps)

    @property
    def value(self) -> complex:
        return self.coeffs.get((0,) * self.nvars, 0j)

    def coeff(self, m: Multi) -> complex:
        return self.coeffs.get(tuple(m), 0j)

    def deriv(self, m: Multi) -> complex:
        """Value of the derivative d^m f at the expansion point."""
        return self.coeff(m) * _multi_factorial(tuple(m))

    # -- ring operations ----------------------------------------------

    def _check(self, other: "ScalarJet"):
        if self.caps != other.caps or self.total != other.total:
            raise ValueError(
                f"jet scheme mismatch: {self.caps}/{self.total} vs "
                f"{other.caps}/{other.total}"
            )

    def __add__(self, other):
        if not isinstance(other, ScalarJet):
            out = dict(self.coeffs)
            zero = (0,) * self.nvars
            out[zero] = out.get(zero, 0j) + complex(other)
            return ScalarJet(self.caps, self.total, out)
        self._check(other)
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, 0j) + c
        return ScalarJet(self.caps, self.total, out)

    __radd__ = __add__

    def __neg__(self):
        return ScalarJet(
            self.caps, self.total, {m: -c for m, c in self.coeffs.items()}
        )

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarJet) else -complex(other))

    def __rsub__(self, other):
        return (-self) + complex(other)

    def __mul__(self, other):
        if not isinstance(other, ScalarJet):
            s = complex(other)
            return ScalarJet(
                self.caps, self.total, {m: c * s for m, c in self.coeffs.items()}
            )
        self._check(other)
        keep = _index_set(self.caps, self.total)
        out = {}
        for ma, ca in self.coeffs.items():
            if ca == 0:
                continue
            for mb, cb in other.coeffs.items():
                if cb == 0:
                    continue
                m = tuple(a + b for a, b in zip(ma, mb))
                if m in keep:
                    out[m] = out.get(m, 0j) + ca * cb
        return ScalarJet(self.caps, self.total, out)

    __rmul__ = __mul__

    def reciprocal(self) -> "ScalarJet":
        v = self.value
        if v == 0:
            raise ZeroDivisionError("jet reciprocal at a zero value")
        out = {}
        for m in jet_indices(self.caps, self.total):
            if sum(m) == 0:
                out[m] = 1.0 / v
                continue
            acc = 0j
            for ma, ca in self.coeffs.items():
                if sum(ma) == 0 or ca == 0:
                    continue
                if any(a > b for a, b in zip(ma, m)):
                    continue
                mb = tuple(b - a for a, b in zip(ma, m))
                acc += ca * out.get(mb, 0j)
            out[m] = -acc / v
        return ScalarJet(self.caps, self.total, out)

    def __truediv__(self, other):
        if isinstance(other, ScalarJet):
            return self * other.reciprocal()
        return self * (1.0 / complex(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * complex(other)

    # -- calculus -----------------------------------------------------

    def deriv_jet(self, var: int) -> "ScalarJet":
        """Jet of the partial derivative along variable ``var``.

        The cap in that variable and the total order each drop by one.
        """
        if self.caps[var] < 1:
            raise ValueError("jet does not carry that derivative")
        caps = tuple(
            c - 1 if r == var else c for r, c in enumerate(self.caps)
        )
        total = self.total - 1
        keep = _index_set(caps, total)
        out = {}
        for m, c in self.coeffs.items():
            if m[var] == 0:
                continue
            mm = tuple(k - 1 if r == var else k for r, k in enumerate(m))
            if mm in keep:
                out[mm] = c * m[var]
        return ScalarJet(caps, total, out)

    def truncate(self, caps, total) -> "ScalarJet":
        caps = tuple(caps)
        keep = _index_set(caps, int(total))
        return ScalarJet(
            caps, total, {m: c for m, c in self.coeffs.items() if m in keep}
        )

    def exp(self) -> "ScalarJet":
        v = self.value
        zero = (0,) * self.nvars
        nil = ScalarJet(
            self.caps,
            self.total,
            {m: c for m, c in self.coeffs.items() if m != zero},
        )
        acc = ScalarJet.constant(1.0, self.caps, self.total)
        term = ScalarJet.constant(1.0, self.caps, self.total)
        for k in range(1, self.total + 1):
            term = term * nil * (1.0 / k)
            acc = acc + term
        return acc * cmath.exp(v)

    def log(self) -> "ScalarJet":
        v = self.value
        if v == 0:
            raise ZeroDivisionError("jet log at a zero value")
        zero = (0,) * self.nvars
        nil = ScalarJet(
            self.caps,
            self.total,
            {m: c / v for m, c in self.coeffs.items() if m != zero},
        )
        acc = ScalarJet.constant(cmath.log(v), self.caps, self.total)
        term = ScalarJet.constant(1.0, self.caps, self.total)
        for k in range(1, self.total + 1):
            term = term * nil
            acc = acc + term * ((-1.0) ** (k + 1) / k)
        return acc

    def __repr__(self):
        return f"ScalarJet(caps={self.caps}, total={self.total}, value={self.value})"


# ---------------------------------------------------------------------------
# Theta series.
# ---------------------------------------------------------------------------


def _theta_series_coeffs(z0: complex, md: ModularData, order: int) -> list:
    """Taylor coefficients of the theta series at a reduced point.

    Sums the defining series over half-integers n + 1/2 (terms paired as
    n <-> -n-1), differentiating term by term.  Stops once the envelope of
    the next term falls below eps_term relative to the partial sums, with
    an absolute floor at the natural scale of theta so that exact zeros of
    the value do not stall the test.
    """
    qt = cmath.exp(1j * _PI * md.tau)
    aqt = abs(qt)
    scale_floor = 2.0 * aqt ** 0.25
    imz = abs(z0.imag)
    partial = [0j] * (order + 1)
    for nn in range(md.n_max):
        amp = -2.0 * (-1) ** nn * qt ** ((nn + 0.5) ** 2)
        base = (2 * nn + 1) * _PI
        arg = base * z0
        for k in range(order + 1):
            partial[k] += (
                amp * base ** k * cmath.sin(arg + k * _PI / 2) / math.factorial(k)
            )
        nb = (2 * (nn + 1) + 1) * _PI
        env = 2.0 * aqt ** ((nn + 1.5) ** 2) * math.exp(nb * imz)
        if all(
            env * nb ** k / math.factorial(k)
            <= md.eps_term * (abs(partial[k]) + scale_floor)
            for k in range(order + 1)
        ):
            return partial
    raise SeriesConvergenceError(
        f"theta series did not converge within {md.n_max} terms for "
        f"tau={md.tau}; |q| is too close to 1"
    )


def _check_order(order: int):
    if not 0 <= order <= _MAX_JET_ORDER:
        raise ValueError(f"jet order must lie in [0, {_MAX_JET_ORDER}], got {order}")


def theta11(z: complex, md: ModularData, order: int = 0) -> ScalarJet:
    """Jet of the odd Jacobi theta function at z.

    The function is entire, odd, vanishes exactly on the lattice, and
    satisfies theta11(z+1) = -theta11(z) and
    theta11(z+tau) = -exp(-pi*i*tau - 2*pi*i*z) * theta11(z).
    """
    _check_order(order)
    red = reduce_to_cell(z, md)
    a = _theta_series_coeffs(red.z0, md, order)
    # Exact quasi-periodicity factor, itself expanded as a jet in z.
    s = (-1) ** (red.m + red.n) * cmath.exp(
        -1j * _PI * red.m * red.m * md.tau - _TWO_PI_I * red.m * red.z0
    )
    w = -_TWO_PI_I * red.m
    coeffs = {}
    for k in range(order + 1):
        acc = 0j
        for j in range(k + 1):
            acc += a[k - j] * s * w ** j / math.factorial(j)
        coeffs[(k,)] = acc
    return ScalarJet((order,), order, coeffs)


@lru_cache(maxsize=None)
def theta11_prime_at_zero(md: ModularData) -> complex:
    """theta11'(0), from the term-by-term derivative of the series."""
    return _theta_series_coeffs(0j, md, 1)[1]


def _pole_check(value: complex, z: complex, md: ModularData, argument: str):
    if abs(value) < POLE_FLOOR * abs(theta11_prime_at_zero(md)):
        near = nearest_lattice_point(z, md)
        raise PoleProximityError(
            f"theta11 vanishes at {argument}={z}; nearest lattice point "
            f"{near} (= {_lattice_label(near, md)})",
            argument=argument,
            nearest=near,
        )


def _lattice_label(point: complex, md: ModularData) -> str:
    m = round(point.imag / md.tau.imag)
    n = round((point - m * md.tau).real)
    return f"{m}*tau + {n}"


def zeta11(z: complex, md: ModularData, order: int = 0) -> ScalarJet:
    """Jet of the logarithmic derivative theta11'/theta11 at z.

    Quasi-periodic: zeta11(z+1) = zeta11(z) and
    zeta11(z+tau) = zeta11(z) - 2*pi*i; simple pole with residue 1 at
    lattice points.  Raises :class:`PoleProximityError` near the lattice.
    """
    _check_order(order)
    th = theta11(z, md, order + 1)
    _pole_check(th.value, complex(z), md, "z")
    return th.deriv_jet(0) / th.truncate((order,), order)


def w_kernel(
    c: complex, z: complex, md: ModularData, order_c: int = 0, order_z: int = 0
) -> ScalarJet:
    """Bivariate jet of the quasi-periodic kernel w_c(z).

    w_c(z) = theta11'(0) * theta11(z - c) / (theta11(z) * theta11(-c)).

    Elliptic in c; in z it is 1-periodic and gains exp(2*pi*i*c) under
    z -> z + tau.  Simple pole with residue 1 at z on the lattice; poles
    in c on the lattice as well.  The two jet orders are independent;
    variable 0 of the result is c, variable 1 is z.
    """
    if order_c < 0 or order_z < 0 or order_c + order_z > _MAX_JET_ORDER:
        raise ValueError("jet orders must be nonnegative with sum <= 6")
    c = complex(c)
    z = complex(z)
    tot = order_c + order_z
    caps = (order_c, order_z)
    keep = _index_set(caps, tot)

    tzc = theta11(z - c, md, tot)
    tz = theta11(z, md, order_z)
    tc = theta11(-c, md, order_c)
    _pole_check(tz.value, z, md, "z")
    _pole_check(tc.value, -c, md, "c")

    # theta11(z - c) as a function of (c, z): steps combine as h_z - h_c.
    num = {}
    for (j, k) in keep:
        a = tzc.coeff((j + k,))
        num[(j, k)] = a * math.comb(j + k, j) * (-1.0) ** j
    num_jet = ScalarJet(caps, tot, num)

    den_z = ScalarJet(
        caps, tot, {(0, k): tz.coeff((k,)) for k in range(order_z + 1)}
    )
    den_c = ScalarJet(
        caps,
        tot,
        {(j, 0): tc.coeff((j,)) * (-1.0) ** j for j in range(order_c + 1)},
    )
    return num_jet * theta11_prime_at_zero(md) / (den_z * den_c)
