"""Type A root systems and the representations the Gaudin layer consumes.

The algebra sl(rank+1) is realized concretely by matrix units in the
defining representation; that realization fixes every structure-constant
sign deterministically and makes the normalized invariant form equal to
the defining-representation trace form.  Weights and roots are carried as
coordinate vectors in an orthonormal basis of the Cartan subalgebra, so
pairings are plain (bilinear, unconjugated) dot products and evaluation
against a Cartan point is a dot product as well.

Modules come in two kinds:

* finite irreducibles with dominant integral highest weight, built as the
  image of a truncated Verma module under the contravariant pairing;
* truncated dual Verma modules for arbitrary complex highest weight,
  realized on the dual of a height-truncated Poincare-Birkhoff-Witt basis
  with the transpose-contragredient action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _iproduct

import numpy as np

_WEIGHT_TOL = 1e-9


class LieAlgebraError(ValueError):
    """Unsupported input in the Lie algebra layer."""


# ---------------------------------------------------------------------------
# Root system and Chevalley generators.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChevalleyBasis:
    """Defining-representation matrices of the Chevalley generators.

    ``root_vectors[k]`` realizes the root ``roots_ab[k]``; positive roots
    come first, then their negatives in the same order, so the pairing
    partner of index k is k +- s where s is the number of positive roots.
    """

    E: tuple
    F: tuple
    H: tuple
    roots_ab: tuple
    root_vectors: tuple

    @property
    def n_positive(self) -> int:
        return len(self.roots_ab) // 2


class RootSystemData:
    """Everything about one algebra A_l, rank l <= 3.

    Attributes
    ----------
    simple_roots, positive_roots, roots, fundamental_weights : ndarray
        Coordinate vectors in the orthonormal Cartan basis, one row per
        root/weight.
    rho : ndarray
        Half sum of positive roots.
    h_ortho : list of ndarray
        Orthonormal Cartan basis as defining-representation matrices.
    """

    def __init__(self, series: str, rank: int):
        if series != "A":
            raise LieAlgebraError(f"unsupported series {series!r}; only 'A' is built")
        if not 1 <= rank <= 3:
            raise LieAlgebraError(f"unsupported rank {rank}; supported range is 1..3")
        self.series = series
        self.rank = rank
        n = rank + 1
        self.n = n
        self.dual_coxeter = n
        self.dim_g = n * n - 1

        def unit(a, b):
            m = np.zeros((n, n), dtype=complex)
            m[a, b] = 1.0
            return m

        E = tuple(unit(i, i + 1) for i in range(rank))
        F = tuple(unit(i + 1, i) for i in range(rank))
        H = tuple(unit(i, i) - unit(i + 1, i + 1) for i in range(rank))

        # positive roots eps_a - eps_b, a < b, ordered by height then lex
        pos_ab = sorted(
            ((a, b) for a in range(n) for b in range(a + 1, n)),
            key=lambda ab: (ab[1] - ab[0], ab),
        )
        roots_ab = tuple(pos_ab) + tuple((b, a) for (a, b) in pos_ab)
        root_vectors = tuple(unit(a, b) for (a, b) in roots_ab)
        self.chevalley = ChevalleyBasis(
            E=E, F=F, H=H, roots_ab=roots_ab, root_vectors=root_vectors
        )

        # Orthonormal Cartan basis via Gram-Schmidt on H_1..H_l under the
        # trace form (equal to the normalized invariant form here).
        h_ortho = []
        coeff = []  # h_r = sum_j coeff[r][j] * H_j
        for i in range(rank):
            v = H[i].astype(complex)
            c = np.zeros(rank)
            c[i] = 1.0
            for u, cu in zip(h_ortho, coeff):
                proj = np.trace(u @ v).real
                v = v - proj * u
                c = c - proj * cu
            nrm = math.sqrt(np.trace(v @ v).real)
            h_ortho.append(v / nrm)
            coeff.append(c / nrm)
        self.h_ortho = h_ortho
        self._h_coeff = np.array(coeff)  # (rank, rank)

        def coords_of_functional(ab):
            a, b = ab
            return np.array(
                [h[a, a].real - h[b, b].real for h in h_ortho]
            )

        self.positive_roots = np.array([coords_of_functional(ab) for ab in pos_ab])
        self.roots = np.vstack([self.positive_roots, -self.positive_roots])
        self.simple_roots = np.array(
            [coords_of_functional((i, i + 1)) for i in range(rank)]
        )
        # omega_i(h_r) = coefficient of H_i in h_r
        self.fundamental_weights = self._h_coeff.T.copy()
        self.rho = self.fundamental_weights.sum(axis=0)
        self.cartan_matrix = np.rint(
            self.simple_roots @ self.simple_roots.T
        ).astype(int)
        self.root_heights = tuple(b - a for (a, b) in pos_ab)

    # -- helpers --------------------------------------------------------

    @property
    def n_positive(self) -> int:
        return len(self.positive_roots)

    def root_index(self, coords) -> int:
        for k, r in enumerate(self.roots):
            if np.allclose(r, coords, atol=1e-10):
                return k
        raise LieAlgebraError(f"{coords} is not a root")

    def negative_of(self, k: int) -> int:
        s = self.n_positive
        return k + s if k < s else k - s

    def weight_from_fundamental(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=complex)
        return coeffs @ self.fundamental_weights

    def weight_from_simple_roots(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=complex)
        return coeffs @ self.simple_roots.astype(complex)

    def fundamental_coords(self, weight) -> np.ndarray:
        """Pairings weight(H_i); integral dominant weights give ints."""
        return np.asarray(weight, dtype=complex) @ self.simple_roots.T.astype(
            complex
        )

    def cartan_coords(self, diag_matrix: np.ndarray) -> np.ndarray:
        """Coordinates of a (traceless diagonal) Cartan element in h_r."""
        return np.array(
            [np.trace(diag_matrix @ h) for h in self.h_ortho], dtype=complex
        )


def build_root_system(series: str, rank: int) -> RootSystemData:
    """Construct the root-system data for series 'A', rank 1..3."""
    return RootSystemData(series, rank)


def normalized_form(x: np.ndarray, y: np.ndarray, rs: RootSystemData) -> complex:
    """Invariant bilinear form: trace of ad(x) ad(y) over twice the dual
    Coxeter number.  Arguments are defining-representation matrices."""
    basis = list(rs.chevalley.root_vectors) + list(rs.h_ortho)

    def ad(m):
        cols = []
        for b in basis:
            br = m @ b - b @ m
            coords = [br[a, c] for (a, c) in rs.chevalley.roots_ab]
            coords += [np.trace(br @ h) for h in rs.h_ortho]
            cols.append(coords)
        return np.array(cols, dtype=complex).T

    return complex(np.trace(ad(x) @ ad(y))) / (2 * rs.dual_coxeter)


# ---------------------------------------------------------------------------
# Truncated Verma machinery.
# ---------------------------------------------------------------------------


class _TruncatedVerma:
    """Height-truncated Verma module on the PBW basis.

    Basis vectors are monomials f_{b1}^{k1} ... f_{bs}^{ks} applied to the
    highest weight vector, with positive roots b1 < ... < bs in the fixed
    order of the root system and total height at most ``depth``.  Lowering
    operators that would leave the truncation are dropped; everything else
    acts exactly.
    """

    def __init__(self, rs: RootSystemData, lam: np.ndarray, depth: int):
        self.rs = rs
        self.lam = np.asarray(lam, dtype=complex)
        self.depth = depth
        s = rs.n_positive
        hts = rs.root_heights

        monos = []

        def rec(prefix, pos, height):
            if pos == s:
                monos.append(tuple(prefix))
                return
            max_k = (depth - height) // hts[pos]
            for k in range(max_k + 1):
                rec(prefix + [k], pos + 1, height + k * hts[pos])

        rec([], 0, 0)
        monos.sort(key=lambda k: (sum(ki * h for ki, h in zip(k, hts)), k))
        self.monomials = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.dim = len(monos)
        self.weights = np.array(
            [
                self.lam - sum((ki * rs.positive_roots[i] for i, ki in enumerate(m)),
                               np.zeros(rs.rank))
                for m in monos
            ],
            dtype=complex,
        )

        # bracket tables between root vectors: [e_g, e_d] decomposed into
        # root-vector coefficients and a Cartan remainder
        self._brackets = {}
        self._apply_memo = {}

    def _height(self, mono) -> int:
        return sum(k * h for k, h in zip(mono, self.rs.root_heights))

    def _bracket(self, g: int, d: int):
        key = (g, d)
        if key not in self._brackets:
            rs = self.rs
            m = (
                rs.chevalley.root_vectors[g] @ rs.chevalley.root_vectors[d]
                - rs.chevalley.root_vectors[d] @ rs.chevalley.root_vectors[g]
            )
            parts = []
            for k, (a, b) in enumerate(rs.chevalley.roots_ab):
                if m[a, b] != 0:
                    parts.append((k, m[a, b]))
            diag = np.diag(np.diag(m))
            cart = rs.cartan_coords(diag) if np.any(np.diag(m)) else None
            self._brackets[key] = (parts, cart)
        return self._brackets[key]

    def _weight_pairing(self, mono, cartan_coords: np.ndarray) -> complex:
        # weight of the monomial evaluated against a Cartan element given
        # by its orthonormal coordinates
        w = self.weights[self.index[mono]]
        return complex(w @ cartan_coords)

    def apply_root(self, g: int, mono) -> dict:
        """Action of the root vector with index g on a basis monomial.

        Returns a dict monomial -> coefficient.  Index g refers to the
        full root list of the root system (positives then negatives).
        """
        key = (g, mono)
        memo = self._apply_memo
        if key in memo:
            return memo[key]
        rs = self.rs
        s = rs.n_positive
        out: dict = {}
        if not any(mono):
            if g >= s:  # lowering operator on the highest weight vector
                new = list(mono)
                new[g - s] += 1
                new = tuple(new)
                if new in self.index:
                    out[new] = 1.0 + 0j
            # raising operator kills the highest weight vector
        else:
            b = next(i for i, k in enumerate(mono) if k > 0)
            if g >= s and g - s <= b:
                new = list(mono)
                new[g - s] += 1
                new = tuple(new)
                if new in self.index:
                    out[new] = 1.0 + 0j
            else:
                rest = list(mono)
                rest[b] -= 1
                rest = tuple(rest)
                # X f_b m' = f_b (X m') + [X, f_b] m'
                fb = s + b
                for m2, c2 in self.apply_root(g, rest).items():
                    for m3, c3 in self.apply_root(fb, m2).items():
                        out[m3] = out.get(m3, 0j) + c2 * c3
                parts, cart = self._bracket(g, fb)
                for (k, ck) in parts:
                    for m3, c3 in self.apply_root(k, rest).items():
                        out[m3] = out.get(m3, 0j) + ck * c3
                if cart is not None:
                    out[rest] = out.get(rest, 0j) + self._weight_pairing(
                        rest, cart
                    )
        out = {m: c for m, c in out.items() if c != 0}
        memo[key] = out
        return out

    def matrix_of_root(self, g: int) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for j, mono in enumerate(self.monomials):
            for m2, c in self.apply_root(g, mono).items():
                m[self.index[m2], j] = c
        return m

    def matrix_of(self, x: np.ndarray) -> np.ndarray:
        """Action of an arbitrary algebra element (defining matrix)."""
        rs = self.rs
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, (a, b) in enumerate(rs.chevalley.roots_ab):
            if x[a, b] != 0:
                out += x[a, b] * self.matrix_of_root(k)
        diag = np.diag(np.diag(x))
        if np.any(np.diag(x)):
            coords = rs.cartan_coords(diag)
            out += np.diag(self.weights @ coords)
        return out


# ---------------------------------------------------------------------------
# Represented modules.
# ---------------------------------------------------------------------------


@dataclass
class RepresentedModule:
    """A g-module given by explicit matrices in a weight basis.

    ``mats`` holds the action of the Chevalley generators and of every
    root vector; keys are ('E', i), ('F', i), ('H', i), ('h', r) and
    ('root', k) with k indexing the full root list.  For dual Verma
    modules ``j_covector`` extracts the coefficient along the highest
    weight line (the pairing with the highest weight vector of the
    underlying Verma module).
    """

    rs: RootSystemData
    kind: str
    highest_weight: np.ndarray
    weights: np.ndarray
    mats: dict
    j_covector: np.ndarray | None = None
    depth: int | None = None

    @property
    def dim(self) -> int:
        return len(self.weights)

    def matrix(self, key) -> np.ndarray:
        return self.mats[key]

    def represent(self, x: np.ndarray) -> np.ndarray:
        """Action of an arbitrary algebra element (defining matrix)."""
        rs = self.rs
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, (a, b) in enumerate(rs.chevalley.roots_ab):
            if x[a, b] != 0:
                out = out + x[a, b] * self.mats[("root", k)]
        if np.any(np.diag(x)):
            coords = rs.cartan_coords(np.diag(np.diag(x)))
            for r in range(rs.rank):
                out = out + coords[r] * self.mats[("h", r)]
        return out


def dual_action(module: RepresentedModule, x: np.ndarray) -> np.ndarray:
    """Matrix of the right action on functionals: the plain transpose.

    (A acting on Phi)(v) = Phi(A v), so products reverse under this map.
    """
    return module.represent(x).T


def _generator_keys(rs: RootSystemData):
    keys = []
    for i in range(rs.rank):
        keys += [("E", i), ("F", i), ("H", i)]
    for r in range(rs.rank):
        keys.append(("h", r))
    for k in range(len(rs.chevalley.roots_ab)):
        keys.append(("root", k))
    return keys


def _defining_matrix(rs: RootSystemData, key) -> np.ndarray:
    kind = key[0]
    if kind == "E":
        return rs.chevalley.E[key[1]]
    if kind == "F":
        return rs.chevalley.F[key[1]]
    if kind == "H":
        return rs.chevalley.H[key[1]]
    if kind == "h":
        return rs.h_ortho[key[1]]
    if kind == "root":
        return rs.chevalley.root_vectors[key[1]]
    raise KeyError(key)


def build_dual_verma(
    rs: RootSystemData, lam, depth: int
) -> RepresentedModule:
    """Truncated dual Verma module with highest weight lam.

    Realized on the dual basis of the truncated PBW basis; the action of
    an element x is the transpose of the Verma action of the
    defining-representation transpose of x.  This is the contragredient
    twist that keeps the highest weight equal to lam: raising operators
    climb toward the highest covector, and the pairing functional applied
    after a string of simple raisings reproduces Verma matrix elements
    exactly for heights below the truncation depth.
    """
    lam = np.asarray(lam, dtype=complex)
    if lam.shape != (rs.rank,):
        raise LieAlgebraError(
            f"highest weight must have {rs.rank} orthonormal coordinates"
        )
    if depth < 1:
        raise LieAlgebraError("depth must be at least 1")
    tv = _TruncatedVerma(rs, lam, depth)
    mats = {}
    for key in _generator_keys(rs):
        x = _defining_matrix(rs, key)
        mats[key] = tv.matrix_of(x.T).T
    j = np.zeros(tv.dim, dtype=complex)
    j[tv.index[(0,) * rs.n_positive]] = 1.0
    return RepresentedModule(
        rs=rs,
        kind="dual_verma",
        highest_weight=lam,
        weights=tv.weights,
        mats=mats,
        j_covector=j,
        depth=depth,
    )


def _irrep_depth(rs: RootSystemData, fund: np.ndarray) -> int:
    # height of lam - w0(lam), where w0 flips the fundamental coordinates
    g = fund + fund[::-1]
    alpha_coords = np.linalg.solve(rs.cartan_matrix.T.astype(float), g)
    return int(round(alpha_coords.sum())) + 2


def build_irrep(rs: RootSystemData, lam) -> RepresentedModule:
    """Finite irreducible module with dominant integral highest weight.

    Constructed as the image of the truncated Verma module inside its
    contragredient dual under the contravariant pairing; the dimension is
    checked against the Weyl dimension formula.
    """
    lam = np.asarray(lam, dtype=complex)
    fund = rs.fundamental_coords(lam)
    if np.max(np.abs(fund.imag)) > _WEIGHT_TOL:
        raise LieAlgebraError(f"highest weight {lam} is not real dominant")
    fund_int = np.rint(fund.real)
    if np.max(np.abs(fund.real - fund_int)) > _WEIGHT_TOL or np.min(fund_int) < 0:
        raise LieAlgebraError(
            f"highest weight with pairings {fund.real} is not dominant integral"
        )
    lam = rs.weight_from_fundamental(fund_int).real.astype(complex)

    depth = _irrep_depth(rs, fund_int)
    tv = _TruncatedVerma(rs, lam, depth)
    verma_mats = {
        key: tv.matrix_of(_defining_matrix(rs, key)) for key in _generator_keys(rs)
    }

    # Contravariant Gram matrix: row j is the v_lambda coefficient of the
    # reversed raising word of monomial j applied to each basis vector.
    top = tv.index[(0,) * rs.n_positive]
    gram = np.zeros((tv.dim, tv.dim), dtype=complex)
    for j, mono in enumerate(tv.monomials):
        word = np.eye(tv.dim, dtype=complex)
        for pos in range(rs.n_positive):
            for _ in range(mono[pos]):
                word = verma_mats[("root", pos)] @ word
        gram[j, :] = word[top, :]

    # Rank and orthonormal image basis per weight block.
    keys = [tuple(np.round(w.real, 9)) for w in tv.weights]
    blocks: dict = {}
    for i, k in enumerate(keys):
        blocks.setdefault(k, []).append(i)
    cols = []
    weights = []
    for k in sorted(blocks, key=lambda kk: blocks[kk][0]):
        idx = blocks[k]
        sub = gram[np.ix_(idx, idx)]
        u, s, _ = np.linalg.svd(sub)
        r = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 0.0)))
        for t in range(r):
            col = np.zeros(tv.dim, dtype=complex)
            col[idx] = u[:, t]
            cols.append(col)
            weights.append(tv.weights[idx[0]])
    basis = np.stack(cols, axis=1)
    weights = np.array(weights)

    mats = {}
    for key in _generator_keys(rs):
        dual = tv.matrix_of(_defining_matrix(rs, key).T).T
        mats[key] = basis.conj().T @ dual @ basis

    mod = RepresentedModule(
        rs=rs,
        kind="irrep",
        highest_weight=lam,
        weights=weights,
        mats=mats,
        j_covector=None,
        depth=None,
    )
    expected = _weyl_dimension(rs, lam)
    if mod.dim != expected:
        raise LieAlgebraError(
            f"irrep construction produced dimension {mod.dim}, Weyl formula "
            f"gives {expected}"
        )
    return mod


def _weyl_dimension(rs: RootSystemData, lam: np.ndarray) -> int:
    num = 1.0
    den = 1.0
    for alpha in rs.positive_roots:
        num *= float((lam.real + rs.rho) @ alpha)
        den *= float(rs.rho @ alpha)
    return round(num / den)


# ---------------------------------------------------------------------------
# Tensor products and zero-weight spaces.
# ---------------------------------------------------------------------------


class TensorSpace:
    """Tensor product of represented modules with its zero-weight data.

    The product basis is ordered row-major (last factor fastest), matching
    the Kronecker products used to promote single-factor operators.
    """

    def __init__(self, modules, tol: float = _WEIGHT_TOL):
        self.modules = list(modules)
        if not self.modules:
            raise LieAlgebraError("tensor product needs at least one factor")
        self.rs = self.modules[0].rs
        self.dims = [m.dim for m in self.modules]
        self.index_tuples = list(_iproduct(*(range(d) for d in self.dims)))
        w = np.zeros((len(self.index_tuples), self.rs.rank), dtype=complex)
        for pos, tup in enumerate(self.index_tuples):
            for m, k in zip(self.modules, tup):
                w[pos] += m.weights[k]
        self.weights = w
        self.zero_indices = np.array(
            [i for i, ww in enumerate(w) if np.max(np.abs(ww)) < tol], dtype=int
        )

    @property
    def dim(self) -> int:
        return len(self.index_tuples)

    @property
    def dim0(self) -> int:
        return len(self.zero_indices)

    def zero_tuples(self):
        return [self.index_tuples[i] for i in self.zero_indices]

    def op_full(self, i: int, mat: np.ndarray) -> np.ndarray:
        """Operator acting on factor i, promoted to the full product."""
        out = np.array([[1.0 + 0j]])
        for pos, d in enumerate(self.dims):
            out = np.kron(out, mat if pos == i else np.eye(d, dtype=complex))
        return out

    def restrict_zero(self, mat: np.ndarray) -> np.ndarray:
        return mat[np.ix_(self.zero_indices, self.zero_indices)]


def zero_weight_basis(modules) -> TensorSpace:
    """Tensor space of the given modules with its zero-weight sub-basis."""
    return TensorSpace(modules)
