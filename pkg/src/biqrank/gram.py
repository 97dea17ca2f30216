"""The affine space of symmetric Gram matrices of a biquadratic form.

With z = x (x) y indexed by cell (i, j) at position (i-1)*n + (j-1), every
symmetric M with P = z^T M z is ``M0 + sum_q gamma_q H_q``.  There is one
nullity direction H_q per pair i<k, j<l: +1 at the (ij, kl) entries and -1
at the (il, kj) entries.  Supports are disjoint and each ``||H_q||_F^2 == 4``,
which makes projection onto the space a closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import DimensionMismatch, InvalidIndex, NotPsd, NotSimpleForm
from .forms import BiquadraticForm, form_from_tensor, monomial_table
from .numerics import eig_sym, sym_matrix

PSD_TOL = 1e-8


def index_of(i: int, j: int, m: int, n: int) -> int:
    if not (1 <= i <= m and 1 <= j <= n):
        raise InvalidIndex(f"cell {(i, j)} out of range for {m}x{n}")
    return (i - 1) * n + (j - 1)


def natural_gram(form: BiquadraticForm) -> np.ndarray:
    mn = form.m * form.n
    return form.tensor().reshape(mn, mn)


def _pairs(m: int, n: int) -> list[tuple[int, int, int, int]]:
    return [(i, k, j, l) for i, k in combinations(range(1, m + 1), 2) for j, l in combinations(range(1, n + 1), 2)]


def nullity_basis(m: int, n: int) -> list[np.ndarray]:
    out = []
    for i, k, j, l in _pairs(m, n):
        h = np.zeros((m * n, m * n))
        a, b = index_of(i, j, m, n), index_of(k, l, m, n)
        c, d = index_of(i, l, m, n), index_of(k, j, m, n)
        h[a, b] = h[b, a] = 1.0
        h[c, d] = h[d, c] = -1.0
        out.append(h)
    return out


@dataclass(frozen=True)
class GramSpace:
    m: int
    n: int
    M0: np.ndarray
    basis: list[np.ndarray] = field(repr=False)
    # flat entry positions of each H_q: rows/cols of the +1 and -1 entries
    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, form: BiquadraticForm) -> GramSpace:
        m, n = form.m, form.n
        pairs = _pairs(m, n)
        plus = np.array([(index_of(i, j, m, n), index_of(k, l, m, n)) for i, k, j, l in pairs], dtype=int).reshape(-1, 2)
        minus = np.array([(index_of(i, l, m, n), index_of(k, j, m, n)) for i, k, j, l in pairs], dtype=int).reshape(-1, 2)
        return cls(m, n, natural_gram(form), nullity_basis(m, n), plus, minus)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def subgradient(self, u: np.ndarray) -> np.ndarray:
        """Vector of u^T H_q u over q."""
        return 2.0 * (u[self.plus[:, 0]] * u[self.plus[:, 1]] - u[self.minus[:, 0]] * u[self.minus[:, 1]])

    def inner_with_basis(self, x: np.ndarray) -> np.ndarray:
        """<X, H_q>_F over q, for symmetric X."""
        return 2.0 * (x[self.plus[:, 0], self.plus[:, 1]] - x[self.minus[:, 0], self.minus[:, 1]])


def gram_at(space: GramSpace, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if gamma.size != space.dim:
        raise DimensionMismatch(f"gamma has {gamma.size} entries, space has dimension {space.dim}")
    m = space.M0.copy()
    if space.dim:
        p, q = space.plus.T, space.minus.T
        np.add.at(m, (p[0], p[1]), gamma)
        np.add.at(m, (p[1], p[0]), gamma)
        np.add.at(m, (q[0], q[1]), -gamma)
        np.add.at(m, (q[1], q[0]), -gamma)
    return m


def coordinates(space: GramSpace, x: np.ndarray) -> np.ndarray:
    """gamma of the Frobenius projection of X onto the space."""
    x = np.asarray(x, dtype=float)
    if x.shape != space.M0.shape:
        raise DimensionMismatch(f"expected a {space.M0.shape} matrix, got {x.shape}")
    return space.inner_with_basis(x - space.M0) / 4.0


def project_to_space(space: GramSpace, x: np.ndarray) -> np.ndarray:
    """Frobenius-nearest member of the Gram space."""
    return gram_at(space, coordinates(space, x))


def form_from_gram(x: np.ndarray, m: int, n: int) -> BiquadraticForm:
    """The form z^T X z, read off an mn x mn matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m * n, m * n):
        raise DimensionMismatch(f"expected a {(m * n, m * n)} matrix, got {x.shape}")
    return form_from_tensor(x.reshape(m, n, m, n))


@dataclass(frozen=True)
class SosDecomposition:
    """Bilinear terms f_p(x, y) = sum_ij C_p[i, j] x_i y_j with P = sum_p f_p^2."""

    m: int
    n: int
    terms: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.terms)

    def stacked(self) -> np.ndarray:
        """Terms as an (r, m, n) array."""
        if not self.terms:
            return np.zeros((0, self.m, self.n))
        return np.stack(self.terms)

    def gram(self) -> np.ndarray:
        c = self.stacked().reshape(len(self.terms), self.m * self.n)
        return c.T @ c

    def tensor(self) -> np.ndarray:
        c = self.stacked()
        return np.einsum("pij,pkl->ijkl", c, c)

    def to_json(self, residual: float | None = None) -> dict:
        out = {"terms": [t.tolist() for t in self.terms]}
        if residual is not None:
            out["residual"] = residual
        return out


def decomposition_from_json(obj: dict, m: int, n: int) -> SosDecomposition:
    terms = [np.asarray(t, dtype=float) for t in obj.get("terms", [])]
    if any(t.shape != (m, n) for t in terms):
        raise DimensionMismatch(f"every term must be {m}x{n}")
    return SosDecomposition(m, n, terms)


def decomposition_from_psd_gram(x: np.ndarray, m: int, n: int, tol: float = PSD_TOL) -> SosDecomposition:
    """Factor a PSD Gram matrix as sum of (sqrt(lambda_p) u_p)(...)^T.

    Eigenvalues at or below ``tol * max(1, lambda_max)`` are dropped, so the
    term count equals ``rank_eps(x, tol)`` when x is PSD.
    """
    x = sym_matrix(x)
    if x.shape != (m * n, m * n):
        raise DimensionMismatch(f"expected a {(m * n, m * n)} matrix, got {x.shape}")
    ed = eig_sym(x)
    if ed.values.size and ed.values[-1] < -tol:
        raise NotPsd(f"smallest eigenvalue {ed.values[-1]:.3e} is below -{tol:g}")
    cut = tol * max(1.0, float(ed.values[0])) if ed.values.size else 0.0
    terms = []
    for lam, u in zip(ed.values, ed.vectors.T):
        if lam > cut:
            c = np.sqrt(lam) * u
            # fix the sign so output is deterministic: first nonzero entry positive
            pivot = np.flatnonzero(np.abs(c) > 1e-12)
            if pivot.size and c[pivot[0]] < 0:
                c = -c
            terms.append(c.reshape(m, n))
    return SosDecomposition(m, n, terms)


def verify_decomposition(form: BiquadraticForm, dec: SosDecomposition) -> float:
    """Largest monomial-coefficient error between sum f_p^2 and P."""
    if (dec.m, dec.n) != (form.m, form.n):
        raise DimensionMismatch(f"decomposition is {dec.m}x{dec.n}, form is {form.m}x{form.n}")
    got = monomial_table(dec.tensor())
    want = monomial_table(form.tensor())
    return max((abs(got[k] - want[k]) for k in want), default=0.0)


def identity_decomposition(form: BiquadraticForm) -> SosDecomposition:
    """One term sqrt(c) x_i y_j per x_i^2 y_j^2 of a simple form."""
    terms = []
    for (i, j, k, l), v in sorted(form.coeffs.items()):
        if not (i == k and j == l and v > 0):
            raise NotSimpleForm("identity decomposition needs a simple form")
        c = np.zeros((form.m, form.n))
        c[i - 1, j - 1] = np.sqrt(v)
        terms.append(c)
    return SosDecomposition(form.m, form.n, terms)


def nullity_dimension(m: int, n: int) -> int:
    return comb(m, 2) * comb(n, 2)
