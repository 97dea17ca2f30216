"""Biquadratic forms P(x, y) = sum a[i,j,k,l] x_i x_k y_j y_l.

Public indices are 1-based, matching how forms are written by hand
(``x_1 .. x_m``, ``y_1 .. y_n``).  Internally the full coefficient tensor
is a 0-based ``(m, n, m, n)`` array laid out as ``a[i, j, k, l]``.

The tensor is invariant under swapping ``i <-> k`` and under swapping
``j <-> l``, so each entry belongs to an orbit of at most four positions.
A form stores one value per orbit, keyed by the lexicographically smallest
member.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch, InvalidIndex

Quad = tuple[int, int, int, int]


def orbit(i: int, j: int, k: int, l: int) -> frozenset[Quad]:
    """Distinct tensor positions equal to ``a[i,j,k,l]`` by symmetry."""
    return frozenset({(i, j, k, l), (k, j, i, l), (k, l, i, j), (i, l, k, j)})


def canonical(i: int, j: int, k: int, l: int) -> Quad:
    return min(orbit(i, j, k, l))


@dataclass(frozen=True)
class BiquadraticForm:
    m: int
    n: int
    coeffs: Mapping[Quad, float] = field(default_factory=dict)

    def tensor(self) -> np.ndarray:
        """Full orbit-expanded coefficient tensor, 0-based ``a[i, j, k, l]``."""
        a = np.zeros((self.m, self.n, self.m, self.n))
        for quad, value in self.coeffs.items():
            for i, j, k, l in orbit(*quad):
                a[i - 1, j - 1, k - 1, l - 1] = value
        return a

    def monomials(self) -> dict[Quad, float]:
        """Nonzero expanded coefficients keyed by ``(i, k, j, l)``, i<=k, j<=l."""
        out: dict[Quad, float] = {}
        for (i, j, k, l), value in self.coeffs.items():
            key = (min(i, k), max(i, k), min(j, l), max(j, l))
            out[key] = out.get(key, 0.0) + value * len(orbit(i, j, k, l))
        return out

    def is_simple(self) -> bool:
        """Only positive terms of the form x_i^2 y_j^2."""
        return all(i == k and j == l and v > 0 for (i, j, k, l), v in self.coeffs.items())

    def support_edges(self) -> list[tuple[int, int]]:
        """Cells (i, j) carrying a nonzero x_i^2 y_j^2 coefficient."""
        return sorted((i, j) for (i, j, k, l), v in self.coeffs.items() if i == k and j == l and v != 0)

    def scaled(self, c: float) -> BiquadraticForm:
        return BiquadraticForm(self.m, self.n, {q: c * v for q, v in self.coeffs.items()})

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "entries": [[*q, v] for q, v in sorted(self.coeffs.items())],
        }


def make_form(m: int, n: int, entries: Iterable[tuple[int, int, int, int, float]] = ()) -> BiquadraticForm:
    """Build a form from tensor entries ``(i, j, k, l, a_ijkl)``.

    Entries landing in the same symmetry orbit are summed.
    """
    if m < 1 or n < 1:
        raise InvalidIndex(f"form sizes must be positive, got {m}x{n}")
    acc: dict[Quad, float] = {}
    for entry in entries:
        i, j, k, l, value = entry
        i, j, k, l = int(i), int(j), int(k), int(l)
        if not (1 <= i <= m and 1 <= k <= m and 1 <= j <= n and 1 <= l <= n):
            raise InvalidIndex(f"entry {(i, j, k, l)} out of range for a {m}x{n} form")
        key = canonical(i, j, k, l)
        acc[key] = acc.get(key, 0.0) + float(value)
    return BiquadraticForm(m, n, {q: v for q, v in acc.items() if v != 0.0})


def form_from_monomials(m: int, n: int, monos: Mapping[Quad, float]) -> BiquadraticForm:
    """Build a form from expanded coefficients of ``x_i x_k y_j y_l``.

    Keys are ``(i, k, j, l)``; the coefficient is spread evenly over the
    tensor orbit.
    """
    entries = []
    for (i, k, j, l), c in monos.items():
        entries.append((i, j, k, l, c / len(orbit(i, j, k, l))))
    return make_form(m, n, entries)


def form_from_tensor(t: np.ndarray) -> BiquadraticForm:
    """Symmetrize an arbitrary ``(m, n, m, n)`` tensor into a form.

    The polynomial sum t[i,j,k,l] x_i x_k y_j y_l is unchanged.
    """
    t = np.asarray(t, dtype=float)
    m, n = t.shape[0], t.shape[1]
    sym = 0.25 * (t + t.transpose(2, 1, 0, 3) + t.transpose(2, 3, 0, 1) + t.transpose(0, 3, 2, 1))
    entries = []
    for i, j, k, l in product(range(m), range(n), range(m), range(n)):
        quad = (i + 1, j + 1, k + 1, l + 1)
        if canonical(*quad) == quad and sym[i, j, k, l] != 0.0:
            entries.append((*quad, sym[i, j, k, l]))
    return make_form(m, n, entries)


def monomial_table(t: np.ndarray) -> dict[Quad, float]:
    """Expanded coefficients of sum t[i,j,k,l] x_i x_k y_j y_l, any tensor t.

    Keys ``(i, k, j, l)`` are 1-based with i <= k, j <= l; every key is
    present, zeros included.
    """
    m, n = t.shape[0], t.shape[1]
    out = {}
    for i in range(m):
        for k in range(i, m):
            for j in range(n):
                for l in range(j, n):
                    out[(i + 1, k + 1, j + 1, l + 1)] = float(sum(t[a, b, c, d] for a, b, c, d in orbit(i, j, k, l)))
    return out


def evaluate(form: BiquadraticForm, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (form.m,) or y.shape != (form.n,):
        raise DimensionMismatch(f"expected x of length {form.m} and y of length {form.n}")
    return float(np.einsum("ijkl,i,j,k,l->", form.tensor(), x, y, x, y))


def monomial_coeff(form: BiquadraticForm, i: int, k: int, j: int, l: int) -> float:
    """Total coefficient of ``x_i x_k y_j y_l`` in the expanded polynomial."""
    if not (i <= k and j <= l):
        raise InvalidIndex("monomial indices must satisfy i <= k and j <= l")
    if not (1 <= i and k <= form.m and 1 <= j and l <= form.n):
        raise InvalidIndex(f"monomial {(i, k, j, l)} out of range")
    value = form.coeffs.get(canonical(i, j, k, l), 0.0)
    return value * len(orbit(i, j, k, l))


def simple_form_from_graph(graph) -> BiquadraticForm:
    """P_G = sum over edges (i, j) of x_i^2 y_j^2."""
    return make_form(graph.m, graph.n, [(i, j, i, j, 1.0) for i, j in sorted(graph.edges)])


_CHOI_SQUARES = [(1, 1), (2, 2), (3, 3), (1, 2), (2, 3), (3, 1)]
_CHOI_PRINTED_NEGATIVE = [(1, 3), (2, 1), (3, 2)]


def choi_form(variant: str = "classical") -> BiquadraticForm:
    """Choi's 3x3 form.

    ``classical`` is the PSD, non-SOS form with cross terms
    -2(x1 x2 y1 y2 + x2 x3 y2 y3 + x3 x1 y3 y1).  ``printed`` uses three
    negative squares x1^2 y3^2, x2^2 y1^2, x3^2 y2^2 instead, which is not
    even PSD (it is -1 at x = e1, y = e3).
    """
    monos: dict[Quad, float] = {(i, i, j, j): 1.0 for i, j in _CHOI_SQUARES}
    if variant == "classical":
        for i, k in [(1, 2), (2, 3), (1, 3)]:
            monos[(i, k, i, k)] = -2.0
    elif variant == "printed":
        for i, j in _CHOI_PRINTED_NEGATIVE:
            monos[(i, i, j, j)] = -1.0
    else:
        raise ValueError(f"unknown Choi variant {variant!r}")
    return form_from_monomials(3, 3, monos)


def form_from_json(obj: dict) -> BiquadraticForm:
    try:
        m, n = int(obj["m"]), int(obj["n"])
        entries = [tuple(e) for e in obj.get("entries", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed form object: {exc}") from exc
    if any(len(e) != 5 for e in entries):
        raise ValueError("each form entry must be [i, j, k, l, value]")
    return make_form(m, n, entries)


def load_form(path) -> BiquadraticForm:
    with open(path) as fh:
        return form_from_json(json.load(fh))
