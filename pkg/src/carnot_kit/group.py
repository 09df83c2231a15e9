"""Carnot groups in exponential coordinates of the first kind.

The group law is the Baker-Campbell-Hausdorff series, which terminates at the
step of the algebra, so everything here is exact on rational input.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch
from .liealg import StratifiedAlgebra, bracket
from .symbolic import MultiPoly, PolyVectorField, to_scalar

MAX_STEP = 4

__all__ = [
    "GroupPoint",
    "bch",
    "bch_product",
    "inverse",
    "dilate",
    "left_invariant_field",
    "left_invariant_frame",
    "bch_numeric",
    "dilate_numeric",
    "step2_B",
    "step2_product",
    "parse_point",
    "frame_coordinates",
    "frame_field",
]


@dataclass(frozen=True)
class GroupPoint:
    algebra: StratifiedAlgebra
    coords: Tuple[Fraction, ...]

    def __post_init__(self):
        coords = tuple(to_scalar(c) for c in self.coords)
        if len(coords) != self.algebra.n:
            raise DimensionMismatch(f"{len(coords)} coordinates for a group of dimension {self.algebra.n}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def identity(cls, algebra: StratifiedAlgebra) -> "GroupPoint":
        return cls(algebra, algebra.zero())

    def __mul__(self, other: "GroupPoint") -> "GroupPoint":
        return bch_product(self, other)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])


def _add(*vecs):
    return [sum(xs[1:], xs[0]) for xs in zip(*vecs)]


def _scale(c, v):
    return [c * x for x in v]


def bch(alg: StratifiedAlgebra, p: Sequence, q: Sequence) -> list:
    """``log(exp(p) exp(q))`` truncated at the step of ``alg``.

    Coefficients may be Fractions, floats or MultiPoly objects.
    """
    s = alg.step
    if s > MAX_STEP:
        raise NotImplementedError(f"BCH implemented up to step {MAX_STEP}, algebra has step {s}")
    terms = [list(p), list(q)]
    if s >= 2:
        pq = bracket(alg, p, q)
        terms.append(_scale(Fraction(1, 2), pq))
        if s >= 3:
            ppq = bracket(alg, p, pq)
            qpq = bracket(alg, q, pq)
            terms.append(_scale(Fraction(1, 12), ppq))
            terms.append(_scale(Fraction(-1, 12), qpq))
            if s >= 4:
                terms.append(_scale(Fraction(-1, 24), bracket(alg, q, ppq)))
    return _add(*terms)


def _same_group(p: GroupPoint, q: GroupPoint):
    if p.algebra is not q.algebra and p.algebra != q.algebra:
        raise DimensionMismatch("points live in different groups")


def bch_product(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    _same_group(p, q)
    return GroupPoint(p.algebra, tuple(bch(p.algebra, p.coords, q.coords)))


def inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(p.algebra, tuple(-c for c in p.coords))


def dilate(p: GroupPoint, lam) -> GroupPoint:
    """``delta_lam``: scale coordinate i by ``lam ** deg(i)``.

    Rational ``lam`` keeps the result exact. Non-positive ``lam`` is allowed
    here (it is still a graded automorphism); metric code rejects it.
    """
    lam = to_scalar(lam)
    return GroupPoint(p.algebra, tuple(c * lam**d for c, d in zip(p.coords, p.algebra.degrees)))


def left_invariant_field(alg: StratifiedAlgebra, i: int) -> PolyVectorField:
    """Left-invariant field extending ``e_i``: ``d/dt|_0 x * exp(t e_i)``.

    Obtained by running the BCH series on polynomial coordinates with an
    auxiliary variable ``t`` and extracting the coefficient of ``t``.
    """
    if not 0 <= i < alg.n:
        raise IndexError(f"basis index {i} out of range for dimension {alg.n}")
    n = alg.n
    xs = MultiPoly.variables(n + 1)
    p = xs[:n]
    t = xs[n]
    q = [t if k == i else MultiPoly.zero(n + 1) for k in range(n)]
    z = bch(alg, p, q)
    coeffs = []
    for zk in z:
        zk = zk if isinstance(zk, MultiPoly) else MultiPoly.const(n + 1, zk)
        linear = {e[:n]: c for e, c in zk.terms.items() if e[n] == 1}
        coeffs.append(MultiPoly(n, linear))
    return PolyVectorField(coeffs)


def left_invariant_frame(alg: StratifiedAlgebra) -> List[PolyVectorField]:
    return [left_invariant_field(alg, i) for i in range(alg.n)]


def bch_numeric(alg: StratifiedAlgebra, p, q) -> np.ndarray:
    """Float BCH product, broadcasting over leading axes of ``p`` and ``q``."""
    s = alg.step
    if s > MAX_STEP:
        raise NotImplementedError(f"BCH implemented up to step {MAX_STEP}, algebra has step {s}")
    n = alg.n
    C = alg.tensor().reshape(n, n * n)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def br(u, v):
        # contract u first: (..., n) @ (n, n*n) is much faster than a 3-way einsum
        return np.einsum("...jk,...j->...k", (u @ C).reshape(u.shape[:-1] + (n, n)), v)

    out = p + q
    if s >= 2:
        pq = br(p, q)
        out = out + 0.5 * pq
        if s >= 3:
            ppq = br(p, pq)
            out = out + (ppq - br(q, pq)) / 12.0
            if s >= 4:
                out = out - br(q, ppq) / 24.0
    return out


def dilate_numeric(alg: StratifiedAlgebra, x, lam: float) -> np.ndarray:
    return np.asarray(x, dtype=float) * float(lam) ** np.array(alg.degrees)


# step-2 closed form


def step2_B(alg: StratifiedAlgebra) -> List[List[List[Fraction]]]:
    """Matrices ``B[k][j][l]`` of a step-2 algebra in the convention where

    ``x . x~ = (x + x~, y + y~ + 1/2 B^k_{jl} x~_j x_l)``,

    i.e. ``[X_j, X_l] = B^k_{lj} Y_k``.
    """
    if alg.step != 2:
        raise ValueError(f"step-2 algebra required, got step {alg.step}")
    m = alg.strata[0]
    second = alg.stratum(2)
    return [
        [[alg.constant(l, j, k) for l in range(m)] for j in range(m)]
        for k in second
    ]


def step2_product(B, p: Sequence, q: Sequence) -> list:
    """Closed-form step-2 product with matrices ``B`` (rational or float)."""
    nk = len(B)
    m = len(B[0]) if nk else len(p)
    if len(p) != m + nk or len(q) != m + nk:
        raise DimensionMismatch("point length does not match the B-matrices")
    x, y = list(p[:m]), list(p[m:])
    xt, yt = list(q[:m]), list(q[m:])
    out = [a + b for a, b in zip(x, xt)]
    for k in range(nk):
        corr = sum(
            (B[k][j][l] * xt[j] * x[l] for j in range(m) for l in range(m) if B[k][j][l]),
            Fraction(0),
        )
        out.append(y[k] + yt[k] + corr / 2)
    return out


def parse_point(text: str, alg: StratifiedAlgebra) -> GroupPoint:
    """Parse ``"1,0,-1/2"`` into a point of the group of ``alg``."""
    parts = [s for s in text.replace(" ", "").split(",") if s != ""]
    return GroupPoint(alg, tuple(Fraction(s) for s in parts))


def frame_coordinates(alg: StratifiedAlgebra, field: PolyVectorField) -> List[MultiPoly]:
    """Components of ``field`` in the left-invariant frame ``X_1..X_n``.

    The frame matrix is unit upper triangular (``X_i = d_i`` plus terms in
    strictly higher degrees), so forward substitution gives exact
    polynomial components.
    """
    if field.n != alg.n:
        raise DimensionMismatch(f"field in R^{field.n}, algebra of dimension {alg.n}")
    frame = _cached_frame(alg)
    comps: List[MultiPoly] = []
    for k in range(alg.n):
        ck = field.coeffs[k]
        for i, ci in enumerate(comps):
            r = frame[i].coeffs[k]
            if ci and r:
                ck = ck - ci * r
        comps.append(ck)
    return comps


_FRAMES: dict = {}


def _cached_frame(alg: StratifiedAlgebra) -> List[PolyVectorField]:
    key = (alg.strata, tuple(alg.structure_constants))
    frame = _FRAMES.get(key)
    if frame is None:
        frame = left_invariant_frame(alg)
        _FRAMES[key] = frame
    return frame


def frame_field(alg: StratifiedAlgebra, coefficients: Sequence) -> PolyVectorField:
    """``sum_i a_i X_i`` for polynomial (or scalar) coefficients ``a_i``."""
    frame = _cached_frame(alg)
    out = PolyVectorField.zero(alg.n)
    for a, X in zip(coefficients, frame):
        if isinstance(a, MultiPoly):
            if a:
                out = out + X.scale(a)
        elif to_scalar(a):
            out = out + X.scale(to_scalar(a))
    return out
