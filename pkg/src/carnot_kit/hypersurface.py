"""Level-set hypersurfaces ``{f = 0}`` in a Carnot group.

All evaluations are exact: the left-invariant fields are polynomial, so
``X_i f`` is a polynomial and is evaluated on rational points.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import CarnotError, CharacteristicPointError, DimensionMismatch
from .group import GroupPoint, _cached_frame, frame_coordinates, frame_field
from .liealg import StratifiedAlgebra, Subalgebra, homogeneous_dimension
from .symbolic import MultiPoly, PolyVectorField, rank, scalar_str, solve_kernel, to_scalar

__all__ = [
    "LevelSurface",
    "TangentGroupReport",
    "horizontal_gradient",
    "is_characteristic",
    "tangent_group",
    "scan_characteristic",
    "induced_distribution",
    "y_frame",
    "growth_vector",
    "vertical_commutator_coefficients",
]


class LevelSurface:
    """Surface ``{f = 0}`` with ``f`` a polynomial in exponential coordinates."""

    def __init__(self, algebra: StratifiedAlgebra, f: MultiPoly):
        if f.nvars != algebra.n:
            raise DimensionMismatch(f"f has {f.nvars} variables, group has dimension {algebra.n}")
        if f.is_zero():
            raise ValueError("defining polynomial must not be identically zero")
        self.algebra = algebra
        self.f = f
        self._grad = None

    @property
    def horizontal_gradient_polys(self) -> List[MultiPoly]:
        """``X_1 f, ..., X_m f`` as polynomials."""
        if self._grad is None:
            frame = _cached_frame(self.algebra)
            self._grad = [frame[i].apply(self.f) for i in range(self.algebra.rank)]
        return list(self._grad)

    def is_vertical(self) -> bool:
        return all(i < self.algebra.rank for i in self.f.variables_used())

    def contains(self, point) -> bool:
        return self.f.evaluate(_coords(self, point)) == 0

    def to_json(self) -> dict:
        return {"algebra": self.algebra.to_json(), "f": self.f.to_json()}

    @classmethod
    def from_json(cls, data: dict, resolve_algebra=None) -> "LevelSurface":
        alg = data["algebra"]
        if isinstance(alg, str):
            if resolve_algebra is None:
                from .catalog import get_algebra as resolve_algebra
            alg = resolve_algebra(alg)
        else:
            alg = StratifiedAlgebra.from_json(alg)
        return cls(alg, MultiPoly.from_json(data["f"], nvars=alg.n))


def _coords(S: LevelSurface, point) -> Tuple[Fraction, ...]:
    coords = point.coords if isinstance(point, GroupPoint) else tuple(to_scalar(c) for c in point)
    if len(coords) != S.algebra.n:
        raise DimensionMismatch(f"point has {len(coords)} coordinates, group has dimension {S.algebra.n}")
    return coords


def horizontal_gradient(S: LevelSurface, p) -> List[Fraction]:
    x = _coords(S, p)
    return [g.evaluate(x) for g in S.horizontal_gradient_polys]


def is_characteristic(S: LevelSurface, p) -> bool:
    x = _coords(S, p)
    if S.f.evaluate(x) != 0:
        warnings.warn("point is not on the surface", stacklevel=2)
    return not any(horizontal_gradient(S, x))


@dataclass
class TangentGroupReport:
    point: Tuple[Fraction, ...]
    gradient: List[Fraction]
    characteristic: bool
    subalgebra: Optional[Subalgebra] = None
    homogeneous_dimension: Optional[int] = None
    first_stratum_kernel: List[Tuple[Fraction, ...]] = field(default_factory=list)
    mu: Optional[Fraction] = None
    invariant: Optional[Fraction] = None

    def to_json(self) -> dict:
        vec = lambda v: [scalar_str(x) for x in v]  # noqa: E731
        out = {
            "point": vec(self.point),
            "horizontal_gradient": vec(self.gradient),
            "characteristic": self.characteristic,
        }
        if self.subalgebra is not None:
            out["tangent_basis"] = [vec(b) for b in self.subalgebra.basis]
            out["first_stratum_kernel"] = [vec(b) for b in self.first_stratum_kernel]
            out["dimension"] = self.subalgebra.dim
            out["homogeneous_dimension"] = self.homogeneous_dimension
        if self.mu is not None:
            out["mu"] = scalar_str(self.mu)
            out["invariant"] = scalar_str(self.invariant) if self.invariant is not None else None
        return out


def tangent_group(S: LevelSurface, p) -> TangentGroupReport:
    """Intrinsic tangent: ``{v : sum_i v_i X_i f(p) = 0}`` as a subalgebra.

    It is the first-stratum kernel of the horizontal gradient plus all
    higher strata.
    """
    alg = S.algebra
    x = _coords(S, p)
    grad = horizontal_gradient(S, x)
    if not any(grad):
        raise CharacteristicPointError(f"characteristic point: horizontal gradient vanishes at {list(map(scalar_str, x))}")
    m = alg.rank
    kernel = [tuple(list(v) + [Fraction(0)] * (alg.n - m)) for v in solve_kernel([grad], m)]
    higher = [alg.basis_vector(i) for i in range(m, alg.n)]
    sub = Subalgebra(alg, kernel + higher)
    return TangentGroupReport(
        point=x,
        gradient=grad,
        characteristic=False,
        subalgebra=sub,
        homogeneous_dimension=homogeneous_dimension(sub),
        first_stratum_kernel=kernel,
    )


def _grid_axis(spec) -> List[Fraction]:
    if isinstance(spec, (list, tuple)):
        if len(spec) == 1:
            return [to_scalar(spec[0])]
        lo, hi, count = to_scalar(spec[0]), to_scalar(spec[1]), int(spec[2])
        if count < 1:
            raise ValueError("grid axis needs at least one point")
        if count == 1:
            return [lo]
        return [lo + (hi - lo) * Fraction(i, count - 1) for i in range(count)]
    return [to_scalar(spec)]


def scan_characteristic(
    S: LevelSurface,
    axes: Sequence,
    tolerance=0,
    solve_for: Optional[int] = None,
) -> List[Tuple[Fraction, ...]]:
    """Characteristic points among rational grid points on (or near) ``S``.

    ``axes`` has one entry per coordinate: a scalar (fixed value) or
    ``(lo, hi, count)``. With ``solve_for = i``, where ``f`` is affine in
    ``x_i``, coordinate ``i`` is solved exactly so every grid point lies on
    ``S``; otherwise points with ``|f| <= tolerance`` are kept.
    """
    alg = S.algebra
    if len(axes) != alg.n:
        raise DimensionMismatch(f"{len(axes)} grid axes for dimension {alg.n}")
    tolerance = to_scalar(tolerance)
    values = [_grid_axis(a) for a in axes]
    if solve_for is not None:
        values[solve_for] = [Fraction(0)]
        lin = S.f.diff(solve_for)
        if lin.diff(solve_for):
            raise ValueError(f"f is not affine in x{solve_for}")
    if any(not v for v in values):
        raise ValueError("empty grid")
    grads = S.horizontal_gradient_polys
    hits = []
    for pt in itertools.product(*values):
        if solve_for is not None:
            slope = lin.evaluate(pt)
            if slope == 0:
                continue
            pt = list(pt)
            pt[solve_for] = -S.f.evaluate(pt) / slope  # f affine in x_i, current x_i = 0
            pt = tuple(pt)
        elif abs(S.f.evaluate(pt)) > tolerance:
            continue
        if not any(g.evaluate(pt) for g in grads):
            hits.append(pt)
    return hits


def _require_heisenberg(alg: StratifiedAlgebra) -> int:
    if alg.step != 2 or alg.strata[1] != 1 or alg.strata[0] % 2:
        raise CarnotError("a Heisenberg algebra (strata (2n, 1)) is required")
    return alg.strata[0] // 2


def induced_distribution(S: LevelSurface, p) -> List[Tuple[Fraction, ...]]:
    """Basis of ``V_1(p) ∩ T_p S`` as coefficient vectors in ``X_1..X_2n``."""
    _require_heisenberg(S.algebra)
    grad = horizontal_gradient(S, p)
    if not any(grad):
        raise CharacteristicPointError("characteristic point: the distribution is all of V1")
    return [tuple(v) for v in solve_kernel([grad], len(grad))]


def _y_triple(grad: Sequence[MultiPoly], a: int, b: int, c: int, d: int) -> List[List[MultiPoly]]:
    """Coefficient rows of Y1, Y2, Y3 on the frame indices ``(a, b, c, d)``."""
    g1, g2, g3, g4 = grad[a], grad[b], grad[c], grad[d]
    return [
        [-g2, g1, -g4, g3],
        [-g3, g4, g1, -g2],
        [-g4, -g3, g2, g1],
    ]


def y_frame(S: LevelSurface) -> List[PolyVectorField]:
    """Polynomial fields spanning ``V_1 ∩ TS`` at every non-characteristic point.

    For ``n = 2`` these are the three fields

        Y1 = -(X2f)X1 + (X1f)X2 - (X4f)X3 + (X3f)X4
        Y2 = -(X3f)X1 + (X4f)X2 + (X1f)X3 - (X2f)X4
        Y3 = -(X4f)X1 - (X3f)X2 + (X2f)X3 + (X1f)X4

    For ``n > 2`` the same triple is built on every quadruple
    ``(X_i, X_j, X_{i+n}, X_{j+n})``, i < j; the union spans the distribution.
    """
    n = _require_heisenberg(S.algebra)
    if n < 2:
        raise CarnotError("the Y-frame needs n >= 2")
    grad = S.horizontal_gradient_polys
    m = 2 * n
    fields = []
    for i, j in itertools.combinations(range(n), 2):
        idx = (i, j, i + n, j + n)
        for row in _y_triple(grad, *idx):
            coeffs: List[object] = [MultiPoly.zero(S.algebra.n)] * S.algebra.n
            coeffs = list(coeffs)
            for pos, c in zip(idx, row):
                coeffs[pos] = c
            fields.append(frame_field(S.algebra, coeffs[:m] + [0] * (S.algebra.n - m)))
    return fields


def vertical_commutator_coefficients(S: LevelSurface) -> Dict[str, MultiPoly]:
    """Center components of ``[Y1,Y2], [Y1,Y3], [Y2,Y3]`` (``n = 2``)."""
    n = _require_heisenberg(S.algebra)
    if n != 2:
        raise CarnotError("commutator table is stated for n = 2")
    Y = y_frame(S)
    out = {}
    for (a, b) in ((0, 1), (0, 2), (1, 2)):
        comps = frame_coordinates(S.algebra, Y[a].bracket(Y[b]))
        out[f"Y{a + 1}Y{b + 1}"] = comps[-1]
    return out


class NotTangentError(CarnotError, ValueError):
    pass


def growth_vector(S: LevelSurface, frame: Sequence[PolyVectorField], p, maxdepth: int = 3) -> Tuple[int, ...]:
    """Dimensions of ``D, D + [D, D], D^2 + [D, D^2], ...`` at ``p``.

    ``frame`` must be tangent to ``S`` at ``p`` (each field kills ``f`` there).
    """
    x = _coords(S, p)
    grads = S.horizontal_gradient_polys
    if not any(g.evaluate(x) for g in grads):
        raise CharacteristicPointError("growth vector requested at a characteristic point")
    for k, V in enumerate(frame):
        if V.apply(S.f).evaluate(x) != 0:
            raise NotTangentError(f"frame field {k} is not tangent to the surface at the point")
    span_fields: List[PolyVectorField] = list(frame)
    newest: List[PolyVectorField] = list(frame)
    dims = []
    vals = [V.at(x) for V in span_fields]
    dims.append(rank(vals, S.algebra.n))
    for _ in range(1, maxdepth):
        nxt = []
        for A in frame:
            for B in newest:
                C = A.bracket(B)
                if not C.is_zero():
                    nxt.append(C)
        newest = nxt
        span_fields += nxt
        vals += [V.at(x) for V in nxt]
        dims.append(rank(vals, S.algebra.n))
    return tuple(dims)
