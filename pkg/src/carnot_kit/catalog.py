"""Built-in algebras, the 147E invariant and the worked constructions.

Index conventions:

* ``g_mu``: basis ``X1..X7`` at indices 0..6, strata (3, 3, 1).
* ``g8``: basis ``X0..X7`` at indices 0..7, strata (4, 3, 1), so the index
  of ``X_i`` is ``i``.
* ``heis(n)``: basis ``X1..X2n`` then the center ``X(2n+1)``, with
  ``[X_j, X_{j+n}] = X(2n+1)``.
* ``heisxR(n)``: ``heis(n)`` with an extra first-stratum generator ``T``
  placed after ``X2n`` and before the center ``Z``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import CarnotError, NotOnSurfaceError
from .liealg import (
    StratifiedAlgebra,
    Subalgebra,
    bracket,
    check_carnot_homomorphism,
    subalgebra_closure,
)
from .symbolic import MultiPoly, scalar_str, solve_kernel, to_scalar

__all__ = [
    "make_g_mu",
    "make_g8",
    "make_heisenberg",
    "make_heisxR",
    "make_abelian",
    "quotient_by_top_stratum",
    "get_algebra",
    "ClassInvariantReport",
    "invariant_I",
    "classify_147E",
    "lambda_family_generators",
    "lambda_family_basis",
    "lambda_family_witness",
    "LambdaWitness",
    "surface_S",
    "surface_S_polynomial",
    "surface_S_frame",
    "surface_S_point",
    "tangent_class_of_S",
    "Decomposition",
    "vertical_hyperplane_decomposition",
    "every_tangent_sphere",
    "sphere_point_for_covector",
]


def make_g_mu(mu) -> StratifiedAlgebra:
    mu = to_scalar(mu)
    X = {i: i - 1 for i in range(1, 8)}
    brackets = [
        (X[1], X[2], X[4], 1),
        (X[1], X[3], X[6], -1),
        (X[2], X[3], X[5], 1),
        (X[1], X[5], X[7], -1),
        (X[2], X[6], X[7], mu),
        (X[3], X[4], X[7], 1 - mu),
    ]
    return StratifiedAlgebra(
        (3, 3, 1), brackets, labels=[f"X{i}" for i in range(1, 8)], name=f"g_mu({scalar_str(mu)})"
    )


def make_g8() -> StratifiedAlgebra:
    brackets = [
        (1, 2, 4, 1),
        (1, 3, 6, -1),
        (1, 0, 4, -1),
        (2, 3, 5, 1),
        (1, 5, 7, -1),
        (3, 4, 7, 1),
        (0, 6, 7, 1),
    ]
    return StratifiedAlgebra((4, 3, 1), brackets, labels=[f"X{i}" for i in range(8)], name="g8")


def make_heisenberg(n: int) -> StratifiedAlgebra:
    if n < 1:
        raise ValueError("Heisenberg algebra needs n >= 1")
    z = 2 * n
    brackets = [(j, j + n, z, 1) for j in range(n)]
    return StratifiedAlgebra(
        (2 * n, 1), brackets, labels=[f"X{i}" for i in range(1, 2 * n + 2)], name=f"heis({n})"
    )


def make_heisxR(n: int) -> StratifiedAlgebra:
    """``h^n x R``; for ``n = 0`` this is the abelian line."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return StratifiedAlgebra((1,), [], labels=["T"], name="heisxR(0)")
    z = 2 * n + 1
    brackets = [(j, j + n, z, 1) for j in range(n)]
    labels = [f"X{i}" for i in range(1, 2 * n + 1)] + ["T", "Z"]
    return StratifiedAlgebra((2 * n + 1, 1), brackets, labels=labels, name=f"heisxR({n})")


def make_abelian(n: int) -> StratifiedAlgebra:
    return StratifiedAlgebra((n,), [], labels=[f"X{i}" for i in range(1, n + 1)], name=f"R^{n}")


def quotient_by_top_stratum(alg: StratifiedAlgebra) -> Tuple[StratifiedAlgebra, List[List[Fraction]]]:
    """``alg / V_s`` and the projection matrix onto it."""
    if alg.step < 2:
        raise ValueError("quotient by the top stratum needs step >= 2")
    keep = [i for i in range(alg.n) if alg.degrees[i] < alg.step]
    pos = {i: r for r, i in enumerate(keep)}
    brackets = [
        (pos[i], pos[j], pos[k], c) for i, j, k, c in alg.structure_constants if k in pos
    ]
    quot = StratifiedAlgebra(
        alg.strata[:-1], brackets, labels=[alg.labels[i] for i in keep], name=f"{alg.name}/V{alg.step}"
    )
    proj = [[Fraction(1 if j == i else 0) for j in range(alg.n)] for i in keep]
    return quot, proj


def get_algebra(name: str) -> StratifiedAlgebra:
    """Resolve CLI names ``g8``, ``g_mu(1/2)``, ``heis(2)``, ``heisxR(1)``, ``abelian(3)``."""
    name = name.strip()
    if name == "g8":
        return make_g8()
    if "(" in name and name.endswith(")"):
        head, arg = name[:-1].split("(", 1)
        if head == "g_mu":
            return make_g_mu(arg)
        if head == "heis":
            return make_heisenberg(int(arg))
        if head == "heisxR":
            return make_heisxR(int(arg))
        if head in ("abelian", "R"):
            return make_abelian(int(arg))
    raise KeyError(f"unknown algebra name {name!r}")


# 147E invariant


@dataclass(frozen=True)
class ClassInvariantReport:
    mu: Fraction
    defined: bool
    value: Optional[Fraction]

    def to_json(self) -> dict:
        return {
            "mu": scalar_str(self.mu),
            "defined": self.defined,
            "I": scalar_str(self.value) if self.value is not None else None,
        }


def invariant_I(mu) -> ClassInvariantReport:
    """``(1 - mu + mu^2)^3 / (mu^2 (mu - 1)^2)``; undefined at mu in {0, 1}."""
    mu = to_scalar(mu)
    if mu in (0, 1):
        return ClassInvariantReport(mu, False, None)
    return ClassInvariantReport(mu, True, (1 - mu + mu * mu) ** 3 / (mu**2 * (mu - 1) ** 2))


def classify_147E(mu1, mu2) -> str:
    """``"equal"``/``"distinct"`` by comparing invariants, else ``"indeterminate"``."""
    a, b = invariant_I(mu1), invariant_I(mu2)
    if not (a.defined and b.defined):
        return "indeterminate"
    return "equal" if a.value == b.value else "distinct"


# the lambda-family inside g8


def lambda_family_generators(lam) -> List[Tuple[Fraction, ...]]:
    """``X1, Y2 = X2 + lam X0, X3`` as vectors of g8."""
    lam = to_scalar(lam)
    g = make_g8()
    return [
        g.vector({"X1": 1}),
        g.vector({"X2": 1, "X0": lam}),
        g.vector({"X3": 1}),
    ]


def lambda_family_basis(lam) -> List[Tuple[Fraction, ...]]:
    """``X1, Y2, X3, Y4 = (1-lam) X4, X5, X6, X7`` in g8 coordinates."""
    lam = to_scalar(lam)
    g = make_g8()
    return lambda_family_generators(lam) + [
        g.vector({"X4": 1 - lam}),
        g.vector({"X5": 1}),
        g.vector({"X6": 1}),
        g.vector({"X7": 1}),
    ]


@dataclass
class LambdaWitness:
    lam: Fraction
    closure: Subalgebra
    matrix: List[List[Fraction]]  # 8 x 7: column j = image of X_{j+1} of g_lam
    homomorphism_ok: bool
    injective: bool
    image_is_closure: bool

    @property
    def ok(self) -> bool:
        return self.homomorphism_ok and self.injective and self.image_is_closure


def lambda_family_witness(lam) -> LambdaWitness:
    """Explicit Carnot isomorphism ``g_lam -> closure{X1, X2 + lam X0, X3}``.

    Sends ``X1, X2, X3, X4, X5, X6, X7`` to ``X1, Y2, X3, (1-lam)X4, X5, X6, X7``
    and verifies it rather than searching for it.
    """
    from .symbolic import rank

    lam = to_scalar(lam)
    g = make_g8()
    src = make_g_mu(lam)
    images = lambda_family_basis(lam)
    matrix = [[images[j][r] for j in range(7)] for r in range(8)]
    hom = check_carnot_homomorphism(src, g, matrix).ok
    injective = rank(images, 8) == 7
    closure = subalgebra_closure(g, lambda_family_generators(lam))
    image_is_closure = closure.same_span([v for v in images if any(v)])
    return LambdaWitness(lam, closure, matrix, hom, injective, image_is_closure)


# the surface x2^3/3 + x0 = 0 in g8


def surface_S_polynomial() -> MultiPoly:
    x = MultiPoly.variables(8)
    return x[2] ** 3 * Fraction(1, 3) + x[0]


def surface_S():
    from .hypersurface import LevelSurface

    return LevelSurface(make_g8(), surface_S_polynomial())


def surface_S_frame():
    """``X1, X2 - x2^2 X0, X3`` as polynomial fields on g8."""
    from .group import left_invariant_field

    g = make_g8()
    X = [left_invariant_field(g, i) for i in range(4)]
    x2 = MultiPoly.var(8, 2)
    return [X[1], X[2] - X[0].scale(x2 * x2), X[3]]


def surface_S_point(x2, others: Dict[int, object] | None = None) -> Tuple[Fraction, ...]:
    """A point of S with the given ``x2`` (``x0 = -x2^3/3``)."""
    x2 = to_scalar(x2)
    coords = [Fraction(0)] * 8
    for i, v in (others or {}).items():
        coords[i] = to_scalar(v)
    coords[2] = x2
    coords[0] = -(x2**3) / 3
    return tuple(coords)


def tangent_class_of_S(point) -> dict:
    """Class of the tangent group of S at ``point``: ``mu = -x2^2``.

    Cross-validated by running the generic tangent-group computation and
    checking the explicit isomorphism witness onto ``g_mu``.
    """
    from .group import GroupPoint
    from .hypersurface import tangent_group

    g = make_g8()
    coords = tuple(to_scalar(c) for c in point)
    if len(coords) != 8:
        raise NotOnSurfaceError("a point of g8 has 8 coordinates")
    S = surface_S()
    if S.f.evaluate(coords) != 0:
        raise NotOnSurfaceError("point is not on x2^3/3 + x0 = 0")
    mu = -coords[2] ** 2
    report = tangent_group(S, GroupPoint(g, coords))
    witness = lambda_family_witness(mu)
    tangent_matches = (
        witness.ok and report.subalgebra.same_span(witness.closure)
    ) if mu != 1 else False
    inv = invariant_I(mu)
    return {
        "mu": mu,
        "invariant": inv,
        "tangent_matches_g_mu": tangent_matches,
        "tangent": report,
    }


# vertical hyperplanes of the Heisenberg algebra


@dataclass
class Decomposition:
    """Kernel subalgebra ``W + center`` of a covector on ``V1(h^n)``.

    ``basis`` is ordered ``e_1..e_{n-1}, f_1..f_{n-1}, v, z`` with
    ``[e_i, f_j] = delta_ij z``, ``v`` central in ``W``.
    """

    ambient: StratifiedAlgebra
    covector: Tuple[Fraction, ...]
    central: Tuple[Fraction, ...]
    pairs: List[Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]]
    center: Tuple[Fraction, ...]
    algebra: StratifiedAlgebra  # intrinsic algebra on ``basis``
    target: StratifiedAlgebra  # heisxR(n-1)
    matrix: List[List[Fraction]]  # algebra -> target

    @property
    def basis(self) -> List[Tuple[Fraction, ...]]:
        es = [e for e, _ in self.pairs]
        fs = [f for _, f in self.pairs]
        return es + fs + [self.central, self.center]

    def verify(self) -> bool:
        return check_carnot_homomorphism(self.algebra, self.target, self.matrix).ok

    def embedding_ok(self) -> bool:
        """The basis map ``heisxR(n-1) -> h^n`` is an injective Carnot
        homomorphism whose image is the kernel subalgebra."""
        from .symbolic import rank

        basis = self.basis
        matrix = [[b[r] for b in basis] for r in range(self.ambient.n)]
        hom = check_carnot_homomorphism(self.target, self.ambient, matrix).ok
        kernel = [
            tuple(list(w) + [Fraction(0)] * (self.ambient.n - len(self.covector)))
            for w in solve_kernel([list(self.covector)], len(self.covector))
        ] + [self.center]
        image = Subalgebra(self.ambient, basis)
        return hom and rank(basis, self.ambient.n) == len(basis) and image.same_span(kernel)

    def to_json(self) -> dict:
        vec = lambda v: [scalar_str(x) for x in v]  # noqa: E731
        return {
            "covector": vec(self.covector),
            "central": vec(self.central),
            "pairs": [[vec(e), vec(f)] for e, f in self.pairs],
            "center": vec(self.center),
            "target": self.target.name,
            "matrix": [vec(r) for r in self.matrix],
            "homomorphism": self.verify(),
            "embedding": self.embedding_ok(),
        }


def _omega(alg: StratifiedAlgebra, u, v) -> Fraction:
    return bracket(alg, u, v)[alg.n - 1]


def vertical_hyperplane_decomposition(alg: StratifiedAlgebra, covector: Sequence) -> Decomposition:
    """Split ``ker(covector) + center`` of ``h^n`` as ``h^{n-1} x R``.

    The central direction ``v`` is the lowest-index kernel vector of the
    skew form restricted to ``W = ker(covector)``; the remaining pairs are
    produced by symplectic Gram-Schmidt on a complement of ``v`` in ``W``.
    """
    if alg.step != 2 or alg.strata[1] != 1:
        raise CarnotError("expected a Heisenberg algebra (strata (2n, 1))")
    m = alg.strata[0]
    n = m // 2
    a = [to_scalar(c) for c in covector]
    if len(a) != m:
        raise CarnotError(f"covector must have {m} entries")
    if not any(a):
        raise CarnotError("zero covector has no hyperplane kernel")
    if n < 2:
        raise CarnotError("n = 1: the kernel is abelian R x R, outside the h^(n-1) x R statement")

    ext = lambda w: tuple(list(w) + [Fraction(0)] * (alg.n - m))  # noqa: E731
    W = [ext(w) for w in solve_kernel([a], m)]
    gram = [[_omega(alg, u, v) for v in W] for u in W]
    rad = solve_kernel(gram, len(W))
    if not rad:
        raise CarnotError("skew form on the kernel has trivial radical")  # impossible: odd dimension
    coeffs = rad[0]
    v = tuple(sum((c * w[i] for c, w in zip(coeffs, W)), Fraction(0)) for i in range(alg.n))
    # complement of v in W: drop the W basis vector where coeffs has its last nonzero (free) entry
    drop = max(i for i, c in enumerate(coeffs) if c)
    rest = [w for i, w in enumerate(W) if i != drop]

    pairs = []
    pool = list(rest)
    while pool:
        e = pool.pop(0)
        idx = next((i for i, u in enumerate(pool) if _omega(alg, e, u) != 0), None)
        if idx is None:
            raise CarnotError("skew form degenerate on the complement")  # unreachable for a Heisenberg kernel
        f = pool.pop(idx)
        f = tuple(x / _omega(alg, e, f) for x in f)
        new_pool = []
        for u in pool:
            # u - omega(u, f) e + omega(u, e) f is orthogonal to e and f
            ue, uf = _omega(alg, u, e), _omega(alg, u, f)
            new_pool.append(tuple(x - uf * ei + ue * fi for x, ei, fi in zip(u, e, f)))
        pool = new_pool
        pairs.append((e, f))

    center = alg.basis_vector(alg.n - 1)
    es = [e for e, _ in pairs]
    fs = [f for _, f in pairs]
    basis = es + fs + [v, center]
    sub = Subalgebra(alg, basis)
    k = n - 1
    labels = [f"E{i}" for i in range(1, k + 1)] + [f"F{i}" for i in range(1, k + 1)] + ["V", "Z"]
    intrinsic = sub.to_algebra(basis, labels=labels, name=f"ker{list(map(scalar_str, a))}")
    target = make_heisxR(k)
    size = 2 * k + 2
    identity = [[Fraction(1 if i == j else 0) for j in range(size)] for i in range(size)]
    return Decomposition(alg, tuple(a), v, pairs, center, intrinsic, target, identity)


# the sphere with every tangent


def every_tangent_sphere(alg: StratifiedAlgebra):
    from .hypersurface import LevelSurface

    m = alg.rank
    x = MultiPoly.variables(alg.n)
    f = sum((x[i] * x[i] for i in range(m)), MultiPoly.zero(alg.n)) - 1
    return LevelSurface(alg, f)


def sphere_point_for_covector(alg: StratifiedAlgebra, covector: Sequence) -> Tuple[Fraction, ...]:
    """Point ``(a, 0, ..., 0)`` of the unit sphere whose tangent kernel is ``ker a``.

    Needs ``|a|`` rational (e.g. a Pythagorean covector); otherwise raises.
    """
    a = [to_scalar(c) for c in covector]
    if len(a) != alg.rank or not any(a):
        raise CarnotError("need a nonzero covector on the first stratum")
    norm2 = sum(c * c for c in a)
    norm = _rational_sqrt(norm2)
    if norm is None:
        raise CarnotError(f"|a|^2 = {scalar_str(norm2)} is not a rational square")
    return tuple([c / norm for c in a] + [Fraction(0)] * (alg.n - alg.rank))


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    from math import isqrt

    if q < 0:
        return None
    num, den = isqrt(q.numerator), isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None
