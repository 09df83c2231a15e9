"""Stratified Lie algebras over Q given by structure constants."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, HomomorphismError, NotGradedError
from .symbolic import rank, rref, scalar_str, solve_kernel, solve_linear, to_scalar

Vector = Tuple[Fraction, ...]

__all__ = [
    "StratifiedAlgebra",
    "Subalgebra",
    "ValidationReport",
    "HomomorphismReport",
    "bracket",
    "validate_algebra",
    "subalgebra_closure",
    "homogeneous_dimension",
    "check_carnot_homomorphism",
    "image_dimension_drop",
    "graded_components",
]


class StratifiedAlgebra:
    """Graded nilpotent Lie algebra ``V_1 + ... + V_s`` on an adapted basis.

    ``brackets`` is an iterable of ``(i, j, k, c)`` meaning ``[e_i, e_j]``
    has ``c`` as its ``e_k`` component. Pairs with ``i > j`` are stored as
    ``(j, i, k, -c)``; unlisted brackets are zero.
    """

    def __init__(
        self,
        strata: Sequence[int],
        brackets: Iterable[Tuple[int, int, int, object]] = (),
        labels: Sequence[str] | None = None,
        name: str = "",
    ):
        self.strata = tuple(int(d) for d in strata)
        if any(d < 0 for d in self.strata):
            raise ValueError("strata dimensions must be non-negative")
        self.n = sum(self.strata)
        self.step = len(self.strata)
        self.name = name
        self.labels = tuple(labels) if labels is not None else tuple(f"e{i}" for i in range(self.n))
        if len(self.labels) != self.n:
            raise ValueError(f"{len(self.labels)} labels for dimension {self.n}")
        self.degrees = tuple(d + 1 for d, size in enumerate(self.strata) for _ in range(size))

        consts: Dict[Tuple[int, int, int], Fraction] = {}
        for i, j, k, c in brackets:
            i, j, k, c = int(i), int(j), int(k), to_scalar(c)
            for idx in (i, j, k):
                if not 0 <= idx < self.n:
                    raise IndexError(f"basis index {idx} out of range for dimension {self.n}")
            if c == 0:
                continue
            if i == j:
                raise ValueError(f"[e{i}, e{i}] must vanish (antisymmetry)")
            if i > j:
                i, j, c = j, i, -c
            if (i, j, k) in consts:
                raise ValueError(f"bracket ({i}, {j}) -> {k} given twice")
            consts[(i, j, k)] = c
        self._consts = consts
        # table[i][j] = {k: c} for all ordered pairs, antisymmetric completion
        table: List[List[Dict[int, Fraction]]] = [[{} for _ in range(self.n)] for _ in range(self.n)]
        for (i, j, k), c in consts.items():
            table[i][j][k] = c
            table[j][i][k] = -c
        self._table = table
        self._tensor = None

    # basic accessors
    @property
    def structure_constants(self) -> List[Tuple[int, int, int, Fraction]]:
        """Sparse upper-triangle list ``(i, j, k, c)`` with ``i < j``."""
        return [(i, j, k, c) for (i, j, k), c in sorted(self._consts.items())]

    def constant(self, i: int, j: int, k: int) -> Fraction:
        return self._table[i][j].get(k, Fraction(0))

    def degree(self, i: int) -> int:
        return self.degrees[i]

    def stratum(self, d: int) -> List[int]:
        """Basis indices of the stratum of degree ``d`` (1-based)."""
        return [i for i, deg in enumerate(self.degrees) if deg == d]

    @property
    def rank(self) -> int:
        """Dimension of the first stratum."""
        return self.strata[0] if self.strata else 0

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def basis_vector(self, i: int) -> Vector:
        return tuple(Fraction(1 if k == i else 0) for k in range(self.n))

    def vector(self, coords: Dict[str, object] | Sequence) -> Vector:
        """Build a vector from a full coordinate list or a ``{label: coeff}`` map."""
        if isinstance(coords, dict):
            out = [Fraction(0)] * self.n
            for label, c in coords.items():
                out[self.index(label)] += to_scalar(c)
            return tuple(out)
        if len(coords) != self.n:
            raise DimensionMismatch(f"vector of length {len(coords)} in algebra of dimension {self.n}")
        return tuple(to_scalar(c) for c in coords)

    def zero(self) -> Vector:
        return (Fraction(0),) * self.n

    def tensor(self) -> np.ndarray:
        """Float array ``C[i, j, k]`` of structure constants for numeric work."""
        if self._tensor is None:
            C = np.zeros((self.n, self.n, self.n))
            for i in range(self.n):
                for j in range(self.n):
                    for k, c in self._table[i][j].items():
                        C[i, j, k] = float(c)
            C.setflags(write=False)
            self._tensor = C
        return self._tensor

    def bracket(self, u: Sequence, v: Sequence) -> list:
        return bracket(self, u, v)

    def is_abelian(self) -> bool:
        return not self._consts

    def __eq__(self, other) -> bool:
        if not isinstance(other, StratifiedAlgebra):
            return NotImplemented
        return self.strata == other.strata and self._consts == other._consts

    def __hash__(self) -> int:
        return hash((self.strata, frozenset(self._consts.items())))

    def __repr__(self) -> str:
        return f"StratifiedAlgebra(name={self.name!r}, strata={self.strata})"

    def describe(self) -> List[str]:
        lines = []
        for i, j, k, c in self.structure_constants:
            coeff = "" if c == 1 else "-" if c == -1 else f"{scalar_str(c)}*"
            lines.append(f"[{self.labels[i]},{self.labels[j]}] -> {coeff}{self.labels[k]}")
        return lines

    # serialization
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "strata": list(self.strata),
            "basis": list(self.labels),
            "brackets": [
                {"i": i, "j": j, "k": k, "c": scalar_str(c)} for i, j, k, c in self.structure_constants
            ],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "StratifiedAlgebra":
        if isinstance(data, str):
            data = json.loads(data)
        strata = data["strata"]
        labels = data.get("basis")
        brackets = [(b["i"], b["j"], b["k"], to_scalar(str(b["c"]))) for b in data.get("brackets", [])]
        return cls(strata, brackets, labels=labels, name=data.get("name", ""))


def bracket(alg: StratifiedAlgebra, u: Sequence, v: Sequence) -> list:
    """``[u, v]_k = sum_ij u_i v_j c_ij^k``.

    Works for any coefficient ring whose elements support ``+`` and ``*``
    with Fractions (Fractions, floats, MultiPoly). Components with no
    contribution are ``Fraction(0)``.
    """
    if len(u) != alg.n or len(v) != alg.n:
        raise DimensionMismatch(f"vectors of length {len(u)}, {len(v)} in algebra of dimension {alg.n}")
    out = [Fraction(0)] * alg.n
    table = alg._table
    for i, ui in enumerate(u):
        if _is_zero(ui):
            continue
        row = table[i]
        for j, vj in enumerate(v):
            entry = row[j]
            if not entry or _is_zero(vj):
                continue
            uv = ui * vj
            for k, c in entry.items():
                out[k] = out[k] + uv * c
    return out


def _is_zero(x) -> bool:
    if isinstance(x, (int, float, Fraction)):
        return x == 0
    return not x


@dataclass
class ValidationReport:
    antisymmetry: List[str] = field(default_factory=list)
    jacobi: List[Tuple[str, str, str]] = field(default_factory=list)
    grading: List[str] = field(default_factory=list)
    stratification: List[Dict[str, object]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            not self.antisymmetry
            and not self.jacobi
            and not self.grading
            and all(s["holds"] for s in self.stratification)
        )

    def failures(self) -> dict:
        """Only the failing entries; empty dict means a valid Carnot algebra."""
        out = {}
        if self.antisymmetry:
            out["antisymmetry"] = self.antisymmetry
        if self.jacobi:
            out["jacobi"] = [list(t) for t in self.jacobi]
        if self.grading:
            out["grading"] = self.grading
        bad = [s for s in self.stratification if not s["holds"]]
        if bad:
            out["stratification"] = bad
        return out


def validate_algebra(alg: StratifiedAlgebra) -> ValidationReport:
    report = ValidationReport()
    n = alg.n
    for i in range(n):
        if alg._table[i][i]:
            report.antisymmetry.append(f"[{alg.labels[i]},{alg.labels[i]}] != 0")
        for j in range(i + 1, n):
            for k in set(alg._table[i][j]) | set(alg._table[j][i]):
                if alg.constant(i, j, k) != -alg.constant(j, i, k):
                    report.antisymmetry.append(f"c({alg.labels[i]},{alg.labels[j]},{alg.labels[k]})")

    for (i, j, k), c in alg._consts.items():
        if alg.degrees[k] != alg.degrees[i] + alg.degrees[j]:
            report.grading.append(
                f"[{alg.labels[i]},{alg.labels[j]}] has a {alg.labels[k]} component "
                f"(degree {alg.degrees[k]} != {alg.degrees[i]}+{alg.degrees[j]})"
            )

    basis = [alg.basis_vector(i) for i in range(n)]
    for i, j, k in itertools.combinations(range(n), 3):
        a, b, c = basis[i], basis[j], basis[k]
        total = [
            x + y + z
            for x, y, z in zip(
                bracket(alg, a, bracket(alg, b, c)),
                bracket(alg, b, bracket(alg, c, a)),
                bracket(alg, c, bracket(alg, a, b)),
            )
        ]
        if any(total):
            report.jacobi.append((alg.labels[i], alg.labels[j], alg.labels[k]))

    # V_{d+1} = [V_1, V_d] for d < s, and [V_1, V_s] = 0
    first = alg.stratum(1)
    for d in range(1, alg.step + 1):
        products = [
            bracket(alg, basis[a], basis[b]) for a in first for b in alg.stratum(d)
        ]
        products = [p for p in products if any(p)]
        if d < alg.step:
            target = [basis[i] for i in alg.stratum(d + 1)]
            got = rank(products, n) if products else 0
            joint = rank(products + target, n) if products or target else 0
            holds = got == len(target) and joint == len(target)
            report.stratification.append(
                {"stratum": d + 1, "expected_dim": len(target), "bracket_rank": got, "holds": holds}
            )
        else:
            report.stratification.append(
                {"stratum": d + 1, "expected_dim": 0, "bracket_rank": rank(products, n) if products else 0,
                 "holds": not products}
            )
    return report


def graded_components(alg: StratifiedAlgebra, rows: Sequence[Sequence]) -> Dict[int, List[List[Fraction]]]:
    """For each degree d, an echelon basis of ``span(rows) ∩ V_d``."""
    out: Dict[int, List[List[Fraction]]] = {}
    rows = [list(r) for r in rows]
    for d in range(1, alg.step + 1):
        outside = [i for i in range(alg.n) if alg.degrees[i] != d]
        if not rows:
            out[d] = []
            continue
        # coefficient vectors a with (sum a_r rows_r)[outside] = 0
        constraints = [[row[i] for row in rows] for i in outside]
        coeffs = solve_kernel(constraints, len(rows)) if constraints else solve_kernel([], len(rows))
        vecs = [[sum((a * row[i] for a, row in zip(c, rows)), Fraction(0)) for i in range(alg.n)] for c in coeffs]
        out[d] = rref(vecs, alg.n)[0] if vecs else []
    return out


class Subalgebra:
    """Subspace of an ambient algebra, stored as an echelon basis."""

    def __init__(self, ambient: StratifiedAlgebra, rows: Sequence[Sequence]):
        self.ambient = ambient
        reduced, _ = rref([list(r) for r in rows], ambient.n) if rows else ([], [])
        self.basis: Tuple[Vector, ...] = tuple(tuple(r) for r in reduced)
        self.dim = len(self.basis)
        comps = graded_components(ambient, self.basis)
        self.graded = sum(len(v) for v in comps.values()) == self.dim
        self.components = comps if self.graded else None

    def graded_basis(self) -> List[Tuple[Vector, int]]:
        """Basis vectors with their degrees, ordered by degree."""
        if not self.graded:
            raise NotGradedError("subspace is not a sum of its intersections with the strata")
        return [(tuple(v), d) for d in sorted(self.components) for v in self.components[d]]

    @property
    def degrees(self) -> List[int]:
        return [d for _, d in self.graded_basis()]

    def contains(self, v: Sequence) -> bool:
        v = [to_scalar(x) for x in v]
        if not self.basis:
            return not any(v)
        return rank(list(self.basis) + [v], self.ambient.n) == self.dim

    def same_span(self, other: "Subalgebra | Sequence[Sequence]") -> bool:
        rows = other.basis if isinstance(other, Subalgebra) else [list(r) for r in other]
        r = rank(rows, self.ambient.n) if rows else 0
        return r == self.dim and all(self.contains(x) for x in rows)

    def is_closed(self) -> bool:
        return all(
            self.contains(bracket(self.ambient, u, v))
            for u, v in itertools.combinations(self.basis, 2)
        )

    def coordinates(self, v: Sequence, basis: Sequence[Sequence] | None = None) -> List[Fraction]:
        basis = list(basis) if basis is not None else list(self.basis)
        sol = solve_linear(basis, v)
        if sol is None:
            raise ValueError("vector is not in the span of the basis")
        return sol

    def bracket_table(self, basis: Sequence[Sequence]) -> Dict[Tuple[int, int], List[Fraction]]:
        """Nonzero brackets ``[b_i, b_j]`` (i < j) in coordinates of ``basis``."""
        table = {}
        for i, j in itertools.combinations(range(len(basis)), 2):
            coords = self.coordinates(bracket(self.ambient, basis[i], basis[j]), basis)
            if any(coords):
                table[(i, j)] = coords
        return table

    def to_algebra(
        self, basis: Sequence[Sequence] | None = None, labels: Sequence[str] | None = None, name: str = ""
    ) -> StratifiedAlgebra:
        """Intrinsic algebra on a graded basis (default: the graded echelon basis).

        The basis must be ordered by degree with each vector inside one stratum.
        """
        if basis is None:
            pairs = self.graded_basis()
            basis = [v for v, _ in pairs]
        basis = [tuple(to_scalar(x) for x in b) for b in basis]
        if len(basis) != self.dim or rank(basis, self.ambient.n) != self.dim:
            raise ValueError("basis does not span the subalgebra")
        degs = []
        for b in basis:
            ds = {self.ambient.degrees[i] for i, x in enumerate(b) if x}
            if len(ds) != 1:
                raise NotGradedError("basis vector is not homogeneous")
            degs.append(ds.pop())
        if degs != sorted(degs):
            raise ValueError("basis must be ordered by degree")
        strata = [degs.count(d) for d in range(1, max(degs) + 1)] if degs else []
        consts = [
            (i, j, k, c)
            for (i, j), coords in self.bracket_table(basis).items()
            for k, c in enumerate(coords)
            if c
        ]
        return StratifiedAlgebra(strata, consts, labels=labels, name=name)


def subalgebra_closure(alg: StratifiedAlgebra, generators: Sequence[Sequence]) -> Subalgebra:
    """Smallest bracket-closed subspace containing ``generators``."""
    rows = [alg.vector(g) for g in generators]
    rows = [list(r) for r in rows if any(r)]
    if not rows:
        return Subalgebra(alg, [])
    current = rref(rows, alg.n)[0]
    while True:
        new = list(current)
        for u, v in itertools.combinations(current, 2):
            w = bracket(alg, u, v)
            if any(w):
                new.append(w)
        reduced = rref(new, alg.n)[0]
        if len(reduced) == len(current):
            return Subalgebra(alg, reduced)
        current = reduced


def homogeneous_dimension(obj: "StratifiedAlgebra | Subalgebra") -> int:
    """``sum_i i * dim V_i`` for an algebra, or the degree sum of a graded basis."""
    if isinstance(obj, StratifiedAlgebra):
        return sum((d + 1) * size for d, size in enumerate(obj.strata))
    if isinstance(obj, Subalgebra):
        if not obj.graded:
            raise NotGradedError("homogeneous dimension needs a graded subalgebra")
        return sum(d * len(v) for d, v in obj.components.items())
    raise TypeError(f"unsupported type {type(obj).__name__}")


@dataclass
class HomomorphismReport:
    ok: bool
    bracket_violations: List[Tuple[str, str]] = field(default_factory=list)
    strata_violations: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "bracket_violations": [list(p) for p in self.bracket_violations],
            "strata_violations": self.strata_violations,
        }


def _as_matrix(matrix, rows: int, cols: int) -> List[List[Fraction]]:
    m = [[to_scalar(x) for x in row] for row in matrix]
    if len(m) != rows or any(len(r) != cols for r in m):
        shape = (len(m), len(m[0]) if m else 0)
        raise DimensionMismatch(f"matrix shape {shape}, expected {(rows, cols)}")
    return m


def _apply(m: List[List[Fraction]], v: Sequence) -> List[Fraction]:
    return [sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in m]


def check_carnot_homomorphism(src: StratifiedAlgebra, dst: StratifiedAlgebra, matrix) -> HomomorphismReport:
    """Does ``matrix`` (shape dst.n x src.n, column j = image of e_j) preserve
    brackets and map each stratum into the stratum of the same degree?"""
    m = _as_matrix(matrix, dst.n, src.n)
    cols = [[m[r][j] for r in range(dst.n)] for j in range(src.n)]
    strata_bad = []
    for j, col in enumerate(cols):
        d = src.degrees[j]
        if any(x and dst.degrees[r] != d for r, x in enumerate(col)):
            strata_bad.append(src.labels[j])
    bracket_bad = []
    for i, j in itertools.combinations(range(src.n), 2):
        lhs = _apply(m, bracket(src, src.basis_vector(i), src.basis_vector(j)))
        rhs = bracket(dst, cols[i], cols[j])
        if lhs != rhs:
            bracket_bad.append((src.labels[i], src.labels[j]))
    return HomomorphismReport(not strata_bad and not bracket_bad, bracket_bad, strata_bad)


def image_dimension_drop(src: StratifiedAlgebra, dst: StratifiedAlgebra, matrix) -> Tuple[int, int]:
    """Homogeneous dimensions of the source and of the (graded) image."""
    report = check_carnot_homomorphism(src, dst, matrix)
    if not report.ok:
        raise HomomorphismError(f"not a Carnot homomorphism: {report.to_json()}")
    m = _as_matrix(matrix, dst.n, src.n)
    cols = [[m[r][j] for r in range(dst.n)] for j in range(src.n)]
    image = Subalgebra(dst, [c for c in cols if any(c)])
    return homogeneous_dimension(src), homogeneous_dimension(image)
