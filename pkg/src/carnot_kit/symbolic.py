"""Exact rationals, multivariate polynomials, polynomial vector fields and
exact linear algebra over Q.

Everything here is immutable and uses :class:`fractions.Fraction`; no floating
point is involved except in :meth:`MultiPoly.compile`, which produces a numeric
evaluator for the metrics layer.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch

Scalar = Fraction
Number = Union[int, Fraction, str]

__all__ = [
    "Scalar",
    "to_scalar",
    "scalar_str",
    "MultiPoly",
    "PolyVectorField",
    "poly_apply",
    "field_bracket",
    "rref",
    "rank",
    "solve_kernel",
    "solve_linear",
    "in_span",
]


def to_scalar(value) -> Fraction:
    """Coerce ints, strings like ``"3/4"`` and Fractions to a Fraction.

    Floats are rejected: an exact layer fed a float is almost always a bug.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (np.integer,)):
        return Fraction(int(value))
    raise TypeError(f"cannot convert {value!r} ({type(value).__name__}) to an exact scalar")


def scalar_str(value: Fraction) -> str:
    value = to_scalar(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class MultiPoly:
    """Polynomial in ``nvars`` variables with exact rational coefficients.

    Stored as a dict mapping exponent tuples to nonzero Fractions.
    """

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Dict[Tuple[int, ...], Number] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        clean: Dict[Tuple[int, ...], Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError(f"exponent tuple {exps} does not have length {nvars}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = to_scalar(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self.nvars = nvars
        self._terms = clean
        self._hash = None

    # constructors
    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls(nvars)

    @classmethod
    def const(cls, nvars: int, c: Number) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int) -> "MultiPoly":
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[i] = 1
        return cls(nvars, {tuple(exps): 1})

    @classmethod
    def variables(cls, nvars: int) -> List["MultiPoly"]:
        return [cls.var(nvars, i) for i in range(nvars)]

    # basic protocol
    @property
    def terms(self) -> Dict[Tuple[int, ...], Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def variables_used(self) -> set:
        used = set()
        for exps in self._terms:
            used.update(i for i, e in enumerate(exps) if e)
        return used

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.const(self.nvars, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"MultiPoly({self.nvars}, {self.to_str()!r})"

    def to_str(self, names: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        names = names or [f"x{i}" for i in range(self.nvars)]
        parts = []
        for exps in sorted(self._terms, key=lambda e: (-sum(e), [-x for x in e])):
            c = self._terms[exps]
            mono = "*".join(
                names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(exps) if e
            )
            if not mono:
                parts.append(scalar_str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{scalar_str(c)}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # arithmetic
    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise DimensionMismatch(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return MultiPoly.const(self.nvars, to_scalar(other))

    def __add__(self, other) -> "MultiPoly":
        other = self._coerce(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return MultiPoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            c = to_scalar(other)
            return MultiPoly(self.nvars, {e: c * v for e, v in self._terms.items()})
        other = self._coerce(other)
        out: Dict[Tuple[int, ...], Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return MultiPoly(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "MultiPoly":
        return self * (1 / to_scalar(other))

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = MultiPoly.const(self.nvars, 1)
        for _ in range(k):
            out = out * self
        return out

    # calculus and evaluation
    def diff(self, i: int) -> "MultiPoly":
        out = {}
        for exps, c in self._terms.items():
            if exps[i]:
                e = list(exps)
                e[i] -= 1
                out[tuple(e)] = c * exps[i]
        return MultiPoly(self.nvars, out)

    def __call__(self, point: Sequence):
        return self.evaluate(point)

    def evaluate(self, point: Sequence):
        """Evaluate at ``point``; exact when the entries are ints/Fractions."""
        if len(point) != self.nvars:
            raise DimensionMismatch(f"point has {len(point)} entries, expected {self.nvars}")
        total = 0
        for exps, c in self._terms.items():
            term = c
            for x, e in zip(point, exps):
                if e:
                    term = term * x**e
            total = total + term
        if isinstance(total, int):
            return Fraction(total)
        return total

    def substitute(self, values: Sequence["MultiPoly"]) -> "MultiPoly":
        """Compose: replace variable i by the polynomial ``values[i]``."""
        if len(values) != self.nvars:
            raise ValueError("need one polynomial per variable")
        target_n = values[0].nvars if values else 0
        out = MultiPoly.zero(target_n)
        for exps, c in self._terms.items():
            term = MultiPoly.const(target_n, c)
            for v, e in zip(values, exps):
                if e:
                    term = term * v**e
            out = out + term
        return out

    def compile(self):
        """Return a numpy evaluator ``f(x)`` with ``x`` of shape ``(..., nvars)``."""
        if not self._terms:
            return lambda x: np.zeros(np.shape(x)[:-1])
        exps = np.array(list(self._terms.keys()), dtype=int).reshape(-1, self.nvars)
        coefs = np.array([float(c) for c in self._terms.values()])

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            # (..., 1, nvars) ** (nterms, nvars) -> (..., nterms)
            monos = np.prod(x[..., None, :] ** exps, axis=-1)
            return monos @ coefs

        return evaluate

    # serialization
    def to_json(self) -> list:
        return [
            {"exponents": list(e), "c": scalar_str(c)}
            for e, c in sorted(self._terms.items())
        ]

    @classmethod
    def from_json(cls, data: Iterable[dict], nvars: int | None = None) -> "MultiPoly":
        data = list(data)
        if nvars is None:
            if not data:
                raise ValueError("cannot infer variable count of an empty polynomial")
            nvars = len(data[0]["exponents"])
        terms: Dict[Tuple[int, ...], Fraction] = {}
        for item in data:
            e = tuple(item["exponents"])
            terms[e] = terms.get(e, Fraction(0)) + to_scalar(item["c"])
        return cls(nvars, terms)


class PolyVectorField:
    """Vector field ``sum_j coeffs[j] * d/dx_j`` with polynomial coefficients."""

    __slots__ = ("n", "coeffs")

    def __init__(self, coeffs: Sequence[MultiPoly]):
        coeffs = tuple(coeffs)
        if not coeffs:
            raise ValueError("a vector field needs at least one coefficient")
        n = len(coeffs)
        for c in coeffs:
            if c.nvars != n:
                raise DimensionMismatch(
                    f"coefficient has {c.nvars} variables but the field has dimension {n}"
                )
        self.n = n
        self.coeffs = coeffs

    @classmethod
    def coordinate(cls, n: int, j: int) -> "PolyVectorField":
        return cls([MultiPoly.const(n, 1 if i == j else 0) for i in range(n)])

    @classmethod
    def zero(cls, n: int) -> "PolyVectorField":
        return cls([MultiPoly.zero(n) for _ in range(n)])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        terms = [f"({c.to_str()})*d{j}" for j, c in enumerate(self.coeffs) if c]
        return "PolyVectorField(" + (" + ".join(terms) or "0") + ")"

    def _check(self, other: "PolyVectorField"):
        if self.n != other.n:
            raise DimensionMismatch(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        self._check(other)
        return PolyVectorField([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self) -> "PolyVectorField":
        return PolyVectorField([-a for a in self.coeffs])

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return self + (-other)

    def scale(self, g) -> "PolyVectorField":
        """Multiply by a scalar or by a polynomial function."""
        return PolyVectorField([a * g for a in self.coeffs])

    __mul__ = scale
    __rmul__ = scale

    def apply(self, p: MultiPoly) -> MultiPoly:
        return poly_apply(self, p)

    def bracket(self, other: "PolyVectorField") -> "PolyVectorField":
        return field_bracket(self, other)

    def at(self, point: Sequence) -> List:
        return [c.evaluate(point) for c in self.coeffs]


def poly_apply(field: PolyVectorField, p: MultiPoly) -> MultiPoly:
    """Directional derivative ``sum_j field_j * dp/dx_j``."""
    if field.n != p.nvars:
        raise DimensionMismatch(f"dimension mismatch: field in R^{field.n}, polynomial in {p.nvars} vars")
    out = MultiPoly.zero(p.nvars)
    for j, c in enumerate(field.coeffs):
        if c:
            dp = p.diff(j)
            if dp:
                out = out + c * dp
    return out


def field_bracket(V: PolyVectorField, W: PolyVectorField) -> PolyVectorField:
    """Commutator ``[V, W]`` with coefficients ``V(W_j) - W(V_j)``."""
    V._check(W)
    return PolyVectorField(
        [poly_apply(V, wj) - poly_apply(W, vj) for vj, wj in zip(V.coeffs, W.coeffs)]
    )


# exact linear algebra


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> Tuple[List[List[Fraction]], List[int]]:
    """Reduced row echelon form over Q.

    Pivots are taken column by column, choosing the first row (lowest index)
    with a nonzero entry, so bases come out deterministic. Returns the nonzero
    rows and the pivot columns.
    """
    m = [[to_scalar(x) for x in row] for row in rows]
    if ncols is None:
        ncols = len(m[0]) if m else 0
    for row in m:
        if len(row) != ncols:
            raise DimensionMismatch(f"inconsistent row length {len(row)}, expected {ncols}")
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence], ncols: int | None = None) -> int:
    return len(rref(rows, ncols)[1])


def solve_kernel(rows: Sequence[Sequence], ncols: int | None = None) -> List[List[Fraction]]:
    """Basis of ``{v : row . v = 0 for every row}``.

    One basis vector per free column, with a 1 in that column. An empty row
    list gives the standard basis of the whole space (``ncols`` required then).
    """
    if ncols is None:
        if not rows:
            raise ValueError("ncols is required when rows is empty")
        ncols = len(rows[0])
    reduced, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve_linear(columns: Sequence[Sequence], target: Sequence) -> List[Fraction] | None:
    """Find coefficients ``a`` with ``sum_i a_i columns[i] == target``, or None."""
    if not columns:
        return [] if all(to_scalar(t) == 0 for t in target) else None
    n = len(target)
    k = len(columns)
    aug = [[to_scalar(columns[i][r]) for i in range(k)] + [to_scalar(target[r])] for r in range(n)]
    reduced, pivots = rref(aug, k + 1)
    if k in pivots:
        return None
    sol = [Fraction(0)] * k
    for row, p in zip(reduced, pivots):
        sol[p] = row[k]
    return sol


def in_span(rows: Sequence[Sequence], v: Sequence) -> bool:
    if not rows:
        return all(to_scalar(x) == 0 for x in v)
    return rank(list(rows) + [list(v)]) == rank(rows)
