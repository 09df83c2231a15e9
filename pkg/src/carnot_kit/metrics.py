"""Numerical layer: quasi-distances, horizontal paths and graph experiments.

Everything here runs in floating point on top of the exact group law.
Step-2 graph experiments work on the vertical subgroup ``W = {x1 = 0}``
with the horizontal line ``L`` spanned by ``X1`` as complement.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import CarnotError, DimensionMismatch
from .group import (
    GroupPoint,
    bch,
    bch_numeric,
    bch_product,
    inverse,
    left_invariant_field,
    step2_B,
    step2_product,
)
from .liealg import StratifiedAlgebra, bracket
from .symbolic import MultiPoly, PolyVectorField, rank, to_scalar

__all__ = [
    "quasi_norm",
    "quasi_norm_numeric",
    "quasi_distance",
    "calibrate_triangle_constant",
    "CalibrationReport",
    "HorizontalPath",
    "horizontal_path",
    "cc_upper_bound",
    "path_endpoint",
    "Splitting",
    "cone_membership",
    "Step2GraphSetup",
    "LipschitzReport",
    "intrinsic_lipschitz_check",
    "build_D_phi",
    "HorizontalCurve",
    "integrate_horizontal",
    "integrate_ensemble",
    "phi_length",
    "phi_length_coordinates",
    "graph_lift_length",
    "length_comparison_experiment",
    "graph_distance_experiment",
    "holonomy_check",
    "thread_count",
]

DEFAULT_STEP = 1e-3


# quasi-norm


def _blocks(alg: StratifiedAlgebra) -> List[np.ndarray]:
    return [np.array(alg.stratum(d)) for d in range(1, alg.step + 1)]


def quasi_norm_numeric(alg: StratifiedAlgebra, x) -> np.ndarray:
    """``max_d |x_{V_d}|^(1/d)`` with the Euclidean norm inside each stratum.

    Broadcasts over leading axes of ``x``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != alg.n:
        raise DimensionMismatch(f"last axis has length {x.shape[-1]}, group has dimension {alg.n}")
    out = np.zeros(x.shape[:-1])
    for d, idx in enumerate(_blocks(alg), start=1):
        out = np.maximum(out, np.linalg.norm(x[..., idx], axis=-1) ** (1.0 / d))
    return out


def quasi_norm(p, alg: Optional[StratifiedAlgebra] = None) -> float:
    if isinstance(p, GroupPoint):
        alg, p = p.algebra, p.as_float()
    if alg is None:
        raise ValueError("an algebra is needed for a bare coordinate vector")
    return float(quasi_norm_numeric(alg, [float(c) for c in p]))


def quasi_distance(p: GroupPoint, q: GroupPoint) -> float:
    """``N(p^-1 q)``, computed with the exact product and then rounded."""
    return quasi_norm(bch_product(inverse(p), q))


@dataclass
class CalibrationReport:
    K: float
    samples: int
    seed: int

    def to_json(self) -> dict:
        return {"K": self.K, "samples": self.samples, "seed": self.seed}


def calibrate_triangle_constant(alg: StratifiedAlgebra, samples: int = 4000, seed: int = 0) -> CalibrationReport:
    """Largest observed ``d(p,r) / (d(p,q) + d(q,r))`` over random triples.

    By left-invariance ``p = e``; ``q`` and ``q^-1 r`` are drawn at
    comparable scales, where the triangle inequality is tightest.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, alg.n))
    v = rng.standard_normal((samples, alg.n))
    lam = np.exp(rng.uniform(np.log(0.2), np.log(5.0), size=(samples, 1)))
    v = v * lam ** np.array(alg.degrees)
    r = bch_numeric(alg, u, v)
    ratio = quasi_norm_numeric(alg, r) / (quasi_norm_numeric(alg, u) + quasi_norm_numeric(alg, v))
    return CalibrationReport(max(float(np.max(ratio)), 1.0), samples, seed)


# horizontal paths and the CC upper bound


def path_endpoint(alg: StratifiedAlgebra, segments, start=None) -> np.ndarray:
    """Endpoint of ``start * exp(u_1) * ... * exp(u_K)`` for horizontal ``u_k``.

    ``segments`` has shape ``(..., K, m)``.
    """
    segs = np.asarray(segments, dtype=float)
    m = alg.rank
    shape = segs.shape[:-2] + (alg.n,)
    out = np.zeros(shape) if start is None else np.broadcast_to(np.asarray(start, dtype=float), shape).copy()
    step = np.zeros(shape)
    for k in range(segs.shape[-2]):
        step[..., :m] = segs[..., k, :]
        out = bch_numeric(alg, out, step)
    return out


@lru_cache(maxsize=None)
def _words(alg: StratifiedAlgebra, d: int) -> Tuple[Tuple[Tuple[int, ...], ...], np.ndarray]:
    """Right-nested bracket words in ``V1`` spanning ``V_d`` and their matrix."""
    m = alg.rank
    idx = alg.stratum(d)
    chosen, vecs = [], []

    def value(word):
        v = list(alg.basis_vector(word[-1]))
        for a in reversed(word[:-1]):
            v = bracket(alg, alg.basis_vector(a), v)
        return [v[i] for i in idx]

    stack = [(a,) for a in range(m)]
    words = stack
    for _ in range(d - 1):
        words = [(a,) + w for a in range(m) for w in words]
    for w in words:
        v = value(w)
        if any(v) and rank(vecs + [v], len(idx)) > len(vecs):
            chosen.append(w)
            vecs.append(v)
            if len(vecs) == len(idx):
                break
    if len(vecs) != len(idx):
        raise CarnotError(f"brackets of the first stratum do not span stratum {d}")
    M = np.array([[float(c) for c in v] for v in vecs]).T
    return tuple(chosen), M


def _word_path(word: Sequence[int], eps: float, sign: float, m: int) -> List[np.ndarray]:
    """Group commutator path whose log starts with ``sign * eps^d * word``."""
    first = np.zeros(m)
    first[word[0]] = sign * eps
    if len(word) == 1:
        return [first]
    A = [first]
    B = _word_path(word[1:], eps, 1.0, m)
    inv = lambda P: [-u for u in reversed(P)]  # noqa: E731
    return A + B + inv(A) + inv(B)


def _exact_path(alg: StratifiedAlgebra, target: np.ndarray, start_segments=()) -> List[np.ndarray]:
    """Append moves to ``start_segments`` so the endpoint is ``target``.

    The first-stratum residual is a single segment; each higher stratum
    residual is removed with commutator words, working up degree by degree.
    """
    m = alg.rank
    segs = [np.asarray(u, dtype=float) for u in start_segments]
    end = path_endpoint(alg, np.array(segs).reshape(-1, m))
    r = bch_numeric(alg, -end, target)
    if np.linalg.norm(r[:m]) > 0:
        segs.append(r[:m].copy())
    for d in range(2, alg.step + 1):
        end = path_endpoint(alg, np.array(segs).reshape(-1, m))
        r = bch_numeric(alg, -end, target)
        rd = r[alg.stratum(d)]
        if not np.any(rd):
            continue
        words, M = _words(alg, d)
        coef = np.linalg.solve(M, rd)
        for w, c in zip(words, coef):
            if c != 0:
                segs.extend(_word_path(w, abs(c) ** (1.0 / d), float(np.sign(c)), m))
    return segs


def _length(segs) -> float:
    segs = np.asarray(segs, dtype=float)
    return float(np.sum(np.linalg.norm(segs, axis=-1))) if segs.size else 0.0


@dataclass
class HorizontalPath:
    """Piecewise-linear horizontal path given by its segment vectors in ``V1``."""

    algebra: StratifiedAlgebra
    segments: np.ndarray
    length: float
    endpoint_error: float
    start: np.ndarray = field(default=None)

    def endpoint(self) -> np.ndarray:
        return path_endpoint(self.algebra, self.segments, self.start)


def _optimise_round(alg, target, init, rng_noise, maxiter=200):
    K, m = init.shape
    x0 = (init + rng_noise).ravel()

    def energy(u):
        return float(u @ u)

    def energy_grad(u):
        return 2.0 * u

    def cons(u):
        return path_endpoint(alg, u.reshape(K, m)) - target

    def cons_jac(u):
        h = 1e-7
        batch = u[None, :] + h * np.eye(u.size)
        ends = path_endpoint(alg, batch.reshape(-1, K, m))
        return ((ends - target) - cons(u)[None, :]).T / h

    res = minimize(
        energy,
        x0,
        jac=energy_grad,
        constraints=[{"type": "eq", "fun": cons, "jac": cons_jac}],
        method="SLSQP",
        options={"maxiter": maxiter, "ftol": 1e-12},
    )
    return res.x.reshape(K, m)


def _normalised_path(alg: StratifiedAlgebra, target: np.ndarray, budget: int, seed: int, max_segments: int = 32) -> List[np.ndarray]:
    """Short path to a unit-norm target; ``budget`` refinement rounds."""
    best = _exact_path(alg, target)
    best_len = _length(best)
    for r in range(budget):
        if not best:
            break
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        # drop the tiny repair moves, the next repair restores the endpoint
        init = np.array([u for u in best if np.linalg.norm(u) > 1e-3 * best_len / len(best)])
        if 2 * len(init) <= max_segments:
            init = np.repeat(init / 2.0, 2, axis=0)
        scale = 0.0 if r == 0 else 0.1 * best_len / len(init)
        noise = scale * rng.standard_normal(init.shape)
        try:
            cand = _optimise_round(alg, target, init, noise)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(cand)):
            continue
        cand = [u for u in cand if np.linalg.norm(u) > 1e-15]
        repaired = _exact_path(alg, target, cand)
        ln = _length(repaired)
        if ln < best_len:
            best, best_len = repaired, ln
    return best


def _as_target(p, q) -> Tuple[StratifiedAlgebra, np.ndarray, np.ndarray]:
    if isinstance(p, GroupPoint) and isinstance(q, GroupPoint):
        if p.algebra != q.algebra:
            raise DimensionMismatch("points live in different groups")
        return p.algebra, bch_product(inverse(p), q).as_float(), p.as_float()
    raise TypeError("expected two GroupPoints")


def horizontal_path(p: GroupPoint, q: GroupPoint, budget: int = 3, seed: int = 0) -> HorizontalPath:
    """Explicit horizontal path from ``p`` to ``q``.

    Built for the left-translated, dilation-normalised target and then
    rescaled, so the result is left-invariant and homogeneous.
    """
    alg, g, start = _as_target(p, q)
    return _path_to(alg, g, budget, seed, start)


def _path_to(alg, g, budget, seed, start=None) -> HorizontalPath:
    m = alg.rank
    N = float(quasi_norm_numeric(alg, g))
    if N == 0.0:
        return HorizontalPath(alg, np.zeros((0, m)), 0.0, 0.0, start)
    unit = g * (1.0 / N) ** np.array(alg.degrees)
    segs = np.array(_normalised_path(alg, unit, int(budget), seed)).reshape(-1, m) * N
    err = float(quasi_norm_numeric(alg, bch_numeric(alg, -path_endpoint(alg, segs), g)))
    return HorizontalPath(alg, segs, _length(segs), err, start)


def cc_upper_bound(p: GroupPoint, q: GroupPoint, budget: int = 3, seed: int = 0) -> float:
    """Length of an explicit horizontal path from ``p`` to ``q``.

    Never increases with ``budget``: each round starts from the best path so
    far and a candidate is only kept when it is shorter.
    """
    return horizontal_path(p, q, budget, seed).length


# splittings and cones


@dataclass(frozen=True)
class Splitting:
    """``W = ker(a) + V2 + ... + Vs`` and ``H = span(h)`` with ``a(h) != 0``."""

    algebra: StratifiedAlgebra
    covector: Tuple[Fraction, ...]
    direction: Tuple[Fraction, ...]

    def __post_init__(self):
        m = self.algebra.rank
        a = tuple(to_scalar(c) for c in self.covector)
        h = tuple(to_scalar(c) for c in self.direction)
        if len(a) != m or len(h) != m:
            raise DimensionMismatch("covector and direction live in the first stratum")
        if sum(x * y for x, y in zip(a, h)) == 0:
            raise ValueError("splitting is not complementary: a(h) = 0")
        object.__setattr__(self, "covector", a)
        object.__setattr__(self, "direction", h)

    @classmethod
    def first_axis(cls, alg: StratifiedAlgebra) -> "Splitting":
        e = tuple(Fraction(int(i == 0)) for i in range(alg.rank))
        return cls(alg, e, e)

    def project(self, s: GroupPoint) -> Tuple[GroupPoint, GroupPoint]:
        """``s = s_W * s_H``."""
        alg = self.algebra
        t = sum(a * x for a, x in zip(self.covector, s.coords)) / sum(
            a * h for a, h in zip(self.covector, self.direction)
        )
        sh = GroupPoint(alg, tuple(t * h for h in self.direction) + (Fraction(0),) * (alg.n - alg.rank))
        sw = bch_product(s, inverse(sh))
        return sw, sh


def cone_membership(p: GroupPoint, q: GroupPoint, alpha, splitting: Optional[Splitting] = None) -> bool:
    """Is ``q`` in the cone ``{ N((p^-1 q)_W) <= alpha N((p^-1 q)_H) }``?"""
    splitting = splitting or Splitting.first_axis(p.algebra)
    if splitting.algebra != p.algebra:
        raise DimensionMismatch("splitting belongs to a different group")
    sw, sh = splitting.project(bch_product(inverse(p), q))
    return quasi_norm(sw) <= float(alpha) * quasi_norm(sh)


# step-2 graphs over W = {x1 = 0}


class Step2GraphSetup:
    """Graph of ``phi: W -> L`` in a step-2 group, ``Phi(w) = w * (phi(w) X1)``.

    ``phi`` is a polynomial in the W coordinates ``(x2..xm, y1..yk)``.
    """

    def __init__(self, algebra: StratifiedAlgebra, phi: MultiPoly | None = None, L: float | None = None):
        if algebra.step != 2:
            raise ValueError(f"step-2 group required, got step {algebra.step}")
        self.algebra = algebra
        self.m = algebra.rank
        self.nk = algebra.n - algebra.rank
        self.dim_W = algebra.n - 1
        phi = MultiPoly.zero(self.dim_W) if phi is None else phi
        if phi.nvars != self.dim_W:
            raise DimensionMismatch(f"phi must have {self.dim_W} variables, got {phi.nvars}")
        self.phi = phi
        self.L = L
        self.B = step2_B(algebra)
        Bf = np.array([[[float(c) for c in row] for row in Bk] for Bk in self.B]).reshape(self.nk, self.m, self.m)
        if not np.allclose(Bf, -np.transpose(Bf, (0, 2, 1))):
            raise ValueError("B-matrices are not skew-symmetric")
        if np.linalg.matrix_rank(Bf.reshape(self.nk, -1)) != self.nk:
            raise ValueError("B-matrices are linearly dependent")
        self.Bf = Bf
        self._phi = phi.compile()
        self._phi_grad = [phi.diff(i).compile() for i in range(self.dim_W)]

    def phi_at(self, W) -> np.ndarray:
        return self._phi(W)

    def full(self, W) -> np.ndarray:
        """Insert ``x1 = 0``."""
        W = np.asarray(W, dtype=float)
        return np.concatenate([np.zeros(W.shape[:-1] + (1,)), W], axis=-1)

    def lift(self, W) -> np.ndarray:
        """``Phi(w) = w * (phi(w), 0, ..., 0)`` in full coordinates."""
        W = np.asarray(W, dtype=float)
        phi = self._phi(W)
        x = W[..., : self.m - 1]
        y = W[..., self.m - 1 :]
        # 1/2 B^k_{1l} phi x_l, with x_1 = 0
        corr = 0.5 * phi[..., None] * np.einsum("kl,...l->...k", self.Bf[:, 0, 1:], x)
        return np.concatenate([phi[..., None], x, y + corr], axis=-1)

    def velocity(self, W, a) -> np.ndarray:
        """``sum_j a_j D_j^phi`` at ``W``; ``a`` holds controls for ``j = 2..m``."""
        x = W[..., : self.m - 1]
        phi = self._phi(W)
        ydot = 0.5 * np.einsum("kjl,...j,...l->...k", self.Bf[:, 1:, 1:], a, x)
        ydot = ydot + phi[..., None] * np.einsum("kj,...j->...k", self.Bf[:, 1:, 0], a)
        return np.concatenate([a, ydot], axis=-1)

    def is_first_stratum_linear(self) -> bool:
        return self.phi.degree() <= 1 and all(i < self.m - 1 for i in self.phi.variables_used())

    def linear_gradient(self) -> Optional[np.ndarray]:
        if not self.is_first_stratum_linear():
            return None
        return np.array([float(self.phi.diff(i).evaluate([0] * self.dim_W)) for i in range(self.m - 1)])


def build_D_phi(setup: Step2GraphSetup) -> List[PolyVectorField]:
    """Fields ``D_j^phi = X_j + phi B^k_{j1} Y_k`` on W, ``j = 2..m``."""
    alg = setup.algebra
    n, nW = alg.n, setup.dim_W
    ws = MultiPoly.variables(nW)
    subs = [MultiPoly.zero(nW)] + ws  # full coordinate i -> W coordinate i - 1, x1 -> 0
    out = []
    for j in range(1, setup.m):
        X = left_invariant_field(alg, j)
        coeffs = [X.coeffs[i].substitute(subs) for i in range(1, n)]
        for k in range(setup.nk):
            b = setup.B[k][j][0]
            if b:
                coeffs[setup.m - 1 + k] = coeffs[setup.m - 1 + k] + setup.phi * b
        out.append(PolyVectorField(coeffs))
    return out


@dataclass
class LipschitzReport:
    L: float
    pairs: int
    violations: List[Tuple[int, int]]
    n_violations: int
    empirical_constant: float

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "pairs": self.pairs,
            "violations": [list(v) for v in self.violations],
            "n_violations": self.n_violations,
            "empirical_constant": self.empirical_constant,
            "ok": self.ok,
        }


def intrinsic_lipschitz_check(setup: Step2GraphSetup, samples, L: float | None = None, max_report: int = 20) -> LipschitzReport:
    """Cone test at opening ``1/L`` over all ordered sample pairs.

    A pair violates the condition when ``N(s_W) <= N(s_L) / L`` for
    ``s = Phi(w_i)^-1 Phi(w_j)``. The empirical constant is the largest
    ``N(s_L) / N(s_W)``.
    """
    L = setup.L if L is None else L
    if L is None or L <= 0:
        raise ValueError("a positive Lipschitz constant is required")
    alg = setup.algebra
    W = np.asarray(samples, dtype=float)
    P = setup.lift(W)
    S = len(P)
    s = bch_numeric(alg, -P[:, None, :], P[None, :, :])
    t = s[..., 0]
    h = np.zeros_like(s)
    h[..., 0] = -t
    sw = bch_numeric(alg, s, h)
    nw = quasi_norm_numeric(alg, sw)
    nl = np.abs(t)
    off = ~np.eye(S, dtype=bool)
    viol = off & (nw * L <= nl)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(off & (nw > 0), nl / np.where(nw > 0, nw, 1.0), 0.0)
    if np.any(off & (nw == 0) & (nl > 0)):
        ratio = np.full_like(ratio, np.inf)
    idx = np.argwhere(viol)
    return LipschitzReport(
        float(L),
        int(off.sum()),
        [tuple(int(v) for v in ij) for ij in idx[:max_report]],
        int(len(idx)),
        float(ratio.max()) if S > 1 else 0.0,
    )


# horizontal curves on W


@dataclass
class HorizontalCurve:
    """Curve on W driven by piecewise-constant controls for ``D_2..D_m``."""

    control_times: np.ndarray
    controls: np.ndarray
    times: np.ndarray
    nodes: np.ndarray

    @property
    def start(self) -> np.ndarray:
        return self.nodes[0]

    @property
    def end(self) -> np.ndarray:
        return self.nodes[-1]

    def breakpoints(self) -> np.ndarray:
        return np.searchsorted(self.times, self.control_times)

    def concat(self, other: "HorizontalCurve") -> "HorizontalCurve":
        shift = self.times[-1] - other.times[0]
        return HorizontalCurve(
            np.concatenate([self.control_times, other.control_times[1:] + shift]),
            np.concatenate([self.controls, other.controls]),
            np.concatenate([self.times, other.times[1:] + shift]),
            np.concatenate([self.nodes, other.nodes[1:]]),
        )


def integrate_ensemble(
    setup: Step2GraphSetup,
    controls,
    durations,
    start=None,
    step: float = DEFAULT_STEP,
) -> List[HorizontalCurve]:
    """Integrate a batch of curves with the same number of control intervals.

    ``controls`` has shape ``(E, K, m - 1)`` and ``durations`` broadcasts to
    ``(E, K)``. Interval ``k`` is cut into the same number of RK4 steps for
    every curve, enough that no step is longer than ``step``; grid nodes
    fall on the control breakpoints, so the x-coordinates are exact.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 3 or controls.shape[2] != setup.m - 1:
        raise DimensionMismatch(f"controls must have shape (E, K, {setup.m - 1})")
    E, K, _ = controls.shape
    durations = np.broadcast_to(np.asarray(durations, dtype=float), (E, K))
    if np.any(durations < 0) or not np.all(np.isfinite(durations)):
        raise ValueError("durations must be finite and non-negative")
    if start is None:
        state = np.zeros((E, setup.dim_W))
    else:
        state = np.array(np.broadcast_to(np.asarray(start, dtype=float), (E, setup.dim_W)))
    nodes = [state]
    times = [np.zeros(E)]
    t = np.zeros(E)
    for k in range(K):
        longest = float(durations[:, k].max())
        if longest == 0.0:
            continue
        nsub = max(1, int(math.ceil(longest / step - 1e-9)))
        h = durations[:, k] / nsub
        hc = h[:, None]
        a = controls[:, k, :]
        for i in range(nsub):
            k1 = setup.velocity(state, a)
            k2 = setup.velocity(state + 0.5 * hc * k1, a)
            k3 = setup.velocity(state + 0.5 * hc * k2, a)
            k4 = setup.velocity(state + hc * k3, a)
            state = state + (hc / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(state)):
                raise FloatingPointError("non-finite value while integrating phi")
            nodes.append(state)
            times.append(t + (i + 1) * h)
        t = t + durations[:, k]
    nodes = np.stack(nodes, axis=1)
    times = np.stack(times, axis=1)
    ctimes = np.concatenate([np.zeros((E, 1)), np.cumsum(durations, axis=1)], axis=1)
    return [HorizontalCurve(ctimes[e], controls[e], times[e], nodes[e]) for e in range(E)]


def integrate_horizontal(setup: Step2GraphSetup, controls, durations, start=None, step: float = DEFAULT_STEP) -> HorizontalCurve:
    controls = np.asarray(controls, dtype=float)
    return integrate_ensemble(setup, controls[None], durations, None if start is None else np.asarray(start)[None], step)[0]


def phi_length(curve: HorizontalCurve) -> float:
    """Integral of the Euclidean norm of the controls."""
    return float(np.sum(np.linalg.norm(curve.controls, axis=-1) * np.diff(curve.control_times)))


def phi_length_coordinates(curve: HorizontalCurve, m: int) -> float:
    """Same quantity from the node coordinates ``x2..xm`` (piecewise linear)."""
    dx = np.diff(curve.nodes[:, : m - 1], axis=0)
    return float(np.sum(np.linalg.norm(dx, axis=-1)))


def graph_lift_length(setup: Step2GraphSetup, curve: HorizontalCurve, stride: int = 1) -> float:
    """Sum of quasi-distances between consecutive lifted nodes."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    N = len(curve.nodes)
    idx = list(range(0, N, stride))
    if idx[-1] != N - 1:
        idx.append(N - 1)
    if len(idx) < 2:
        return 0.0
    P = setup.lift(curve.nodes[idx])
    inc = bch_numeric(setup.algebra, -P[:-1], P[1:])
    return float(np.sum(quasi_norm_numeric(setup.algebra, inc)))


# experiments


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("CARNOT_KIT_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable, items: Sequence) -> list:
    k = thread_count()
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))


def _random_controls(rng: np.random.Generator, E: int, K: int, dim: int, bound: float) -> np.ndarray:
    g = rng.standard_normal((E, K, dim))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = bound * rng.uniform(0.0, 1.0, size=(E, K, 1)) ** (1.0 / dim)
    return g * r


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    hist, edges = np.histogram(v, bins=10)
    return {
        "max": float(v.max()),
        "min": float(v.min()),
        "mean": float(v.mean()),
        "histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
    }


def length_comparison_experiment(
    setup: Step2GraphSetup,
    n_curves: int = 100,
    n_controls: int = 8,
    T: float = 1.0,
    control_bound: float = 1.0,
    step: float = DEFAULT_STEP,
    refine: int = 4,
    seed: int = 0,
    tolerance: float = 0.05,
    footprint_samples: int = 150,
) -> dict:
    """Ratios of lifted length to phi-length over a random ensemble.

    Also measures the Lipschitz constant of ``s -> phi(curve(s))`` and
    compares it with ``|grad phi| * control_bound`` when phi is linear in
    the first-stratum W coordinates.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 66]))
    controls = _random_controls(rng, n_curves, n_controls, setup.m - 1, control_bound)
    start = rng.uniform(-1.0, 1.0, size=(n_curves, setup.dim_W))
    dur = T / n_controls

    def run(h):
        curves = integrate_ensemble(setup, controls, dur, start, h)
        ratios, lengths = [], []
        for c in curves:
            ell = phi_length(c)
            lengths.append(ell)
            ratios.append(graph_lift_length(setup, c) / ell if ell > 1e-12 else np.nan)
        return curves, np.array(ratios)

    curves, coarse = run(step)
    _, fine = run(step / refine)
    keep = np.isfinite(coarse) & np.isfinite(fine)
    cmax, fmax = float(coarse[keep].max()), float(fine[keep].max())
    change = abs(fmax - cmax) / cmax

    # Lipschitz constant of s -> phi(curve(s)) on the coarse grid
    lip = 0.0
    for c in curves:
        vals = setup.phi_at(c.nodes)
        lip = max(lip, float(np.max(np.abs(np.diff(vals)) / np.diff(c.times))))
    grad = setup.linear_gradient()
    bound = None if grad is None else float(np.linalg.norm(grad) * control_bound)
    lip_ok = bound is None or lip <= bound * (1 + 1e-9) + 1e-12

    report = {
        "n_curves": int(n_curves),
        "excluded_degenerate": int((~keep).sum()),
        "step": step,
        "refine": refine,
        "ratios": [float(r) for r in coarse],
        "ratios_refined": [float(r) for r in fine],
        "summary": _summary(coarse[keep]),
        "max_ratio": cmax,
        "max_ratio_refined": fmax,
        "relative_change": change,
        "lipschitz_empirical": lip,
        "lipschitz_bound": bound,
        "lipschitz_ok": bool(lip_ok),
    }
    if setup.L is not None:
        pts = np.concatenate([c.nodes[:: max(1, len(c.nodes) // 3)] for c in curves])
        sel = np.random.default_rng(np.random.SeedSequence([seed, 67])).choice(len(pts), size=min(footprint_samples, len(pts)), replace=False)
        foot = intrinsic_lipschitz_check(setup, pts[np.sort(sel)])
        report["footprint"] = foot.to_json()
        footprint_ok = foot.ok
    else:
        footprint_ok = True
    report["pass"] = bool(np.isfinite(cmax) and np.isfinite(fmax) and change < tolerance and lip_ok and footprint_ok)
    return report


def _heisenberg_n(alg: StratifiedAlgebra) -> int:
    if alg.step != 2 or alg.strata[1] != 1 or alg.strata[0] % 2:
        raise CarnotError("graph distance experiment needs a Heisenberg group")
    n = alg.strata[0] // 2
    if n < 2:
        raise CarnotError("graph distance experiment needs n >= 2")
    return n


def _tau_checks(setup: Step2GraphSetup, n: int, s: np.ndarray, step: float) -> List[dict]:
    """Flow ``D_{n+1}`` from the origin for times ``|s|``; check ``|tau| <= L' s^2``.

    ``L'`` is the Lipschitz constant of ``phi`` measured along each flow line.
    """
    s = np.asarray(s, dtype=float)
    a = np.zeros((len(s), 1, setup.m - 1))
    a[:, 0, n - 1] = np.where(s < 0, -1.0, 1.0)
    out = []
    for c, si in zip(integrate_ensemble(setup, a, np.abs(s)[:, None], None, step), s):
        ds = np.diff(c.times)
        if not len(ds) or ds[0] == 0:
            out.append({"s": float(si), "L_prime": 0.0, "max_tau": 0.0, "ok": True})
            continue
        sv = np.abs(c.nodes[:, n - 1])
        tau = np.abs(c.nodes[:, -1])
        Lp = float(np.max(np.abs(np.diff(setup.phi_at(c.nodes))) / ds))
        ok = bool(np.all(tau - Lp * sv**2 <= 1e-12))
        out.append({"s": float(si), "L_prime": Lp, "max_tau": float(tau.max()), "ok": ok})
    return out


def graph_distance_experiment(
    setup: Step2GraphSetup,
    n_pairs: int = 50,
    step: float = DEFAULT_STEP,
    refine: int = 4,
    seed: int = 0,
    budget: int = 2,
    tolerance: float = 0.05,
    spread: float = 1.0,
) -> dict:
    """Two-leg graph connection versus quasi-distance on pairs of graph points.

    Leg one flows ``D_{n+1}^phi`` to fix ``x_{n+1}``; leg two is a horizontal
    path in the Heisenberg factor spanned by the remaining first-stratum
    directions, which moves neither ``x_{n+1}`` nor feels ``phi``.
    """
    alg = setup.algebra
    n = _heisenberg_n(alg)
    from .catalog import make_heisenberg

    sub = make_heisenberg(n - 1)
    rest = [j for j in range(1, 2 * n) if j != n]  # X_j with j not in {1, n+1}
    rng = np.random.default_rng(np.random.SeedSequence([seed, 68]))
    W0 = rng.uniform(-spread, spread, size=(n_pairs, setup.dim_W))
    W1 = rng.uniform(-spread, spread, size=(n_pairs, setup.dim_W))
    s = W1[:, n - 1] - W0[:, n - 1]
    a1 = np.zeros((n_pairs, 1, setup.m - 1))
    a1[:, 0, n - 1] = np.sign(s)

    def sub_coords(w):
        full = setup.full(w)
        return np.concatenate([full[..., rest], full[..., -1:]], axis=-1)

    P = setup.lift(np.stack([W0, W1], axis=1))
    lower = quasi_norm_numeric(alg, bch_numeric(alg, -P[:, 0], P[:, 1]))

    # leg two does not depend on the step: plan it once from the exact leg-one endpoint
    mid = integrate_ensemble(setup, a1, np.abs(s)[:, None], W0, step)
    targets = bch_numeric(sub, -sub_coords(np.stack([c.end for c in mid])), sub_coords(W1))
    paths = _map(lambda i: _path_to(sub, targets[i], budget, seed + i), list(range(n_pairs)))
    Kmax = max(1, max(len(p.segments) for p in paths))
    ctrl = np.zeros((n_pairs, Kmax, setup.m - 1))
    dur = np.zeros((n_pairs, Kmax))
    for i, p in enumerate(paths):
        if len(p.segments):
            norms = np.linalg.norm(p.segments, axis=-1)
            nz = norms > 0
            dur[i, : len(norms)] = norms
            ctrl[i, np.flatnonzero(nz)[:, None], [j - 1 for j in rest]] = p.segments[nz] / norms[nz, None]

    def run(h):
        leg1 = integrate_ensemble(setup, a1, np.abs(s)[:, None], W0, h)
        leg2 = integrate_ensemble(setup, ctrl, dur, np.stack([c.end for c in leg1]), h)
        curves = [c1.concat(c2) for c1, c2 in zip(leg1, leg2)]
        upper = np.array([graph_lift_length(setup, c) for c in curves])
        miss = np.array([np.linalg.norm(c.end - w) for c, w in zip(curves, W1)])
        return upper, miss

    u0, miss0 = run(step)
    u1, miss1 = run(step / refine)
    taus = _tau_checks(setup, n, s, step)
    r0, r1 = u0 / lower, u1 / lower
    pairs = [
        {
            "lower": float(lower[i]),
            "upper": float(u0[i]),
            "upper_refined": float(u1[i]),
            "ratio": float(r0[i]),
            "ratio_refined": float(r1[i]),
            "endpoint_miss": float(max(miss0[i], miss1[i])),
            "tau": taus[i],
        }
        for i in range(n_pairs)
    ]
    cmax, fmax = float(r0.max()), float(r1.max())
    change = abs(fmax - cmax) / cmax
    tau_ok = all(t["ok"] for t in taus)
    return {
        "n": n,
        "n_pairs": int(n_pairs),
        "pairs": pairs,
        "summary": _summary(r0),
        "max_ratio": cmax,
        "max_ratio_refined": fmax,
        "relative_change": change,
        "tau_ok": bool(tau_ok),
        "max_endpoint_miss": float(max(miss0.max(), miss1.max())),
        "pass": bool(np.isfinite(cmax) and change < tolerance and tau_ok),
    }


def holonomy_check(alg: StratifiedAlgebra, i: int, j: int, side: float = 1.0, step: float = DEFAULT_STEP) -> dict:
    """Square loop in the ``(x_i, x_j)`` plane with ``phi = 0``.

    The integrated vertical endpoint is compared with the closed-form
    product of the four straight segments. ``i, j`` are full indices >= 1.
    """
    setup = Step2GraphSetup(alg)
    if not (1 <= i < setup.m and 1 <= j < setup.m and i != j):
        raise ValueError("square needs two distinct first-stratum indices other than x1")
    d = setup.m - 1
    moves = np.zeros((4, d))
    moves[0, i - 1] = moves[2, i - 1] = 1.0
    moves[1, j - 1] = moves[3, j - 1] = 1.0
    moves[2] *= -1
    moves[3] *= -1
    curve = integrate_horizontal(setup, moves * side, [1.0] * 4, None, step)
    # exact: product of exp(segments) with the closed form
    B = setup.B
    side_q = Fraction(side).limit_denominator(10**9)
    p = [Fraction(0)] * alg.n
    for u in moves:
        seg = [Fraction(0)] + [Fraction(int(c)) * side_q for c in u] + [Fraction(0)] * setup.nk
        p = step2_product(B, p, seg)
    exact = np.array([float(c) for c in p[setup.m :]])
    got = curve.end[setup.m - 1 :]
    scale = max(float(np.max(np.abs(exact))), 1e-300)
    return {
        "exact": exact.tolist(),
        "integrated": got.tolist(),
        "relative_error": float(np.max(np.abs(got - exact)) / scale),
    }
