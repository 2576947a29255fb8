"""Convex kernel sets, noise kernels, and gap computations between kernel sets.

A kernel set is the convex hull of finitely many distributions. ``Singleton``,
``Segment`` and ``Polytope`` differ only in how many generators they carry and
in which closed forms apply to them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar

from .dist import Distribution, DivergenceKind, DimensionError, as_probs

TOL = 1e-9
MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# kernel sets


class KernelSet:
    """Convex hull of the rows of ``vertices`` (shape ``(n, M)``)."""

    vertices: np.ndarray

    @property
    def M(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def point(self, weights) -> Distribution:
        w = np.asarray(weights, dtype=np.float64)
        return Distribution(w @ self.vertices)

    def contains(self, p, tol: float = 1e-9) -> bool:
        _, d2 = project_l2(p, self)
        return d2 <= tol * tol

    def key(self) -> bytes:
        return self.vertices.tobytes() + bytes(str(self.vertices.shape), "ascii")

    def __eq__(self, other):
        if not isinstance(other, KernelSet):
            return NotImplemented
        return type(self) is type(other) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.key())


def _frozen(rows) -> np.ndarray:
    V = np.array([np.asarray(Distribution(r)) for r in rows], dtype=np.float64)
    V.setflags(write=False)
    return V


class Singleton(KernelSet):
    def __init__(self, d):
        self.vertices = _frozen([d])

    @property
    def d(self) -> Distribution:
        return Distribution(self.vertices[0])

    def __repr__(self):
        return f"Singleton({self.d!r})"


class Segment(KernelSet):
    """Closed segment ``{(1 - s) a + s b : s in [0, 1]}`` with distinct endpoints."""

    def __init__(self, a, b):
        V = _frozen([a, b])
        if V[0].shape != V[1].shape:
            raise DimensionError("segment endpoints differ in dimension")
        if np.array_equal(V[0], V[1]):
            raise ValueError("segment endpoints must be distinct")
        self.vertices = V

    @property
    def a(self) -> Distribution:
        return Distribution(self.vertices[0])

    @property
    def b(self) -> Distribution:
        return Distribution(self.vertices[1])

    def __repr__(self):
        return f"Segment({self.a!r}, {self.b!r})"


class Polytope(KernelSet):
    def __init__(self, vertices: Sequence):
        rows = list(vertices)
        if len(rows) < 1:
            raise ValueError("polytope needs at least one vertex")
        dims = {np.asarray(r).size for r in rows}
        if len(dims) != 1:
            raise DimensionError(f"vertices differ in dimension: {sorted(dims)}")
        self.vertices = _frozen(rows)

    def __repr__(self):
        return f"Polytope({self.n_vertices} vertices, M={self.M})"


def segment_or_singleton(a, b) -> KernelSet:
    a, b = as_probs(a), as_probs(b)
    if np.allclose(a, b, atol=1e-15, rtol=0):
        return Singleton(a)
    return Segment(a, b)


# ---------------------------------------------------------------------------
# noise kernels


class NoiseKernel:
    """Map ``(x, y[, t]) -> KernelSet``.

    Attributes
    ----------
    M : int
        Observation alphabet size.
    N : int
        Number of labels.
    F : int or None
        Feature universe size, ``None`` when the kernel ignores the feature.
    """

    name = "kernel"
    M: int
    N: int
    F: int | None = None
    step_dependent = False
    T: int | None = None

    def _check(self, x, y, t):
        if not 0 <= y < self.N:
            raise IndexError(f"label {y} out of range for N={self.N}")
        if self.F is not None and not 0 <= x < self.F:
            raise IndexError(f"feature {x} out of range for F={self.F}")
        if x < 0:
            raise IndexError(f"feature {x} is negative")
        if self.step_dependent:
            if t is None:
                raise ValueError(f"{self.name} kernel needs the step index t")
            if not 0 <= t < self.T:
                raise IndexError(f"step {t} out of range for T={self.T}")

    def kernel_set(self, x: int, y: int, t: int | None = None) -> KernelSet:
        self._check(x, y, t)
        return self._set(x, y, t)

    def _set(self, x, y, t) -> KernelSet:
        raise NotImplementedError

    @property
    def feature_independent(self) -> bool:
        return self.F is None


@dataclass(frozen=True)
class MassartBernoulli(NoiseKernel):
    """Label flipped with probability at most ``eta`` on binary observations."""

    eta: float
    name = "massart"
    M = 2
    N = 2

    def __post_init__(self):
        if not 0.0 <= self.eta < 0.5:
            raise ValueError(f"Massart eta must lie in [0, 1/2), got {self.eta}")

    def _set(self, x, y, t):
        lo = float(y)
        hi = self.eta if y == 0 else 1.0 - self.eta
        return segment_or_singleton(Distribution.bernoulli(lo), Distribution.bernoulli(hi))


@dataclass(frozen=True)
class RandomizedResponse(NoiseKernel):
    """``{(1 - e) e_y + e u : e in [0, eta]}`` over ``M`` symbols, labels equal to symbols."""

    eta: float
    M: int = 2
    name = "randomized-response"

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"randomized-response eta must lie in [0, 1), got {self.eta}")
        if self.M < 2:
            raise ValueError("M must be >= 2")

    @property
    def N(self) -> int:
        return self.M

    def _set(self, x, y, t):
        e = np.zeros(self.M)
        e[y] = 1.0
        inner = (1.0 - self.eta) * e + self.eta / self.M
        return segment_or_singleton(e, inner)


class TVBall(NoiseKernel):
    """``Q_y = {q : TV(q, canonical[y]) <= eps}`` intersected with the simplex."""

    name = "tv-ball"

    def __init__(self, canonical, eps: float):
        C = np.array([np.asarray(Distribution(c)) for c in canonical])
        if C.shape[0] < 2:
            raise ValueError("need at least two labels")
        if eps < 0:
            raise ValueError(f"eps must be >= 0, got {eps}")
        self.canonical = C
        self.eps = float(eps)
        self.N, self.M = C.shape
        self._sets = [self._build(c) for c in C]

    def _build(self, c) -> KernelSet:
        if self.eps == 0:
            return Singleton(c)
        V = tv_ball_vertices(c, self.eps)
        if len(V) == 1:
            return Singleton(V[0])
        if len(V) == 2:
            return Segment(V[0], V[1])
        return Polytope(V)

    def _set(self, x, y, t):
        return self._sets[y]


def tv_ball_vertices(c, eps: float, atol: float = 1e-12) -> np.ndarray:
    """Vertices of ``{q in simplex : 0.5 * ||q - c||_1 <= eps}`` by active-set enumeration.

    The L1 ball is written as the ``2**M`` halfspaces ``s.(q - c) <= 2 eps`` for sign
    vectors ``s``; together with ``q >= 0`` and ``sum q = 1`` a vertex is any feasible
    point where ``M - 1`` independent inequalities are tight.
    """
    c = as_probs(c)
    M = c.size
    if M > 6:
        raise ValueError("TV-ball vertex enumeration supports M <= 6")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=M)))
    A = np.vstack([signs, -np.eye(M)])
    b = np.concatenate([signs @ c + 2.0 * eps, np.zeros(M)])
    ones = np.ones((1, M))
    found = []
    for rows in itertools.combinations(range(len(A)), M - 1):
        sys = np.vstack([A[list(rows)], ones])
        if abs(np.linalg.det(sys)) < 1e-12:
            continue
        q = np.linalg.solve(sys, np.concatenate([b[list(rows)], [1.0]]))
        if np.all(A @ q <= b + atol):
            q = np.clip(q, 0.0, None)
            q /= q.sum()
            if not any(np.allclose(q, v, atol=1e-10) for v in found):
                found.append(q)
    found.sort(key=lambda v: tuple(-v))
    return np.array(found)


@dataclass(frozen=True)
class Tsybakov(NoiseKernel):
    """Binary kernel ``{l e_y + (1 - l) u : l in [lambdas[t], 1]}`` at step ``t``."""

    lambdas: tuple
    A: float = 1.0
    alpha: float = 0.5
    name = "tsybakov"
    M = 2
    N = 2
    step_dependent = True

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        if not lam:
            raise ValueError("need at least one lambda")
        if any(not 0.0 < v <= 1.0 for v in lam):
            raise ValueError("lambdas must lie in (0, 1]")
        if self.A <= 0 or not 0.0 <= self.alpha < 1.0:
            raise ValueError("need A > 0 and alpha in [0, 1)")
        object.__setattr__(self, "lambdas", lam)

    @property
    def T(self) -> int:
        return len(self.lambdas)

    @classmethod
    def worst_case(cls, T: int, alpha: float, A: float = 1.0) -> "Tsybakov":
        """``lambda_j = (j / (A T)) ** ((1 - alpha) / alpha)``, clipped to 1, ascending.

        The condition counts ``lambda_t / 2 <= r``, so this sequence meets it with
        constant ``A * 2 ** (alpha / (1 - alpha))``, which is the one stored.
        """
        return cls(tuple(worst_case_lambdas(T, alpha, A)), A=A * 2.0 ** (alpha / (1.0 - alpha)), alpha=alpha)

    def _set(self, x, y, t):
        lam = self.lambdas[t]
        e = np.zeros(2)
        e[y] = 1.0
        return segment_or_singleton(e, lam * e + (1.0 - lam) * 0.5)

    def condition_holds(self, grid: int = 200) -> bool:
        """Check ``#{t : lambda_t / 2 <= r} / T <= A r^(alpha / (1 - alpha))`` on a grid of r."""
        lam = np.asarray(self.lambdas)
        rs = np.linspace(0.5 / grid, 0.5, grid)
        frac = np.array([np.mean(lam / 2 <= r) for r in rs])
        return bool(np.all(frac <= self.A * rs ** (self.alpha / (1 - self.alpha)) + 1e-12))


def worst_case_lambdas(T: int, alpha: float, A: float = 1.0) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1) for the power-law sequence, got {alpha}")
    j = np.arange(1, T + 1, dtype=np.float64)
    lam = np.minimum((j / (A * T)) ** ((1.0 - alpha) / alpha), 1.0)
    return np.sort(np.maximum(lam, np.finfo(float).tiny))


class SingletonKernel(NoiseKernel):
    """Fully specified kernel: ``table[x, y]`` is the only allowed observation law."""

    name = "singleton"

    def __init__(self, table):
        T = np.array(table, dtype=np.float64)
        if T.ndim != 3:
            raise ValueError("singleton table must have shape (F, N, M)")
        self.F, self.N, self.M = T.shape
        for x in range(self.F):
            for y in range(self.N):
                T[x, y] = np.asarray(Distribution(T[x, y]))
        T.setflags(write=False)
        self.table = T

    def _set(self, x, y, t):
        return Singleton(self.table[x, y])


class CustomKernel(NoiseKernel):
    """Kernel backed by a mapping ``(x, y) -> KernelSet`` or a callable."""

    name = "custom"

    def __init__(self, table: Mapping | Callable, N: int, M: int, F: int | None = None):
        self.table = table
        self.N, self.M, self.F = N, M, F

    def _set(self, x, y, t):
        s = self.table(x, y) if callable(self.table) else self.table[(x, y)]
        if s.M != self.M:
            raise DimensionError(f"kernel set at ({x}, {y}) has M={s.M}, expected {self.M}")
        return s


# ---------------------------------------------------------------------------
# minimum-norm point


def min_norm_point(P, tol: float = 1e-12, max_iter: int = MAX_ITER):
    """Minimum-norm point of the convex hull of the rows of ``P`` (Wolfe's algorithm).

    Returns
    -------
    x : ndarray
        The minimum-norm point.
    weights : ndarray
        Convex weights over the rows of ``P`` with ``weights @ P == x``.
    iterations : int
    converged : bool
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    norms = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(norms.max()))
    S = [int(np.argmin(norms))]
    lam = np.array([1.0])
    x = P[S[0]].copy()
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        g = P @ x
        j = int(np.argmin(g))
        if x @ x - g[j] <= tol * scale or j in S:
            converged = True
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while it < max_iter:
            it += 1
            B = P[S]
            k = len(S)
            K = np.zeros((k + 1, k + 1))
            K[:k, :k] = B @ B.T
            K[:k, k] = 1.0
            K[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            a = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
            if np.all(a > 1e-14):
                lam = a
                break
            neg = a <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = lam[neg] / (lam[neg] - a[neg])
            theta = float(np.min(ratios[np.isfinite(ratios)], initial=1.0))
            theta = min(max(theta, 0.0), 1.0)
            lam = lam + theta * (a - lam)
            keep = lam > 1e-14
            if not keep.any():
                keep[int(np.argmax(lam))] = True
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    w = np.zeros(n)
    w[S] = lam
    return x, w, it, converged


# ---------------------------------------------------------------------------
# projections


def project_l2(p, s: KernelSet):
    """Euclidean projection of ``p`` onto ``s``.

    Returns
    -------
    q : Distribution
        The unique closest point of ``s``.
    dist_sq : float
        ``||p - q||^2``.
    """
    p = as_probs(p)
    if p.size != s.M:
        raise DimensionError(f"point has M={p.size}, set has M={s.M}")
    V = s.vertices
    if s.n_vertices == 1:
        q = V[0]
    elif s.n_vertices == 2:
        d = V[1] - V[0]
        u = float(np.clip((p - V[0]) @ d / (d @ d), 0.0, 1.0))
        q = V[0] + u * d
    else:
        z, _, _, ok = min_norm_point(V - p, tol=1e-15)
        if not ok:
            raise ConvergenceError("projection onto polytope did not converge")
        q = p + z
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    return Distribution(q), float((p - q) @ (p - q))


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True)
class GapReport:
    divergence: DivergenceKind
    value: float
    argmin_pair: tuple
    iterations: int = 0
    converged: bool = True
    witness: tuple | None = field(default=None)

    def __post_init__(self):
        if not self.converged:
            return
        p, q = self.argmin_pair
        v = self.divergence(p, q)
        if abs(v - self.value) > TOL:
            raise AssertionError(f"gap value {self.value} disagrees with its argmin pair ({v})")


def _as_dist(v) -> Distribution:
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, None)
    return Distribution(v / v.sum())


def _l2_small(A, B):
    """Exact L2 gap when each set has at most two generators (box QP in the mixture weights)."""
    a0, b0 = A[0], B[0]
    s_free, t_free = len(A) == 2, len(B) == 2
    da = A[1] - a0 if s_free else np.zeros_like(a0)
    db = B[1] - b0 if t_free else np.zeros_like(b0)
    w0 = a0 - b0

    def val(s, t):
        r = w0 + s * da - t * db
        return float(r @ r)

    cands = []
    if s_free and t_free:
        H = np.array([[da @ da, -(da @ db)], [-(da @ db), db @ db]])
        if abs(np.linalg.det(H)) > 1e-15:
            s, t = np.linalg.solve(H, [-(w0 @ da), w0 @ db])
            if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
                cands.append((s, t))
    # a convex quadratic restricted to an edge is minimized by clamping
    for s in ((0.0, 1.0) if s_free else (0.0,)):
        t = float(np.clip((w0 + s * da) @ db / (db @ db), 0.0, 1.0)) if t_free else 0.0
        cands.append((s, t))
    for t in ((0.0, 1.0) if t_free else (0.0,)):
        s = float(np.clip(-((w0 - t * db) @ da) / (da @ da), 0.0, 1.0)) if s_free else 0.0
        cands.append((s, t))
    s, t = min(cands, key=lambda c: val(*c))
    return val(s, t), a0 + s * da, b0 + t * db


def _gap_l2(s1, s2):
    A, B = s1.vertices, s2.vertices
    if len(A) <= 2 and len(B) <= 2:
        _, p, q = _l2_small(A, B)
        return _as_dist(p), _as_dist(q), 1, True
    D = (A[:, None, :] - B[None, :, :]).reshape(-1, A.shape[1])
    _, w, it, ok = min_norm_point(D, tol=1e-15)
    W = w.reshape(len(A), len(B))
    return _as_dist(W.sum(1) @ A), _as_dist(W.sum(0) @ B), it, ok


def _bc(p, q):
    return float(np.sum(np.sqrt(p * q)))


def _kkt_corner(A, B):
    """A corner of ``[0, 1]^2`` that is optimal for ``H^2`` between two segments, if any.

    ``H^2`` is jointly convex in the segment parameters, so a corner meeting the
    box first-order conditions is a global minimizer. Corners with an infinite or
    undefined gradient are skipped.
    """
    if len(A) != 2 or len(B) != 2:
        return None
    dA, dB = A[1] - A[0], B[1] - B[0]
    best = None
    for s in (0.0, 1.0):
        p = A[0] + s * dA
        for t in (0.0, 1.0):
            q = B[0] + t * dB
            with np.errstate(divide="ignore", invalid="ignore"):
                gs = -np.sum(dA * np.sqrt(q / p))
                gt = -np.sum(dB * np.sqrt(p / q))
            if not (np.isfinite(gs) and np.isfinite(gt)):
                continue
            ok_s = gs >= -1e-12 if s == 0.0 else gs <= 1e-12
            ok_t = gt >= -1e-12 if t == 0.0 else gt <= 1e-12
            if ok_s and ok_t:
                v = 2.0 - 2.0 * _bc(p, q)
                if best is None or v < best[2]:
                    best = (s, t, v)
    return None if best is None else best[:2]


def _gap_hellinger_small(A, B):
    def pt(V, s):
        return V[0] if len(V) == 1 else (1.0 - s) * V[0] + s * V[1]

    def h2(s, t):
        return 2.0 - 2.0 * _bc(pt(A, s), pt(B, t))

    corner = _kkt_corner(A, B)
    if corner is not None:
        return _as_dist(pt(A, corner[0])), _as_dist(pt(B, corner[1])), 1, True

    def inner(s):
        if len(B) == 1:
            return 0.0, h2(s, 0.0)
        r = minimize_scalar(lambda t: h2(s, t), bounds=(0.0, 1.0), method="bounded",
                            options={"xatol": 1e-12, "maxiter": 500})
        best = min([(r.x, r.fun), (0.0, h2(s, 0.0)), (1.0, h2(s, 1.0))], key=lambda c: c[1])
        return best

    if len(A) == 1:
        s_best = 0.0
        nit = 1
    else:
        r = minimize_scalar(lambda s: inner(s)[1], bounds=(0.0, 1.0), method="bounded",
                            options={"xatol": 1e-12, "maxiter": 500})
        s_best = min([r.x, 0.0, 1.0], key=lambda s: inner(s)[1])
        nit = int(r.nfev)
    t_best = inner(s_best)[0]
    return _as_dist(pt(A, s_best)), _as_dist(pt(B, t_best)), nit, True


def _gap_hellinger_poly(s1, s2):
    A, B = s1.vertices, s2.vertices
    nA, nB = len(A), len(B)
    floor = 1e-14

    def split(z):
        return z[:nA] @ A, z[nA:] @ B

    def f(z):
        p, q = split(z)
        return -_bc(p, q)

    def grad(z):
        p, q = split(z)
        sp, sq = np.sqrt(np.maximum(p, floor)), np.sqrt(np.maximum(q, floor))
        gp = np.where(q > 0, 0.5 * np.sqrt(q) / sp, 0.0)
        gq = np.where(p > 0, 0.5 * np.sqrt(p) / sq, 0.0)
        return -np.concatenate([A @ gp, B @ gq])

    z0 = np.concatenate([np.full(nA, 1.0 / nA), np.full(nB, 1.0 / nB)])
    cons = [{"type": "eq", "fun": lambda z: z[:nA].sum() - 1.0, "jac": lambda z: np.r_[np.ones(nA), np.zeros(nB)]},
            {"type": "eq", "fun": lambda z: z[nA:].sum() - 1.0, "jac": lambda z: np.r_[np.zeros(nA), np.ones(nB)]}]
    res = minimize(f, z0, jac=grad, bounds=[(0.0, 1.0)] * (nA + nB), constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    z = np.clip(res.x, 0.0, None)
    z[:nA] /= z[:nA].sum()
    z[nA:] /= z[nA:].sum()
    # Frank-Wolfe duality gap as a certificate of optimality
    g = grad(z)
    fw_gap = float(g @ z - g[:nA].min() - g[nA:].min())
    p, q = split(z)
    return _as_dist(p), _as_dist(q), int(res.nit), fw_gap <= 1e-7


def _gap_tv(s1, s2):
    A, B = s1.vertices, s2.vertices
    nA, nB, M = len(A), len(B), A.shape[1]
    # variables: lambda (nA), mu (nB), u (M); minimize sum(u) / 2 with u >= |A^T lam - B^T mu|
    c = np.r_[np.zeros(nA + nB), 0.5 * np.ones(M)]
    D = np.hstack([A.T, -B.T])
    A_ub = np.vstack([np.hstack([D, -np.eye(M)]), np.hstack([-D, -np.eye(M)])])
    b_ub = np.zeros(2 * M)
    A_eq = np.vstack([np.r_[np.ones(nA), np.zeros(nB + M)], np.r_[np.zeros(nA), np.ones(nB), np.zeros(M)]])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0, 1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        return _as_dist(A[0]), _as_dist(B[0]), int(res.nit), False
    lam, mu = res.x[:nA], res.x[nA:nA + nB]
    return _as_dist(lam @ A), _as_dist(mu @ B), int(res.nit), True


_GAP_CACHE: dict = {}


def gap(s1: KernelSet, s2: KernelSet, d: DivergenceKind = DivergenceKind.L2SQ) -> GapReport:
    """Infimum of ``d`` over ``s1 x s2`` with a minimizing pair.

    L2 gaps between sets with at most two generators are solved in closed form;
    larger hulls use the minimum-norm point of their Minkowski difference. Hellinger
    gaps use nested bounded scalar minimization on segments and SLSQP on the mixture
    weights otherwise, certified by the Frank-Wolfe duality gap. TV gaps are an LP.
    """
    d = DivergenceKind(d) if not isinstance(d, DivergenceKind) else d
    if s1.M != s2.M:
        raise DimensionError(f"kernel sets differ in dimension: {s1.M} vs {s2.M}")
    if d is DivergenceKind.KL:
        raise ValueError("gap supports L2SQ, HELLINGER_SQ and TV")
    if s1.n_vertices == 1 and s2.n_vertices == 1:
        p, q = Distribution(s1.vertices[0]), Distribution(s2.vertices[0])
        return GapReport(d, d(p, q), (p, q), 0, True)
    ck = (d, s1.key(), s2.key())
    hit = _GAP_CACHE.get(ck)
    if hit is not None:
        return hit
    if d is DivergenceKind.L2SQ:
        p, q, it, ok = _gap_l2(s1, s2)
    elif d is DivergenceKind.HELLINGER_SQ:
        if s1.n_vertices <= 2 and s2.n_vertices <= 2:
            p, q, it, ok = _gap_hellinger_small(s1.vertices, s2.vertices)
        else:
            p, q, it, ok = _gap_hellinger_poly(s1, s2)
    else:
        p, q, it, ok = _gap_tv(s1, s2)
    rep = GapReport(d, d(p, q), (p, q), it, ok)
    if len(_GAP_CACHE) > 4096:
        _GAP_CACHE.clear()
    _GAP_CACHE[ck] = rep
    return rep


def min_pairwise_gap(k: NoiseKernel, features: Sequence[int], d: DivergenceKind = DivergenceKind.L2SQ,
                     steps: Sequence[int] | None = None) -> GapReport:
    """Smallest gap over features, unordered label pairs and (for step-dependent kernels) steps.

    The returned report carries ``witness = (x, y, y2)`` or ``(x, y, y2, t)``.
    Raises :class:`ConvergenceError` if any solve fails to converge.
    """
    features = list(features)
    if not features:
        raise ValueError("feature list is empty")
    if k.step_dependent and steps is None:
        steps = range(k.T)
    step_list = list(steps) if steps is not None else [None]
    best = None
    for t in step_list:
        for x in features:
            for y, y2 in itertools.combinations(range(k.N), 2):
                r = gap(k.kernel_set(x, y, t), k.kernel_set(x, y2, t), d)
                if not r.converged:
                    raise ConvergenceError(f"gap solver failed at feature {x}, labels ({y}, {y2})")
                if best is None or r.value < best.value:
                    w = (x, y, y2) if t is None else (x, y, y2, t)
                    best = GapReport(r.divergence, r.value, r.argmin_pair, r.iterations, True, w)
    return best


# ---------------------------------------------------------------------------
# adversary sampling


@dataclass(frozen=True)
class Worst:
    """Extreme point of the set closest (in L2) to ``target``."""

    target: object


@dataclass(frozen=True)
class VertexIndex:
    i: int


@dataclass(frozen=True)
class UniformMixture:
    pass


def worst_vertex(s: KernelSet, target) -> int:
    t = as_probs(target)
    d = np.sum((s.vertices - t) ** 2, axis=1)
    return int(np.argmin(d))


def sample_from(s: KernelSet, strategy, rng=None) -> Distribution:
    """Pick a member of ``s``: the vertex closest to a target, a fixed vertex, or a
    Dirichlet(1) mixture of the vertices (uniform on a segment)."""
    if isinstance(strategy, Worst):
        return Distribution(s.vertices[worst_vertex(s, strategy.target)])
    if isinstance(strategy, VertexIndex):
        if not 0 <= strategy.i < s.n_vertices:
            raise IndexError(f"vertex {strategy.i} out of range for {s.n_vertices} vertices")
        return Distribution(s.vertices[strategy.i])
    if isinstance(strategy, UniformMixture):
        if s.n_vertices == 1:
            return Distribution(s.vertices[0])
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        w = rng.dirichlet(np.ones(s.n_vertices))
        return _as_dist(w @ s.vertices)
    raise TypeError(f"unknown sampling strategy {strategy!r}")
