"""Centrally symmetric convex bodies, linear maps and exact body operations.

Every body is described by oracles acting on row vectors: ``gauge`` (the norm
whose unit ball is the body), ``support`` and ``radial``.  All oracles accept a
single vector of shape ``(dim,)`` or a stack of shape ``(..., dim)``.

Suprema over the sphere are taken over a fixed direction set (see
:func:`sphere_directions`) followed by a deterministic pattern search, so
results of oracle-based operations carry a resolution error instead of being
certified.
"""
from __future__ import annotations

import math
from functools import cached_property, lru_cache

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.special import gammaln
from scipy.stats import norm as _normal, qmc

from .estimate import Estimate

__all__ = [
    "Body", "Ball", "Box", "CrossPolytope", "LpBall", "Ellipsoid", "HPolytope",
    "VPolytope", "Transformed", "Intersection", "SupportBody", "LinearMap",
    "InterpolationGauge", "gauge", "support", "radial", "apply_linear", "polar",
    "minkowski_interpolation_gauge", "geometric_distance", "binom_bounds",
    "beta_integral", "sphere_directions", "unit_ball_volume", "sphere_area",
]

_CHUNK = 1 << 22  # max matrix entries per vectorized block


def unit_ball_volume(n: int) -> float:
    return math.exp(0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0))


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return n * unit_ball_volume(n)


# ---------------------------------------------------------------------------
# direction sets

def _fibonacci_sphere(size: int) -> np.ndarray:
    i = np.arange(size) + 0.5
    z = 1.0 - 2.0 * i / size
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def _symmetrized_sobol(dim: int, size: int) -> np.ndarray:
    # sign flips and cyclic coordinate shifts make all second moments exact
    group = 2 ** dim * dim
    base_size = max(1, -(-size // group))
    m = max(0, math.ceil(math.log2(base_size)))
    u = qmc.Sobol(dim, scramble=True, seed=20240611).random_base2(m)
    g = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    signs = np.array(np.meshgrid(*[[1.0, -1.0]] * dim, indexing="ij")).reshape(dim, -1).T
    pts = []
    for shift in range(dim):
        rolled = np.roll(g, shift, axis=1)
        pts.append((rolled[:, None, :] * signs[None, :, :]).reshape(-1, dim))
    return np.concatenate(pts)


_DEFAULT_DIRECTIONS = {1: 2, 2: 720, 3: 4096}


@lru_cache(maxsize=32)
def sphere_directions(dim: int, size: int | None = None) -> np.ndarray:
    """Quasi-uniform unit vectors used for suprema over the sphere.

    Dimension 2 uses equally spaced angles (720 by default), dimension 3 a
    Fibonacci lattice (4096), dimensions 4 to 6 a Sobol set symmetrized under
    coordinate sign flips and cyclic shifts (about 2**14 points).
    """
    if size is None:
        size = _DEFAULT_DIRECTIONS.get(dim, 2 ** 14)
    if dim == 1:
        out = np.array([[1.0], [-1.0]])
    elif dim == 2:
        a = 2 * math.pi * np.arange(size) / size
        out = np.column_stack([np.cos(a), np.sin(a)])
    elif dim == 3:
        out = _fibonacci_sphere(size)
    else:
        out = _symmetrized_sobol(dim, size)
    out.setflags(write=False)
    return out


def _grid_step(dirs: np.ndarray) -> float:
    n = dirs.shape[1]
    if n == 1:
        return 0.0
    return float((sphere_area(n) / len(dirs)) ** (1.0 / (n - 1)))


def _unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _sphere_argmax(score, start, step, iters=40):
    """Row-wise pattern search on the sphere.

    ``score`` maps a (N, k, n) array of unit vectors to (N, k) values; the
    search keeps the best point per row and halves its step on failure.
    """
    u = _unit(start).copy()
    n_rows, n = u.shape
    best = score(u[:, None, :])[:, 0]
    steps = np.full(n_rows, float(step))
    moves = np.concatenate([np.eye(n), -np.eye(n)])
    rows = np.arange(n_rows)
    for _ in range(iters):
        cand = _unit(u[:, None, :] + steps[:, None, None] * moves[None])
        vals = score(cand)
        j = np.argmax(vals, axis=1)
        top = vals[rows, j]
        better = top > best
        u[better] = cand[better, j[better]]
        best[better] = top[better]
        steps[~better] *= 0.5
        if np.all(steps < 1e-10):
            break
    return u, best


def _as_rows(x, dim):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected trailing size {dim}, got shape {arr.shape}")
    return arr.reshape(-1, dim), arr.shape[:-1]


def _finish(values, lead):
    values = np.asarray(values, dtype=float).reshape(lead)
    return float(values) if values.ndim == 0 else values


def _chunked_rows(fn, X, width):
    # apply fn to row blocks so that block_rows * width stays bounded
    step = max(1, _CHUNK // max(1, width))
    if len(X) <= step:
        return fn(X)
    return np.concatenate([fn(X[i:i + step]) for i in range(0, len(X), step)])


# ---------------------------------------------------------------------------
# linear maps

class LinearMap:
    """Invertible square matrix with its determinant kept alongside."""

    __slots__ = ("matrix", "det", "_inverse")

    def __init__(self, matrix, det=None):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("linear map must be a square matrix")
        d = float(np.linalg.det(m)) if det is None else float(det)
        if d == 0.0 or not np.isfinite(d) or abs(d) < 1e-300:
            raise ValueError("singular linear map")
        m.setflags(write=False)
        self.matrix = m
        self.det = d
        self._inverse = None

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), 1.0)

    @classmethod
    def scaling(cls, dim, factor):
        return cls(factor * np.eye(dim), factor ** dim)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def inverse(self) -> "LinearMap":
        if self._inverse is None:
            self._inverse = LinearMap(np.linalg.inv(self.matrix), 1.0 / self.det)
        return self._inverse

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        return LinearMap(self.matrix @ other.matrix, self.det * other.det)

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.T

    def __repr__(self):
        return f"LinearMap(det={self.det:.6g}, matrix={self.matrix.tolist()})"


def _as_map(T) -> LinearMap:
    return T if isinstance(T, LinearMap) else LinearMap(T)


# ---------------------------------------------------------------------------
# bodies

class Body:
    """Base class: a centrally symmetric convex body with origin in its interior.

    Subclasses implement ``_gauge`` (and usually ``_support``) on 2-D arrays of
    row vectors.  Bodies are immutable after construction.
    """

    kind = "body"

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)

    # -- vectorized primitives -------------------------------------------
    def _gauge(self, X):
        raise NotImplementedError

    def _support(self, T):
        return self._support_from_radial(T)

    # -- public oracles ----------------------------------------------------
    def gauge(self, x):
        X, lead = _as_rows(x, self.dim)
        return _finish(self._gauge(X), lead)

    def support(self, theta):
        T, lead = _as_rows(theta, self.dim)
        if np.any(np.linalg.norm(T, axis=1) == 0):
            raise ValueError("support direction must be non-zero")
        return _finish(self._support(T), lead)

    def radial(self, theta):
        """sup{r > 0 : r * theta in body} for unit ``theta``."""
        T, lead = _as_rows(theta, self.dim)
        with np.errstate(divide="ignore"):
            return _finish(1.0 / self._gauge(T), lead)

    def contains(self, x, tol=1e-12):
        X, lead = _as_rows(x, self.dim)
        out = self._gauge(X) <= 1.0 + tol
        return out.reshape(lead) if lead else bool(out[0])

    def half_widths(self):
        """Half side lengths of the tight axis-parallel bounding box."""
        return np.asarray(self._support(np.eye(self.dim)), dtype=float)

    # -- optional exact data -----------------------------------------------
    def exact_volume(self):
        return None

    def second_moment(self):
        """E[x x^T] for the uniform distribution, when known in closed form."""
        return None

    def vertices(self):
        return None

    def facets(self):
        """(unit normals, offsets) with the body = {x : normals @ x <= offsets}."""
        return None

    @property
    def is_polytope(self):
        return self.facets() is not None

    # -- derived quantities -------------------------------------------------
    @cached_property
    def _dir_radial(self):
        dirs = sphere_directions(self.dim)
        return dirs, np.asarray(_chunked_rows(lambda B: 1.0 / self._gauge(B), dirs, 1))

    def _support_from_radial(self, T):
        # h(phi) = max_u rho(u) <u, phi> over the direction set, then refined
        dirs, rho = self._dir_radial
        pts = dirs * rho[:, None]
        norms = np.linalg.norm(T, axis=1)
        U = T / norms[:, None]

        def best(B):
            return np.argmax(B @ pts.T, axis=1)

        idx = _chunked_rows(best, U, len(dirs))
        start = dirs[idx]

        def score(C):
            flat = C.reshape(-1, self.dim)
            r = 1.0 / self._gauge(flat)
            return (r.reshape(C.shape[:2]) * np.einsum("nkd,nd->nk", C, U))

        _, val = _sphere_argmax(score, start, _grid_step(dirs))
        return val * norms

    @cached_property
    def r_out(self) -> float:
        V = self.vertices()
        if V is not None:
            return float(np.max(np.linalg.norm(V, axis=1)))
        dirs, rho = self._dir_radial
        i = int(np.argmax(rho))

        def score(C):
            return 1.0 / self._gauge(C.reshape(-1, self.dim)).reshape(C.shape[:2])

        _, val = _sphere_argmax(score, dirs[i:i + 1], _grid_step(dirs))
        return float(val[0])

    @cached_property
    def r_in(self) -> float:
        F = self.facets()
        if F is not None:
            return float(np.min(F[1]))
        dirs, rho = self._dir_radial
        i = int(np.argmin(rho))

        def score(C):
            return self._gauge(C.reshape(-1, self.dim)).reshape(C.shape[:2])

        _, val = _sphere_argmax(score, dirs[i:i + 1], _grid_step(dirs))
        return float(1.0 / val[0])

    def to_dict(self) -> dict:
        raise TypeError(f"body kind {self.kind!r} has no JSON form")

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Ball(Body):
    kind = "ball"

    def __init__(self, dim, radius=1.0):
        super().__init__(dim)
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def _gauge(self, X):
        return np.linalg.norm(X, axis=1) / self.radius

    def _support(self, T):
        return self.radius * np.linalg.norm(T, axis=1)

    def exact_volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def second_moment(self):
        return self.radius ** 2 / (self.dim + 2) * np.eye(self.dim)

    @cached_property
    def r_out(self):
        return self.radius

    @cached_property
    def r_in(self):
        return self.radius

    def to_dict(self):
        return {"dim": self.dim, "kind": "ball", "radius": self.radius}


class _Polytope(Body):
    """Shared machinery for bodies with explicit vertices and facets."""

    @cached_property
    def _hull(self):
        return ConvexHull(self.vertices())

    def exact_volume(self):
        return float(self._hull.volume)

    def second_moment(self):
        # cone decomposition from the origin over the hull's simplicial facets
        V = self.vertices()
        n = self.dim
        simp = V[self._hull.simplices]  # (F, n, n)
        vol = np.abs(np.linalg.det(simp)) / math.factorial(n)
        s = simp.sum(axis=1)
        outer = np.einsum("fki,fkj->fij", simp, simp) + np.einsum("fi,fj->fij", s, s)
        total = np.einsum("f,fij->ij", vol, outer) / ((n + 1) * (n + 2))
        return total / vol.sum()

    def _gauge(self, X):
        A, b = self.facets()
        return _chunked_rows(lambda B: np.maximum(np.max((B @ A.T) / b, axis=1), 0.0), X, len(b))

    def _support(self, T):
        V = self.vertices()
        return _chunked_rows(lambda B: np.max(B @ V.T, axis=1), T, len(V))


class Box(_Polytope):
    kind = "box"

    def __init__(self, half_widths):
        a = np.array(half_widths, dtype=float).ravel()
        if np.any(a <= 0):
            raise ValueError("half widths must be positive")
        super().__init__(a.size)
        a.setflags(write=False)
        self.half_widths_ = a

    @classmethod
    def cube(cls, dim, half_width=1.0):
        return cls(np.full(dim, float(half_width)))

    def _gauge(self, X):
        return np.max(np.abs(X) / self.half_widths_, axis=1)

    def _support(self, T):
        return np.abs(T) @ self.half_widths_

    def exact_volume(self):
        return float(np.prod(2 * self.half_widths_))

    def second_moment(self):
        return np.diag(self.half_widths_ ** 2 / 3.0)

    @lru_cache(maxsize=None)
    def vertices(self):
        signs = np.array(np.meshgrid(*[[1.0, -1.0]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        return signs * self.half_widths_

    @lru_cache(maxsize=None)
    def facets(self):
        eye = np.eye(self.dim)
        return np.concatenate([eye, -eye]), np.concatenate([self.half_widths_] * 2)

    def to_dict(self):
        return {"dim": self.dim, "kind": "box", "half_widths": self.half_widths_.tolist()}


class CrossPolytope(_Polytope):
    """conv(+-r_i e_i); the unit ball of the weighted l1 norm."""

    kind = "cross"

    def __init__(self, radii):
        r = np.array(radii, dtype=float).ravel()
        if np.any(r <= 0):
            raise ValueError("radii must be positive")
        super().__init__(r.size)
        r.setflags(write=False)
        self.radii = r

    @classmethod
    def regular(cls, dim, radius=1.0):
        return cls(np.full(dim, float(radius)))

    def _gauge(self, X):
        return np.sum(np.abs(X) / self.radii, axis=1)

    def _support(self, T):
        return np.max(np.abs(T) * self.radii, axis=1)

    def exact_volume(self):
        return float(2 ** self.dim * np.prod(self.radii) / math.factorial(self.dim))

    def second_moment(self):
        n = self.dim
        return np.diag(self.radii ** 2 * 2.0 / ((n + 1) * (n + 2)))

    @lru_cache(maxsize=None)
    def vertices(self):
        eye = np.diag(self.radii)
        return np.concatenate([eye, -eye])

    @lru_cache(maxsize=None)
    def facets(self):
        signs = np.array(np.meshgrid(*[[1.0, -1.0]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        A = signs / self.radii
        nrm = np.linalg.norm(A, axis=1)
        return A / nrm[:, None], 1.0 / nrm

    def to_dict(self):
        return {"dim": self.dim, "kind": "cross", "radii": self.radii.tolist()}


class LpBall(Body):
    """radius * {x : ||x||_p <= 1}, 1 <= p < inf."""

    kind = "lp"

    def __init__(self, dim, p, radius=1.0):
        super().__init__(dim)
        if not (1.0 <= p < math.inf):
            raise ValueError("p must satisfy 1 <= p < inf")
        self.p = float(p)
        self.radius = float(radius)
        self.q = math.inf if self.p == 1.0 else self.p / (self.p - 1.0)

    def _gauge(self, X):
        return np.linalg.norm(X, ord=self.p, axis=1) / self.radius

    def _support(self, T):
        return self.radius * np.linalg.norm(T, ord=self.q, axis=1)

    def exact_volume(self):
        n, p = self.dim, self.p
        return float(math.exp(n * (math.log(2) + math.lgamma(1 + 1 / p)) - math.lgamma(1 + n / p))
                     * self.radius ** n)

    def second_moment(self):
        n, p = self.dim, self.p
        m2 = math.exp(gammaln(3 / p) + gammaln(1 + n / p) - gammaln(1 / p) - gammaln(1 + (n + 2) / p))
        return self.radius ** 2 * m2 * np.eye(n)

    @cached_property
    def r_out(self):
        return self.radius * self.dim ** max(0.0, 0.5 - 1.0 / self.p)

    @cached_property
    def r_in(self):
        return self.radius * self.dim ** min(0.0, 0.5 - 1.0 / self.p)

    def to_dict(self):
        return {"dim": self.dim, "kind": "lp", "p": self.p, "radius": self.radius}


class Ellipsoid(Body):
    """{x : x^T A x <= 1} for a symmetric positive-definite form A."""

    kind = "ellipsoid"

    def __init__(self, form):
        A = np.array(form, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("ellipsoid form must be square")
        A = 0.5 * (A + A.T)
        evals = np.linalg.eigvalsh(A)
        if np.any(evals <= 0):
            raise ValueError("ellipsoid form must be positive definite")
        super().__init__(A.shape[0])
        A.setflags(write=False)
        self.form = A
        self._inv = np.linalg.inv(A)
        self._evals = evals

    @classmethod
    def from_axes(cls, semi_axes, rotation=None):
        a = np.asarray(semi_axes, dtype=float)
        A = np.diag(1.0 / a ** 2)
        if rotation is not None:
            R = np.asarray(rotation, dtype=float)
            A = R @ A @ R.T
        return cls(A)

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) / math.sqrt(float(np.prod(self._evals)))

    def _gauge(self, X):
        return np.sqrt(np.maximum(np.einsum("ni,ij,nj->n", X, self.form, X), 0.0))

    def _support(self, T):
        return np.sqrt(np.maximum(np.einsum("ni,ij,nj->n", T, self._inv, T), 0.0))

    def exact_volume(self):
        return self.volume

    def second_moment(self):
        return self._inv / (self.dim + 2)

    @cached_property
    def r_out(self):
        return float(1.0 / math.sqrt(self._evals[0]))

    @cached_property
    def r_in(self):
        return float(1.0 / math.sqrt(self._evals[-1]))

    def to_dict(self):
        return {"dim": self.dim, "kind": "ellipsoid", "form": self.form.tolist()}


class HPolytope(_Polytope):
    """{x : A x <= b} with b > 0 (origin interior)."""

    kind = "hpoly"

    def __init__(self, normals, offsets):
        A = np.atleast_2d(np.array(normals, dtype=float))
        b = np.array(offsets, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError("normals and offsets disagree in length")
        if np.any(b <= 0):
            raise ValueError("offsets must be positive (origin interior)")
        super().__init__(A.shape[1])
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise ValueError("zero facet normal")
        self._A = A / nrm[:, None]
        self._b = b / nrm
        self._A.setflags(write=False)
        self._b.setflags(write=False)

    def facets(self):
        return self._A, self._b

    @lru_cache(maxsize=None)
    def vertices(self):
        halfspaces = np.hstack([self._A, -self._b[:, None]])
        try:
            hs = HalfspaceIntersection(halfspaces, np.zeros(self.dim))
        except Exception as exc:  # qhull raises its own error type
            raise ValueError(f"h-polytope is unbounded or degenerate: {exc}") from None
        V = hs.intersections
        hull = ConvexHull(V)
        return V[hull.vertices]

    def to_dict(self):
        return {"dim": self.dim, "kind": "hpoly", "normals": self._A.tolist(), "offsets": self._b.tolist()}


class VPolytope(_Polytope):
    """conv(+-v_i); vertices are symmetrized on construction."""

    kind = "vpoly"

    def __init__(self, points, symmetrize=True):
        P = np.atleast_2d(np.array(points, dtype=float))
        if symmetrize:
            P = np.concatenate([P, -P])
        super().__init__(P.shape[1])
        try:
            hull = ConvexHull(P)
        except Exception as exc:
            raise ValueError(f"v-polytope is degenerate: {exc}") from None
        self._V = P[hull.vertices]
        eq = hull.equations
        if np.any(-eq[:, -1] <= 0):
            raise ValueError("origin is not interior to the v-polytope")
        self._A = eq[:, :-1]
        self._b = -eq[:, -1]
        for arr in (self._V, self._A, self._b):
            arr.setflags(write=False)

    def vertices(self):
        return self._V

    def facets(self):
        return self._A, self._b

    def to_dict(self):
        return {"dim": self.dim, "kind": "vpoly", "vertices": self._V.tolist()}


class Transformed(Body):
    """Linear image T(base)."""

    kind = "transformed"

    def __init__(self, base: Body, T):
        T = _as_map(T)
        if T.dim != base.dim:
            raise ValueError("dimension mismatch between body and linear map")
        super().__init__(base.dim)
        self.base = base
        self.map = T

    def _gauge(self, X):
        return self.base._gauge(X @ self.map.inverse.matrix.T)

    def _support(self, T):
        return self.base._support(T @ self.map.matrix)

    def exact_volume(self):
        v = self.base.exact_volume()
        return None if v is None else abs(self.map.det) * v

    def second_moment(self):
        S = self.base.second_moment()
        if S is None:
            return None
        M = self.map.matrix
        return M @ S @ M.T

    @lru_cache(maxsize=None)
    def vertices(self):
        V = self.base.vertices()
        return None if V is None else V @ self.map.matrix.T

    @lru_cache(maxsize=None)
    def facets(self):
        F = self.base.facets()
        if F is None:
            return None
        A = F[0] @ self.map.inverse.matrix
        nrm = np.linalg.norm(A, axis=1)
        return A / nrm[:, None], F[1] / nrm

    @cached_property
    def _hull(self):
        return ConvexHull(self.vertices())

    def to_dict(self):
        return {"dim": self.dim, "kind": "transformed", "base": self.base.to_dict(),
                "matrix": self.map.matrix.tolist()}


class Intersection(Body):
    """Intersection of bodies; gauge is the pointwise maximum."""

    kind = "intersection"

    def __init__(self, *bodies: Body):
        if not bodies:
            raise ValueError("empty intersection")
        dims = {b.dim for b in bodies}
        if len(dims) != 1:
            raise ValueError("dimension mismatch in intersection")
        super().__init__(dims.pop())
        self.bodies = tuple(bodies)

    def _gauge(self, X):
        return np.max([b._gauge(X) for b in self.bodies], axis=0)

    def to_dict(self):
        return {"dim": self.dim, "kind": "intersection", "bodies": [b.to_dict() for b in self.bodies]}


class SupportBody(Body):
    """Body known through its support function only (e.g. a convex hull)."""

    kind = "support"

    def __init__(self, dim, support_fn):
        super().__init__(dim)
        self._support_fn = support_fn

    def _support(self, T):
        return np.asarray(self._support_fn(T), dtype=float)

    @cached_property
    def _dir_support(self):
        dirs = sphere_directions(self.dim)
        return dirs, self._support(dirs)

    def _gauge(self, X):
        # polar characterization: ||x|| = max_theta <x, theta> / h(theta)
        dirs, h = self._dir_support
        nx = np.linalg.norm(X, axis=1)
        out = np.zeros(len(X))
        nz = nx > 0
        if not np.any(nz):
            return out
        U = X[nz] / nx[nz, None]
        scaled = dirs / h[:, None]
        idx = _chunked_rows(lambda B: np.argmax(B @ scaled.T, axis=1), U, len(dirs))

        def score(C):
            flat = C.reshape(-1, self.dim)
            hh = self._support(flat).reshape(C.shape[:2])
            return np.einsum("nkd,nd->nk", C, U) / hh

        _, val = _sphere_argmax(score, dirs[idx], _grid_step(dirs))
        out[nz] = val * nx[nz]
        return out


# ---------------------------------------------------------------------------
# module-level operations

def gauge(body: Body, x):
    """||x||_K; zero only at the origin."""
    return body.gauge(x)


def support(body: Body, theta):
    return body.support(theta)


def radial(body: Body, theta):
    return body.radial(theta)


def apply_linear(body: Body, T) -> Body:
    """Linear image of ``body``; repeated images compose into a single map."""
    T = _as_map(T)
    if isinstance(body, Transformed):
        return Transformed(body.base, T @ body.map)
    return Transformed(body, T)


def polar(body: Body) -> Body:
    """Closed-form polar body K° = {y : <x, y> <= 1 for all x in K}."""
    if isinstance(body, Ball):
        return Ball(body.dim, 1.0 / body.radius)
    if isinstance(body, Box):
        return CrossPolytope(1.0 / body.half_widths_)
    if isinstance(body, CrossPolytope):
        return Box(1.0 / body.radii)
    if isinstance(body, Ellipsoid):
        return Ellipsoid(np.linalg.inv(body.form))
    if isinstance(body, LpBall):
        if body.q == math.inf:
            return Box.cube(body.dim, 1.0 / body.radius)
        return LpBall(body.dim, body.q, 1.0 / body.radius)
    if isinstance(body, HPolytope):
        A, b = body.facets()
        return VPolytope(A / b[:, None], symmetrize=False)
    if isinstance(body, VPolytope):
        V = body.vertices()
        return HPolytope(V, np.ones(len(V)))
    if isinstance(body, Transformed):
        return Transformed(polar(body.base), LinearMap(np.linalg.inv(body.map.matrix).T, 1.0 / body.map.det))
    raise TypeError(f"no closed-form polar for body kind {body.kind!r}")


def binom_bounds(n: int, k: int) -> tuple[float, int, float]:
    """Return ((n/k)^k, C(n, k), (e n/k)^k)."""
    if not (1 <= k <= n):
        raise ValueError("binom_bounds requires 1 <= k <= n")
    return (n / k) ** k, math.comb(n, k), (math.e * n / k) ** k


def beta_integral(a: int, b: int) -> float:
    """Integral of s^a (1 - s)^b over [0, 1] for non-negative integers a, b."""
    if a < 0 or b < 0 or int(a) != a or int(b) != b:
        raise ValueError("beta_integral requires non-negative integers")
    a, b = int(a), int(b)
    return 1.0 / ((a + b + 1) * math.comb(a + b, a))


class InterpolationGauge:
    """f(x) = inf{t in [0, 1] : x in (1 - t) C + t K} for bodies C ⊆ K.

    Each direction phi of the constraint set contributes the affine bound
    ``(<x, phi> - h_C(phi)) / (h_K(phi) - h_C(phi))``; f is their clamped
    maximum.  The constraint set holds the facet normals of K (and of C, when
    available) plus a quasi-uniform sphere set, so f is exact for polytopes
    with sphere-free cores and a lower approximation otherwise.
    """

    degenerate_tol = 1e-12

    def __init__(self, K: Body, C: Body, directions=None, containment_tol=1e-8):
        if K.dim != C.dim:
            raise ValueError("dimension mismatch")
        parts = [sphere_directions(K.dim) if directions is None else np.asarray(directions, dtype=float)]
        for B in (K, C):
            F = B.facets()
            if F is not None:
                parts.append(F[0])
        phi = _unit(np.concatenate(parts))
        hK = K._support(phi)
        hC = C._support(phi)
        excess = hC - hK
        if np.any(excess > containment_tol * np.maximum(1.0, hK)):
            raise ValueError("core body is not contained in K (sampled support check)")
        self.K, self.C = K, C
        self.phi = phi
        self.hK = hK
        self.hC = np.minimum(hC, hK)
        self.delta = self.hK - self.hC
        self.live = self.delta > self.degenerate_tol * np.maximum(1.0, hK)

    def __call__(self, x, tol=1e-9):
        X, lead = _as_rows(x, self.K.dim)
        if np.any(self.K._gauge(X) > 1.0 + tol):
            raise ValueError("point outside K")
        phi, hC, d = self.phi[self.live], self.hC[self.live], self.delta[self.live]
        if phi.size == 0:
            return _finish(np.zeros(len(X)), lead)

        def block(B):
            return np.max((B @ phi.T - hC) / d, axis=1)

        f = _chunked_rows(block, X, len(phi))
        return _finish(np.clip(f, 0.0, 1.0), lead)

    def level_radial(self, theta, t):
        """Radial function of the interpolated body (1 - t) C + t K.

        ``theta`` is (N, n) unit vectors, ``t`` a 1-D array of levels; returns
        an (N, len(t)) array computed from the polar characterization over the
        constraint set.
        """
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((len(theta), len(t)))
        step = max(1, _CHUNK // max(1, len(self.phi)))
        for i in range(0, len(theta), step):
            dots = theta[i:i + step] @ self.phi.T  # (B, D)
            # a direction can attain the max at some level only if its score
            # at t = 0 reaches the maximum at t = 1 (denominators grow in t)
            s0 = dots / self.hC
            v1 = np.max(dots / self.hK, axis=1)
            width = int(np.max(np.sum(s0 >= v1[:, None] * (1 - 1e-12), axis=1)))
            sel = np.argpartition(-s0, width - 1, axis=1)[:, :width]
            a = np.take_along_axis(dots, sel, axis=1)
            hc, dl = self.hC[sel], self.delta[sel]
            h = hc[:, None, :] + t[None, :, None] * dl[:, None, :]  # (B, T, w)
            out[i:i + step] = 1.0 / np.max(a[:, None, :] / h, axis=2)
        # exact bounds: (1 - t) rho_C + t rho_K <= rho_t <= rho_K
        rK = 1.0 / self.K._gauge(theta)
        rC = 1.0 / self.C._gauge(theta)
        lower = (1 - t)[None, :] * rC[:, None] + t[None, :] * rK[:, None]
        return np.clip(out, lower, rK[:, None])


def minkowski_interpolation_gauge(K: Body, C: Body, x, directions=None):
    """Convenience wrapper around :class:`InterpolationGauge`."""
    return InterpolationGauge(K, C, directions)(x)


def geometric_distance(K: Body, T: Body, directions=None, *, scale_invariant=True,
                       refine=True) -> Estimate:
    """Geometric distance inf{ab : K/a ⊆ T ⊆ bK}.

    With ``scale_invariant=True`` a and b range over all positive reals, so
    d(K, 2K) = 1.  With ``scale_invariant=False`` both are restricted to be
    at least one, which measures the fixed-scale sandwich (d(K, 2K) = 2).
    The std_error field holds the change produced by local refinement, a
    proxy for the direction-grid resolution error.
    """
    if K.dim != T.dim:
        raise ValueError("dimension mismatch")
    dirs = sphere_directions(K.dim) if directions is None else np.asarray(directions, dtype=float)
    ratio = T._gauge(dirs) / K._gauge(dirs)
    a_grid, b_grid = float(np.max(ratio)), float(np.max(1.0 / ratio))
    a, b = a_grid, b_grid
    if refine and K.dim > 1:
        step = _grid_step(dirs)

        def r_score(C, sign):
            flat = C.reshape(-1, K.dim)
            r = (T._gauge(flat) / K._gauge(flat)).reshape(C.shape[:2])
            return r if sign > 0 else 1.0 / r

        _, va = _sphere_argmax(lambda C: r_score(C, 1), dirs[[int(np.argmax(ratio))]], step)
        _, vb = _sphere_argmax(lambda C: r_score(C, -1), dirs[[int(np.argmin(ratio))]], step)
        a, b = max(a, float(va[0])), max(b, float(vb[0]))
    if not scale_invariant:
        a, b = max(a, 1.0), max(b, 1.0)
        a_grid, b_grid = max(a_grid, 1.0), max(b_grid, 1.0)
    value = max(a * b, 1.0)
    return Estimate(value, abs(value - max(a_grid * b_grid, 1.0)), len(dirs), None)
