"""Uniform radial grids, high-order derivative stencils, and quadrature.

A rotationally symmetric field on the round sphere or on a flat ball reduces
to a function of one radial coordinate; the volume element carries the
dimensional factor (``sin^{n-1}`` resp. ``r^{n-1}`` times the measure of the
unit ``S^{n-1}``).  Grids are uniform and node-centered with the endpoints
included.

Derivatives use 4th-order centered stencils.  At an axis endpoint (a pole of
the sphere, or the origin of the ball) smooth radial fields extend evenly, so
the stencil indices are mirror-reflected there.  At a genuine boundary (the
outer radius of a ball) one-sided closures of the same formal order take
over.  All stencils are materialized as small index/coefficient tables so the
time-stepping kernels can apply them without branching.

``integrate`` is the trapezoid rule against the radial volume density with an
exactly rounded (fsum) accumulation, so repeated runs are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadialGrid",
    "sphere_latitude",
    "ball_radius",
    "DerivativeOperator",
    "derivative",
    "d1",
    "d2",
    "integrate",
    "gauss_panels",
    "log_edges",
    "sphere_measure",
]

MIN_POINTS = 16


def sphere_measure(m: int) -> float:
    """Total measure of the unit sphere S^m."""
    if m < 0:
        raise ValueError("need m >= 0")
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform 1-d grid plus the radial volume density it integrates against.

    kind
        ``"sphere_latitude"`` for [0, pi] on the round n-sphere, or
        ``"ball_radius"`` for [0, r0] on a flat n-ball.
    """

    kind: str
    n: int
    x: np.ndarray
    density: np.ndarray
    left_even: bool
    right_even: bool

    @property
    def num_points(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights times the volume density."""
        w = np.full(self.x.size, self.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w * self.density

    # cached derivative tables, built lazily by derivative()
    _ops: dict = field(default_factory=dict, repr=False, compare=False)


def _validate(n: int, num_points: int) -> None:
    if n < 2:
        raise ValueError(f"need dimension n >= 2, got {n}")
    if num_points < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} grid points, got {num_points}")


def sphere_latitude(n: int, num_points: int) -> RadialGrid:
    """Latitude grid on [0, pi] for the round S^n; both poles are even ends."""
    _validate(n, num_points)
    x = np.linspace(0.0, math.pi, num_points)
    density = np.sin(x) ** (n - 1) * sphere_measure(n - 1)
    return RadialGrid("sphere_latitude", n, x, density, True, True)


def ball_radius(n: int, num_points: int, r0: float) -> RadialGrid:
    """Radius grid on [0, r0] for a flat n-ball; the origin is an even end."""
    _validate(n, num_points)
    if r0 <= 0.0:
        raise ValueError(f"need r0 > 0, got {r0}")
    x = np.linspace(0.0, float(r0), num_points)
    density = x ** (n - 1) * sphere_measure(n - 1)
    return RadialGrid("ball_radius", n, x, density, True, False)


# ---------------------------------------------------------------------------
# stencil tables

_STENCIL_WIDTH = 6

# centered 4th-order first/second derivative, offsets -2..2
_C1_CENTER = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_C2_CENTER = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

# one-sided 4th-order closures at a boundary node and one node in
# (coefficients on nodes 0..4 resp. 0..5 counted from the boundary)
_C1_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_C1_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_C2_EDGE0 = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0
_C2_EDGE1 = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0


def _mirror(j: int, last: int) -> int:
    """Reflect an out-of-range index at even ends: -1 -> 1, last+1 -> last-1."""
    if j < 0:
        return -j
    if j > last:
        return 2 * last - j
    return j


def stencil_tables(grid: RadialGrid, order: int):
    """Index/coefficient tables applying d^order/dx^order at every node.

    Returns ``(idx, coef)`` with shape (N, 6); unused slots carry a zero
    coefficient and a valid in-range index so gather-style application needs
    no branches.
    """
    if order not in (1, 2):
        raise ValueError("only first and second derivatives are provided")
    N = grid.num_points
    h = grid.h
    last = N - 1
    center = _C1_CENTER if order == 1 else _C2_CENTER
    scale = h if order == 1 else h * h

    idx = np.zeros((N, _STENCIL_WIDTH), dtype=np.int64)
    coef = np.zeros((N, _STENCIL_WIDTH))

    for i in range(N):
        near_left = i < 2
        near_right = i > N - 3
        if (near_left and not grid.left_even) or (near_right and not grid.right_even):
            # one-sided closure, highest order first at the boundary node
            if order == 1:
                c = _C1_EDGE0 if (i == 0 or i == last) else _C1_EDGE1
            else:
                c = _C2_EDGE0 if (i == 0 or i == last) else _C2_EDGE1
            m = c.size
            if near_left:
                idx[i, :m] = np.arange(m)
                coef[i, :m] = c / scale
            else:
                idx[i, :m] = last - np.arange(m)
                sign = -1.0 if order == 1 else 1.0
                coef[i, :m] = sign * c / scale
        else:
            for k, off in enumerate(range(-2, 3)):
                idx[i, k] = _mirror(i + off, last)
                coef[i, k] = center[k] / scale
    # compress duplicate indices produced by mirroring (keeps the gather
    # well-defined; correctness would hold either way, this is for tidiness)
    for i in range(N):
        seen: dict[int, int] = {}
        for k in range(_STENCIL_WIDTH):
            j = int(idx[i, k])
            if coef[i, k] == 0.0:
                continue
            if j in seen:
                coef[i, seen[j]] += coef[i, k]
                coef[i, k] = 0.0
            else:
                seen[j] = k
    return idx, coef


class DerivativeOperator:
    """Callable wrapper around a stencil table: ``op(f) -> df``."""

    def __init__(self, grid: RadialGrid, order: int, accuracy: int = 4):
        if accuracy != 4:
            raise ValueError("only the 4th-order family is implemented")
        self.grid = grid
        self.order = order
        self.accuracy = accuracy
        self.idx, self.coef = stencil_tables(grid, order)

    def __call__(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.grid.num_points,):
            raise ValueError(
                f"field shape {f.shape} does not match grid ({self.grid.num_points},)"
            )
        return np.einsum("ij,ij->i", self.coef, f[self.idx])


def derivative(grid: RadialGrid, order: int, accuracy: int = 4) -> DerivativeOperator:
    """Cached factory for DerivativeOperator."""
    key = (order, accuracy)
    op = grid._ops.get(key)
    if op is None:
        op = DerivativeOperator(grid, order, accuracy)
        grid._ops[key] = op
    return op


def d1(grid: RadialGrid, samples) -> np.ndarray:
    """First derivative of sampled values on the grid."""
    return derivative(grid, 1)(samples)


def d2(grid: RadialGrid, samples) -> np.ndarray:
    """Second derivative of sampled values on the grid."""
    return derivative(grid, 2)(samples)


# ---------------------------------------------------------------------------
# quadrature

def integrate(grid: RadialGrid, f) -> float:
    """Trapezoid rule against the grid's volume density.

    Accumulation is exactly rounded (math.fsum), so the result does not
    depend on summation order and reruns are byte-identical.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.num_points,):
        raise ValueError(
            f"field shape {f.shape} does not match grid ({grid.num_points},)"
        )
    return math.fsum((grid.weights * f).tolist())


_leggauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_panels(f, edges, nodes: int = 24) -> float:
    """Composite Gauss-Legendre quadrature of a vectorized callable.

    ``edges`` is an increasing sequence of panel boundaries; each panel gets
    a ``nodes``-point rule.  Panel results are combined with fsum.  Intended
    for the smooth model-metric integrands where adaptive quadrature would be
    overkill but single-panel rules underresolve the decades of scale.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two panel edges")
    if np.any(np.diff(edges) <= 0.0):
        raise ValueError("panel edges must be strictly increasing")
    if nodes not in _leggauss_cache:
        _leggauss_cache[nodes] = np.polynomial.legendre.leggauss(nodes)
    z, w = _leggauss_cache[nodes]
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        parts.append(half * math.fsum((w * f(mid + half * z)).tolist()))
    return math.fsum(parts)


def log_edges(a: float, b: float, panels: int) -> np.ndarray:
    """Geometrically spaced panel edges from a to b (both positive)."""
    if not (0.0 < a < b):
        raise ValueError("need 0 < a < b")
    return np.geomspace(a, b, panels + 1)
