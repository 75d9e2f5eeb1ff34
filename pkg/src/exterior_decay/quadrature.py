"""Log-spaced grids, finite/semi-infinite integration and finite differences.

Grid integrals are taken in the logarithmic variable ``s = ln t`` where the
geometric grid is uniform and power-law integrands are smooth exponentials:
``int f dt = int f(e^s) e^s ds``.  Each cell uses the cubic through the four
nearest nodes, so the rule is fourth order and reproduces cubics in ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InvalidInputError, QuadratureError, TailUnavailableError
from .maps import ScalarMap

MIN_NODES = 64
DEFAULT_N = 4096
DEFAULT_TMAX_MULT = 1e6


@dataclass(frozen=True, eq=False)
class Grid:
    t0: float
    t_max: float
    nodes: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.nodes.size

    @property
    def log_step(self) -> float:
        return math.log(self.t_max / self.t0) / (self.N - 1)

    @property
    def ratio(self) -> float:
        return math.exp(self.log_step)

    def decade_start(self) -> int:
        """Index of the first node of the last decade."""
        return int(np.searchsorted(self.nodes, self.t_max / 10.0 * (1 - 1e-12)))


def build_grid(t0: float, t_max: float, N: int, *, strict: bool = True) -> Grid:
    """Geometric nodes on ``[t0, t_max]`` with exact endpoints.

    ``strict`` enforces the solver-grade invariants ``N >= 64`` and
    ``t_max >= 100 t0``; it can be lifted for small illustrative grids.
    """
    if not (math.isfinite(t0) and math.isfinite(t_max)) or not t_max > t0 > 0:
        raise InvalidInputError(f"degenerate grid range [{t0}, {t_max}]")
    if N < 2:
        raise InvalidInputError("grid needs at least 2 nodes")
    if strict and N < MIN_NODES:
        raise InvalidInputError(f"grid needs N >= {MIN_NODES}, got {N}")
    if strict and t_max < 100.0 * t0 * (1 - 1e-12):
        raise InvalidInputError("grid needs t_max >= 100 t0")
    k = np.arange(N)
    nodes = t0 * np.exp(k * (math.log(t_max / t0) / (N - 1)))
    nodes[0], nodes[-1] = t0, t_max
    return Grid(float(t0), float(t_max), nodes)


@dataclass(eq=False)
class GridSeries:
    grid: Grid
    values: np.ndarray
    meaning: str = ""
    error: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise InvalidInputError("series length does not match its grid")
        bad = np.flatnonzero(~np.isfinite(self.values))
        if bad.size:
            raise QuadratureError(
                f"non-finite {self.meaning or 'series'} value at node {bad[0]} "
                f"(t={self.grid.nodes[bad[0]]:.6g})"
            )


@dataclass(frozen=True)
class Integral:
    """Integral value with a numerical error estimate.

    ``tail_bound`` is a certified bound on a truncated remainder that is
    *not* included in ``value`` (zero when the tail was summed exactly).
    """

    value: float
    error: float
    tail_bound: float = 0.0

    @property
    def total_error(self) -> float:
        return self.error + self.tail_bound


def kahan_cumsum(x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x))
    total = 0.0
    comp = 0.0
    for i, v in enumerate(x.tolist()):
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i] = total
    return out


def _cell_integrals(w: np.ndarray, h: float) -> np.ndarray:
    """Integrals of the 4-point cubic interpolant over each cell."""
    n = w.size
    if n < 4:
        if n == 2:
            return h * 0.5 * (w[:-1] + w[1:])
        # Simpson split into its two halves
        return h / 12.0 * np.array([5 * w[0] + 8 * w[1] - w[2], -w[0] + 8 * w[1] + 5 * w[2]])
    cells = np.empty(n - 1)
    cells[1:-1] = (-w[:-3] + 13.0 * w[1:-2] + 13.0 * w[2:-1] - w[3:]) / 24.0
    cells[0] = (9.0 * w[0] + 19.0 * w[1] - 5.0 * w[2] + w[3]) / 24.0
    cells[-1] = (w[-4] - 5.0 * w[-3] + 19.0 * w[-2] + 9.0 * w[-1]) / 24.0
    return h * cells


def _weighted(values, grid: Grid) -> np.ndarray:
    return np.asarray(values, float) * grid.nodes


def _richardson_error(w: np.ndarray, h: float, fine_cum: np.ndarray) -> float:
    if w.size < 9:
        return 0.0
    coarse = np.concatenate([[0.0], kahan_cumsum(_cell_integrals(w[::2], 2 * h))])
    fine = fine_cum[::2][: coarse.size]
    # factor 2 on top of the asymptotic 1/15 keeps the estimate conservative
    return 2.0 * float(np.max(np.abs(fine - coarse)) / 15.0)


def cumulative(values, grid: Grid) -> tuple[np.ndarray, float]:
    """``int_{t0}^{t_i} f`` at every node, with a global error estimate."""
    w = _weighted(values, grid)
    h = grid.log_step
    cum = np.concatenate([[0.0], kahan_cumsum(_cell_integrals(w, h))])
    return cum, _richardson_error(w, h, cum) + 4 * np.finfo(float).eps * float(np.max(np.abs(cum)))


def reverse_cumulative(values, grid: Grid) -> tuple[np.ndarray, float]:
    """``int_{t_i}^{t_max} f`` at every node (summed from the right)."""
    w = _weighted(values, grid)
    h = grid.log_step
    cells = _cell_integrals(w, h)
    rev = np.concatenate([kahan_cumsum(cells[::-1])[::-1], [0.0]])
    fwd = np.concatenate([[0.0], kahan_cumsum(cells)])
    return rev, _richardson_error(w, h, fwd) + 4 * np.finfo(float).eps * float(np.max(np.abs(rev)))


def extrapolated_tail(values, grid: Grid) -> tuple[float, float]:
    """``int_{t_max}^inf f`` from the local power law at the last nodes.

    Returns ``(value, error)`` where the error is the spread between the
    exponents fitted on the last and the second-to-last node pairs.
    """
    f = np.asarray(values, float)
    last = f[-3:]
    if np.all(last == 0.0):
        return 0.0, 0.0
    if np.any(last == 0.0) or not (np.all(last > 0) or np.all(last < 0)):
        raise TailUnavailableError("integrand changes sign or vanishes at the truncation point")
    h = grid.log_step
    rho1 = -math.log(last[2] / last[1]) / h
    rho2 = -math.log(last[1] / last[0]) / h
    if min(rho1, rho2) <= 1.0:
        raise TailUnavailableError(
            f"integrand decays like s^-{min(rho1, rho2):.3g} at t_max; need exponent > 1"
        )
    T = grid.t_max
    tail = last[2] * T / (rho1 - 1.0)
    alt = last[2] * T / (rho2 - 1.0)
    return float(tail), float(abs(tail - alt))


def tail_integrals(values, grid: Grid) -> tuple[np.ndarray, float]:
    """``int_{t_i}^inf f`` at every node using the extrapolated remainder."""
    rev, err = reverse_cumulative(values, grid)
    tail, tail_err = extrapolated_tail(values, grid)
    return rev + tail, err + tail_err


def map_tail_on_grid(f: ScalarMap, grid: Grid) -> tuple[np.ndarray, float, float]:
    """``int_{t_i}^inf f`` for a ScalarMap on every node.

    Returns ``(values, error, tail_bound)``: closed form when the family has
    one, otherwise grid quadrature up to ``t_max`` plus the decay bound
    reported separately (never silently truncated).
    """
    if f.is_zero:
        return np.zeros(grid.N), 0.0, 0.0
    if f.has_tail:
        vals = np.asarray(f.tail(grid.nodes), float)
        return vals, 8 * np.finfo(float).eps * float(np.max(np.abs(vals))), 0.0
    decay = f.decay
    if decay is None:
        raise TailUnavailableError("function has neither a closed-form tail nor decay metadata")
    bound = decay.bound(grid.t_max)
    if not math.isfinite(bound):
        raise TailUnavailableError(f"decay exponent rho={decay.rho} must exceed 1")
    rev, err = reverse_cumulative(f(grid.nodes), grid)
    return rev, err, bound


def adaptive_simpson(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 48
) -> tuple[float, float]:
    """Adaptive Simpson with Richardson correction; returns ``(value, error)``.

    ``tol`` is relative to the magnitude of the running estimate.
    """
    if a == b:
        return 0.0, 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    for name, v, x in (("a", fa, a), ("m", fm, 0.5 * (a + b)), ("b", fb, b)):
        if not math.isfinite(v):
            raise QuadratureError(f"non-finite integrand value at x={x}")
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    scale = abs(whole)
    total, err = [], []
    stack = [(a, b, fa, fm, fb, whole, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        if not (math.isfinite(flm) and math.isfinite(frm)):
            raise QuadratureError(f"non-finite integrand value near x={mid}")
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        diff = left + right - s
        scale = max(scale, abs(left + right))
        local_tol = tol * max(scale, 1e-300) * (hi - lo) / (b - a)
        if depth >= max_depth or abs(diff) <= 15.0 * local_tol:
            total.append(left + right + diff / 15.0)
            err.append(abs(diff) / 15.0)
        else:
            stack.append((lo, mid, flo, flm, fmid, left, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, depth + 1))
    return math.fsum(total), math.fsum(err)


def _scalar(f) -> Callable[[float], float]:
    return lambda x: float(f(x))


def integrate_segment(f, t1: float, t2: float, tol: float = 1e-10) -> Integral:
    """``int_{t1}^{t2} f`` for a ScalarMap/callable or a GridSeries."""
    if t2 < t1:
        raise InvalidInputError("integrate_segment needs t1 <= t2")
    if isinstance(f, GridSeries):
        grid = f.grid
        if t1 < grid.t0 * (1 - 1e-14) or t2 > grid.t_max * (1 + 1e-14):
            raise InvalidInputError("segment outside the grid")
        cum, err = cumulative(f.values, grid)
        spline = CubicHermiteSpline(grid.nodes, cum, f.values)
        return Integral(float(spline(t2) - spline(t1)), 2 * err)
    if t1 == t2:
        return Integral(0.0, 0.0)
    if t1 > 0 and t2 / t1 > 4.0:
        # log substitution keeps panels proportional to scale
        g = _scalar(f)
        val, err = adaptive_simpson(lambda y: g(math.exp(y)) * math.exp(y), math.log(t1), math.log(t2), tol)
    else:
        val, err = adaptive_simpson(_scalar(f), t1, t2, tol)
    return Integral(val, err)


def integrate_tail(f, t: float, *, t_max: float | None = None, tol: float = 1e-10) -> Integral:
    """``int_t^inf f`` for a ScalarMap (closed form or certified bound) or GridSeries."""
    if isinstance(f, GridSeries):
        seg = integrate_segment(f, t, f.grid.t_max, tol)
        tail, tail_err = extrapolated_tail(f.values, f.grid)
        return Integral(seg.value + tail, seg.error + tail_err)
    if not isinstance(f, ScalarMap):
        raise TailUnavailableError("plain callables carry no tail metadata")
    if f.is_zero:
        return Integral(0.0, 0.0, 0.0)
    if f.has_tail:
        val = float(f.tail(t))
        return Integral(val, 8 * np.finfo(float).eps * abs(val), 0.0)
    decay = f.decay
    if decay is None:
        raise TailUnavailableError("function has neither a closed-form tail nor decay metadata")
    if decay.rho <= 1.0:
        raise TailUnavailableError(f"decay exponent rho={decay.rho} must exceed 1")
    T = t_max if t_max is not None else max(t, 1.0) * DEFAULT_TMAX_MULT
    T = max(T, decay.start, t)
    seg = integrate_segment(f, t, T, tol)
    return Integral(seg.value, seg.error, decay.bound(T))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def window_integrals(f, a, b, panel_ratio: float = 1.25) -> tuple[np.ndarray, float]:
    """Vectorised ``int_{a_k}^{b_k} f`` over many windows.

    Each window is cut geometrically into panels of ratio at most
    ``panel_ratio`` and integrated with 10- and 14-point Gauss-Legendre;
    the spread of the two is the error estimate.
    """
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    if np.any(b < a) or np.any(a <= 0):
        raise InvalidInputError("windows need 0 < a <= b")
    if a.size == 0:
        return np.zeros(0), 0.0
    ratio = float(np.max(b / a))
    K = max(1, math.ceil(math.log(ratio) / math.log(panel_ratio))) if ratio > 1 else 1
    frac = np.linspace(0.0, 1.0, K + 1)
    # log1p keeps short windows free of cancellation; endpoints are exact
    width = np.log1p((b - a) / a)[:, None]
    edges = a[:, None] * np.exp(width * frac[None, :])
    edges[:, 0], edges[:, -1] = a, b
    lo, hi = edges[:, :-1], edges[:, 1:]
    results = []
    for order in (10, 14):
        x, w = _gauss_legendre(order)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        pts = mid[..., None] + half[..., None] * x
        vals = np.asarray(f(pts.ravel()), float).reshape(pts.shape)
        results.append(np.sum(half * np.sum(vals * w, axis=-1), axis=-1))
    err = float(np.max(np.abs(results[1] - results[0]))) if a.size else 0.0
    return results[1], err


def cumulative_exp_integral(b: GridSeries, u0: float) -> GridSeries:
    """``u(t) = u0 exp(int_{t0}^t b)`` on the grid of ``b``."""
    x, err = cumulative(b.values, b.grid)
    if np.max(x) > 700.0:
        raise QuadratureError(f"exponent {np.max(x):.3g} overflows; b is far above its envelope")
    u = u0 * np.exp(x)
    return GridSeries(b.grid, u, "u", error=float(err * np.max(u)))


def second_derivative(u: GridSeries) -> GridSeries:
    """Three-point second derivative on the (nonuniform) grid.

    Interior nodes are second order on smooth grids; the two endpoint values
    reuse the neighbouring parabola and are only first order.
    """
    t = u.grid.nodes
    y = u.values
    if y.size < 3:
        raise InvalidInputError("second derivative needs at least 3 nodes")
    h = np.diff(t)
    slope = np.diff(y) / h
    d2 = np.empty_like(y)
    d2[1:-1] = 2.0 * (slope[1:] - slope[:-1]) / (h[1:] + h[:-1])
    d2[0], d2[-1] = d2[1], d2[-2]
    return GridSeries(u.grid, d2, "u''")


def fd_weights(x0: float, xs: np.ndarray, max_order: int) -> np.ndarray:
    """Finite-difference weights (Fornberg's recursion).

    Returns ``c[k, j]``: the weight of ``f(xs[j])`` in the k-th derivative
    at ``x0``, for ``k = 0..max_order``.
    """
    n = len(xs)
    c = np.zeros((max_order + 1, n))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, max_order)
        c2, c5 = 1.0, c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def derivatives(y: np.ndarray, x: np.ndarray, width: int = 5, *, rounding: bool = False):
    """First and second derivatives with ``width``-point stencils.

    Stencils are centred in the interior and shifted inward near the ends,
    where the order drops by one.  With ``rounding`` the result also carries
    ``eps * sum |w_j y_j|`` for each derivative, the scale of the
    floating-point noise in the weighted sums.
    """
    n = len(x)
    if n < width:
        raise InvalidInputError(f"need at least {width} nodes")
    half = width // 2
    d1 = np.empty(n)
    d2 = np.empty(n)
    r1 = np.empty(n)
    r2 = np.empty(n)
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        xs = x[lo:lo + width]
        # shift to the stencil centre for conditioning
        c = fd_weights(x[i] - x[i], xs - x[i], 2)
        ys = y[lo:lo + width]
        d1[i] = c[1] @ ys
        d2[i] = c[2] @ ys
        r1[i] = np.abs(c[1]) @ np.abs(ys)
        r2[i] = np.abs(c[2]) @ np.abs(ys)
    if rounding:
        eps = np.finfo(float).eps
        return d1, d2, eps * r1, eps * r2
    return d1, d2
