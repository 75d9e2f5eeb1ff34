"""Fixed point of the logarithmic-derivative operator and the ODE solution.

For ``b`` in the band ``alpha <= b <= beta`` the operator is

    T(b)(t) = int_t^inf b^2 + int_t^inf F(s, u_b(s)) / u_b(s) ds,
    u_b(t)  = u0 exp(int_{t0}^t b),

and a fixed point ``b0`` gives the solution ``u = u_{b0}`` of
``u'' + F(t, u) = 0`` with ``u'/u = b0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TailUnavailableError
from .family import Member, admissible_family, evaluate_member
from .problem_model import (
    ProblemSpec,
    envelope_B,
    envelopes,
    forcing_F,
    gamma_values,
)
from .quadrature import (
    Grid,
    GridSeries,
    cumulative,
    cumulative_exp_integral,
    extrapolated_tail,
    map_tail_on_grid,
    reverse_cumulative,
    second_derivative,
)
from . import maps

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
OSCILLATION_RUN = 5


def _tail_or_envelope(values: np.ndarray, grid: Grid, envelope: float) -> tuple[float, float]:
    """Extrapolated remainder, falling back to the midpoint of ``[0, envelope]``."""
    try:
        return extrapolated_tail(values, grid)
    except TailUnavailableError:
        if not math.isfinite(envelope):
            raise
        return 0.5 * envelope, 0.5 * envelope


@dataclass
class _Envelopes:
    alpha: np.ndarray
    beta: np.ndarray
    beta_sq_tail: float
    F_tail: float


def _envelopes(problem: ProblemSpec, grid: Grid) -> _Envelopes:
    alpha, beta = envelopes(problem, grid.nodes, strict=False)
    try:
        tb, _, bound = map_tail_on_grid(maps.product(problem.beta, problem.beta), grid)
        beta_sq_tail = float(tb[-1] + bound)
    except TailUnavailableError:
        beta_sq_tail = math.inf
    try:
        F_tail = float(envelope_B(problem, grid).upper[-1])
    except TailUnavailableError:
        F_tail = math.inf
    return _Envelopes(alpha, beta, beta_sq_tail, F_tail)


def _apply(problem: ProblemSpec, grid: Grid, member: Member, env: _Envelopes) -> GridSeries:
    sq = member.b * member.b
    rev_sq, e1 = reverse_cumulative(sq, grid)
    tail_sq, e2 = _tail_or_envelope(sq, grid, env.beta_sq_tail)
    rev_G, e3 = reverse_cumulative(member.G, grid)
    tail_G, e4 = _tail_or_envelope(member.G, grid, env.F_tail)
    # propagate the inner-integral error through the F-term: |dG/dx| <= sup|G| * |x err|
    e5 = member.error * float(np.max(np.abs(member.G))) * (grid.t_max - grid.t0)
    values = rev_sq + tail_sq + rev_G + tail_G
    return GridSeries(grid, values, "T(b)", error=e1 + e2 + e3 + e4 + min(e5, 1e-6))


def apply_T(problem: ProblemSpec, b: GridSeries) -> GridSeries:
    """One application of the operator on the grid of ``b``."""
    grid = b.grid
    env = _envelopes(problem, grid)
    slack = 1e-9 * float(np.max(np.abs(env.beta)) + 1e-300)
    if np.any(b.values < env.alpha - slack) or np.any(b.values > env.beta + slack):
        log.warning("apply_T: argument leaves the band [alpha, beta]")
    member = evaluate_member(problem, grid, b.values, b.meaning or "b")
    return _apply(problem, grid, member, env)


@dataclass
class IterateState:
    k: int
    delta: float
    inB: float
    b: np.ndarray | None = None


@dataclass
class PicardResult:
    b0: GridSeries
    iterations: int
    converged: bool
    residual: float
    quadrature_error: float
    history: list[IterateState] = field(default_factory=list)
    oscillating: bool = False
    message: str = ""

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        return "oscillating" if self.oscillating else "diverged"


def _scaled_sup(diff: np.ndarray, t: np.ndarray) -> float:
    return float(np.max(np.abs(diff) * t))


def picard_solve(
    problem: ProblemSpec,
    grid: Grid,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
    project: bool = True,
    initial: np.ndarray | None = None,
) -> PicardResult:
    """Iterate ``b <- (1 - w) b + w T(b)`` from the lower envelope.

    Convergence is measured by ``sup_t |b_k - b_{k-1}| * t`` (scale-free for
    ``b ~ 1/t``).  Non-convergence is reported, not raised: the best iterate
    is returned and flagged.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    env = _envelopes(problem, grid)
    t = grid.nodes
    b = env.alpha.copy() if initial is None else np.asarray(initial, float).copy()
    history: list[IterateState] = []
    best_b, best_delta = b, math.inf
    rises = 0
    oscillating = False
    converged = False
    err = 0.0
    for k in range(1, max_iter + 1):
        Tb = _apply(problem, grid, evaluate_member(problem, grid, b, "b"), env)
        err = Tb.error
        new = (1.0 - damping) * b + damping * Tb.values
        inB = float(min(np.min(new - env.alpha), np.min(env.beta - new)))
        if project:
            new = np.clip(new, env.alpha, env.beta)
        delta = _scaled_sup(new - b, t)
        history.append(IterateState(k, delta, inB, new))
        if len(history) > 1 and delta > history[-2].delta:
            rises += 1
        else:
            rises = 0
        if rises >= OSCILLATION_RUN:
            oscillating = True
        b = new
        if delta < best_delta:
            best_b, best_delta = b, delta
        if delta <= tol:
            converged = True
            break
    if not converged:
        b = best_b
    final = _apply(problem, grid, evaluate_member(problem, grid, b, "b"), env)
    residual = _scaled_sup(final.values - b, t)
    if converged:
        message = f"converged after {len(history)} iterations"
    elif oscillating:
        message = "iteration oscillates; try a smaller damping; existence not contradicted, iteration inconclusive"
    else:
        message = "max_iter reached; existence not contradicted, iteration inconclusive"
    if not converged:
        log.warning("picard_solve: %s", message)
    return PicardResult(
        GridSeries(grid, b, "b0", error=err),
        len(history),
        converged,
        residual,
        err,
        history,
        oscillating,
        message,
    )


@dataclass
class SolutionBundle:
    picard: PicardResult
    u: GridSeries
    uprime: GridSeries
    upp: GridSeries
    F: np.ndarray
    residual: GridSeries
    residual_rel_max: float
    bracket_lower: np.ndarray
    bracket_upper: np.ndarray
    window_margin: float
    window_location: tuple | None
    decay_bound_ok: bool
    decay_ratio: float
    lam: float
    t_lam: float

    @property
    def b0(self) -> GridSeries:
        return self.picard.b0


def interior_mask(N: int) -> np.ndarray:
    """Nodes whose derivative stencil is fully second order."""
    mask = np.ones(N, bool)
    mask[0] = mask[-1] = False
    return mask


def window_pairs(t: np.ndarray, p: float, max_pairs: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``i < j`` on the grid with ``t_j - t_i <= p``."""
    I, J = [], []
    n = t.size
    for off in range(1, n):
        i = np.arange(n - off)
        ok = t[i + off] - t[i] <= p * (1 + 1e-14)
        if not np.any(ok):
            break
        I.append(i[ok])
        J.append(i[ok] + off)
        if sum(a.size for a in I) > max_pairs:
            break
    if not I:
        return np.zeros(0, int), np.zeros(0, int)
    return np.concatenate(I), np.concatenate(J)


def decay_law(problem: ProblemSpec, grid: Grid) -> tuple[float, float]:
    """``(lambda, t_lambda)``: sup of ``q_+`` on the last decade, and the
    earliest node from which ``q_+`` stays below it."""
    qp = np.asarray(problem.q_plus(grid.nodes), float)
    start = grid.decade_start()
    lam = float(np.max(qp[start:]))
    tail_sup = np.maximum.accumulate(qp[::-1])[::-1]
    idx = int(np.argmax(tail_sup <= lam * (1 + 1e-15)))
    return lam, float(grid.nodes[idx])


def assemble_solution(problem: ProblemSpec, picard: PicardResult) -> SolutionBundle:
    """Build ``u``, ``u'``, the ODE residual and the side conditions along ``u``."""
    b0 = picard.b0
    grid = b0.grid
    t = grid.nodes
    u = cumulative_exp_integral(b0, problem.u0)
    uprime = GridSeries(grid, b0.values * u.values, "u'")
    upp = second_derivative(u)
    F = np.asarray(forcing_F(problem, t, u.values), float)
    residual = GridSeries(grid, upp.values + F, "u''+F")
    mask = interior_mask(grid.N)
    Fmax = float(np.max(F))
    res_max = float(np.max(np.abs(residual.values[mask])))
    rel = res_max / Fmax if Fmax > 0 else res_max

    alpha, beta = envelopes(problem, t, strict=False)
    logd = uprime.values / u.values
    lower = logd - alpha
    upper = beta - logd

    G = F / u.values
    I, J = window_pairs(t, problem.p)
    if I.size:
        cum, _ = cumulative(G, grid)
        lhs = cum[J] - cum[I]
        gam, _ = gamma_values(problem, t[I], t[J])
        margins = gam - lhs
        w = int(np.argmin(margins))
        window_margin = float(margins[w])
        window_loc = (float(t[I[w]]), float(t[J[w]]))
    else:
        window_margin, window_loc = math.inf, None

    lam, t_lam = decay_law(problem, grid)
    # u(t) <= u0 exp(int_{t0}^{t_lam} beta) (t / t_lam)^lam for t >= t_lam
    k_lam = int(np.searchsorted(t, t_lam))
    xb, _ = cumulative(beta, grid)
    bound_T = problem.u0 * math.exp(xb[k_lam]) * (grid.t_max / t_lam) ** lam / grid.t_max
    ratio = float(u.values[-1] / grid.t_max / bound_T)
    return SolutionBundle(
        picard,
        u,
        uprime,
        upp,
        F,
        residual,
        rel,
        lower,
        upper,
        window_margin,
        window_loc,
        ratio <= 1.0 + 1e-9,
        ratio,
        lam,
        t_lam,
    )


@dataclass
class CompactnessItem:
    label: str
    monotone_margin: float
    equicontinuity_margin: float
    equicontinuity_window: tuple | None
    equiconvergence_margin: float
    equiconvergence_location: float
    error: float

    @property
    def verdict(self) -> str:
        worst = min(self.monotone_margin, self.equicontinuity_margin, self.equiconvergence_margin)
        return "pass" if worst >= -self.error else "fail"


@dataclass
class CompactnessReport:
    items: list[CompactnessItem]

    @property
    def verdict(self) -> str:
        return "pass" if all(i.verdict == "pass" for i in self.items) else "fail"

    def worst(self, attr: str) -> CompactnessItem:
        return min(self.items, key=lambda i: getattr(i, attr))

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "samples": len(self.items)}
        for attr in ("monotone_margin", "equicontinuity_margin", "equiconvergence_margin"):
            w = self.worst(attr)
            out[attr.replace("_margin", "")] = {
                "margin": getattr(w, attr),
                "error": w.error,
                "member": w.label,
            }
        return out


def compactness_diagnostics(problem: ProblemSpec, grid: Grid, k: int = 8, seed: int = 0) -> CompactnessReport:
    """Numerical counterparts of bounded, equicontinuous and equiconvergent.

    For each sampled ``b`` in the band: ``T(b)`` is nonincreasing, each
    window obeys ``0 <= T(b)(t1) - T(b)(t2) <= |beta|^2 (t2 - t1) + gamma``
    with ``|beta|`` the sup norm, and ``0 <= T(b) <= beta`` on the last
    decade.  Margins are signed; negative means violated.
    """
    from .hypothesis_checker import sample_windows

    env = _envelopes(problem, grid)
    t = grid.nodes
    beta_sup = float(np.max(env.beta))
    I, J = sample_windows(t, problem.p)
    gam, gerr = gamma_values(problem, t[I], t[J]) if I.size else (np.zeros(0), 0.0)
    start = grid.decade_start()
    items = []
    for member in admissible_family(problem, grid, k, seed):
        Tb = _apply(problem, grid, member, env)
        v = Tb.values
        err = float(Tb.error + gerr)
        mono = float(np.min(v[:-1] - v[1:])) if v.size > 1 else math.inf
        if I.size:
            drop = v[I] - v[J]
            m = beta_sup**2 * (t[J] - t[I]) + gam - drop
            w = int(np.argmin(m))
            eqc, eqc_loc = float(min(m[w], np.min(drop))), (float(t[I[w]]), float(t[J[w]]))
        else:
            eqc, eqc_loc = math.inf, None
        tail = np.minimum(v[start:], env.beta[start:] - v[start:])
        w = int(np.argmin(tail))
        items.append(CompactnessItem(member.label, mono, eqc, eqc_loc, float(tail[w]), float(t[start + w]), err))
    return CompactnessReport(items)
