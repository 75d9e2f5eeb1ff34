"""Numerical verdicts on every existence hypothesis, with signed margins.

Quantifiers over the whole band ``alpha <= b <= beta`` are replaced by a
finite family (both envelopes, the midpoint and ``k`` seeded random
members).  A check is labelled ``certified`` instead of ``sampled`` when
the integrand does not depend on ``b`` (linear m) or when a declared
monotonicity of ``m(r, U)/U`` in ``U`` lets the envelopes bound the family.

Verdicts use one-sided error accounting.  With ``err`` the numerical error
of the margin and ``tail`` a bound on any truncated remainder:

* pass          ``margin - tail >= -err``
* fail          ``margin + tail <  -err``
* inconclusive  otherwise
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import maps
from .errors import DomainViolationError, ExteriorDecayError, TailUnavailableError
from .family import DEFAULT_SAMPLES, Member, band_samples, evaluate_member
from .problem_model import (
    EnvelopeB,
    ProblemSpec,
    change_of_variables,
    compHa_gap,
    emden_fowler_A,
    envelope_B,
    gamma_values,
    kernel_M,
    linear_A,
    n_of_r,
)
from .quadrature import Grid, cumulative, map_tail_on_grid, tail_integrals
from .solver import decay_law

PASS, FAIL, INCONCLUSIVE, WARN = "pass", "fail", "inconclusive", "warn"
EPSILONS = tuple(10.0 ** -k for k in range(1, 7))
ROUND_RTOL = 1e-12
MAX_WINDOW_STARTS = 512


def judge(margin: float, err: float = 0.0, tail: float = 0.0) -> str:
    if margin - tail >= -err:
        return PASS
    if margin + tail < -err:
        return FAIL
    return INCONCLUSIVE


@dataclass
class CheckItem:
    id: str
    verdict: str
    margin: float
    location: Any = None
    error: float = 0.0
    tail_bound: float = 0.0
    coverage: str = "grid"
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))


@dataclass
class HypothesisReport:
    items: list[CheckItem]
    sampling: dict

    @property
    def overall(self) -> str:
        verdicts = {item.verdict for item in self.items}
        if FAIL in verdicts:
            return FAIL
        if verdicts & {INCONCLUSIVE, WARN}:
            return INCONCLUSIVE
        return PASS

    def item(self, cid: str) -> CheckItem:
        for it in self.items:
            if it.id == cid:
                return it
        raise KeyError(cid)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "items": [it.to_dict() for it in self.items],
            "sampling": _clean(self.sampling),
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass(eq=False)
class CheckContext:
    problem: ProblemSpec
    grid: Grid
    members: list[Member]
    B: EnvelopeB | None
    k: int
    seed: int
    coverage: str
    monotone_verified: bool | None
    skipped: list = field(default_factory=list)

    @property
    def radii(self) -> np.ndarray:
        return change_of_variables(self.grid.nodes, self.problem.n)[0]

    @property
    def radial_grid(self) -> Grid:
        r = self.radii
        return Grid(float(r[0]), float(r[-1]), r)


def _floor(*scales) -> float:
    return ROUND_RTOL * max([float(np.max(np.abs(s))) if np.size(s) else 0.0 for s in scales] + [1e-300])


def _verify_monotone(problem: ProblemSpec, members: list[Member]) -> bool:
    """Declared monotonicity of m/U: G_b must sit between the envelope integrands."""
    by = {m.label: m for m in members}
    lo, hi = by["alpha"].G, by["beta"].G
    if problem.monotone == "nonincreasing":
        lo, hi = hi, lo
    tol = 1e-10 * max(float(np.max(np.abs(lo))), float(np.max(np.abs(hi))), 1e-300)
    return all(np.all(m.G >= lo - tol) and np.all(m.G <= hi + tol) for m in members)


def build_context(problem: ProblemSpec, grid: Grid, k: int = DEFAULT_SAMPLES, seed: int = 0) -> CheckContext:
    members, skipped = [], []
    for label, b in band_samples(problem, grid, k, seed):
        # members leaving u/t <= varsigma only occur when q_+ > 1, which range-q reports
        try:
            members.append(evaluate_member(problem, grid, b, label))
        except DomainViolationError:
            skipped.append(label)
    try:
        B = envelope_B(problem, grid)
    except TailUnavailableError:
        B = None
    verified = None
    if problem.is_linear:
        coverage = "certified"
    elif problem.monotone is not None and not skipped:
        verified = _verify_monotone(problem, members)
        coverage = "certified" if verified else "sampled"
    else:
        coverage = "sampled"
    return CheckContext(problem, grid, members, B, k, seed, coverage, verified, skipped)


def _inconclusive(cid: str, exc: Exception, coverage: str = "grid") -> CheckItem:
    return CheckItem(cid, INCONCLUSIVE, math.nan, None, coverage=coverage, details={"reason": str(exc)})


def check_regularity(ctx: CheckContext) -> list[CheckItem]:
    """range-q and L2-decay (plus the decay-law exponent lambda)."""
    p, t = ctx.problem, ctx.grid.nodes
    qm = np.asarray(p.q_minus(t), float)
    qp = np.asarray(p.q_plus(t), float)
    parts = np.vstack([qm, qp - qm, 1.0 - qp])
    flat = int(np.argmin(parts))
    which, idx = divmod(flat, t.size)
    margin = float(parts[which, idx])
    range_item = CheckItem(
        "range-q",
        judge(margin),
        margin,
        {"t": float(t[idx]), "condition": ("q_minus >= 0", "q_minus <= q_plus", "q_plus <= 1")[which]},
        details={"sampling_nodes": ctx.grid.N, "t_max": ctx.grid.t_max},
    )

    # int alpha^2, int beta^2 < inf (raises when no tail is available)
    ta, _, ba = map_tail_on_grid(maps.product(p.alpha, p.alpha), ctx.grid)
    tb, _, bb = map_tail_on_grid(maps.product(p.beta, p.beta), ctx.grid)
    beta = qp / t
    start = ctx.grid.decade_start()
    decaying = bool(beta[-1] <= beta[start] * (1 + 1e-12)) and bool(np.max(beta[start:]) < np.max(beta) or np.max(beta) == 0.0)
    lam, t_lam = decay_law(p, ctx.grid)
    margin = 1.0 - lam
    if not decaying:
        verdict = FAIL
    elif lam >= 1.0:
        verdict = WARN
    else:
        verdict = judge(margin)
    l2_item = CheckItem(
        "L2-decay",
        verdict,
        margin,
        {"t_lambda": t_lam},
        tail_bound=max(ba, bb),
        details={
            "alpha_L2_sq": float(ta[0]),
            "beta_L2_sq": float(tb[0]),
            "beta_last_decade_max": float(np.max(beta[start:])),
            "lambda": lam,
            "t_lambda": t_lam,
            "decay_law_certified": lam < 1.0,
        },
    )
    return [range_item, l2_item]


def check_gamma_modulus(ctx: CheckContext, epsilons=EPSILONS) -> CheckItem:
    """For each eps find the largest zeta <= p with sup_t1 gamma(t1, t1 + zeta) < eps."""
    p = ctx.problem
    t = ctx.grid.nodes
    t1 = t[:: max(1, t.size // 256)]
    resolution = p.p * 1e-12

    def sup_gamma(z: float) -> float:
        vals, _ = gamma_values(p, t1, t1 + z)
        return float(np.max(vals))

    # structural invariants of gamma on sampled windows
    zs = np.array([0.0, 0.25, 0.5, 1.0]) * p.p
    table = np.array([gamma_values(p, t1, t1 + z)[0] for z in zs])
    nonneg = float(np.min(table))
    diag = float(np.max(np.abs(table[0])))
    mono = float(np.min(np.diff(table, axis=0))) if len(zs) > 1 else 0.0
    zetas = {}
    for eps in epsilons:
        if sup_gamma(p.p) < eps:
            zetas[eps] = p.p
            continue
        lo, hi = 0.0, p.p
        if sup_gamma(resolution) >= eps:
            zetas[eps] = 0.0
            continue
        lo = resolution
        for _ in range(60):
            mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
            if sup_gamma(mid) < eps:
                lo = mid
            else:
                hi = mid
            if hi / lo < 1 + 1e-6:
                break
        zetas[eps] = lo
    worst_eps = min(zetas, key=lambda e: zetas[e])
    margin = zetas[worst_eps] - resolution
    scale = max(float(np.max(np.abs(table))), 1e-300)
    ok_structure = nonneg >= -ROUND_RTOL * scale and diag <= ROUND_RTOL * scale and mono >= -ROUND_RTOL * scale
    verdict = judge(margin) if ok_structure else FAIL
    return CheckItem(
        "gamma-modulus",
        verdict,
        margin,
        {"epsilon": worst_eps},
        details={
            "zeta": {f"{e:.0e}": z for e, z in zetas.items()},
            "gamma_min": nonneg,
            "gamma_diagonal_max": diag,
            "gamma_min_increment": mono,
            "t1_samples": int(t1.size),
        },
    )


def check_hale_onuchic(ctx: CheckContext) -> CheckItem:
    """B_- <= int_t^inf F(s,u_b)/u_b ds <= B_+ for every sampled b."""
    if ctx.B is None:
        return _inconclusive("hale-onuchic", TailUnavailableError("B envelopes unavailable"), ctx.coverage)
    t = ctx.grid.nodes
    worst = (math.inf, None)
    err_total = ctx.B.error
    integrals = {}
    try:
        for m in ctx.members:
            I, err = tail_integrals(m.G, ctx.grid)
            integrals[m.label] = I
            err_total = max(err_total, err + ctx.B.error)
            lower = I - ctx.B.lower
            upper = ctx.B.upper - I
            for side, arr in (("lower", lower), ("upper", upper)):
                i = int(np.argmin(arr))
                if arr[i] < worst[0]:
                    worst = (float(arr[i]), {"t": float(t[i]), "member": m.label, "side": side})
    except TailUnavailableError as exc:
        return _inconclusive("hale-onuchic", exc, ctx.coverage)
    err_total += _floor(ctx.B.upper, ctx.B.lower)
    details = {"members": len(ctx.members)}
    if ctx.monotone_verified is not None:
        lo, hi = integrals["alpha"], integrals["beta"]
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        inside = all(np.all(I >= lo - err_total) and np.all(I <= hi + err_total) for I in integrals.values())
        details["monotone_declaration"] = ctx.problem.monotone
        details["envelopes_bound_family"] = bool(ctx.monotone_verified and inside)
    margin = worst[0]
    return CheckItem(
        "hale-onuchic",
        judge(margin, err_total, ctx.B.tail_bound),
        margin,
        worst[1],
        err_total,
        ctx.B.tail_bound,
        ctx.coverage,
        details,
    )


def sample_windows(t: np.ndarray, p: float, max_starts: int = MAX_WINDOW_STARTS) -> tuple[np.ndarray, np.ndarray]:
    """Grid-node windows ``(i, j)`` with ``0 < t_j - t_i <= p``.

    Start nodes are thinned to at most ``max_starts``; for each start the
    offsets are powers of two plus the longest admissible window.
    """
    n = t.size
    starts = np.arange(0, n - 1, max(1, (n - 1) // max_starts))
    last = np.searchsorted(t, t[starts] + p * (1 + 1e-14), side="right") - 1
    I, J = [], []
    for i, jmax in zip(starts.tolist(), last.tolist()):
        if jmax <= i:
            continue
        offs = {jmax - i}
        k = 1
        while k < jmax - i:
            offs.add(k)
            k *= 2
        for off in sorted(offs):
            I.append(i)
            J.append(i + off)
    return np.asarray(I, int), np.asarray(J, int)


def _window_check(cid: str, ctx: CheckContext, grid: Grid, integrands: list[tuple[str, np.ndarray]]) -> CheckItem:
    t = ctx.grid.nodes
    I, J = sample_windows(t, ctx.problem.p)
    if I.size == 0:
        return CheckItem(cid, PASS, math.inf, None, coverage=ctx.coverage, details={"windows": 0})
    gam, gerr = gamma_values(ctx.problem, t[I], t[J])
    worst = (math.inf, None)
    err_total = 0.0
    for label, vals in integrands:
        cum, cerr = cumulative(vals, grid)
        lhs = cum[J] - cum[I]
        margins = gam - lhs
        w = int(np.argmin(margins))
        err_total = max(err_total, 2 * cerr + gerr + _floor(gam, lhs))
        if margins[w] < worst[0]:
            worst = (float(margins[w]), {"t1": float(t[I[w]]), "t2": float(t[J[w]]), "member": label})
    return CheckItem(
        cid, judge(worst[0], err_total), worst[0], worst[1], err_total, 0.0, ctx.coverage, {"windows": int(I.size)}
    )


def check_equicontinuity_bound(ctx: CheckContext) -> CheckItem:
    """int_{t1}^{t2} F(s,u_b)/u_b ds <= gamma(t1, t2) on sampled windows."""
    try:
        return _window_check("equicont", ctx, ctx.grid, [(m.label, m.G) for m in ctx.members])
    except ExteriorDecayError as exc:
        return _inconclusive("equicont", exc, ctx.coverage)


def check_sign_compHa(ctx: CheckContext) -> list[CheckItem]:
    """g >= 0 and H/u >= (1 - q_+) h / t along sampled u; coupling for linear m."""
    p, t = ctx.problem, ctx.grid.nodes
    r = ctx.radii
    g = np.asarray(p.g(r), float)
    worst = (float(np.min(g)), {"r": float(r[int(np.argmin(g))]), "condition": "g >= 0"})
    scale = [g]
    for m in ctx.members:
        gap = np.asarray(compHa_gap(p, t, m.u), float)
        scale.append(gap)
        i = int(np.argmin(gap))
        if gap[i] < worst[0]:
            worst = (float(gap[i]), {"t": float(t[i]), "member": m.label, "condition": "comp_Ha"})
    err = _floor(*scale)
    items = [
        CheckItem(
            "sign-compHa",
            judge(worst[0], err),
            worst[0],
            worst[1],
            err,
            coverage=ctx.coverage,
            details={"g_min": float(np.min(g)), "granularity": "grid x sampled family"},
        )
    ]
    if p.is_linear:
        a = np.asarray(p.m.linear_coefficient()(r), float)
        slack = a / (p.n - 2) - g
        arr = np.minimum(g, slack)
        i = int(np.argmin(arr))
        err = _floor(a, g)
        items.append(
            CheckItem(
                "coupling",
                judge(float(arr[i]), err),
                float(arr[i]),
                {"r": float(r[i]), "condition": "g >= 0" if g[i] <= slack[i] else "g <= a/(n-2)"},
                err,
                details={"min_slack": float(np.min(slack))},
            )
        )
    return items


def _M_series(ctx: CheckContext) -> list[tuple[str, np.ndarray]]:
    r = ctx.radii
    return [(m.label, np.asarray(kernel_M(ctx.problem, r, m.u), float)) for m in ctx.members]


def check_theorem2(ctx: CheckContext) -> list[CheckItem]:
    """Radial integral conditions: tail against B_+ and windows against gamma."""
    p = ctx.problem
    rgrid = ctx.radial_grid
    items = []
    try:
        series = _M_series(ctx)
    except ExteriorDecayError as exc:
        return [_inconclusive("thm2-tail", exc, ctx.coverage), _inconclusive("thm2-window", exc, ctx.coverage)]
    if ctx.B is None:
        items.append(_inconclusive("thm2-tail", TailUnavailableError("B envelopes unavailable"), ctx.coverage))
    else:
        try:
            worst = (math.inf, None)
            err_total = ctx.B.error
            for label, M in series:
                I, err = tail_integrals(M, rgrid)
                arr = ctx.B.upper - I
                i = int(np.argmin(arr))
                err_total = max(err_total, err + ctx.B.error)
                if arr[i] < worst[0]:
                    worst = (float(arr[i]), {"r": float(rgrid.nodes[i]), "member": label})
            err_total += _floor(ctx.B.upper)
            details = {}
            if p.is_linear:
                nI, _ = tail_integrals(np.asarray(n_of_r(p, rgrid.nodes), float), rgrid)
                details["conclusion_form_margin"] = float(np.min(ctx.B.upper - nI))
            items.append(
                CheckItem(
                    "thm2-tail",
                    judge(worst[0], err_total, ctx.B.tail_bound),
                    worst[0],
                    worst[1],
                    err_total,
                    ctx.B.tail_bound,
                    ctx.coverage,
                    details,
                )
            )
        except TailUnavailableError as exc:
            items.append(_inconclusive("thm2-tail", exc, ctx.coverage))
    try:
        item = _window_check("thm2-window", ctx, rgrid, series)
        if item.location and "t1" in item.location:
            item.location["r1"] = float(change_of_variables(item.location["t1"], p.n)[0])
            item.location["r2"] = float(change_of_variables(item.location["t2"], p.n)[0])
        items.append(item)
    except ExteriorDecayError as exc:
        items.append(_inconclusive("thm2-window", exc, ctx.coverage))
    return items


def check_special_forms(ctx: CheckContext) -> list[CheckItem]:
    """Linear ``F = A u`` or Emden-Fowler ``F = A u^sigma`` sufficient conditions."""
    p, grid = ctx.problem, ctx.grid
    form = p.resolved_form()
    if form == "general":
        return []
    if ctx.B is None:
        cid = "linear-case" if form == "linear" else "emden-fowler"
        return [_inconclusive(cid, TailUnavailableError("B envelopes unavailable"), "exact")]
    t = grid.nodes
    if form == "linear":
        try:
            I, err = tail_integrals(linear_A(p, t), grid)
        except TailUnavailableError as exc:
            return [_inconclusive("linear-case", exc, "exact")]
        lower, upper = I - ctx.B.lower, ctx.B.upper - I
        cid = "linear-case"
    else:
        sigma = p.emden_fowler_sigma()
        A = emden_fowler_A(p, t)
        alpha = np.asarray(p.alpha(t), float)
        beta = np.asarray(p.beta(t), float)
        xa, ea = cumulative(alpha, grid)
        xb, eb = cumulative(beta, grid)
        c = p.u0 ** (sigma - 1.0)
        try:
            I_lo, e1 = tail_integrals(c * A * np.exp(-(1 - sigma) * xb), grid)
            I_hi, e2 = tail_integrals(c * A * np.exp(-(1 - sigma) * xa), grid)
        except TailUnavailableError as exc:
            return [_inconclusive("emden-fowler", exc, "exact")]
        err = max(e1, e2) + (ea + eb) * float(np.max(np.abs(I_hi)))
        lower, upper = I_lo - ctx.B.lower, ctx.B.upper - I_hi
        cid = "emden-fowler"
    err += ctx.B.error + _floor(ctx.B.upper, ctx.B.lower)
    li, ui = int(np.argmin(lower)), int(np.argmin(upper))
    if lower[li] <= upper[ui]:
        margin, loc = float(lower[li]), {"t": float(t[li]), "side": "lower"}
    else:
        margin, loc = float(upper[ui]), {"t": float(t[ui]), "side": "upper"}
    return [
        CheckItem(cid, judge(margin, err, ctx.B.tail_bound), margin, loc, err, ctx.B.tail_bound, "exact", {"form": form})
    ]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EXTERIOR_DECAY_THREADS", "1")))
    except ValueError:
        return 1


def check_hypotheses(problem: ProblemSpec, grid: Grid, *, k: int = DEFAULT_SAMPLES, seed: int = 0) -> HypothesisReport:
    """Run every check; items are independent and joined in a fixed order."""
    ctx = build_context(problem, grid, k, seed)
    tasks: list[Callable[[CheckContext], Any]] = [
        check_regularity,
        check_gamma_modulus,
        check_hale_onuchic,
        check_equicontinuity_bound,
        check_sign_compHa,
        check_theorem2,
        check_special_forms,
    ]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(lambda f: f(ctx), tasks))
    items: list[CheckItem] = []
    for res in results:
        items.extend(res if isinstance(res, list) else [res])
    sampling = {
        "k": k,
        "seed": seed,
        "members": [m.label for m in ctx.members],
        "grid_N": grid.N,
        "t_max": grid.t_max,
        "coverage": ctx.coverage,
        "monotone_declaration": problem.monotone,
        "monotone_verified": ctx.monotone_verified,
        "skipped_members": ctx.skipped,
    }
    return HypothesisReport(items, sampling)
