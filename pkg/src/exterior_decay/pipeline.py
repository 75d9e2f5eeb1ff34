"""Subcommand orchestration and output files.

Order mirrors the construction: hypotheses first, then the fixed point and
the ODE solution, then the radial lift.  Every stage adds verdicts to a
flat list that decides the exit status.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .config import RunConfig
from .hypothesis_checker import FAIL, INCONCLUSIVE, PASS, WARN, _clean, check_hypotheses, judge
from .problem_model import envelopes
from .quadrature import Grid, build_grid
from .radial_lift import chain_rule_residual, decay_rate, lift, radial_residual
from .solver import SolutionBundle, apply_T, assemble_solution, compactness_diagnostics, picard_solve

log = logging.getLogger(__name__)

SUBCOMMANDS = ("check", "solve", "lift", "verify", "demo")
EXIT = {PASS: 0, INCONCLUSIVE: 2, FAIL: 1}
REPORT_VERSION = 1
BAND_EPS = 1e-9


def combine(verdicts) -> str:
    verdicts = set(verdicts)
    if FAIL in verdicts:
        return FAIL
    if verdicts & {INCONCLUSIVE, WARN}:
        return INCONCLUSIVE
    return PASS


def exit_status(overall: str, strict: bool = False) -> int:
    if strict and overall != PASS:
        return 1
    return EXIT[overall]


def _q(value: float, error: float) -> dict:
    return _clean({"value": float(value), "error": float(error)})


@dataclass
class PipelineResult:
    subcommand: str
    config: RunConfig
    grid: Grid
    report: dict
    verdicts: dict[str, str] = field(default_factory=dict)
    solution: SolutionBundle | None = None
    profile: Any = None
    radial: Any = None

    @property
    def overall(self) -> str:
        return combine(self.verdicts.values())


def config_digest(config: RunConfig) -> str:
    text = json.dumps(_clean(config.to_dict()), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def _solution_section(problem, sol: SolutionBundle, tol: float) -> tuple[dict, dict]:
    pic = sol.picard
    grid = sol.u.grid
    t = grid.nodes
    b0 = pic.b0.values
    start = grid.decade_start()
    bt = b0[start:] * t[start:]
    kappa = float(np.mean(bt))
    kappa_err = 0.5 * float(np.ptp(bt)) + pic.residual
    verdicts = {}
    verdicts["picard"] = PASS if pic.converged else INCONCLUSIVE

    err_b = BAND_EPS + pic.quadrature_error
    band = float(min(np.min(sol.bracket_lower), np.min(sol.bracket_upper)))
    verdicts["band"] = judge(band, err_b)
    Tb = apply_T(problem, pic.b0)
    alpha, beta = envelopes(problem, t, strict=False)
    T_margin = float(min(np.min(Tb.values - alpha), np.min(beta - Tb.values)))
    verdicts["T-band"] = judge(T_margin, BAND_EPS + Tb.error)
    verdicts["window-along-u"] = judge(sol.window_margin, 1e-12 + pic.quadrature_error)
    verdicts["decay-u"] = PASS if sol.decay_bound_ok else FAIL
    section = {
        "status": pic.status,
        "message": pic.message,
        "iterations": pic.iterations,
        "fixed_point_residual": {"value": pic.residual, "error": pic.quadrature_error, "tolerance": tol},
        "b0_times_t_last_decade": _q(kappa, kappa_err),
        "band_margin": _q(band, err_b),
        "T_b0_band_margin": _q(T_margin, BAND_EPS + Tb.error),
        "ode_residual_rel_max": _q(sol.residual_rel_max, pic.quadrature_error),
        "window_margin_along_u": {
            "value": sol.window_margin,
            "error": pic.quadrature_error,
            "location": sol.window_location,
        },
        "decay_u_over_bound": {"value": sol.decay_ratio, "error": 1e-9, "verdict": verdicts["decay-u"]},
        "lambda": _q(sol.lam, 0.0),
        "t_lambda": _q(sol.t_lam, 0.0),
        "u_at_t_max": _q(sol.u.values[-1], pic.quadrature_error * sol.u.values[-1]),
    }
    return _clean(section), verdicts


def run_pipeline(config: RunConfig, subcommand: str) -> PipelineResult:
    """Run ``subcommand`` and collect a report dictionary (without timestamp)."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    P = config.problem
    grid = build_grid(P.t0, config.grid.tmax_mult * P.t0, config.grid.N)
    report: dict = {
        "report_version": REPORT_VERSION,
        "subcommand": subcommand,
        "config_sha256": config_digest(config),
        "grid": {"N": grid.N, "t0": _q(grid.t0, 0.0), "t_max": _q(grid.t_max, 0.0)},
    }
    res = PipelineResult(subcommand, config, grid, report)

    hyp = check_hypotheses(P, grid, k=config.checker.k, seed=config.checker.seed)
    report["hypotheses"] = hyp.to_dict()
    for item in hyp.items:
        res.verdicts[f"hypothesis:{item.id}"] = item.verdict
    if subcommand == "check":
        return _finish(res)

    s = config.solver
    pic = picard_solve(P, grid, tol=s.tol, max_iter=s.max_iter, damping=s.damping, project=s.projection)
    sol = assemble_solution(P, pic)
    res.solution = sol
    section, verdicts = _solution_section(P, sol, s.tol)
    report["solution"] = section
    res.verdicts.update({f"solution:{k}": v for k, v in verdicts.items()})
    if subcommand == "solve":
        return _finish(res)

    profile = lift(P, sol.u)
    rr = radial_residual(P, profile)
    res.profile, res.radial = profile, rr
    decay = decay_rate(profile, sol.lam)
    U_cap = float(np.max(profile.U))
    radial = {
        "residual": rr.to_dict(),
        "decay": decay.to_dict(),
        "decay_bound_exponent": _q(decay.bound, 0.0),
        "measured_slope": _q(decay.slope, decay.slope_error),
        "U_max": {"value": U_cap, "error": 0.0, "cap_u0_over_t0": P.u0 / P.t0, "varsigma": P.varsigma},
        "r_first": _q(profile.r[0], 0.0),
        "comparison_bracket": "an exact solution lies between 0 and U by the maximum principle; not recomputed",
    }
    res.verdicts["radial:super-solution"] = rr.verdict
    res.verdicts["radial:decay"] = decay.verdict
    res.verdicts["radial:cap"] = PASS if U_cap <= P.u0 / P.t0 * (1 + 1e-12) else FAIL
    if subcommand in ("verify", "demo"):
        comp = compactness_diagnostics(P, grid, config.checker.k, config.checker.seed)
        report["compactness"] = _clean(comp.to_dict())
        res.verdicts["compactness"] = comp.verdict
        chain = chain_rule_residual(P, profile, sol.u, sol.uprime, sol.upp)
        mask = rr.interior & (rr.scale > 0)
        gap = float(np.max(np.abs(chain - rr.E)[mask] / rr.scale[mask])) if np.any(mask) else 0.0
        radial["chain_rule_vs_radial_fd"] = {"value": gap, "error": 1e-6, "verdict": PASS if gap <= 1e-4 else INCONCLUSIVE}
        res.verdicts["radial:chain-rule"] = radial["chain_rule_vs_radial_fd"]["verdict"]
    report["radial"] = _clean(radial)
    return _finish(res)


def _finish(res: PipelineResult) -> PipelineResult:
    res.report["verdicts"] = dict(res.verdicts)
    res.report["overall"] = res.overall
    return res


def series_rows(res: PipelineResult) -> tuple[list[str], np.ndarray]:
    cols = ["t", "b0", "u", "uprime", "residual", "r", "U", "E"]
    sol = res.solution
    N = res.grid.N
    data = np.full((N, len(cols)), np.nan)
    data[:, 0] = res.grid.nodes
    if sol is not None:
        data[:, 1] = sol.b0.values
        data[:, 2] = sol.u.values
        data[:, 3] = sol.uprime.values
        data[:, 4] = sol.residual.values
    if res.profile is not None:
        data[:, 5] = res.profile.r
        data[:, 6] = res.profile.U
        data[:, 7] = res.radial.E
    return cols, data


def write_series(res: PipelineResult, path: Path) -> None:
    cols, data = series_rows(res)
    header = "\t".join(cols)
    np.savetxt(path, data, fmt="%.17g", delimiter="\t", header=header, comments="# ")


def write_plot(res: PipelineResult, path: Path) -> None:
    """Two-column blocks separated by blank lines, one block per curve."""
    t = res.grid.nodes
    curves: list[tuple[str, np.ndarray, np.ndarray]] = []
    sol = res.solution
    if sol is not None:
        curves.append(("b0(t)*t vs t", t, sol.b0.values * t))
        curves.append(("u(t) vs t", t, sol.u.values))
        curves.append(("|u''+F| vs t", t, np.abs(sol.residual.values)))
    if res.profile is not None:
        curves.append(("U(r) vs r", res.profile.r, res.profile.U))
        curves.append(("E(r) vs r", res.profile.r, res.radial.E))
    with open(path, "w", encoding="utf-8") as fh:
        for k, (name, x, y) in enumerate(curves):
            if k:
                fh.write("\n\n")
            fh.write(f"# {name}\n")
            for a, b in zip(x, y):
                fh.write(f"{a:.17g} {b:.17g}\n")


def write_report(res: PipelineResult, path: Path, exit_code: int) -> None:
    doc = dict(res.report)
    doc["exit_status"] = exit_code
    doc["generated"] = {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def emit_outputs(res: PipelineResult, out_dir: Path, exit_code: int) -> list[Path]:
    """Report always; series and plot data once a solution exists."""
    out_dir.mkdir(parents=True, exist_ok=True)
    o = res.config.outputs
    written = [out_dir / o.report]
    write_report(res, written[0], exit_code)
    if res.solution is not None:
        written.append(out_dir / o.series)
        write_series(res, written[-1])
        written.append(out_dir / o.plot)
        write_plot(res, written[-1])
    return written


def canonical_problem_doc(c: float = 0.125, g: float | None = None) -> dict:
    """The reference instance: n=3, R=1, u0=1, q_+ = 1/2, m = c r^-2 U."""
    doc: dict = {
        "n": 3,
        "R": 1.0,
        "u0": 1.0,
        "varsigma": 1.0,
        "p": 1.0,
        "m": {"kind": "linear", "a": {"kind": "power", "c": c, "e": -2.0}},
        "g": 0.0 if g is None else {"kind": "power", "c": g, "e": -2.0},
        "q_minus": 0.0,
        "q_plus": 0.5,
        "gamma": {"kind": "linear"},
    }
    return doc
