"""Radial super-solution built from the ODE solution.

The profile ``U(r) = u(t)/t`` with ``r = theta(t)`` is checked directly in
the radial variable: derivatives in ``r`` are re-computed by finite
differences on the radial nodes rather than chain-ruled from ``t``, so the
PDE inequality is an independent check of the ODE path.  The inequality
uses the majorant ``m`` in place of ``f``; any ``0 <= f <= m`` inherits it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .problem_model import ProblemSpec, change_of_variables, radius_to_time
from .quadrature import GridSeries, derivatives

STENCIL = 5
# wider stencil used only to estimate the truncation error of the working one
REFERENCE_STENCIL = 7
DEFAULT_FIT_TOL = 1e-3
# one-sided tolerance: E <= SUPER_TOL + truncation estimate + SUPER_REL * (sum of term magnitudes)
SUPER_TOL = 1e-9
SUPER_REL = 1e-12
TRUNC_SAFETY = 2.0
# multiple of eps * sum |w_j U_j| allowed for floating-point noise in the stencils
ROUND_SAFETY = 16.0


@dataclass(eq=False)
class RadialProfile:
    r: np.ndarray
    U: np.ndarray
    n: int
    R: float

    def round_trip(self) -> np.ndarray:
        """``t = (n-2) r^(n-2)`` at the profile radii."""
        return radius_to_time(self.r, self.n)


def lift(problem: ProblemSpec, u: GridSeries) -> RadialProfile:
    """``U(r) = u(t)/t`` on ``r = theta(t)``."""
    if np.any(u.values <= 0):
        raise InvalidInputError("lift needs a positive u")
    t = u.grid.nodes
    r = np.asarray(change_of_variables(t, problem.n)[0], float).copy()
    r[0] = problem.R  # theta(t0) = R exactly
    return RadialProfile(r, u.values / t, problem.n, problem.R)


@dataclass(eq=False)
class RadialResidual:
    E: np.ndarray
    relative: np.ndarray
    scale: np.ndarray
    interior: np.ndarray
    truncation: np.ndarray
    rounding: np.ndarray
    max_E: float
    max_relative: float
    max_abs_relative: float
    verdict: str
    tol: float
    rel_tol: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_E": {"value": self.max_E, "error": self.tol},
            "max_relative_E": {"value": self.max_relative, "error": self.rel_tol},
            "max_abs_relative_E": {"value": self.max_abs_relative, "error": self.rel_tol},
            "truncation_estimate_rel_max": {"value": self.max_truncation_relative, "error": self.rel_tol},
            "rounding_estimate_rel_max": {"value": self.max_rounding_relative, "error": self.rel_tol},
            "tolerance": {
                "absolute": self.tol,
                "relative": self.rel_tol,
                "truncation_safety": TRUNC_SAFETY,
                "rounding_safety": ROUND_SAFETY,
            },
            "stencil": STENCIL,
        }

    def _rel_max(self, x: np.ndarray) -> float:
        m = self.interior & (self.scale > 0)
        return float(np.max(x[m] / self.scale[m])) if np.any(m) else 0.0

    @property
    def max_truncation_relative(self) -> float:
        return self._rel_max(self.truncation)

    @property
    def max_rounding_relative(self) -> float:
        return self._rel_max(self.rounding)

    @property
    def allowance(self) -> np.ndarray:
        return self.tol + TRUNC_SAFETY * self.truncation + ROUND_SAFETY * self.rounding + self.rel_tol * self.scale


def radial_residual(
    problem: ProblemSpec, profile: RadialProfile, tol: float = SUPER_TOL, rel_tol: float = SUPER_REL
) -> RadialResidual:
    """``E = U'' + (n-1) U'/r + m(r,U) + g(r) r U'`` with a one-sided verdict.

    ``relative`` divides by the sum of the magnitudes of the four terms.  A
    node passes when ``E <= tol + 2 |E_5 - E_7| + 16 rho + rel_tol * scale``,
    where ``E_5 - E_7`` (5- against 7-point stencils) estimates the
    truncation of the working stencil and ``rho = eps * sum |w_j U_j|`` over
    the stencil terms bounds the floating-point noise, which dominates on
    finely spaced grids.  Both matter in equality cases where E is
    analytically zero.  Endpoint nodes use shifted stencils and are left out
    of the verdict.
    """
    r, U, n = profile.r, profile.U, profile.n
    mU = np.asarray(problem.m(r, np.minimum(U, problem.varsigma)), float)
    g = np.asarray(problem.g(r), float)

    def assemble(width):
        d1, d2, r1, r2 = derivatives(U, r, width, rounding=True)
        drift = g * r * d1
        E = d2 + (n - 1) / r * d1 + mU + drift
        scale = np.abs(d2) + np.abs((n - 1) / r * d1) + np.abs(mU) + np.abs(drift)
        rounding = r2 + ((n - 1) / r + np.abs(g * r)) * r1
        return E, scale, rounding

    E, scale, rounding = assemble(STENCIL)
    if r.size >= REFERENCE_STENCIL:
        trunc = np.abs(E - assemble(REFERENCE_STENCIL)[0])
    else:
        trunc = np.zeros_like(E)
    rel = np.divide(E, scale, out=np.zeros_like(E), where=scale > 0)
    half = STENCIL // 2
    interior = np.zeros(r.size, bool)
    interior[half:-half] = True
    allowance = tol + TRUNC_SAFETY * trunc + ROUND_SAFETY * rounding + rel_tol * scale
    ok = E[interior] <= allowance[interior]
    verdict = "pass" if bool(np.all(ok)) else "fail"
    return RadialResidual(
        E,
        rel,
        scale,
        interior,
        trunc,
        rounding,
        float(np.max(E[interior])),
        float(np.max(rel[interior])),
        float(np.max(np.abs(rel[interior]))),
        verdict,
        tol,
        rel_tol,
    )


def chain_rule_residual(problem: ProblemSpec, profile: RadialProfile, u: GridSeries, uprime: GridSeries, upp: GridSeries) -> np.ndarray:
    """The same ``E`` rebuilt from the t-side quantities.

    With ``U = u/t`` one has ``r^(n-1) U' = t u' - u`` and
    ``r^(n-1) (U'' + (n-1) U'/r) = t u'' dt/dr``, hence
    ``E = (n-2)^2 t u'' / r^2 + m(r, U) + g(r) r^(2-n) (t u' - u)``.
    """
    n, r = profile.n, profile.r
    t = u.grid.nodes
    mU = np.asarray(problem.m(r, np.minimum(profile.U, problem.varsigma)), float)
    g = np.asarray(problem.g(r), float)
    return (n - 2) ** 2 * t * upp.values / r**2 + mU + g * r ** (2 - n) * (t * uprime.values - u.values)


@dataclass
class DecayReport:
    slope: float
    slope_error: float
    bound: float
    lam: float
    verdict: str
    r_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "measured_slope": {"value": self.slope, "error": self.slope_error},
            "bound": self.bound,
            "lambda": self.lam,
            "verdict": self.verdict,
            "fit_range": list(self.r_range),
        }


def decay_rate(profile: RadialProfile, lam: float, fit_tol: float = DEFAULT_FIT_TOL) -> DecayReport:
    """Least-squares slope of ln U against ln r on the last decade of radii.

    The slope must not exceed ``(lam - 1)(n - 2)`` beyond ``fit_tol``.
    """
    r, U = profile.r, profile.U
    if r[-1] < 10.0 * r[0]:
        raise InvalidInputError("profile spans less than a decade; cannot fit the decay rate")
    sel = r >= r[-1] / 10.0 * (1 - 1e-12)
    if np.count_nonzero(sel) < 3:
        raise InvalidInputError("too few nodes in the last decade")
    x, y = np.log(r[sel]), np.log(U[sel])
    (slope, icpt), res, *_ = np.polyfit(x, y, 1, full=True)
    dof = max(x.size - 2, 1)
    sigma = math.sqrt(float(res[0]) / dof) if res.size else 0.0
    slope_err = sigma / math.sqrt(float(np.sum((x - x.mean()) ** 2)))
    bound = (lam - 1.0) * (profile.n - 2)
    verdict = "pass" if slope <= bound + fit_tol else "fail"
    return DecayReport(float(slope), float(slope_err), float(bound), float(lam), verdict, (float(r[sel][0]), float(r[-1])))
