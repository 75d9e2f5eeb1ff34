"""Sampled members of the admissible band ``alpha <= b <= beta``.

Every member carries the quantities the checks and the operator need:
``x = int_{t0}^t b``, ``u = u0 exp(x)`` and the integrand ``G = F(t,u)/u``
(which equals ``(1/u0) F(t, u0 e^x) e^{-x}``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem_model import ProblemSpec, envelopes, forcing_F
from .quadrature import Grid, cumulative

DEFAULT_SAMPLES = 8
_KNOTS = 12


@dataclass(eq=False)
class Member:
    label: str
    b: np.ndarray
    x: np.ndarray
    u: np.ndarray
    G: np.ndarray
    error: float


def evaluate_member(problem: ProblemSpec, grid: Grid, b: np.ndarray, label: str = "b") -> Member:
    x, err = cumulative(b, grid)
    u = problem.u0 * np.exp(x)
    G = forcing_F(problem, grid.nodes, u) / u
    return Member(label, np.asarray(b, float), x, u, np.asarray(G, float), err)


def random_fraction(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Continuous, piecewise-linear-in-ln t random function with values in [0, 1]."""
    knots = np.linspace(np.log(grid.t0), np.log(grid.t_max), _KNOTS)
    vals = rng.uniform(0.0, 1.0, size=_KNOTS)
    return np.interp(np.log(grid.nodes), knots, vals)


def band_samples(problem: ProblemSpec, grid: Grid, k: int = DEFAULT_SAMPLES, seed: int = 0):
    """``[(label, b)]``: both envelopes, the midpoint and ``k`` seeded random members."""
    alpha, beta = envelopes(problem, grid.nodes, strict=False)
    out = [("alpha", alpha), ("beta", beta), ("midpoint", 0.5 * (alpha + beta))]
    rng = np.random.default_rng(seed)
    for i in range(k):
        xi = random_fraction(grid, rng)
        out.append((f"random-{i}", alpha + xi * (beta - alpha)))
    return out


def admissible_family(problem: ProblemSpec, grid: Grid, k: int = DEFAULT_SAMPLES, seed: int = 0) -> list[Member]:
    return [evaluate_member(problem, grid, b, label) for label, b in band_samples(problem, grid, k, seed)]
