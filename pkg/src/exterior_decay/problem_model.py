"""Problem data and the closed-form quantities built from it.

Radial variable ``r`` and ODE variable ``t`` are tied by
``r = theta(t) = (t / (n-2))**(1/(n-2))``, equivalently ``t = (n-2) r**(n-2)``.
The ODE solution ``u(t)`` lifts to the radial profile ``U(r) = u(t) / t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import maps
from .errors import (
    DomainViolationError,
    HypothesisViolationError,
    InvalidInputError,
    TailUnavailableError,
)
from .maps import RadialUMap, ScalarMap
from .quadrature import Grid, map_tail_on_grid, window_integrals

# relative overshoot of u/t above varsigma that is clamped instead of rejected
CLAMP_RTOL = 1e-12

GAMMA_KINDS = ("zero", "lipschitz", "integral", "linear", "emden_fowler")
FORMS = ("auto", "linear", "emden_fowler", "general")
MONOTONE = (None, "nonincreasing", "nondecreasing")


@dataclass(frozen=True)
class GammaSpec:
    """Window modulus ``gamma(t1, t2)`` on ``t1 >= t0, t1 <= t2 <= t1 + p``.

    kinds:
      ``zero``         gamma = 0
      ``lipschitz``    gamma = k (t2 - t1)
      ``integral``     gamma = int_{t1}^{t2} f  for a ScalarMap ``f``
      ``linear``       gamma = int_{t1}^{t2} A, A = F(s, u)/u (linear m)
      ``emden_fowler`` gamma = u0^(sigma-1) int A exp(-(1-sigma) int_{t0}^s alpha)
    """

    kind: str = "linear"
    k: float = 0.0
    f: ScalarMap | None = None

    def __post_init__(self):
        if self.kind not in GAMMA_KINDS:
            raise InvalidInputError(f"unknown gamma kind {self.kind!r}")
        if self.kind == "lipschitz" and not self.k >= 0:
            raise InvalidInputError("lipschitz gamma needs k >= 0")
        if self.kind == "integral" and self.f is None:
            raise InvalidInputError("integral gamma needs a function f")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "lipschitz":
            out["k"] = self.k
        if self.kind == "integral":
            out["f"] = self.f.to_dict()
        return out


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    R: float
    u0: float
    varsigma: float
    p: float
    m: RadialUMap
    g: ScalarMap = maps.ZERO
    q_minus: ScalarMap = maps.ZERO
    q_plus: ScalarMap = maps.ZERO
    gamma: GammaSpec = field(default_factory=GammaSpec)
    form: str = "auto"
    monotone: str | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 3:
            raise InvalidInputError(f"dimension must be an integer n >= 3, got {self.n}")
        for name in ("R", "u0", "varsigma", "p"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be finite and > 0, got {v}")
        if self.u0 / self.t0 > self.varsigma * (1 + CLAMP_RTOL):
            raise InvalidInputError(
                f"u0/t0 = {self.u0 / self.t0:.6g} exceeds varsigma = {self.varsigma:.6g} "
                "(need u0/t0 <= varsigma)"
            )
        if self.form not in FORMS:
            raise InvalidInputError(f"unknown form {self.form!r}")
        if self.monotone not in MONOTONE:
            raise InvalidInputError(f"monotone declaration must be one of {MONOTONE}")
        if self.gamma.kind == "linear" and not self.m.is_linear:
            raise InvalidInputError("gamma kind 'linear' needs linear m; supply gamma explicitly")

    @property
    def t0(self) -> float:
        return (self.n - 2) * self.R ** (self.n - 2)

    @property
    def alpha(self) -> ScalarMap:
        return maps.scale_power(self.q_minus, -1.0)

    @property
    def beta(self) -> ScalarMap:
        return maps.scale_power(self.q_plus, -1.0)

    @property
    def is_linear(self) -> bool:
        return self.m.is_linear

    def resolved_form(self) -> str:
        """Declared special form, with ``auto`` picking ``linear`` for linear m."""
        if self.form == "auto":
            return "linear" if self.is_linear else "general"
        return self.form

    def emden_fowler_sigma(self) -> float:
        """Exponent of ``F = A(t) u**sigma``; validates the declaration."""
        if len(self.m.terms) != 1:
            raise InvalidInputError("Emden-Fowler form needs a single-term m = a(r) U^sigma")
        sigma = self.m.terms[0][1]
        if not 0.0 < sigma < 1.0:
            raise InvalidInputError(f"Emden-Fowler exponent must lie in (0, 1), got {sigma}")
        if not self.g.is_zero:
            raise InvalidInputError("Emden-Fowler form needs g = 0 (F would not factor)")
        return sigma


def change_of_variables(t, n: int):
    """``(theta(t), theta'(t))`` with ``theta(t) = (t/(n-2))**(1/(n-2))``."""
    if n < 3:
        raise InvalidInputError(f"n must be >= 3, got {n}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise InvalidInputError("change of variables needs finite t > 0")
    k = n - 2
    r = np.power(t / k, 1.0 / k)
    # direct derivative, kept independent of the identity t theta' = theta / (n-2)
    drdt = np.power(t / k, 1.0 / k - 1.0) / (k * k)
    if r.ndim == 0:
        return float(r), float(drdt)
    return r, drdt


def radius_to_time(r, n: int):
    """Inverse map ``t = (n-2) r**(n-2)``."""
    if n < 3:
        raise InvalidInputError(f"n must be >= 3, got {n}")
    r = np.asarray(r, dtype=float)
    out = (n - 2) * np.power(r, n - 2)
    return float(out) if out.ndim == 0 else out


def _q_values(problem: ProblemSpec, t):
    return np.asarray(problem.q_minus(t), float), np.asarray(problem.q_plus(t), float)


def envelopes(problem: ProblemSpec, t, *, strict: bool = True):
    """``(alpha, beta) = (q_minus / t, q_plus / t)``."""
    t = np.asarray(t, float)
    qm, qp = _q_values(problem, t)
    if strict:
        bad = (qm < 0) | (qp < qm) | (qp > 1)
        if np.any(bad):
            i = int(np.flatnonzero(np.atleast_1d(bad))[0])
            tt = np.atleast_1d(t)[min(i, np.size(t) - 1)]
            raise HypothesisViolationError(f"need 0 <= q_minus <= q_plus <= 1; violated at t={tt:.6g}")
    a, b = qm / t, qp / t
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


@dataclass
class EnvelopeB:
    """``B_-``, ``B_+`` on a grid with error budget."""

    lower: np.ndarray
    upper: np.ndarray
    error: float
    tail_bound: float


def envelope_B(problem: ProblemSpec, grid: Grid) -> EnvelopeB:
    """``B_-(t) = alpha - int_t^inf alpha^2``, ``B_+(t) = beta - int_t^inf beta^2``."""
    alpha, beta = envelopes(problem, grid.nodes, strict=False)
    ta, ea, ba = map_tail_on_grid(maps.product(problem.alpha, problem.alpha), grid)
    tb, eb, bb = map_tail_on_grid(maps.product(problem.beta, problem.beta), grid)
    return EnvelopeB(alpha - ta, beta - tb, max(ea, eb), max(ba, bb))


def envelope_B_at(problem: ProblemSpec, t) -> tuple:
    """Pointwise ``(B_-, B_+)`` for families with closed-form tails."""
    sq_a = maps.product(problem.alpha, problem.alpha)
    sq_b = maps.product(problem.beta, problem.beta)
    for sq in (sq_a, sq_b):
        if not sq.has_tail:
            raise TailUnavailableError("pointwise B needs closed-form tails; use envelope_B on a grid")
    a, b = envelopes(problem, t, strict=False)
    return a - sq_a.tail(t), b - sq_b.tail(t)


def _U(problem: ProblemSpec, t, u):
    t = np.asarray(t, float)
    u = np.asarray(u, float)
    if np.any(u <= 0):
        raise DomainViolationError("u must be positive")
    U = u / t
    cap = problem.varsigma
    over = U > cap * (1 + CLAMP_RTOL)
    if np.any(over):
        i = int(np.flatnonzero(np.atleast_1d(over))[0])
        raise DomainViolationError(
            f"u/t = {np.atleast_1d(U)[i]:.6g} exceeds varsigma = {cap:.6g}"
        )
    return np.minimum(U, cap)


def coefficients_Hh(problem: ProblemSpec, t, u):
    """``H(t,u) = theta theta' m(theta, u/t) / (n-2)`` and ``h(t) = theta theta' g(theta)``."""
    U = _U(problem, t, u)
    r, dr = change_of_variables(t, problem.n)
    w = np.asarray(r) * np.asarray(dr)
    H = w * problem.m(r, U) / (problem.n - 2)
    h = w * np.asarray(problem.g(r), float)
    return H, h


def _sign_gap(problem: ProblemSpec, t, u):
    """``H/u - (1 - q_+) h / t``: nonnegative exactly when (comp_Ha) holds."""
    H, h = coefficients_Hh(problem, t, u)
    qp = np.asarray(problem.q_plus(t), float)
    return H / np.asarray(u, float) - (1.0 - qp) * h / np.asarray(t, float)


def compHa_gap(problem: ProblemSpec, t, u):
    return _sign_gap(problem, t, u)


def forcing_F(problem: ProblemSpec, t, u):
    """``F(t,u) = |H/u - (1 - q_+) h / t| * u``."""
    out = np.abs(_sign_gap(problem, t, u)) * np.asarray(u, float)
    return float(out) if np.ndim(out) == 0 else out


def linear_A(problem: ProblemSpec, t):
    """``A(t) = F(t,u)/u`` for linear m (independent of u)."""
    if not problem.is_linear:
        raise InvalidInputError("A(t) = F/u is only u-independent for linear m")
    t = np.asarray(t, float)
    # any admissible u works; u = varsigma t / 2 keeps u/t inside the cap
    return forcing_F(problem, t, 0.5 * problem.varsigma * t) / (0.5 * problem.varsigma * t)


def emden_fowler_A(problem: ProblemSpec, t):
    """``A(t) = F(t,u) / u**sigma`` for the Emden-Fowler form."""
    sigma = problem.emden_fowler_sigma()
    t = np.asarray(t, float)
    u = 0.5 * problem.varsigma * t
    return forcing_F(problem, t, u) / np.power(u, sigma)


def kernel_M(problem: ProblemSpec, tau, u):
    """Radial kernel ``M(tau, u)`` of the radial integral conditions."""
    n = problem.n
    tau = np.asarray(tau, float)
    u = np.asarray(u, float)
    t = radius_to_time(tau, n)
    U = _U(problem, t, u)
    qp = np.asarray(problem.q_plus(t), float)
    g = np.asarray(problem.g(tau), float)
    out = tau / (n - 2) * (problem.m(tau, U) / u - (1.0 - qp) * g / np.power(tau, n - 2))
    return float(out) if np.ndim(out) == 0 else out


def n_of_r(problem: ProblemSpec, r):
    """Linear-case kernel ``n(r) = r^(3-n)/(n-2) {a/(n-2) - (1 - q_+) g}``."""
    n = problem.n
    a = problem.m.linear_coefficient()
    r = np.asarray(r, float)
    qp = np.asarray(problem.q_plus(radius_to_time(r, n)), float)
    out = np.power(r, 3 - n) / (n - 2) * (np.asarray(a(r), float) / (n - 2) - (1.0 - qp) * np.asarray(problem.g(r), float))
    return float(out) if np.ndim(out) == 0 else out


def gamma_values(problem: ProblemSpec, t1, t2) -> tuple[np.ndarray, float]:
    """Vectorised ``gamma(t1, t2)`` with an error estimate."""
    spec = problem.gamma
    t1 = np.atleast_1d(np.asarray(t1, float))
    t2 = np.atleast_1d(np.asarray(t2, float))
    if spec.kind == "zero":
        return np.zeros(t1.shape), 0.0
    if spec.kind == "lipschitz":
        return spec.k * (t2 - t1), 0.0
    if spec.kind == "integral":
        f = spec.f
        if f.has_tail:
            return np.asarray(f.tail(t1) - f.tail(t2), float), 0.0
        return window_integrals(f, t1, t2)
    if spec.kind == "linear":
        return window_integrals(lambda s: linear_A(problem, s), t1, t2)
    # emden_fowler
    sigma = problem.emden_fowler_sigma()
    alpha = problem.alpha

    def integrand(s):
        s = np.asarray(s, float)
        if alpha.is_zero:
            xa = np.zeros_like(s)
        else:
            xa, _ = window_integrals(alpha, np.full(s.size, problem.t0), s.ravel())
            xa = xa.reshape(s.shape)
        return problem.u0 ** (sigma - 1.0) * emden_fowler_A(problem, s) * np.exp(-(1.0 - sigma) * xa)

    return window_integrals(integrand, t1, t2)
