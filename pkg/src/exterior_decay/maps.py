"""Concrete real functions used as problem data.

A ``ScalarMap`` is a one-argument function of a positive variable with
optional closed-form tail integral ``tail(t) = int_t^inf f(s) ds`` and
optional decay metadata ``|f(s)| <= K s**(-rho)`` for ``s >= start``.
The families are the log-power monomial ``c x**e (ln x)**d`` (which covers
``constant`` and ``power``), finite sums, products and interpolated tables.

``RadialUMap`` is the two-argument comparison function ``m(r, U)``,
represented as a finite sum of separable terms ``a_i(r) * U**sigma_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import mpmath
import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidInputError


@dataclass(frozen=True)
class Decay:
    """Assertion ``|f(s)| <= K * s**(-rho)`` for every ``s >= start``."""

    K: float
    rho: float
    start: float = 0.0

    def bound(self, t_max: float) -> float:
        """Bound on ``int_{t_max}^inf |f|``; ``inf`` when ``rho <= 1``."""
        if self.K == 0.0:
            return 0.0
        if self.rho <= 1.0 or t_max < self.start:
            return math.inf
        return self.K * t_max ** (1.0 - self.rho) / (self.rho - 1.0)

    def to_dict(self) -> dict:
        return {"K": self.K, "rho": self.rho, "start": self.start}


class ScalarMap:
    """Base class. Subclasses implement ``__call__`` and ``to_dict``."""

    decay: Decay | None = None

    def __call__(self, x):
        raise NotImplementedError

    def tail(self, t):
        """Closed form of ``int_t^inf f``, or None when unavailable."""
        return None

    @property
    def has_tail(self) -> bool:
        return False

    @property
    def is_zero(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __mul__(self, other: "ScalarMap | float") -> "ScalarMap":
        return product(self, other)

    __rmul__ = __mul__

    def __add__(self, other: "ScalarMap") -> "ScalarMap":
        return SumMap([self, other])


def _as_array(x):
    return np.asarray(x, dtype=float)


def _upper_gamma(a: float, x):
    """Upper incomplete gamma for real (possibly negative) order."""
    if np.ndim(x) == 0:
        return float(mpmath.gammainc(a, float(x)))
    return np.array([float(mpmath.gammainc(a, float(z))) for z in np.ravel(x)]).reshape(np.shape(x))


@dataclass(frozen=True)
class LogPower(ScalarMap):
    """``c * x**e * (ln x)**d``; requires ``x > 1`` whenever ``d != 0``."""

    c: float
    e: float = 0.0
    d: float = 0.0

    def __call__(self, x):
        x = _as_array(x)
        if self.c == 0.0:
            return np.zeros_like(x) if x.ndim else 0.0
        out = self.c * np.power(x, self.e)
        if self.d != 0.0:
            if np.any(x <= 1.0):
                raise InvalidInputError("log-power family requires x > 1 when d != 0")
            out = out * np.power(np.log(x), self.d)
        return out if out.ndim else float(out)

    @property
    def kind(self) -> str:
        if self.d != 0.0:
            return "log_power"
        return "constant" if self.e == 0.0 else "power"

    @property
    def is_zero(self) -> bool:
        return self.c == 0.0

    @property
    def has_tail(self) -> bool:
        if self.c == 0.0:
            return True
        if self.e < -1.0:
            return True
        return self.e == -1.0 and self.d < -1.0

    def tail(self, t):
        if not self.has_tail:
            return None
        t = _as_array(t)
        if self.c == 0.0:
            out = np.zeros_like(t)
        elif self.d == 0.0:
            out = -self.c * np.power(t, self.e + 1.0) / (self.e + 1.0)
        else:
            if np.any(t <= 1.0):
                raise InvalidInputError("log-power tail requires t > 1")
            lt = np.log(t)
            if self.e == -1.0:
                out = -self.c * np.power(lt, self.d + 1.0) / (self.d + 1.0)
            else:
                # s = e^y:  int_{ln t}^inf e^{-mu y} y^d dy = mu^{-d-1} Gamma(d+1, mu ln t)
                mu = -(self.e + 1.0)
                out = self.c * mu ** (-self.d - 1.0) * _as_array(_upper_gamma(self.d + 1.0, mu * lt))
        return out if out.ndim else float(out)

    @property
    def decay(self) -> Decay | None:  # type: ignore[override]
        K = abs(self.c)
        if K == 0.0:
            return Decay(0.0, 2.0, 0.0)
        if self.d == 0.0:
            return Decay(K, -self.e, 0.0)
        if self.d < 0.0:
            # (ln s)^d <= 1 once s >= e
            return Decay(K, -self.e, math.e)
        delta = (-self.e - 1.0) / 2.0 if -self.e > 1.0 else 0.5
        # sup_s (ln s)^d s^{-delta} is attained at ln s = d / delta
        K *= (self.d / (delta * math.e)) ** self.d
        return Decay(K, -self.e - delta, 1.0)

    def to_dict(self) -> dict:
        kind = self.kind
        if kind == "constant":
            return {"kind": "constant", "c": self.c}
        if kind == "power":
            return {"kind": "power", "c": self.c, "e": self.e}
        return {"kind": "log_power", "c": self.c, "e": self.e, "d": self.d}


def constant(c: float) -> LogPower:
    return LogPower(float(c), 0.0, 0.0)


def power(c: float, e: float) -> LogPower:
    return LogPower(float(c), float(e), 0.0)


ZERO = constant(0.0)


@dataclass(frozen=True)
class SumMap(ScalarMap):
    terms: tuple

    def __init__(self, terms: Sequence[ScalarMap]):
        object.__setattr__(self, "terms", tuple(terms))

    def __call__(self, x):
        out = 0.0
        for term in self.terms:
            out = out + term(x)
        if np.ndim(x) and np.ndim(out) == 0:
            out = np.full(np.shape(x), float(out))
        return out

    @property
    def is_zero(self) -> bool:
        return all(term.is_zero for term in self.terms)

    @property
    def has_tail(self) -> bool:
        return all(term.has_tail for term in self.terms)

    def tail(self, t):
        if not self.has_tail:
            return None
        out = 0.0
        for term in self.terms:
            out = out + term.tail(t)
        return out

    @property
    def decay(self) -> Decay | None:  # type: ignore[override]
        decays = [term.decay for term in self.terms]
        if any(dc is None for dc in decays):
            return None
        live = [dc for dc in decays if dc.K > 0.0]
        if not live:
            return Decay(0.0, 2.0, 0.0)
        rho = min(dc.rho for dc in live)
        start = max(max(dc.start for dc in live), 1e-300)
        K = sum(dc.K * start ** (rho - dc.rho) for dc in live)
        return Decay(K, rho, start)

    def to_dict(self) -> dict:
        return {"kind": "sum", "terms": [term.to_dict() for term in self.terms]}


@dataclass(frozen=True)
class ProductMap(ScalarMap):
    """Generic product; only used when a factor is not a log-power family."""

    factors: tuple

    def __init__(self, factors: Sequence[ScalarMap]):
        object.__setattr__(self, "factors", tuple(factors))

    def __call__(self, x):
        out = 1.0
        for f in self.factors:
            out = out * f(x)
        return out

    @property
    def is_zero(self) -> bool:
        return any(f.is_zero for f in self.factors)

    @property
    def decay(self) -> Decay | None:  # type: ignore[override]
        decays = [f.decay for f in self.factors]
        if any(dc is None for dc in decays):
            return None
        return Decay(
            math.prod(dc.K for dc in decays),
            sum(dc.rho for dc in decays),
            max(dc.start for dc in decays),
        )

    def to_dict(self) -> dict:
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}


_TABLE_RULES = ("linear", "pchip", "loglog")


@dataclass(frozen=True, eq=False)
class TableMap(ScalarMap):
    """Tabulated function.

    Beyond the last abscissa the table is either identically zero
    (``finite_support=True``) or continued by the power law
    ``y[-1] * (x / x[-1])**(-rho)`` taken from its decay metadata.
    """

    x: np.ndarray
    y: np.ndarray
    rule: str = "pchip"
    table_decay: Decay | None = None
    finite_support: bool = False
    _interp: Any = field(default=None, repr=False)

    def __post_init__(self):
        x = _as_array(self.x)
        y = _as_array(self.y)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise InvalidInputError("table needs matching 1-D x, y with at least 2 points")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("table abscissae must be strictly increasing")
        if self.rule not in _TABLE_RULES:
            raise InvalidInputError(f"unknown interpolation rule {self.rule!r}")
        if self.rule == "loglog" and (np.any(x <= 0) or np.any(y <= 0)):
            raise InvalidInputError("loglog interpolation needs positive x and y")
        if not self.finite_support and self.table_decay is None:
            raise InvalidInputError("table must declare decay metadata or finite support")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.rule == "pchip":
            object.__setattr__(self, "_interp", PchipInterpolator(x, y, extrapolate=False))

    def _inside(self, x):
        if self.rule == "linear":
            return np.interp(x, self.x, self.y)
        if self.rule == "loglog":
            return np.exp(np.interp(np.log(x), np.log(self.x), np.log(self.y)))
        return self._interp(x)

    def __call__(self, x):
        xa = np.atleast_1d(_as_array(x))
        if np.any(xa < self.x[0]):
            raise InvalidInputError(f"table evaluated below its domain start {self.x[0]}")
        out = np.empty_like(xa)
        inside = xa <= self.x[-1]
        out[inside] = self._inside(xa[inside])
        beyond = ~inside
        if self.finite_support:
            out[beyond] = 0.0
        else:
            out[beyond] = self.y[-1] * (xa[beyond] / self.x[-1]) ** (-self.table_decay.rho)
        return out if np.ndim(x) else float(out[0])

    @property
    def decay(self) -> Decay | None:  # type: ignore[override]
        if self.finite_support:
            return Decay(0.0, 2.0, float(self.x[-1]))
        return self.table_decay

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.y == 0.0))

    def to_dict(self) -> dict:
        out = {"kind": "table", "x": self.x.tolist(), "y": self.y.tolist(), "rule": self.rule}
        if self.finite_support:
            out["finite_support"] = True
        else:
            out["decay"] = self.table_decay.to_dict()
        return out


def _terms(f: ScalarMap) -> list[ScalarMap]:
    return list(f.terms) if isinstance(f, SumMap) else [f]


def product(a: ScalarMap | float, b: ScalarMap | float) -> ScalarMap:
    """Product that stays inside the log-power family whenever possible."""
    if not isinstance(a, ScalarMap):
        a = constant(a)
    if not isinstance(b, ScalarMap):
        b = constant(b)
    ta, tb = _terms(a), _terms(b)
    if all(isinstance(t, LogPower) for t in ta + tb):
        out = [LogPower(x.c * y.c, x.e + y.e, x.d + y.d) for x in ta for y in tb]
        return out[0] if len(out) == 1 else SumMap(out)
    return ProductMap([a, b])


def scale_power(f: ScalarMap, k: float) -> ScalarMap:
    """``x**k * f(x)``."""
    return product(f, power(1.0, k))


def from_dict(doc: Any) -> ScalarMap:
    """Deserialize a ScalarMap; bare numbers are constants."""
    if isinstance(doc, (int, float)):
        return constant(float(doc))
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InvalidInputError(f"cannot interpret {doc!r} as a function")
    kind = doc["kind"]
    if kind == "constant":
        return constant(doc["c"])
    if kind == "power":
        return power(doc["c"], doc["e"])
    if kind == "log_power":
        return LogPower(float(doc["c"]), float(doc["e"]), float(doc["d"]))
    if kind == "sum":
        return SumMap([from_dict(t) for t in doc["terms"]])
    if kind == "product":
        out = from_dict(doc["factors"][0])
        for f in doc["factors"][1:]:
            out = product(out, from_dict(f))
        return out
    if kind == "table":
        decay = doc.get("decay")
        return TableMap(
            np.asarray(doc["x"], float),
            np.asarray(doc["y"], float),
            rule=doc.get("rule", "pchip"),
            table_decay=Decay(**decay) if decay else None,
            finite_support=bool(doc.get("finite_support", False)),
        )
    raise InvalidInputError(f"unknown function kind {kind!r}")


@dataclass(frozen=True)
class RadialUMap:
    """``m(r, U) = sum_i a_i(r) * U**sigma_i`` with ``a_i >= 0``."""

    terms: tuple

    def __init__(self, terms: Sequence[tuple[ScalarMap, float]]):
        clean = []
        for a, sigma in terms:
            if sigma <= 0.0:
                raise InvalidInputError("U-exponent sigma must be positive")
            clean.append((a, float(sigma)))
        object.__setattr__(self, "terms", tuple(clean))

    def __call__(self, r, U):
        out = 0.0
        for a, sigma in self.terms:
            out = out + a(r) * np.power(U, sigma)
        if np.ndim(out) == 0 and (np.ndim(r) or np.ndim(U)):
            out = np.zeros(np.broadcast(np.asarray(r), np.asarray(U)).shape) + out
        return out

    @property
    def is_zero(self) -> bool:
        return all(a.is_zero for a, _ in self.terms)

    @property
    def is_linear(self) -> bool:
        return all(sigma == 1.0 or a.is_zero for a, sigma in self.terms)

    def linear_coefficient(self) -> ScalarMap:
        """``a(r)`` such that ``m(r, U) = a(r) U``; only for linear m."""
        if not self.is_linear:
            raise InvalidInputError("m is not linear in U")
        live = [a for a, _ in self.terms]
        if not live:
            return ZERO
        return live[0] if len(live) == 1 else SumMap(live)

    def to_dict(self) -> dict:
        return {
            "kind": "separable",
            "terms": [{"a": a.to_dict(), "sigma": s} for a, s in self.terms],
        }


def radial_from_dict(doc: Any) -> RadialUMap:
    if doc in (0, 0.0) or (isinstance(doc, dict) and doc.get("kind") == "zero"):
        return RadialUMap([])
    if not isinstance(doc, dict):
        raise InvalidInputError(f"cannot interpret {doc!r} as m(r, U)")
    kind = doc.get("kind")
    if kind == "linear":
        return RadialUMap([(from_dict(doc["a"]), 1.0)])
    if kind == "separable":
        return RadialUMap([(from_dict(t["a"]), float(t.get("sigma", 1.0))) for t in doc["terms"]])
    raise InvalidInputError(f"unknown m kind {kind!r}")
