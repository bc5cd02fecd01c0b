"""Closed-form energy decay laws, the majorant machinery behind them, the
scalar decay ODE, and least-squares classification of observed decay.

Decay of the damped plate is bounded by solutions of

    S'(t) + Hinv((1 - delta) S(t)) = 0,        S(0) = E(0),

where Hinv is built from the feedback's growth order.  Closed forms exist
for power-law and degenerate-exponential feedbacks; their constants c, c0
are not computable a priori and stay as fit parameters.  Each law exposes
the Hinv that solves its ODE exactly with the (1 - delta) factor absorbed
into c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import FitError, ParameterError, UnsupportedLawError
from .model import (ExpDegenerate, FeedbackKind, Linear, Piecewise, Power,
                    SqrtOdd)


# ---------------------------------------------------------------------------
# decay laws

@dataclass(frozen=True)
class ExponentialLaw:
    """S(t) = s0 exp(-c t); the linear-feedback decay family."""

    c: float
    s0: float = 1.0

    def __post_init__(self):
        if self.c <= 0 or self.s0 <= 0:
            raise ParameterError("exponential law needs c > 0 and s0 > 0")

    def evaluate(self, t):
        return self.s0 * np.exp(-self.c * np.asarray(t, dtype=float))

    def hinv(self, s):
        return self.c * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class AlgebraicOriginLaw:
    """Power-feedback decay for feedbacks that degenerate only at the origin.

    For exponent theta < 1:  S(t) = [c (1-theta)/(2 theta) (t + c0)]^(-2 theta/(1-theta))
    For exponent r > 1:      S(t) = [c (r-1)/2 (t + c0)]^(-2/(r-1))
    """

    exponent: float
    c: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        if self.exponent <= 0 or self.exponent == 1.0:
            raise ParameterError(
                f"algebraic law needs a positive exponent != 1, got {self.exponent}")
        if self.c <= 0 or self.c0 <= 0:
            raise ParameterError("algebraic law needs c > 0 and c0 > 0")

    def _slope_power(self) -> tuple[float, float]:
        e = self.exponent
        if e < 1.0:
            return self.c * (1.0 - e) / (2.0 * e), 2.0 * e / (1.0 - e)
        return self.c * (e - 1.0) / 2.0, 2.0 / (e - 1.0)

    def evaluate(self, t):
        a, p = self._slope_power()
        return (a * (np.asarray(t, dtype=float) + self.c0)) ** (-p)

    def hinv(self, s):
        e = self.exponent
        power = (e + 1.0) / (2.0 * e) if e < 1.0 else (e + 1.0) / 2.0
        return self.c * np.asarray(s, dtype=float) ** power


@dataclass(frozen=True)
class AlgebraicInfinityLaw:
    """Power-feedback decay for feedbacks that degenerate only at infinity.

    Needs the velocity integrability index q > 2*max(exponent, 1).
    For exponent theta < 1:  S(t) = [c (1-theta)/(q-2) (t + c0)]^(-(q-2)/(1-theta))
    For exponent r > 1:      S(t) = [c (r-1)/(q-2r) (t + c0)]^(-(q-2r)/(r-1))
    """

    exponent: float
    q: float
    c: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        if self.exponent <= 0 or self.exponent == 1.0:
            raise ParameterError(
                f"algebraic law needs a positive exponent != 1, got {self.exponent}")
        if self.q <= 2.0 * max(self.exponent, 1.0):
            raise ParameterError(
                f"integrability index q = {self.q} must exceed "
                f"{2.0 * max(self.exponent, 1.0)}")
        if self.c <= 0 or self.c0 <= 0:
            raise ParameterError("algebraic law needs c > 0 and c0 > 0")

    def _slope_power(self) -> tuple[float, float]:
        e, q = self.exponent, self.q
        if e < 1.0:
            return self.c * (1.0 - e) / (q - 2.0), (q - 2.0) / (1.0 - e)
        return self.c * (e - 1.0) / (q - 2.0 * e), (q - 2.0 * e) / (e - 1.0)

    def evaluate(self, t):
        a, p = self._slope_power()
        return (a * (np.asarray(t, dtype=float) + self.c0)) ** (-p)

    def hinv(self, s):
        e, q = self.exponent, self.q
        power = (q - e - 1.0) / (q - 2.0) if e < 1.0 \
            else (q - e - 1.0) / (q - 2.0 * e)
        return self.c * np.asarray(s, dtype=float) ** power


@dataclass(frozen=True)
class LogarithmicLaw:
    """S(t) = c2 / ln(c1 c2 t + c0); the degenerate-exponential family."""

    c1: float
    c2: float
    c0: float

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.c0 <= 1.0:
            raise ParameterError(
                "logarithmic law needs c1, c2 > 0 and c0 > 1 for positivity")

    def evaluate(self, t):
        return self.c2 / np.log(self.c1 * self.c2 * np.asarray(t, dtype=float) + self.c0)

    def hinv(self, s):
        s = np.asarray(s, dtype=float)
        return self.c1 * s * s * np.exp(-self.c2 / s)


DecayLaw = Union[ExponentialLaw, AlgebraicOriginLaw, AlgebraicInfinityLaw,
                 LogarithmicLaw]


# ---------------------------------------------------------------------------
# majorant machinery

def construct_h(kind: FeedbackKind) -> Callable[[np.ndarray], np.ndarray]:
    """Concave majorant h with h(s g(s)) >= s^2 + g(s)^2 for |s| <= 1.

    Closed forms cover the power-like catalog; the degenerate exponential
    gets a numerically built least concave majorant with the same property.
    """
    if isinstance(kind, Linear):
        return lambda s: 2.0 * np.asarray(s, dtype=float)
    if isinstance(kind, (SqrtOdd, Power)):
        theta = kind.order_at_origin
        exponent = 2.0 * theta / (theta + 1.0) if theta < 1.0 else 2.0 / (theta + 1.0)
        if theta == 1.0:
            return lambda s: 2.0 * np.asarray(s, dtype=float)
        return lambda s: 2.0 * np.asarray(s, dtype=float) ** exponent
    if isinstance(kind, Piecewise):
        r = kind.order_at_origin  # larger branch order; exponent 2/(r+1)
        exponent = 2.0 / (r + 1.0)
        return lambda s: 2.0 * np.asarray(s, dtype=float) ** exponent
    if isinstance(kind, ExpDegenerate):
        return _expdeg_majorant()
    raise UnsupportedLawError(f"no majorant construction for {kind!r}")


def _expdeg_majorant() -> Callable[[np.ndarray], np.ndarray]:
    """Concave majorant for the degenerate exponential.

    With x = s g(s) one has -ln x = 1/s^2 - 4 ln s <= 5/s^2 on (0, 1], so
    -10/ln(x) >= 2 s^2 >= s^2 + g(s)^2 there.  The map -10/ln(x) vanishes
    at 0, increases, and is concave up to e^{-2}; past that point it is
    continued by its tangent line, which keeps it concave while still
    majorizing the (bounded by 2) target.  A piecewise envelope built from
    samples cannot work here: the abscissa spans hundreds of orders of
    magnitude and underflows long before s does.
    """
    x_star = math.exp(-2.0)
    slope = 10.0 / (4.0 * x_star)

    def h(arg):
        arr = np.asarray(arg, dtype=float)
        vals = np.atleast_1d(arr).copy()
        out = np.zeros_like(vals)
        low = (vals > 0.0) & (vals <= x_star)
        out[low] = -10.0 / np.log(vals[low])
        high = vals > x_star
        out[high] = 5.0 + slope * (vals[high] - x_star)
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)

    return h


def h_tilde(order: float, p0: float) -> Callable[[np.ndarray], np.ndarray]:
    """Power map s^e with e = (p0 - 2 max(order, 1)) / (p0 - 1 - order).

    Valid only under the integrability condition p0 > 2 max(order, 1); the
    exponent then lies in (0, 1].
    """
    bound = 2.0 * max(order, 1.0)
    if not p0 > bound:
        raise ParameterError(
            f"index p0 = {p0} must exceed 2*max(order, 1) = {bound}")
    e = (p0 - bound) / (p0 - 1.0 - order)

    def mapping(s):
        return np.asarray(s, dtype=float) ** e

    mapping.exponent = e
    return mapping


# ---------------------------------------------------------------------------
# the decay ODE

def ode_decay(S0: float, Hinv: Callable[[float], float], delta: float,
              T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Integrate S' = -Hinv((1 - delta) S) with the classical 4-stage scheme.

    The trajectory is clamped at zero: a step that would cross below zero
    appends the absorbing value 0 and terminates the series.
    """
    if S0 <= 0:
        raise ParameterError(f"initial value must be positive, got {S0}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")

    def rate(s: float) -> float:
        return -float(Hinv((1.0 - delta) * max(s, 0.0)))

    n = int(round(T / dt))
    ts = [0.0]
    vals = [float(S0)]
    s = float(S0)
    for i in range(1, n + 1):
        k1 = rate(s)
        k2 = rate(s + 0.5 * dt * k1)
        k3 = rate(s + 0.5 * dt * k2)
        k4 = rate(s + dt * k3)
        s_next = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ts.append(i * dt)
        if s_next < 0.0:
            vals.append(0.0)
            break
        s = min(s_next, s)  # monotone ODE: guard roundoff-level upticks
        vals.append(s)
    return np.asarray(ts[:len(vals)]), np.asarray(vals)


# ---------------------------------------------------------------------------
# predicted families

@dataclass(frozen=True)
class LawFamily:
    """A decay-law family with the constants left open as fit parameters."""

    name: str
    make: Callable[..., DecayLaw]

    def instantiate(self, **params) -> DecayLaw:
        return self.make(**params)


def predicted_law(kind: FeedbackKind, regime: str,
                  p0: float | None = None) -> LawFamily:
    """Decay family predicted for a feedback degenerating in ``regime``.

    ``regime`` is "origin" (feedback linearly bounded at infinity) or
    "infinity" (linearly bounded at the origin, needs p0).  Constants c, c0
    are not predicted; callers fit or choose them.
    """
    if regime not in ("origin", "infinity"):
        raise UnsupportedLawError(f"unknown regime {regime!r}")
    if isinstance(kind, Linear):
        return LawFamily("exponential", lambda c=1.0, s0=1.0: ExponentialLaw(c=c, s0=s0))
    order = kind.order_at_origin if regime == "origin" else kind.order_at_infinity
    if regime == "origin":
        if isinstance(kind, ExpDegenerate):
            return LawFamily(
                "logarithmic",
                lambda c1=1.0, c2=1.0, c0=math.e: LogarithmicLaw(c1=c1, c2=c2, c0=c0))
        if order == 1.0:
            return LawFamily("exponential",
                             lambda c=1.0, s0=1.0: ExponentialLaw(c=c, s0=s0))
        return LawFamily(
            "algebraic-origin",
            lambda c=1.0, c0=1.0, exponent=order: AlgebraicOriginLaw(
                exponent=exponent, c=c, c0=c0))
    # regime == "infinity"
    if isinstance(kind, ExpDegenerate):
        raise UnsupportedLawError(
            "the degenerate exponential has no closed form at infinity")
    if order == 1.0:
        return LawFamily("exponential",
                         lambda c=1.0, s0=1.0: ExponentialLaw(c=c, s0=s0))
    if p0 is None:
        raise UnsupportedLawError(
            "the infinity regime needs the integrability index p0")
    return LawFamily(
        "algebraic-infinity",
        lambda c=1.0, c0=1.0, exponent=order, q=p0: AlgebraicInfinityLaw(
            exponent=exponent, q=q, c=c, c0=c0))


# ---------------------------------------------------------------------------
# fitting observed decay

@dataclass(frozen=True)
class FitResult:
    best: str
    rate_or_exponent: float
    r2_exp: float
    r2_alg: float
    n_points: int


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least squares y ~ a + b x; returns (a, b, R^2)."""
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-28 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2


def fit_decay(times: np.ndarray, energies: np.ndarray,
              tail_fraction: float = 0.5) -> FitResult:
    """Classify a decay series as exponential or algebraic on its tail.

    Fits log E against t and against log(t + 1) over the trailing
    ``tail_fraction`` of the series and keeps the better R^2.  For an
    exponential winner, ``rate_or_exponent`` is the positive decay rate k
    of E ~ exp(-k t); for an algebraic winner it is the signed exponent p
    of E ~ (t + 1)^p.  Nonpositive energies shrink the window to the
    leading positive run.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise FitError("times and energies must be matching 1-d arrays")
    if not 0.0 < tail_fraction <= 1.0:
        raise FitError(f"tail fraction must lie in (0, 1], got {tail_fraction}")
    start = len(t) - max(2, int(math.ceil(tail_fraction * len(t))))
    t_win = t[start:]
    e_win = e[start:]
    bad = np.flatnonzero(e_win <= 0.0)
    if bad.size:
        t_win = t_win[:bad[0]]
        e_win = e_win[:bad[0]]
    if len(e_win) < 10:
        raise FitError(
            f"need at least 10 positive-energy points in the tail window, "
            f"got {len(e_win)}")
    log_e = np.log(e_win)
    _, slope_exp, r2_exp = _linear_fit(t_win, log_e)
    _, slope_alg, r2_alg = _linear_fit(np.log(t_win + 1.0), log_e)
    if r2_exp >= r2_alg:
        return FitResult(best="exponential", rate_or_exponent=-slope_exp,
                         r2_exp=r2_exp, r2_alg=r2_alg, n_points=len(e_win))
    return FitResult(best="algebraic", rate_or_exponent=slope_alg,
                     r2_exp=r2_exp, r2_alg=r2_alg, n_points=len(e_win))


def fit_report_row(label: str, fit: FitResult) -> str:
    """One CSV row of the comparison report."""
    return (f"{label},{fit.best},{fit.rate_or_exponent:.17g},"
            f"{fit.r2_exp:.17g},{fit.r2_alg:.17g}")
