"""Thresholds, the drift function F, the free energy Psi_1 and fixpoint stability
for the mean-field Potts model under Swendsen-Wang dynamics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from scipy.optimize import brentq

# equality band for comparing B against a threshold
REGIME_TOL = 1e-9


class DomainError(ValueError):
    """Argument outside the domain of an analytic function."""


class NumericError(RuntimeError):
    """A root finder or bracket failed."""


@dataclass(frozen=True)
class ModelParams:
    q: int
    B: float
    n: Optional[int] = None

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise DomainError(f"q must be an integer >= 2, got {self.q}")
        if not (self.B > 0 and math.isfinite(self.B)):
            raise DomainError(f"B must be positive and finite, got {self.B}")
        if self.n is not None and (int(self.n) != self.n or self.n < 1):
            raise DomainError(f"n must be a positive integer, got {self.n}")

    @property
    def p(self) -> float:
        """Edge retention probability B/n."""
        if self.n is None:
            raise DomainError("p requires n")
        return self.B / self.n


@dataclass(frozen=True)
class Thresholds:
    b_u: float
    b_o: float
    b_rc: float


@dataclass
class FixpointReport:
    q: int
    B: float
    regime: str
    uniform: dict
    majority: Optional[dict] = None
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------- thresholds

def _check_q(q):
    if int(q) != q:
        raise DomainError(f"q must be an integer, got {q}")
    if q == 2:
        raise DomainError("q = 2 (Ising): all three thresholds coincide at B = 2")
    if q < 3:
        raise DomainError(f"thresholds need q >= 3, got {q}")


def _bu_objective(z, q):
    return z + q * z / math.expm1(z)


def _bu_objective_prime(z, q):
    em1 = math.expm1(z)
    return 1.0 + q / em1 - q * z * (em1 + 1.0) / (em1 * em1)


def threshold_bu_minimizer(q: int) -> float:
    """Minimizer z0 of z + qz/(e^z - 1) over z > 0."""
    _check_q(q)
    lo, hi = 1e-6, 1.0
    while _bu_objective_prime(hi, q) < 0:
        hi *= 2.0
    return brentq(_bu_objective_prime, lo, hi, args=(q,), xtol=1e-15, rtol=1e-15, maxiter=500)


def threshold_bu(q: int) -> float:
    z0 = threshold_bu_minimizer(q)
    return _bu_objective(z0, q)


def bu_residual(q: int) -> float:
    """Residual of -z^2(q-1) + zB(q-2) + B(B-q) at the minimizer; zero in exact arithmetic."""
    z = threshold_bu_minimizer(q)
    B = _bu_objective(z, q)
    return -z * z * (q - 1) + z * B * (q - 2) + B * (B - q)


def threshold_bo(q: int) -> float:
    _check_q(q)
    return 2.0 * (q - 1) * math.log(q - 1) / (q - 2)


def threshold_brc(q: int) -> float:
    _check_q(q)
    return float(q)


def thresholds(q: int) -> Thresholds:
    return Thresholds(threshold_bu(q), threshold_bo(q), threshold_brc(q))


def resolve_b(q: int, value) -> float:
    """Accept a float or one of the keywords bu / bo / brc."""
    if isinstance(value, str):
        key = value.strip().lower()
        table = {"bu": threshold_bu, "bo": threshold_bo, "brc": threshold_brc}
        if key in table:
            return table[key](q)
        return float(value)
    return float(value)


# ---------------------------------------------------------------- x and F

def _psi(x):
    # -log(1-x)/x, increasing from 1 at x=0 to infinity at x=1
    if x < 1e-4:
        return 1.0 + x * (0.5 + x * (1.0 / 3.0 + x * (0.25 + x * 0.2)))
    return -math.log1p(-x) / x


def _psi_prime(x):
    if x < 1e-4:
        return 0.5 + x * (2.0 / 3.0 + x * (0.75 + x * 0.8))
    return (x / (1.0 - x) + math.log1p(-x)) / (x * x)


def _solve_psi(c):
    """Root x in (0,1) of -log(1-x)/x = c for c > 1, i.e. of x + exp(-c x) = 1."""
    if c > 40.0:
        # x = 1 - exp(-c x) with x within 1e-17 of one
        return 1.0 - math.exp(-c * (1.0 - math.exp(-c)))
    if c - 1.0 <= 1e-6:
        # tangency at x = 0: series inversion of 1 + x/2 + x^2/3 = c
        d = c - 1.0
        x = 2.0 * d - (8.0 / 3.0) * d * d
        for _ in range(3):
            x -= (_psi(x) - c) / _psi_prime(x)
        return x
    lo, hi = 0.0, 1.0
    # hi bound: x < 1 - exp(-c); shrink for a tighter start
    hi = min(1.0, 1.0 - math.exp(-c) + 1e-15)
    lo = min(2.0 * (c - 1.0) / (c * c), hi) * 0.5
    if _psi(lo) > c:
        lo = 0.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if mid >= 1.0 or _psi(mid) > c:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        step = (_psi(x) - c) / _psi_prime(x)
        xn = x - step
        if lo - 1e-13 <= xn <= hi + 1e-13 and xn < 1.0:
            x = xn
    return x


def solve_x(z: float, B: float) -> float:
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"z must lie in [0,1], got {z}")
    if not B > 0:
        raise DomainError(f"B must be positive, got {B}")
    c = z * B
    if c <= 1.0:
        return 0.0
    return _solve_psi(c)


def beta_root_c(c: float) -> float:
    """Positive root of x + exp(-c x) = 1 for c > 1."""
    if not c > 1.0:
        raise DomainError(f"c must exceed 1, got {c}")
    return _solve_psi(c)


def _check_z(z, q):
    if not (1.0 / q - 1e-15 <= z <= 1.0 + 1e-15):
        raise DomainError(f"z must lie in [1/q, 1], got {z}")


def drift_f(z: float, params: ModelParams) -> float:
    q, B = params.q, params.B
    _check_z(z, q)
    z = min(max(z, 1.0 / q), 1.0)
    return 1.0 / q + (1.0 - 1.0 / q) * z * solve_x(z, B)


def giant_fraction_g(z: float, B: float) -> float:
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"z must lie in [0,1], got {z}")
    return z * solve_x(z, B)


def _d_of_x(x):
    # x + (1-x) log(1-x) = sum_{k>=2} x^k / (k(k-1))
    if x < 1e-3:
        return x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 12.0 + x * (1.0 / 20.0 + x / 30.0))))
    return x + (1.0 - x) * math.log1p(-x)


def _m_of_x(x):
    # 2x + (2-x) log(1-x) = sum_{k>=3} (2-k) x^k / (k(k-1))
    if x < 1e-2:
        s = 0.0
        xk = x * x
        for k in range(3, 14):
            xk *= x
            s += (2 - k) * xk / (k * (k - 1))
        return s
    return 2.0 * x + (2.0 - x) * math.log1p(-x)


def _one_sided(z, params, side):
    B = params.B
    if z < 1.0 / B:
        if side == "left" or side == "right":
            return "flat"
        raise DomainError("derivative on the flat piece z <= 1/B needs side='left' or 'right'")
    if z == 1.0 / B or abs(z - 1.0 / B) <= 1e-15:
        if side == "left":
            return "flat"
        if side == "right":
            return "limit"
        raise DomainError("derivative at z = 1/B needs side='left' or 'right'")
    return None


def drift_f_prime(z: float, params: ModelParams, side: Optional[str] = None) -> float:
    q, B = params.q, params.B
    kind = _one_sided(z, params, side)
    if kind == "flat":
        return 0.0
    if kind == "limit":
        return 2.0 * (q - 1) / q
    x = solve_x(z, B)
    return (q - 1) * x * x / (q * _d_of_x(x))


def drift_f_second(z: float, params: ModelParams, side: Optional[str] = None) -> float:
    q, B = params.q, params.B
    kind = _one_sided(z, params, side)
    if kind == "flat":
        return 0.0
    if kind == "limit":
        return -4.0 * B * (q - 1) / (3.0 * q)
    x = solve_x(z, B)
    d = _d_of_x(x)
    return (q - 1) * B * (1.0 - x) * _m_of_x(x) * x ** 3 / (q * d ** 3)


# ---------------------------------------------------------------- Psi_1

def _check_a(a):
    if not (0.0 < a < 1.0):
        raise DomainError(f"a must lie in (0,1), got {a}")


def psi1(a: float, params: ModelParams) -> float:
    _check_a(a)
    q, B = params.q, params.B
    return (-a * math.log(a) - (1 - a) * math.log((1 - a) / (q - 1))
            + 0.5 * B * (a * a + (1 - a) ** 2 / (q - 1)))


def psi1_prime(a: float, params: ModelParams) -> float:
    _check_a(a)
    q, B = params.q, params.B
    return -math.log((q - 1) * a / (1 - a)) + B * (a - (1 - a) / (q - 1))


def psi1_second(a: float, params: ModelParams) -> float:
    _check_a(a)
    q, B = params.q, params.B
    return B * q / (q - 1) - 1.0 / (a * (1 - a))


# ---------------------------------------------------------------- fixpoints

def majority_fixpoint(params: ModelParams) -> Optional[float]:
    q, B = params.q, params.B
    if q < 3:
        raise DomainError("majority fixpoint needs q >= 3")
    bu = threshold_bu(q)
    disc = 0.25 - (q - 1) / (q * B)
    if B < bu - REGIME_TOL or disc < 0:
        return None
    a0 = 0.5 + math.sqrt(max(disc, 0.0))
    if abs(B - bu) <= REGIME_TOL:
        return a0
    f = lambda a: psi1_prime(a, params)
    lo, hi = a0, 1.0 - 1e-12
    if f(lo) < 0:
        return None
    if f(hi) > 0:
        raise NumericError(f"no sign change of psi1' on [{lo}, {hi}] for q={q}, B={B}")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    for _ in range(3):
        s = psi1_second(a, params)
        if s == 0:
            break
        an = a - f(a) / s
        if lo - 1e-12 <= an <= hi + 1e-12:
            a = an
    return a


def regime_of(q: int, B: float) -> tuple[str, list]:
    th = thresholds(q)
    notes = []
    for name, val in (("B=B_u", th.b_u), ("B=B_rc", th.b_rc)):
        if abs(B - val) <= REGIME_TOL:
            if B != val:
                notes.append(f"B within {REGIME_TOL:g} of {name[2:]} = {val!r}; classified as boundary")
            return name, notes
    if B < th.b_u:
        return "B<B_u", notes
    if B < th.b_rc:
        return "B_u<B<B_rc", notes
    return "B>B_rc", notes


def classify_fixpoints(params: ModelParams) -> FixpointReport:
    q, B = params.q, params.B
    if q == 2:
        return FixpointReport(q, B, "ising: all thresholds equal",
                              uniform={"value": 0.5, "class": "n/a", "jacobian": float("nan")})
    regime, notes = regime_of(q, B)
    u = 1.0 / q

    if regime in ("B<B_u", "B=B_u", "B_u<B<B_rc"):
        uniform = {"value": u, "class": "attractive", "jacobian": 0.0}
    elif regime == "B=B_rc":
        uniform = {"value": u, "class": "repulsive", "jacobian": 2.0 * (q - 1) / q}
    else:
        uniform = {"value": u, "class": "not-a-fixpoint",
                   "jacobian": drift_f_prime(u, params)}

    majority = None
    a = majority_fixpoint(params)
    if a is not None:
        jac = drift_f_prime(a, params)
        hess = psi1_second(a, params)
        if regime == "B=B_u":
            cls = "repulsive (not jacobian repulsive)"
        elif jac < 1.0:
            cls = "attractive"
        else:
            cls = "repulsive"
        if regime != "B=B_u" and (1.0 - jac > 0) != (-hess > 0):
            notes.append(f"sign mismatch: F'(a)-1={jac - 1:.3e}, psi1''(a)={hess:.3e}")
        majority = {"a": a, "b": (1.0 - a) / (q - 1), "class": cls,
                    "jacobian": jac, "psi1_second": hess}
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return FixpointReport(q, B, regime, uniform, majority, notes)
