"""Piecewise Lyapunov potential G on [1/q, 1] at the uniqueness threshold, and a
Monte Carlo check of its one-step drift under the count-level chain."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from .analytic import (DomainError, ModelParams, drift_f, drift_f_prime, drift_f_second,
                       majority_fixpoint, threshold_bu)
from .dynamics import sw_step_counts

# L = 100, L' = 10 need n^(1/3) > L / (a - 1/B) ~ 450, i.e. n > 9e7 for q = 3;
# these defaults keep the knots inside (1/B, 1) from n = 1e4 on.
DEFAULT_L = 4.0
DEFAULT_LP = 0.5
TABLE_NODES = 512


class ConstructionError(ValueError):
    """Knot ordering or an internal consistency check failed."""


@dataclass
class _Table:
    lo: float
    hi: float
    spline: CubicHermiteSpline
    checksum: str


@dataclass
class PotentialSpec:
    q: int
    n: int
    B: float
    L: float
    Lp: float
    a: float
    knots: dict
    constants: dict
    offsets: list
    g0_coeffs: tuple
    g0_kind: str
    g2_pieces: list = field(repr=False)
    g3_coeffs: tuple = ()
    tables: dict = field(default_factory=dict, repr=False)
    checks: dict = field(default_factory=dict)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.q, self.B, self.n)

    def to_json(self) -> str:
        return json.dumps({
            "q": self.q, "n": self.n, "B": self.B, "L": self.L, "Lp": self.Lp, "a": self.a,
            "knots": self.knots, "constants": self.constants, "offsets": self.offsets,
            "g0": {"kind": self.g0_kind, "coeffs": list(self.g0_coeffs)},
            "g3_coeffs": list(self.g3_coeffs),
            "tables": {k: t.checksum for k, t in self.tables.items()},
            "checks": self.checks,
        }, sort_keys=True, indent=1)


@dataclass
class DriftEstimate:
    zeta_grid: list
    delta_g_mean: list
    std_err: list
    eps: float
    skipped: dict = field(default_factory=dict)


# ---------------------------------------------------------------- G1 and G4

def _gap(z, P):
    return z - drift_f(z, P)


def _h1(z, P):
    return 1.0 / _gap(z, P)


def _h2(z, P, side=None):
    g = _gap(z, P)
    return (drift_f_prime(z, P, side) - 1.0) / (g * g)


def _h3(z, P, side=None):
    g = _gap(z, P)
    fp = drift_f_prime(z, P, side)
    return (2.0 * (fp - 1.0) ** 2 + drift_f_second(z, P, side) * g) / g ** 3


def _chebyshev_nodes(lo, hi, k):
    t = np.cos(np.pi * np.arange(k) / (k - 1))[::-1]
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
    x[0], x[-1] = lo, hi
    return x


def _antiderivative_table(lo, hi, anchor, P):
    """Antiderivative of 1/(z - F(z)) on [lo, hi], zero at `anchor` (lo or hi)."""
    x = _chebyshev_nodes(lo, hi, TABLE_NODES)
    pieces = np.empty(x.size - 1)
    for i in range(x.size - 1):
        pieces[i], _ = quad(_h1, x[i], x[i + 1], args=(P,), epsabs=1e-13, epsrel=1e-10)
    y = np.concatenate([[0.0], np.cumsum(pieces)])
    if anchor == hi:
        y -= y[-1]
    side = "right" if lo == 1.0 / P.B else None
    dy = np.array([1.0 / _gap(v, P) for v in x])
    if side:
        dy[0] = 1.0 / _gap(lo, P)
    spline = CubicHermiteSpline(x, y, dy)
    digest = hashlib.sha256(np.concatenate([x, y, dy]).tobytes()).hexdigest()[:16]
    return _Table(lo, hi, spline, digest)


# ---------------------------------------------------------------- G2 helper

def _g2_pieces(L, Lp, Dm1, Dm2, Dmid1, Dmid2):
    """Piecewise polynomials (in t = n^(1/3)(z - a)) for h, g' and g on [-L, -Lp]."""
    K1 = L - Dm1 / (3.0 * Dm2)
    K2 = Lp + Dmid1 / (3.0 * Dmid2)
    if not (-L < -K1 < -K2 < -Lp):
        raise ConstructionError(
            f"need -L < -K1 < -K2 < -L' but got L={L}, K1={K1}, K2={K2}, L'={Lp}")
    bounds = [(-L, -K1), (-K1, -K2), (-K2, -Lp)]
    pieces = []
    gp0, g0 = Dm1, 0.0
    for k, (lo, hi) in enumerate(bounds):
        # polynomials in the local variable tau = t - lo, for conditioning
        p1 = Polynomial([lo + K1, 1.0])
        p2 = Polynomial([lo + K2, 1.0])
        if k == 0:
            h = Dm2 / (L - K1) ** 2 * p1 ** 2
        elif k == 1:
            h = 100.0 * (Dmid1 - Dm1) / (3.0 * (K1 - K2) ** 5) * p1 ** 2 * p2 ** 2
        else:
            h = -Dmid2 / (K2 - Lp) ** 2 * p2 ** 2
        gp = h.integ() + gp0
        g = gp.integ() + g0
        pieces.append((lo, hi, h, gp, g))
        gp0, g0 = gp(hi - lo), g(hi - lo)
    total = gp0 - Dm1
    if abs(total - (Dmid1 - Dm1)) > 1e-8 * max(1.0, abs(Dmid1 - Dm1)):
        raise ConstructionError(f"integral of h is {total}, expected {Dmid1 - Dm1}")
    return K1, K2, pieces


# ---------------------------------------------------------------- construction

def build_potential(q: int, n: int, L: float = DEFAULT_L, Lp: float = DEFAULT_LP) -> PotentialSpec:
    B = threshold_bu(q)
    P = ModelParams(q, B)
    a = majority_fixpoint(P)
    s = n ** (-1.0 / 3.0)
    zb = 1.0 / B
    zm, zmid, zp = a - L * s, a - Lp * s, a + L * s
    if not (1.0 / q < zb < zm):
        raise ConstructionError(f"need 1/B < z- but 1/B={zb:.6g}, z-={zm:.6g}; n too small for L={L}")
    if not (Lp < L):
        raise ConstructionError(f"need L' < L, got L={L}, L'={Lp}")
    if not zp < 1.0:
        raise ConstructionError(f"need z+ < 1 but z+={zp:.6g}; n too small for L={L}")

    t1 = _antiderivative_table(zb, zm, zb, P)
    t4 = _antiderivative_table(zp, 1.0, zp, P)

    d1m, d2m = _h1(zm, P), _h2(zm, P)
    d1p, d2p = _h1(zp, P), _h2(zp, P)
    n23 = n ** (2.0 / 3.0)
    Dm1, Dm2 = d1m / n23, d2m / n
    Dp1, Dp2 = d1p / n23, -d2p / n
    Dmid1 = Dp1 + Dp2 * (L + Lp)
    Dmid2 = Dp2
    u2 = -Dp2 / 2.0
    u1 = Dp1 - 2.0 * u2 * L

    K1, K2, pieces = _g2_pieces(L, Lp, Dm1, Dm2, Dmid1, Dmid2)

    # G0: cubic in (z - 1/B) matching three right derivatives of G1 at 1/B
    c1 = _h1(zb, P)
    c2 = _h2(zb, P, "right")
    c3 = _h3(zb, P, "right")
    g0_kind = "cubic"
    g0_coeffs = (0.0, c1, c2 / 2.0, c3 / 6.0)
    sgrid = np.linspace(1.0 / q - zb, 0.0, 2001)
    if np.any(c1 + c2 * sgrid + 0.5 * c3 * sgrid ** 2 <= 0):
        # derivative of the form c1*exp(k1 s + k2 s^2/2): positive by construction
        g0_kind = "exp"
        k1 = c2 / c1
        g0_coeffs = (c1, k1, c3 / c1 - k1 * k1)

    spec = PotentialSpec(
        q=q, n=n, B=B, L=L, Lp=Lp, a=a,
        knots={"u": 1.0 / q, "1/B": zb, "z-": zm, "zm": zmid, "z+": zp, "one": 1.0},
        constants={"D-'": Dm1, "D-''": Dm2, "D+'": Dp1, "D+''": Dp2, "Dm'": Dmid1,
                   "Dm''": Dmid2, "K1": K1, "K2": K2, "u1": u1, "u2": u2,
                   "c": -drift_f_second(a, P) / 2.0},
        offsets=[0.0] * 5, g0_coeffs=g0_coeffs, g0_kind=g0_kind,
        g2_pieces=pieces, g3_coeffs=(u1, u2), tables={"G1": t1, "G4": t4},
    )
    # offsets so that G(1/q) = 0 and G is continuous
    w = [0.0] * 5
    w[0] = -_piece_value(spec, 0, 1.0 / q)
    w[1] = w[0] + _piece_value(spec, 0, zb) - _piece_value(spec, 1, zb)
    w[2] = w[1] + _piece_value(spec, 1, zm) - _piece_value(spec, 2, zm)
    w[3] = w[2] + _piece_value(spec, 2, zmid) - _piece_value(spec, 3, zmid)
    w[4] = w[3] + _piece_value(spec, 3, zp) - _piece_value(spec, 4, zp)
    spec.offsets = w
    spec.checks = potential_checks(spec)
    return spec


# ---------------------------------------------------------------- evaluation

def _piece_index(spec, z):
    k = spec.knots
    if z < k["1/B"]:
        return 0
    if z < k["z-"]:
        return 1
    if z < k["zm"]:
        return 2
    if z < k["z+"]:
        return 3
    return 4


def _g0_eval(spec, s, deriv):
    if spec.g0_kind == "cubic":
        poly = Polynomial(spec.g0_coeffs)
        return poly.deriv(deriv)(s) if deriv else poly(s)
    c1, k1, k2 = spec.g0_coeffs
    e = lambda v: c1 * math.exp(k1 * v + 0.5 * k2 * v * v)
    if deriv == 1:
        return e(s)
    if deriv == 2:
        return e(s) * (k1 + k2 * s)
    return -quad(e, s, 0.0, epsabs=1e-13, epsrel=1e-12)[0]


def _g2_eval(spec, t, deriv):
    for lo, hi, h, gp, g in spec.g2_pieces:
        if t <= hi:
            return (g, gp, h)[deriv](t - lo)
    lo, hi, h, gp, g = spec.g2_pieces[-1]
    return (g, gp, h)[deriv](t - lo)


def _piece_value(spec, j, z, deriv=0):
    n = spec.n
    P = ModelParams(spec.q, spec.B)
    if j == 0:
        return _g0_eval(spec, z - spec.knots["1/B"], deriv)
    if j in (1, 4):
        if deriv == 1:
            return _h1(z, P)
        if deriv == 2:
            side = "right" if z == spec.knots["1/B"] else None
            return _h2(z, P, side)
        t = spec.tables["G1" if j == 1 else "G4"]
        return float(t.spline(z))
    if j == 2:
        c = n ** (1.0 / 3.0)
        return c ** (1 + deriv) * _g2_eval(spec, c * (z - spec.a), deriv)
    u1, u2 = spec.g3_coeffs
    d = z - spec.a
    if deriv == 0:
        return u1 * n ** (2.0 / 3.0) * d + u2 * n * d * d
    if deriv == 1:
        return u1 * n ** (2.0 / 3.0) + 2.0 * u2 * n * d
    return 2.0 * u2 * n


def _check_dom(spec, z):
    if not (1.0 / spec.q - 1e-12 <= z <= 1.0 + 1e-12):
        raise DomainError(f"z must lie in [1/q, 1], got {z}")


def eval_g(spec: PotentialSpec, z: float) -> float:
    _check_dom(spec, z)
    j = _piece_index(spec, z)
    return _piece_value(spec, j, z) + spec.offsets[j]


def eval_g_prime(spec: PotentialSpec, z: float) -> float:
    _check_dom(spec, z)
    return _piece_value(spec, _piece_index(spec, z), z, 1)


def eval_g_second(spec: PotentialSpec, z: float) -> float:
    _check_dom(spec, z)
    return _piece_value(spec, _piece_index(spec, z), z, 2)


def eval_g_many(spec: PotentialSpec, z: np.ndarray) -> np.ndarray:
    """Vectorized eval_g (values only)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    k = spec.knots
    edges = [k["u"], k["1/B"], k["z-"], k["zm"], k["z+"], np.inf]
    idx = np.searchsorted(edges, z, side="right") - 1
    idx = np.clip(idx, 0, 4)
    n = spec.n
    for j in range(5):
        sel = idx == j
        if not sel.any():
            continue
        zz = z[sel]
        if j == 0:
            if spec.g0_kind == "cubic":
                v = Polynomial(spec.g0_coeffs)(zz - k["1/B"])
            else:
                v = np.array([_g0_eval(spec, s, 0) for s in zz - k["1/B"]])
        elif j in (1, 4):
            v = spec.tables["G1" if j == 1 else "G4"].spline(zz)
        elif j == 2:
            c = n ** (1.0 / 3.0)
            t = c * (zz - spec.a)
            v = np.empty_like(t)
            done = np.zeros(t.shape, bool)
            last = len(spec.g2_pieces) - 1
            for i, (lo, hi, h, gp, g) in enumerate(spec.g2_pieces):
                m = ~done & ((t <= hi) | (i == last))
                v[m] = g(t[m] - lo)
                done |= m
            v = c * v
        else:
            u1, u2 = spec.g3_coeffs
            d = zz - spec.a
            v = u1 * n ** (2.0 / 3.0) * d + u2 * n * d * d
        out[sel] = v + spec.offsets[j]
    return out


# ---------------------------------------------------------------- checks

def potential_checks(spec: PotentialSpec, grid: int = 10_000) -> dict:
    k = spec.knots
    out = {}
    worst = 0.0
    for name, j in (("1/B", 0), ("z-", 1), ("zm", 2), ("z+", 3)):
        z = k[name]
        for d in (0, 1, 2):
            left = _piece_value(spec, j, z, d) + (spec.offsets[j] if d == 0 else 0.0)
            right = _piece_value(spec, j + 1, z, d) + (spec.offsets[j + 1] if d == 0 else 0.0)
            rel = abs(left - right) / max(1.0, abs(left), abs(right))
            out[f"jump_{name}_d{d}"] = rel
            worst = max(worst, rel)
    out["max_knot_jump"] = worst
    zs = np.linspace(1.0 / spec.q, 1.0, grid)
    gp = np.array([eval_g_prime(spec, z) for z in zs])
    out["min_g_prime"] = float(gp.min())
    out["g_at_u"] = eval_g(spec, 1.0 / spec.q)
    out["g_max"] = eval_g(spec, 1.0)
    out["g_max_over_n13"] = out["g_max"] / spec.n ** (1.0 / 3.0)
    c = spec.constants["c"]
    L = spec.L
    out["limit_Dm1"] = spec.constants["D-'"] * c * L * L
    out["limit_Dm2"] = spec.constants["D-''"] * c * L ** 3 / 2.0
    out["limit_Dp1"] = spec.constants["D+'"] * c * L * L
    out["limit_Dp2"] = spec.constants["D+''"] * c * L ** 3 / 2.0
    # h sign structure and nonnegative running integral
    K2 = spec.constants["K2"]
    ts = np.linspace(-L, -spec.Lp, 4001)
    hv = np.array([_g2_eval(spec, t, 2) for t in ts])
    gpv = np.array([_g2_eval(spec, t, 1) for t in ts])
    out["h_sign_ok"] = bool(np.all(hv[ts <= -K2] >= -1e-15) and np.all(hv[ts >= -K2] <= 1e-15))
    out["h_integral_min"] = float((gpv - spec.constants["D-'"]).min())
    return out


# ---------------------------------------------------------------- drift

def drift_start(q: int, n: int, zeta: int) -> np.ndarray:
    rest = n - zeta
    counts = np.full(q, 0, dtype=np.int64)
    counts[0] = zeta
    others = np.full(q - 1, rest // (q - 1), dtype=np.int64)
    others[: rest % (q - 1)] += 1
    counts[1:] = others
    return counts


def verify_drift(spec: PotentialSpec, zeta_grid, reps: int, rng: np.random.Generator,
                 eps: float = 0.1, lower: bool = False) -> DriftEstimate:
    """Mean and standard error of G(S'/n) - G(zeta/n) after one step from
    (zeta, balanced rest). With lower=True the precondition is zeta >= n/q."""
    q, n, B = spec.q, spec.n, spec.B
    P = ModelParams(q, B, n)
    grid, means, errs, skipped = [], [], [], {}
    for zeta in zeta_grid:
        zeta = int(zeta)
        start = drift_start(q, n, zeta)
        reason = None
        if lower:
            if zeta < n / q:
                reason = f"zeta={zeta} below n/q"
        else:
            if zeta < (1.0 + eps) * n / B:
                reason = f"zeta/n={zeta / n:.4f} below (1+eps)/B={(1 + eps) / B:.4f}"
            elif np.any(start[1:] > (1.0 - eps) * n / B):
                reason = "remaining colors are not eps-light"
        if reason:
            skipped[zeta] = reason
            continue
        s_next = np.empty(reps)
        for r in range(reps):
            s_next[r] = sw_step_counts(start, P, rng).max()
        dg = eval_g_many(spec, s_next / n) - eval_g(spec, zeta / n)
        grid.append(zeta)
        means.append(float(dg.mean()))
        errs.append(float(dg.std(ddof=1) / math.sqrt(reps)))
    return DriftEstimate(grid, means, errs, eps, skipped)
