"""Replicated estimators (coupling time, hitting times, ball escapes), scaling
fits and figure tables, with deterministic per-replica random streams."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .analytic import (ModelParams, classify_fixpoints, drift_f, majority_fixpoint, psi1,
                       psi1_prime)
from .dynamics import (CouplingState, coupled_step_identity, coupled_step_phase_vertices,
                       phase_of, sw_step_counts, sw_step_vertices)

SCHEMA = "swpotts-records/1"
KINDS = ("coupling_time", "hit_uniform", "hit_majority", "escape_probe", "drift_check",
         "figure_psi1", "figure_fdrift")


@dataclass
class ExperimentRecord:
    kind: str
    q: int
    B: float
    n: int
    seed: int
    rep: int
    outcome: float
    censored: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ScalingFit:
    n_values: list
    outcomes: list
    model: str
    exponent_or_slope: float
    r_squared: float
    alternatives: dict = field(default_factory=dict)
    censored: int = 0


# ---------------------------------------------------------------- streams

def _key(*parts) -> int:
    return zlib.crc32(repr(parts).encode())


def rep_seed_sequences(seed: int, kind: str, q: int, B: float, n: int, reps: int):
    """One SeedSequence per replica, a pure function of (seed, kind, q, B, n, rep)."""
    base = _key(kind, q, repr(float(B)), n)
    return [np.random.SeedSequence(entropy=seed, spawn_key=(base, r)) for r in range(reps)]


def _gen(ss) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def _map(fn: Callable, jobs: list, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def default_workers() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------- targets

def _targets(q: int, B: float) -> list[np.ndarray]:
    """Sorted phase vectors the coupling estimator aims at."""
    out = []
    a = majority_fixpoint(ModelParams(q, B)) if q >= 3 else None
    if a is not None:
        out.append(np.array([a] + [(1.0 - a) / (q - 1)] * (q - 1)))
    if a is None or B < q:
        out.append(np.full(q, 1.0 / q))
    return out


def _sorted_dist(counts, target):
    n = counts.sum()
    return float(np.max(np.abs(np.sort(counts)[::-1] / n - target)))


def _near_index(counts, targets, radius):
    for i, t in enumerate(targets):
        if _sorted_dist(counts, t) <= radius:
            return i
    return -1


# ---------------------------------------------------------------- single replicas

def _coupling_one(q, B, n, ss, max_steps, L, starts, pairing):
    rng = _gen(ss)
    P = ModelParams(q, B, n)
    dtype = np.int16
    x = np.zeros(n, dtype=dtype)
    if starts == "identical":
        y = x.copy()
    else:
        y = rng.integers(0, q, size=n).astype(dtype)
    targets = _targets(q, B)
    radius = L / math.sqrt(n)
    phase_attempts = phase_merges = 0
    merged_at = -1
    t = 0
    while t < max_steps:
        if np.array_equal(x, y):
            return t, False, {"phase_attempts": phase_attempts, "phase_merges": phase_merges,
                              "phase_merged_at": merged_at}
        px, py = phase_of(x, q), phase_of(y, q)
        if np.array_equal(px, py):
            cs = coupled_step_identity(CouplingState(x, y), P, rng)
            x, y = cs.x, cs.y
            if merged_at < 0:
                merged_at = t
        else:
            ix = _near_index(px, targets, radius)
            if ix >= 0 and ix == _near_index(py, targets, radius):
                phase_attempts += 1
                x, y, ok = coupled_step_phase_vertices(x, y, P, rng, pairing=pairing)
                phase_merges += ok
            else:
                x = sw_step_vertices(x, P, rng)
                y = sw_step_vertices(y, P, rng)
        t += 1
    return t, True, {"phase_attempts": phase_attempts, "phase_merges": phase_merges,
                     "phase_merged_at": merged_at}


def _hit_uniform_one(q, B, n, ss, delta, max_steps, start):
    rng = _gen(ss)
    P = ModelParams(q, B, n)
    if start == "uniform":
        counts = np.full(q, n // q, dtype=np.int64)
        counts[: n % q] += 1
    else:
        counts = np.zeros(q, dtype=np.int64)
        counts[0] = n
    tol = delta / math.sqrt(n)
    t = 0
    while t < max_steps:
        if np.max(np.abs(counts / n - 1.0 / q)) <= tol:
            return t, False, {"final": counts.tolist()}
        counts = sw_step_counts(counts, P, rng)
        t += 1
    return t, True, {"final": counts.tolist()}


def _center_counts(center: np.ndarray, n: int) -> np.ndarray:
    counts = np.floor(center * n).astype(np.int64)
    rem = n - counts.sum()
    frac = center * n - counts
    counts[np.argsort(-frac, kind="stable")[:rem]] += 1
    return counts


def _escape_one(q, B, n, ss, center, radius, horizon):
    rng = _gen(ss)
    P = ModelParams(q, B, n)
    target = np.sort(np.asarray(center, dtype=float))[::-1]
    counts = _center_counts(target, n)
    worst = 0.0
    for t in range(1, horizon + 1):
        counts = sw_step_counts(counts, P, rng)
        d = _sorted_dist(counts, target)
        worst = max(worst, d)
        if d > radius:
            return 1.0, {"escape_step": t, "max_dist": worst}
    return 0.0, {"escape_step": -1, "max_dist": worst}


# ---------------------------------------------------------------- estimators

def estimate_coupling_time(params: ModelParams, reps: int, seed: int, max_steps: int = 10 ** 6,
                           L: float = 10.0, starts: str = "adversarial",
                           pairing: str = "independent", workers: int = 1) -> list[ExperimentRecord]:
    q, B, n = params.q, params.B, params.n
    seqs = rep_seed_sequences(seed, "coupling_time", q, B, n, reps)
    jobs = [(q, B, n, s, max_steps, L, starts, pairing) for s in seqs]
    res = _map(_coupling_one, jobs, workers)
    return [ExperimentRecord("coupling_time", q, B, n, seed, r, float(t), c, d)
            for r, (t, c, d) in enumerate(res)]


def estimate_hit_uniform(params: ModelParams, delta: float = 5.0, reps: int = 100, seed: int = 0,
                         max_steps: int = 10 ** 6, start: str = "ordered",
                         workers: int = 1) -> list[ExperimentRecord]:
    q, B, n = params.q, params.B, params.n
    seqs = rep_seed_sequences(seed, "hit_uniform", q, B, n, reps)
    jobs = [(q, B, n, s, delta, max_steps, start) for s in seqs]
    res = _map(_hit_uniform_one, jobs, workers)
    return [ExperimentRecord("hit_uniform", q, B, n, seed, r, float(t), c, d)
            for r, (t, c, d) in enumerate(res)]


def phase_center(params: ModelParams, which: str) -> np.ndarray:
    q = params.q
    if which == "u":
        return np.full(q, 1.0 / q)
    if which == "m":
        a = majority_fixpoint(ModelParams(q, params.B))
        if a is None:
            raise ValueError(f"no majority phase at B={params.B}")
        return np.array([a] + [(1.0 - a) / (q - 1)] * (q - 1))
    raise ValueError(f"center must be 'u' or 'm', got {which!r}")


def escape_probe(params: ModelParams, center, radius: float, horizon: int, reps: int, seed: int,
                 workers: int = 1) -> tuple[float, list[ExperimentRecord]]:
    """Fraction of replicas leaving the sup-norm ball (modulo color relabeling)
    around `center` within `horizon` steps."""
    q, B, n = params.q, params.B, params.n
    if isinstance(center, str):
        center = phase_center(params, center)
    center = np.asarray(center, dtype=float)
    seqs = rep_seed_sequences(seed, "escape_probe", q, B, n, reps)
    jobs = [(q, B, n, s, center, radius, horizon) for s in seqs]
    res = _map(_escape_one, jobs, workers)
    recs = [ExperimentRecord("escape_probe", q, B, n, seed, r, esc, False,
                             dict(d, radius=radius, horizon=horizon))
            for r, (esc, d) in enumerate(res)]
    return float(np.mean([r.outcome for r in recs])), recs


# ---------------------------------------------------------------- fits

def _r2(y, yhat):
    y = np.asarray(y, float)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return max(0.0, 1.0 - ss_res / ss_tot)


def fit_models(n_values, outcomes) -> dict:
    n = np.asarray(n_values, float)
    y = np.asarray(outcomes, float)
    ln = np.log(n)
    out = {}
    slope, icpt = np.polyfit(ln, y, 1)
    out["log_n"] = {"slope": float(slope), "intercept": float(icpt),
                    "r_squared": _r2(y, icpt + slope * ln)}
    if np.all(y > 0):
        g, lc = np.polyfit(ln, np.log(y), 1)
        out["power_law"] = {"exponent": float(g), "prefactor": float(np.exp(lc)),
                            "r_squared": _r2(y, np.exp(lc) * n ** g),
                            "r_squared_loglog": _r2(np.log(y), lc + g * ln)}
    else:
        out["power_law"] = {"exponent": float("nan"), "prefactor": float("nan"),
                            "r_squared": 0.0, "r_squared_loglog": 0.0}
    out["constant"] = {"value": float(y.mean()), "r_squared": _r2(y, np.full_like(y, y.mean())),
                       "max_over_min": float(y.max() / y.min()) if y.min() > 0 else float("inf")}
    return out


def scaling_fit(n_values, outcomes, censored: int = 0, flat_ratio: float = 1.5) -> ScalingFit:
    if len(set(n_values)) < 3:
        raise ValueError("a scaling fit needs at least three distinct n")
    fits = fit_models(n_values, outcomes)
    if fits["constant"]["max_over_min"] <= flat_ratio:
        model, val, r2 = "constant", fits["constant"]["value"], fits["constant"]["r_squared"]
    elif fits["log_n"]["r_squared"] >= fits["power_law"]["r_squared"]:
        model, val, r2 = "log_n", fits["log_n"]["slope"], fits["log_n"]["r_squared"]
    else:
        model, val, r2 = "power_law", fits["power_law"]["exponent"], fits["power_law"]["r_squared"]
    return ScalingFit(list(n_values), list(outcomes), model, float(val), float(r2), fits, censored)


ESTIMATORS = {"coupling": estimate_coupling_time, "hit-uniform": estimate_hit_uniform}


def default_reps(n: int) -> int:
    if n <= 10 ** 4:
        return 100
    if n <= 10 ** 5:
        return 30
    return 10


def scan_scaling(estimator: str, n_list, params: ModelParams, reps: Optional[int] = None,
                 seed: int = 0, workers: int = 1, **kw) -> tuple[ScalingFit, list[ExperimentRecord]]:
    fn = ESTIMATORS[estimator]
    medians, records, censored = [], [], 0
    for n in n_list:
        p = ModelParams(params.q, params.B, int(n))
        recs = fn(p, reps=reps or default_reps(int(n)), seed=seed, workers=workers, **kw)
        records.extend(recs)
        ok = [r.outcome for r in recs if not r.censored]
        censored += sum(r.censored for r in recs)
        medians.append(float(np.median(ok)) if ok else float("nan"))
    good = [(n, m) for n, m in zip(n_list, medians) if np.isfinite(m)]
    if len(good) < 3:
        # too many sizes fully censored to fit anything; report what there is
        return ScalingFit(list(n_list), medians, "insufficient", float("nan"), float("nan"),
                          {}, censored), records
    fit = scaling_fit([g[0] for g in good], [g[1] for g in good], censored)
    return fit, records


# ---------------------------------------------------------------- figures

def emit_figure_data(kind: str, q: int, B_list, grid_points: int = 200) -> list[dict]:
    rows = []
    for B in B_list:
        P = ModelParams(q, float(B))
        rep = classify_fixpoints(P)
        a = rep.majority["a"] if rep.majority else None
        if kind == "psi1":
            zs = np.linspace(0.0, 1.0, grid_points + 2)[1:-1]
            f = lambda z: psi1(z, P)
            marks = [(1.0 / q, "fixpoint_u", abs(psi1_prime(1.0 / q, P)))]
            if a is not None:
                marks.append((a, "fixpoint_a", abs(psi1_prime(a, P))))
        elif kind == "fdrift":
            zs = np.linspace(1.0 / q, 1.0, grid_points)
            f = lambda z: drift_f(z, P) - z
            marks = []
            if rep.uniform["class"] != "not-a-fixpoint":
                marks.append((1.0 / q, "fixpoint_u", abs(drift_f(1.0 / q, P) - 1.0 / q)))
            if a is not None:
                marks.append((a, "fixpoint_a", abs(drift_f(a, P) - a)))
        else:
            raise ValueError(f"unknown figure kind {kind!r}")
        for z in zs:
            rows.append({"B": float(B), "regime": rep.regime, "z": float(z), "value": f(z),
                         "flag": "grid", "residual": ""})
        for z, tag, res in marks:
            rows.append({"B": float(B), "regime": rep.regime, "z": float(z), "value": f(z),
                         "flag": tag, "residual": res})
    return rows


# ---------------------------------------------------------------- output

def header(seed, config: dict) -> dict:
    return {"schema": SCHEMA, "version": __version__, "seed": seed, "config": config}


def records_to_rows(records: list[ExperimentRecord]) -> list[dict]:
    rows = []
    for r in records:
        d = asdict(r)
        d["diagnostics"] = json.dumps(d["diagnostics"], sort_keys=True)
        rows.append(d)
    return rows


def render_table(rows: list[dict], meta: dict, fmt: str = "csv") -> str:
    buf = io.StringIO()
    if fmt == "json":
        buf.write(json.dumps({"header": meta}, sort_keys=True) + "\n")
        for row in rows:
            buf.write(json.dumps(row, sort_keys=True) + "\n")
        return buf.getvalue()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def write_table(path: str, rows: list[dict], meta: dict, fmt: str = "csv") -> str:
    text = render_table(rows, meta, fmt)
    tmp = path + ".part"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def output_name(kind: str, q: int, B: float, n, ext: str = "csv") -> str:
    return f"{kind}_q{q}_B{B:.6g}_n{n}.{ext}"
