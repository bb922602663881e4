"""Swendsen-Wang chain on the complete graph: count-level and vertex-level
steps, the matched and phase couplings, and the block-by-color chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import multinomial

from .analytic import DomainError, ModelParams
from .percolation import percolate_blocks


class ContractViolation(ValueError):
    """A coupling precondition does not hold."""


@dataclass
class CouplingState:
    x: np.ndarray
    y: np.ndarray

    @property
    def disagreements(self) -> int:
        return int(np.count_nonzero(self.x != self.y))


@dataclass
class MagnetizationState:
    a: np.ndarray  # a[i, j]: vertices of block i carrying color j

    @property
    def blocks(self) -> np.ndarray:
        return self.a.sum(axis=1)


def _n_of(params: ModelParams, n):
    if params.n is not None and params.n != n:
        raise DomainError(f"state has {n} vertices but params.n = {params.n}")
    return n


def phase_of(colors: np.ndarray, q: int) -> np.ndarray:
    return np.bincount(colors, minlength=q).astype(np.int64)


def largest_class(counts) -> tuple[int, int]:
    """(color, size) of the largest class; lowest color wins ties."""
    c = int(np.argmax(counts))
    return c, int(counts[c])


# ---------------------------------------------------------------- single chain

def sw_step_counts(counts, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """One step on the phase. A 2-D input is a batch of independent chains, one per row."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim == 2:
        return _sw_step_counts_batch(counts, params, rng)
    n = _n_of(params, int(counts.sum()))
    _, comp = percolate_blocks(counts, params.B / n, rng)
    colors = rng.integers(0, params.q, size=comp.shape[0])
    return np.bincount(colors, weights=comp, minlength=params.q).astype(np.int64)


def _sw_step_counts_batch(counts, params, rng):
    R, q = counts.shape
    n = int(counts[0].sum())
    if np.any(counts.sum(axis=1) != n):
        raise DomainError("all chains in a batch need the same n")
    _n_of(params, n)
    labels, comp = percolate_blocks(counts.reshape(-1), params.B / n, rng)
    comp_row = np.empty(comp.shape[0], dtype=np.int64)
    comp_row[labels] = np.repeat(np.arange(R), n)
    colors = rng.integers(0, q, size=comp.shape[0])
    out = np.bincount(comp_row * q + colors, weights=comp, minlength=R * q)
    return out.reshape(R, q).astype(np.int64)


def _grouped(colors, q):
    order = np.argsort(colors, kind="stable")
    return order, phase_of(colors, q)


def sw_step_vertices(colors, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """Vertex-resolved step. A 2-D input is a batch of independent chains, one per row."""
    colors = np.asarray(colors)
    q = params.q
    if colors.ndim == 2:
        R, n = colors.shape
        _n_of(params, n)
        key = (np.arange(R)[:, None] * q + colors).reshape(-1)
        order = np.argsort(key, kind="stable")
        counts = np.bincount(key, minlength=R * q)
    else:
        n = _n_of(params, colors.shape[0])
        order, counts = _grouped(colors, q)
    labels, comp = percolate_blocks(counts, params.B / n, rng)
    newc = rng.integers(0, q, size=comp.shape[0]).astype(colors.dtype)
    out = np.empty(colors.size, dtype=colors.dtype)
    out[order] = newc[labels]
    return out.reshape(colors.shape)


def magnetization_step(ms: MagnetizationState, params: ModelParams,
                       rng: np.random.Generator) -> MagnetizationState:
    a = np.asarray(ms.a, dtype=np.int64)
    k, q = a.shape
    if q != params.q:
        raise DomainError("magnetization matrix must have q columns")
    # materialize vertices grouped by color, remembering each vertex's block
    flat = a.T.reshape(-1)  # color-major: (color j, block i)
    block_of = np.repeat(np.tile(np.arange(k), q), flat)
    counts = a.sum(axis=0)
    n = _n_of(params, int(counts.sum()))
    labels, comp = percolate_blocks(counts, params.B / n, rng)
    newc = rng.integers(0, q, size=comp.shape[0])
    out = np.bincount(block_of * q + newc[labels], minlength=k * q).reshape(k, q)
    return MagnetizationState(out.astype(np.int64))


def heavy_light_profile(counts, params: ModelParams, eps: float = 0.1) -> list[str]:
    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0,1)")
    counts = np.asarray(counts)
    alpha = counts / counts.sum()
    B = params.B
    tags = []
    for a in alpha:
        if a >= (1.0 + eps) / B:
            tags.append("heavy")
        elif a <= (1.0 - eps) / B:
            tags.append("light")
        else:
            tags.append("window")
    return tags


# ---------------------------------------------------------------- matched coupling

def _matching(x, y, q):
    """Color-preserving bijection tau with y[tau[v]] == x[v], identity where x == y."""
    n = x.shape[0]
    tau = np.arange(n)
    dis = np.flatnonzero(x != y)
    if dis.size:
        xs = dis[np.argsort(x[dis], kind="stable")]
        ys = dis[np.argsort(y[dis], kind="stable")]
        if not np.array_equal(x[xs], y[ys]):
            raise ContractViolation("identity coupling needs equal phases")
        tau[xs] = ys
    return tau


def coupled_step_identity(cs: CouplingState, params: ModelParams,
                          rng: np.random.Generator) -> CouplingState:
    x, y = np.asarray(cs.x), np.asarray(cs.y)
    q = params.q
    if not np.array_equal(phase_of(x, q), phase_of(y, q)):
        raise ContractViolation("identity coupling needs equal phases")
    n = _n_of(params, x.shape[0])
    tau = _matching(x, y, q)
    order, counts = _grouped(x, q)
    labels, comp = percolate_blocks(counts, params.B / n, rng)
    lab = np.empty(n, dtype=np.int64)
    lab[order] = labels
    newc = rng.integers(0, q, size=comp.shape[0]).astype(x.dtype)
    nx = newc[lab]
    ny = np.empty_like(y)
    ny[tau] = nx  # component tau(C) of Y gets the color of C
    return CouplingState(nx, ny)


# ---------------------------------------------------------------- phase coupling

def _mult_logpmf(z, R, q):
    return multinomial.logpmf(z, R, np.full(q, 1.0 / q))


def coupled_reserve(R: int, shift: np.ndarray, q: int, rng: np.random.Generator,
                    max_tries: int = 1_000_000):
    """Maximal coupling of Z, Z' ~ Mult(R, 1/q) aiming at Z' = Z + shift.

    Returns (Z, Z', hit) where hit means Z' - Z == shift.
    """
    pvec = np.full(q, 1.0 / q)
    shift = np.asarray(shift, dtype=np.int64)
    z = rng.multinomial(R, pvec)
    w = z + shift
    lp = _mult_logpmf(z, R, q)
    lq = _mult_logpmf(w, R, q) if np.all(w >= 0) else -np.inf
    if np.log(rng.random()) + lp <= lq:
        return z, w, True
    # residual of the shifted law: draw W' ~ Mult, accept when its unshifted
    # counterpart is less likely under the law of Z
    for _ in range(max_tries):
        w2 = rng.multinomial(R, pvec)
        z2 = w2 - shift
        lq2 = _mult_logpmf(w2, R, q)
        lp2 = _mult_logpmf(z2, R, q) if np.all(z2 >= 0) else -np.inf
        if np.log(rng.random()) + lq2 > lp2:
            return z, w2, False
    raise RuntimeError("reserve coupling rejection sampler did not terminate")


def _size_rank_keys(sizes, idx, base):
    # key size*base + (rank among equal sizes) for the components listed in idx
    o = idx[np.argsort(sizes[idx], kind="stable")]
    s = sizes[o]
    rank = np.arange(o.size) - np.searchsorted(s, s, side="left")
    return o, s * np.int64(base) + rank


def couple_colorings(sx: np.ndarray, sy: np.ndarray, q: int, rng: np.random.Generator,
                     min_reserve: int = 0, pairing: str = "independent"):
    """Colors for the components of two chains (sizes sx, sy).

    The largest components share one color and isolated vertices up to the
    common count R form a reserve whose color counts are maximally coupled.
    With pairing="independent" every other component is colored independently;
    with pairing="size" the k-th component of each size in one chain shares its
    color with the k-th component of that size in the other (each chain's
    colors stay i.i.d. uniform). Returns (cx, cy, reserve_used).
    """
    if pairing not in ("size", "independent"):
        raise DomainError(f"unknown pairing {pairing!r}")
    cx = rng.integers(0, q, size=sx.shape[0])
    cy = rng.integers(0, q, size=sy.shape[0])
    lx, ly = int(np.argmax(sx)), int(np.argmax(sy))
    c0 = rng.integers(0, q)
    cx[lx] = c0
    cy[ly] = c0
    isox = np.flatnonzero(sx == 1)
    isoy = np.flatnonzero(sy == 1)
    isox = isox[isox != lx]
    isoy = isoy[isoy != ly]
    R = min(isox.size, isoy.size)
    if R == 0 or R < min_reserve:
        return cx, cy, False
    resx, resy = isox[:R], isoy[:R]
    keepx = np.ones(sx.shape[0], bool)
    keepx[resx] = False
    keepy = np.ones(sy.shape[0], bool)
    keepy[resy] = False
    if pairing == "size":
        kx, ky = keepx.copy(), keepy.copy()
        kx[lx] = False
        ky[ly] = False
        base = sx.shape[0] + sy.shape[0] + 1
        ox, keyx = _size_rank_keys(sx, np.flatnonzero(kx), base)
        oy, keyy = _size_rank_keys(sy, np.flatnonzero(ky), base)
        _, ix, iy = np.intersect1d(keyx, keyy, assume_unique=True, return_indices=True)
        cy[oy[iy]] = cx[ox[ix]]
    px = np.bincount(cx[keepx], weights=sx[keepx], minlength=q).astype(np.int64)
    py = np.bincount(cy[keepy], weights=sy[keepy], minlength=q).astype(np.int64)
    z, zp, _ = coupled_reserve(R, px - py, q, rng)
    cx[resx] = rng.permutation(np.repeat(np.arange(q), z))
    cy[resy] = rng.permutation(np.repeat(np.arange(q), zp))
    return cx, cy, True


def coupled_step_phase(x, y, params: ModelParams, rng: np.random.Generator,
                       min_reserve: int = 0, pairing: str = "independent"):
    """One coupled step of two phase vectors; returns (x', y', merged).

    Equal inputs share a single step, so they stay merged."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n = _n_of(params, int(x.sum()))
    if int(y.sum()) != n:
        raise ContractViolation("phases must have the same total")
    if np.array_equal(x, y):
        # equal states: run both chains on one shared step
        nx = sw_step_counts(x, params, rng)
        return nx, nx.copy(), True
    p = params.B / n
    _, sx = percolate_blocks(x, p, rng)
    _, sy = percolate_blocks(y, p, rng)
    cx, cy, _ = couple_colorings(sx, sy, params.q, rng, min_reserve, pairing)
    nx = np.bincount(cx, weights=sx, minlength=params.q).astype(np.int64)
    ny = np.bincount(cy, weights=sy, minlength=params.q).astype(np.int64)
    return nx, ny, bool(np.array_equal(nx, ny))


def coupled_step_phase_vertices(x, y, params: ModelParams, rng: np.random.Generator,
                                min_reserve: int = 0, pairing: str = "independent"):
    """Vertex-level version of the phase coupling; returns (x', y', merged)."""
    x, y = np.asarray(x), np.asarray(y)
    q = params.q
    n = _n_of(params, x.shape[0])
    if np.array_equal(x, y):
        nx = sw_step_vertices(x, params, rng)
        return nx, nx.copy(), True
    p = params.B / n
    ox, cntx = _grouped(x, q)
    oy, cnty = _grouped(y, q)
    labx, sx = percolate_blocks(cntx, p, rng)
    laby, sy = percolate_blocks(cnty, p, rng)
    cx, cy, _ = couple_colorings(sx, sy, q, rng, min_reserve, pairing)
    nx = np.empty_like(x)
    ny = np.empty_like(y)
    nx[ox] = cx[labx].astype(x.dtype)
    ny[oy] = cy[laby].astype(y.dtype)
    merged = np.array_equal(phase_of(nx, q), phase_of(ny, q))
    return nx, ny, bool(merged)
