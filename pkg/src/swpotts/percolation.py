"""Component-size sampling for G(m, p) by geometric edge skipping and a
disjoint-set forest, plus giant-component statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .analytic import DomainError, beta_root_c


@dataclass
class ComponentSizes:
    sizes: np.ndarray  # descending
    m: int

    def __post_init__(self):
        assert int(self.sizes.sum()) == self.m


@dataclass
class PercolationStats:
    mean_c1: float
    var_c1: float
    mean_sum_sq_rest: float
    samples: int


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True)
def _percolate_blocks(block_sizes, inv_rate, expo):
    """Percolate consecutive vertex blocks, each a G(m, p) on its own vertices.

    Pairs inside a block are visited in row-major upper-triangle order; the gap
    to the next retained edge is geometric, floor(E / -log(1-p)) with E a
    standard exponential from `expo` (inv_rate = 1 / -log(1-p), 0 when p = 0).
    Returns (labels, comp_sizes, used) with labels[v] the component index of
    vertex v (components numbered by first vertex), or used = -1 when `expo`
    ran out.
    """
    n = 0
    for b in range(block_sizes.shape[0]):
        n += block_sizes[b]
    parent = np.arange(n, dtype=np.int32)
    size = np.ones(n, dtype=np.int32)
    pos = 0
    base = 0
    ne = expo.shape[0]
    for b in range(block_sizes.shape[0]):
        m = block_sizes[b]
        total = m * (m - 1) // 2
        if total > 0 and inv_rate > 0.0:
            k = -1
            i = 0
            row_start = 0
            row_end = m - 1
            while True:
                if pos >= ne:
                    return np.empty(0, np.int32), np.empty(0, np.int64), -1
                # compare in floating point first: for tiny p the gap overflows int64
                gap = expo[pos] * inv_rate
                pos += 1
                if gap >= total - 1 - k:
                    break
                k += np.int64(math.floor(gap)) + 1
                while k >= row_end:
                    i += 1
                    row_start = row_end
                    row_end += m - 1 - i
                j = k - row_start + i + 1
                _union(parent, size, base + i, base + j)
        base += m
    labels = np.empty(n, dtype=np.int32)
    ncomp = 0
    for v in range(n):
        if parent[v] == v:
            labels[v] = ncomp
            ncomp += 1
    comp = np.empty(ncomp, dtype=np.int64)
    for v in range(n):
        r = _find(parent, v)
        if r == v:
            comp[labels[v]] = size[v]
        else:
            labels[v] = labels[r]
    return labels, comp, pos


def _expected_edges(block_sizes, p):
    tot = 0.0
    for m in block_sizes:
        tot += m * (m - 1) / 2.0
    return p * tot


def percolate_blocks(block_sizes, p: float, rng: np.random.Generator):
    """Independent G(m_b, p) on consecutive blocks; returns (labels, comp_sizes).

    Gaps are drawn in one batch sized from the expected edge count. If the
    batch runs dry it is extended and the kernel rerun on the longer stream,
    so the result is a fixed function of the random stream.
    """
    if not (0.0 <= p < 1.0):
        raise DomainError(f"p must lie in [0, 1), got {p}")
    block_sizes = np.ascontiguousarray(block_sizes, dtype=np.int64)
    inv_rate = -1.0 / math.log1p(-p) if p > 0 else 0.0
    mu = _expected_edges(block_sizes, p)
    need = int(mu + 6.0 * math.sqrt(mu) + len(block_sizes) + 16)
    expo = rng.standard_exponential(need)
    while True:
        labels, comp, used = _percolate_blocks(block_sizes, inv_rate, expo)
        if used >= 0:
            return labels, comp
        expo = np.concatenate([expo, rng.standard_exponential(max(need, 64))])


# ---------------------------------------------------------------- public API

def sample_components(m: int, p: float, rng: np.random.Generator) -> ComponentSizes:
    if m < 0:
        raise DomainError(f"m must be non-negative, got {m}")
    if m == 0:
        return ComponentSizes(np.zeros(0, dtype=np.int64), 0)
    _, comp = percolate_blocks(np.array([m]), p, rng)
    return ComponentSizes(np.sort(comp)[::-1].copy(), int(m))


def beta_root(c: float) -> float:
    return beta_root_c(c)


def collect_stats(m: int, p: float, samples: int, rng: np.random.Generator) -> PercolationStats:
    if samples < 2:
        raise DomainError("samples must be >= 2")
    c1 = np.empty(samples)
    rest = np.empty(samples)
    for s in range(samples):
        sizes = sample_components(m, p, rng).sizes
        c1[s] = sizes[0]
        rest[s] = float(np.sum(sizes[1:].astype(np.float64) ** 2))
    return PercolationStats(float(c1.mean()), float(c1.var(ddof=1)), float(rest.mean()), samples)
