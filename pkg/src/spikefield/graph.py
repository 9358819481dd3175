"""Random interaction graphs sampled from a connectivity kernel.

Neuron i of n sits at position (i + 1) / n on [0, 1] (0-indexed storage of
the 1-indexed lattice i/n, i = 1..n).  An edge j -> i means spikes of j feed
the current of i; it is drawn Bernoulli(rho W(x_i, x_j)) independently over
all ordered pairs, self-loops included.  Every present edge carries weight
1 / (n rho).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import KernelError, graphon_sup


def positions(n: int) -> np.ndarray:
    return (np.arange(n) + 1.0) / n


def kernel_digest(kernel) -> str:
    """Short stable fingerprint of a kernel parameterization."""
    return hashlib.sha1(repr(kernel).encode()).hexdigest()[:12]


@dataclass
class InteractionGraph:
    """Directed graph in source-major CSR form.

    ``out_indices[out_indptr[j]:out_indptr[j+1]]`` lists the targets of
    source j in increasing order.  ``weight`` is the common edge weight
    1 / (n rho).
    """

    n: int
    rho: float
    seed: int
    out_indptr: np.ndarray
    out_indices: np.ndarray
    digest: str = ""

    @property
    def weight(self) -> float:
        return 1.0 / (self.n * self.rho)

    @property
    def n_edges(self) -> int:
        return int(self.out_indices.size)

    @cached_property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @cached_property
    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.out_indices, minlength=self.n)

    @cached_property
    def in_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Target-major view: (indptr, indices) listing sources per target."""
        counts = self.in_degrees
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.empty(self.n_edges, dtype=np.int32)
        cursor = indptr[:-1].copy()
        for j in range(self.n):
            lo, hi = self.out_indptr[j], self.out_indptr[j + 1]
            tgts = self.out_indices[lo:hi]
            indices[cursor[tgts]] = j
            cursor[tgts] += 1
        return indptr, indices


def sample_graph(kernel, n: int, rho: float, seed: int) -> InteractionGraph:
    """Draw a graph of n neurons with edge probabilities rho W(x_i, x_j).

    Each source column j is drawn from its own counter-based stream keyed by
    (seed, j), so the sample is reproducible independently of evaluation
    order or batching.
    """
    if n <= 0:
        raise ValueError("need at least one neuron")
    if not 0 < rho <= 1:
        raise ValueError("edge density rho must lie in (0, 1]")
    if rho * graphon_sup(kernel) > 1.0 + 1e-12:
        raise KernelError(
            f"rho * sup W = {rho * graphon_sup(kernel):.4f} > 1 cannot be a "
            "Bernoulli probability; rescale rho or the kernel"
        )
    x = positions(n)
    cols = []
    counts = np.empty(n, dtype=np.int64)
    for j in range(n):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, j))))
        p = rho * np.asarray(kernel(x, x[j]), dtype=float)
        targets = np.flatnonzero(rng.random(n) < p).astype(np.int32)
        cols.append(targets)
        counts[j] = targets.size
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = (np.concatenate(cols) if cols else np.empty(0)).astype(np.int32)
    return InteractionGraph(n=n, rho=float(rho), seed=int(seed),
                            out_indptr=indptr, out_indices=indices,
                            digest=kernel_digest(kernel))


def complete_graph(n: int) -> InteractionGraph:
    """All n^2 ordered pairs present (the rho = 1, W = 1 case), weight 1/n."""
    indptr = np.arange(n + 1, dtype=np.int64) * n
    indices = np.tile(np.arange(n, dtype=np.int32), n)
    return InteractionGraph(n=n, rho=1.0, seed=0, out_indptr=indptr,
                            out_indices=indices, digest="complete")


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class DegreeReport:
    n: int
    rho: float
    max_norm_in: float   # max_i (in-degree_i) / (n rho)
    max_norm_out: float  # max_j (out-degree_j) / (n rho)
    mean_in: float
    mean_out: float

    @property
    def concentrated(self) -> bool:
        """Both normalized maxima at or below the dilution threshold 2."""
        return self.max_norm_in <= 2.0 and self.max_norm_out <= 2.0


def degree_concentration(g: InteractionGraph) -> DegreeReport:
    scale = g.n * g.rho
    ind, outd = g.in_degrees, g.out_degrees
    return DegreeReport(
        n=g.n, rho=g.rho,
        max_norm_in=float(ind.max()) / scale if g.n else 0.0,
        max_norm_out=float(outd.max()) / scale if g.n else 0.0,
        mean_in=float(ind.mean()) / scale,
        mean_out=float(outd.mean()) / scale,
    )


@dataclass
class SMaxReport:
    value: float        # max |S_{j j'}| over examined pairs
    bound: float        # n^(tau - 1/2)
    tau: float
    n_pairs: int
    exhaustive: bool

    @property
    def within_bound(self) -> bool:
        return self.value < self.bound


def s_max_statistic(g: InteractionGraph, kernel, tau: float,
                    pair_budget: int = 100_000, seed: int = 0) -> SMaxReport:
    """Largest centered column correlation S_{j j'} against the n^(tau-1/2) bound.

    S_{j j'} = (1/n) sum_i (xi_ij - rho W(x_i, x_j)) (xi_ij' - rho W(x_i, x_j')),
    j != j'.  All pairs are examined when the budget covers n (n - 1) / 2;
    otherwise a uniform sample of pairs drawn from a stream keyed by
    (seed, "smax") is used.
    """
    if not 0 < tau < 0.5:
        raise ValueError("tau must lie in (0, 1/2)")
    n = g.n
    x = positions(n)
    total_pairs = n * (n - 1) // 2
    exhaustive = pair_budget >= total_pairs

    # centered adjacency, built column by column
    xi_bar = np.zeros((n, n))
    for j in range(n):
        lo, hi = g.out_indptr[j], g.out_indptr[j + 1]
        xi_bar[g.out_indices[lo:hi], j] = 1.0
        xi_bar[:, j] -= g.rho * np.asarray(kernel(x, x[j]), dtype=float)

    if exhaustive:
        s = xi_bar.T @ xi_bar / n
        np.fill_diagonal(s, 0.0)
        value = float(np.max(np.abs(s)))
        n_pairs = total_pairs
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0x5_BA_C))))
        ja = rng.integers(0, n, size=pair_budget)
        jb = rng.integers(0, n - 1, size=pair_budget)
        jb = np.where(jb >= ja, jb + 1, jb)  # force j != j'
        value = 0.0
        for a, b in zip(ja, jb):
            value = max(value, abs(float(xi_bar[:, a] @ xi_bar[:, b])) / n)
        n_pairs = pair_budget

    return SMaxReport(value=value, bound=float(n ** (tau - 0.5)), tau=tau,
                      n_pairs=n_pairs, exhaustive=exhaustive)


def dilution_report(n: int, rho: float, tau: float, bounded_rate: bool) -> dict:
    """Scales controlling how much dilution the limit theorems tolerate.

    For a bounded rate function the requirement is n rho^2 -> infinity;
    in general it is n^(1 - 2 tau) rho^4 -> infinity.
    """
    general = n ** (1.0 - 2.0 * tau) * rho ** 4
    bounded = n * rho ** 2
    return {
        "n": n,
        "rho": rho,
        "tau": tau,
        "bounded_rate": bounded_rate,
        "scale_general": general,
        "scale_bounded_rate": bounded,
        "scale_used": bounded if bounded_rate else general,
    }


# ---------------------------------------------------------------------------
# deterministic kernel regularity sums


def regularity_sums(kernel, n: int, quad: int = 16, inner_grid: int = 2048) -> dict:
    """Cell-level regularity of the kernel discretization at resolution n.

    r1 and r2 average, over targets i, the per-cell integrals of
    |W(x_i, x_j) - W(x_i, y)|^k as y sweeps source cell j.  s integrates,
    over each target cell, the squared L2(dy) distance between the kernel
    row at x_i and at nearby x.  Gauss-Legendre quadrature with ``quad``
    points resolves each cell; the s row-distance uses a uniform inner grid.
    """
    x = positions(n)
    # Gauss-Legendre nodes and weights on [0, 1]
    gl_x, gl_w = np.polynomial.legendre.leggauss(quad)
    gl_x = 0.5 * (gl_x + 1.0)
    gl_w *= 0.5

    # offsets of quadrature points inside one cell of width 1/n
    offs = (gl_x - 1.0) / n  # y = x_j + offs sweeps ((j-1)/n, j/n]
    r1 = 0.0
    r2 = 0.0
    for i in range(n):
        wij = np.asarray(kernel(x[i], x), dtype=float)              # (n,)
        y = x[None, :] + offs[:, None]                               # (quad, n)
        wiy = np.asarray(kernel(x[i], y), dtype=float)               # (quad, n)
        diff = np.abs(wij[None, :] - wiy)
        r1 += float(np.sum(gl_w[:, None] * diff)) / n
        r2 += float(np.sum(gl_w[:, None] * diff ** 2)) / n
    r1 /= n
    r2 /= n

    ys = (np.arange(inner_grid) + 0.5) / inner_grid
    s = 0.0
    for i in range(n):
        row_i = np.asarray(kernel(x[i], ys), dtype=float)            # (inner,)
        xs = x[i] + offs                                             # (quad,)
        rows = np.asarray(kernel(xs[:, None], ys[None, :]), dtype=float)
        d2 = np.mean((rows - row_i[None, :]) ** 2, axis=1)           # (quad,)
        s += float(np.sum(gl_w * d2)) / n
    return {"r1": r1, "r2": r2, "s": s, "n": n}


# ---------------------------------------------------------------------------
# edge-list persistence


def dump_edges(g: InteractionGraph, path) -> None:
    """Text edge list: header with (n, rho, seed, kernel digest), then one
    'source target' pair per line in sorted order."""
    with open(path, "w") as fh:
        fh.write(f"# n={g.n} rho={g.rho!r} seed={g.seed} kernel={g.digest}\n")
        for j in range(g.n):
            lo, hi = g.out_indptr[j], g.out_indptr[j + 1]
            for i in g.out_indices[lo:hi]:
                fh.write(f"{j} {i}\n")


def load_edges(path) -> InteractionGraph:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# n="):
            raise ValueError(f"{path} does not look like a dumped edge list")
        meta = dict(tok.split("=", 1) for tok in header[2:].split())
        n = int(meta["n"])
        rho = float(meta["rho"])
        seed = int(meta["seed"])
        body = fh.read().split()
    pairs = np.asarray(body, dtype=np.int64).reshape(-1, 2)
    counts = np.zeros(n, dtype=np.int64)
    if pairs.size:
        src = pairs[:, 0]
        order = np.lexsort((pairs[:, 1], src))
        pairs = pairs[order]
        counts = np.bincount(pairs[:, 0], minlength=n)
        indices = pairs[:, 1].astype(np.int32)
    else:
        indices = np.empty(0, dtype=np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return InteractionGraph(n=n, rho=rho, seed=seed, out_indptr=indptr,
                            out_indices=indices, digest=meta.get("kernel", ""))
