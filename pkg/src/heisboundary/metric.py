"""The parabolic visual quasimetric on H_n and the quantities built from it.

For a graded structure with eigenvalues a_1 < ... < a_{k+1} and a scale s > 0,

    ||x||_A = sum_i |x_i|^(1 / (s a_i)),        d_A(p, q) = ||(-p) * q||_A,

where |x_i| is the Euclidean norm of the U_i block in adapted coordinates.
The scale multiplies every grading exponent; s = 1/a_1 makes the smallest
effective exponent 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .core import LieElement, bch_mul
from .derivation import GradedStructure
from .errors import DimensionError, HypothesisViolated, OutOfBox

COMPLETE_GRAPH_LIMIT = 2000
DEFAULT_NEIGHBORS = 32
_CHUNK = 1 << 16


def philox(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def shard_generators(seed: int, shards: int) -> list:
    return [philox(s) for s in np.random.SeedSequence(seed).spawn(shards)]


@dataclass(frozen=True, eq=False)
class QuasimetricParams:
    gs: GradedStructure
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def exponents(self) -> np.ndarray:
        """Effective grading exponents s * a_i."""
        return self.scale * self.gs.alphas

    def rescaled(self, scale: float) -> "QuasimetricParams":
        return QuasimetricParams(self.gs, scale)


@dataclass(frozen=True)
class NetConfig:
    sample_count: int
    box_radius: float = 1.0
    neighbor_count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")
        if self.neighbor_count is not None and self.neighbor_count < 1:
            raise ValueError("neighbor_count must be at least 1")
        if not self.box_radius > 0:
            raise ValueError("box_radius must be positive")

    @property
    def neighbors(self) -> int | None:
        """Neighbour count in use; None means the complete graph."""
        if self.neighbor_count is not None:
            return self.neighbor_count
        return None if self.sample_count <= COMPLETE_GRAPH_LIMIT else DEFAULT_NEIGHBORS


@dataclass(frozen=True)
class RegularityReport:
    radii: tuple
    volume_estimates: tuple
    fitted_exponent: float
    target_exponent: float
    relative_error: float
    normalized_volumes: tuple
    samples: int

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "volume_estimates": list(self.volume_estimates),
            "fitted_exponent": self.fitted_exponent,
            "target_exponent": self.target_exponent,
            "relative_error": self.relative_error,
            "normalized_volumes": list(self.normalized_volumes),
            "samples": self.samples,
        }


def _check(qp_or_gs, *points):
    gs = qp_or_gs.gs if isinstance(qp_or_gs, QuasimetricParams) else qp_or_gs
    for x in points:
        if not isinstance(x, LieElement):
            raise TypeError("expected LieElement")
        if x.n != gs.n:
            raise DimensionError(f"point has n={x.n}, structure has n={gs.n}")
    return gs


def norm_from_coords(qp: QuasimetricParams, c: np.ndarray) -> np.ndarray:
    """||.||_A evaluated on adapted coordinates."""
    gs = qp.gs
    inv = 1.0 / qp.exponents
    total = 0.0
    for i, s in enumerate(gs.slices):
        total = total + np.linalg.norm(c[..., s], axis=-1) ** inv[i]
    return total


def dist_from_coords(qp: QuasimetricParams, cp: np.ndarray, cq: np.ndarray) -> np.ndarray:
    """d_A between points given in adapted coordinates (broadcasting)."""
    W = qp.gs.adapted_omega
    W = 0.5 * (W - W.T)
    diff = cq - cp
    w = np.sum((cp @ W) * cq, axis=-1)
    diff = np.array(diff, dtype=float, copy=True)
    diff[..., -1] -= 0.5 * w
    return norm_from_coords(qp, diff)


def norm_A(qp: QuasimetricParams, x: LieElement):
    _check(qp, x)
    out = norm_from_coords(qp, qp.gs.coords(x))
    return float(out) if np.ndim(out) == 0 else out


def dist_A(qp: QuasimetricParams, p: LieElement, q: LieElement):
    _check(qp, p, q)
    return norm_A(qp, bch_mul(-p, q))


def norm_0(gs: GradedStructure, x: LieElement):
    """Comparison norm |x_{k+1}|^(1/2) + sum_{i<=k} |x_i|."""
    _check(gs, x)
    b = gs.block_norms(x)
    out = np.sqrt(b[..., -1]) + b[..., :-1].sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def dist_0(gs: GradedStructure, p: LieElement, q: LieElement):
    return norm_0(gs, bch_mul(-p, q))


def sample_box(gs: GradedStructure, count: int, radius: float, rng) -> LieElement:
    return LieElement(gs.n, rng.uniform(-radius, radius, size=(count, gs.dim)))


def _net_points(qp, p, q, net):
    rng = philox(net.seed)
    pts = rng.uniform(-net.box_radius, net.box_radius, size=(net.sample_count, qp.gs.dim))
    return np.vstack([p.coords[None, :], q.coords[None, :], pts])


def _edge_weights(qp, C, i, j):
    return dist_from_coords(qp, C[i], C[j])


def chain_graph(qp: QuasimetricParams, p: LieElement, q: LieElement, net: NetConfig):
    """Sparse weighted graph on {p, q} + net; node 0 is p, node 1 is q.

    Each undirected edge is stored once with i < j and weight d_A(x_i, x_j).
    """
    gs = _check(qp, p, q)
    if qp.exponents[0] < 1:
        raise HypothesisViolated(f"smallest effective exponent {qp.exponents[0]:g} < 1")
    for name, x in (("p", p), ("q", q)):
        if np.abs(x.coords).max() > net.box_radius:
            raise OutOfBox(f"{name} lies outside the sampling box of radius {net.box_radius}")
    X = _net_points(qp, p, q, net)
    C = gs.coords(X)
    N = C.shape[0]
    kk = net.neighbors
    if kk is None:
        iu, ju = np.triu_indices(N, k=1)
    else:
        kk = min(kk, N - 1)
        rows, cols = [], []
        step = max(1, (1 << 20) // N)
        for start in range(0, N, step):
            block = dist_from_coords(qp, C[start:start + step, None, :], C[None, :, :])
            idx = np.arange(start, min(start + step, N))
            block[np.arange(len(idx)), idx] = np.inf
            nearest = np.argpartition(block, kk - 1, axis=1)[:, :kk]
            rows.append(np.repeat(idx, kk))
            cols.append(nearest.ravel())
        rows = np.concatenate(rows + [np.array([0])])
        cols = np.concatenate(cols + [np.array([1])])
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        keys = np.unique(lo.astype(np.int64) * N + hi)
        iu, ju = keys // N, keys % N
    w = np.empty(len(iu))
    for start in range(0, len(iu), _CHUNK * 4):
        sl = slice(start, start + _CHUNK * 4)
        w[sl] = _edge_weights(qp, C, iu[sl], ju[sl])
    graph = coo_matrix((w, (iu, ju)), shape=(N, N)).tocsr()
    return graph, C


def chain_dist(qp: QuasimetricParams, p: LieElement, q: LieElement, net: NetConfig) -> float:
    """Net approximation of the chain metric inf sum d_A(p_{i-1}, p_i).

    Shortest path from p to q in the graph of ``chain_graph``.  Graph edges
    carry a symmetrised weight, so the one-hop chain is also taken as
    d_A(p, q) itself; hence 0 <= result <= d_A(p, q) exactly.
    """
    if p.allclose(q, atol=0.0):
        _check(qp, p, q)
        return 0.0
    graph, _ = chain_graph(qp, p, q, net)
    dist = dijkstra(graph, directed=False, indices=0)
    return min(float(dist[1]), float(dist_A(qp, p, q)))


def regularity_estimate(qp: QuasimetricParams, radii, samples: int = 1_000_000, seed: int = 0) -> RegularityReport:
    """Monte-Carlo volumes of d_A balls about the origin and their growth exponent.

    Volumes are Lebesgue measure in adapted coordinates.  Each radius uses
    its own generator spawned from ``seed``.
    """
    gs = qp.gs
    radii = np.asarray(sorted(float(r) for r in radii))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    expo = qp.scale * gs.coord_alphas
    vols = []
    for r, rng in zip(radii, shard_generators(seed, len(radii))):
        half = r ** expo
        hits = 0
        done = 0
        while done < samples:
            m = min(_CHUNK * 4, samples - done)
            c = rng.uniform(-1.0, 1.0, size=(m, gs.dim)) * half
            hits += int(np.count_nonzero(norm_from_coords(qp, c) <= r))
            done += m
        vols.append(float(np.prod(2 * half) * hits / samples))
    vols = np.asarray(vols)
    target = float((gs.n + 1) * (gs.alphas[0] + gs.alphas[-2]) * qp.scale) if gs.k >= 1 else float("nan")
    slope = float(np.polyfit(np.log(radii), np.log(vols), 1)[0]) if len(radii) > 1 else float("nan")
    return RegularityReport(
        radii=tuple(radii.tolist()),
        volume_estimates=tuple(vols.tolist()),
        fitted_exponent=slope,
        target_exponent=target,
        relative_error=abs(slope - target) / target,
        normalized_volumes=tuple((vols / radii ** target).tolist()),
        samples=int(samples),
    )


def quasi_triangle_ratio(qp: QuasimetricParams, triples: int = 100_000, seed: int = 0, box: float = 1.0) -> float:
    """Empirical max of d(p, r) / (d(p, q) + d(q, r)) over random triples."""
    rng = philox(seed)
    gs = qp.gs
    best = 0.0
    done = 0
    while done < triples:
        m = min(_CHUNK, triples - done)
        P, Q, R = (sample_box(gs, m, box, rng) for _ in range(3))
        num = dist_A(qp, P, R)
        den = dist_A(qp, P, Q) + dist_A(qp, Q, R)
        ok = den > 0
        best = max(best, float(np.max(num[ok] / den[ok])))
        done += m
    return best


def dilate(qp: QuasimetricParams, x: LieElement, rho) -> LieElement:
    """Automorphism multiplying ||.||_A (at scale s) by rho: e^{tA} with t = s log rho."""
    gs = qp.gs
    t = qp.scale * np.log(np.asarray(rho, dtype=float))
    c = gs.coords(x) * np.exp(t[..., None] * gs.coord_alphas)
    return gs.from_coords(c)


def unit_sphere_sample(qp: QuasimetricParams, count: int, rng) -> LieElement:
    """Points with ||x||_A = 1: box samples pushed radially onto the sphere by dilation."""
    gs = qp.gs
    c = rng.uniform(-1.0, 1.0, size=(count, gs.dim))
    x = gs.from_coords(c)
    r = norm_from_coords(qp, c)
    r = np.where(r > 0, r, 1.0)
    return dilate(qp, x, 1.0 / r)
