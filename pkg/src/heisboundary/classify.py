"""Quasiisometry invariants, the classification criterion and boundary isometries.

G_A and G_B are quasiisometric iff k = l, dim U_i = dim W_i and
alpha_i = lambda * beta_i for some lambda > 0.  Direction convention, used
everywhere below:

    lambda = alpha_1 / beta_1        (source eigenvalues over target eigenvalues)

The explicit boundary map F sends the adapted basis of A blockwise onto the
adapted basis of B and fixes the centre.  It is an isometry from d_A taken at
scale 1/lambda (effective exponents alpha_i / lambda = beta_i) to d_B.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import LieElement, bch_mul, bracket
from .derivation import GradedStructure
from .errors import DimensionError, NotEquivalent
from .metric import QuasimetricParams, dilate, dist_A, philox, sample_box, unit_sphere_sample

RATIO_RTOL = 1e-9


@dataclass(frozen=True)
class QIInvariants:
    k: int
    dims: tuple
    ratios: tuple

    def to_dict(self) -> dict:
        return {"k": self.k, "dims": list(self.dims), "ratios": list(self.ratios)}


@dataclass(frozen=True)
class Classification:
    equivalent: bool
    lam: float | None
    reason: str

    def to_dict(self) -> dict:
        return {"equivalent": self.equivalent, "lambda": self.lam, "reason": self.reason}


def qi_invariants(gs: GradedStructure) -> QIInvariants:
    a = gs.alphas[:-1]
    return QIInvariants(gs.k, tuple(gs.dims[:-1]), tuple((a / a[0]).tolist()))


def classify(a: GradedStructure, b: GradedStructure, tol: float = RATIO_RTOL) -> Classification:
    if a.n != b.n:
        return Classification(False, None, f"different Heisenberg index n={a.n} vs n={b.n}")
    ia, ib = qi_invariants(a), qi_invariants(b)
    if ia.k != ib.k:
        return Classification(False, None, f"k differs: {ia.k} vs {ib.k}")
    if ia.dims != ib.dims:
        return Classification(False, None, f"eigenspace dimensions differ: {ia.dims} vs {ib.dims}")
    ra, rb = np.array(ia.ratios), np.array(ib.ratios)
    if np.any(np.abs(ra - rb) > tol * np.maximum(np.abs(ra), np.abs(rb))):
        return Classification(False, None, f"exponent ratios differ: {ia.ratios} vs {ib.ratios}")
    return Classification(True, float(a.alphas[0] / b.alphas[0]), "invariants match")


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    source: GradedStructure
    target: GradedStructure
    matrix: np.ndarray
    lam: float

    @property
    def source_scale(self) -> float:
        """Scale at which d_A matches d_B under this map."""
        return 1.0 / self.lam

    def __call__(self, x: LieElement) -> LieElement:
        return apply_map(self, x)

    def inverse(self) -> "BoundaryMap":
        return BoundaryMap(self.target, self.source, np.linalg.inv(self.matrix), 1.0 / self.lam)


def build_isometry(a: GradedStructure, b: GradedStructure, tol: float = RATIO_RTOL) -> BoundaryMap:
    verdict = classify(a, b, tol)
    if not verdict.equivalent:
        raise NotEquivalent(verdict.reason)
    F = b.basis_matrix @ a.basis_inverse
    F.flags.writeable = False
    return BoundaryMap(a, b, F, verdict.lam)


def apply_map(F: BoundaryMap, x: LieElement) -> LieElement:
    if x.n != F.source.n:
        raise DimensionError("dimension mismatch")
    return LieElement(x.n, x.coords @ F.matrix.T)


def bracket_defect(F: BoundaryMap, pairs: int = 1000, seed: int = 0) -> float:
    """max |F[x, y] - [Fx, Fy]| over random pairs in [-1, 1]^{2n+1}."""
    rng = philox(seed)
    x = sample_box(F.source, pairs, 1.0, rng)
    y = sample_box(F.source, pairs, 1.0, rng)
    lhs = apply_map(F, bracket(x, y)).coords
    rhs = bracket(apply_map(F, x), apply_map(F, y)).coords
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True)
class IsometryCheck:
    max_relative_error: float
    pairs: int
    bilipschitz_low: float
    bilipschitz_high: float
    bilipschitz_bound: float

    def to_dict(self) -> dict:
        return {
            "max_relative_error": self.max_relative_error,
            "pairs": self.pairs,
            "bilipschitz_ratio_range": [self.bilipschitz_low, self.bilipschitz_high],
            "bilipschitz_bound": self.bilipschitz_bound,
        }


def verify_isometry(F: BoundaryMap, pairs: int = 10_000, seed: int = 0, box: float = 1.0) -> IsometryCheck:
    """Sampled check of d_B(Fp, Fq) = d_A(p, q) at source scale 1/lambda.

    Also reports the range of d_B(Fp, Fq) / d_A(p, q)^lambda (scale 1 on the
    source); it lies in [(k+1)^-|1-lambda|, (k+1)^|1-lambda|].
    """
    rng = philox(seed)
    p = sample_box(F.source, pairs, box, rng)
    q = sample_box(F.source, pairs, box, rng)
    src = QuasimetricParams(F.source, F.source_scale)
    dst = QuasimetricParams(F.target, 1.0)
    d_src = dist_A(src, p, q)
    d_dst = dist_A(dst, apply_map(F, p), apply_map(F, q))
    rel = np.abs(d_dst - d_src) / np.maximum(np.abs(d_src), 1e-300)
    plain = dist_A(QuasimetricParams(F.source, 1.0), p, q)
    ratio = d_dst / plain ** F.lam
    bound = float((F.source.k + 1) ** abs(1.0 - F.lam))
    return IsometryCheck(float(rel.max()), int(pairs), float(ratio.min()), float(ratio.max()), bound)


# -- distortion samplers ---------------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    radii: tuple
    upper: tuple
    lower: tuple
    upper_limit: float
    lower_limit: float
    samples: int
    quasisimilarity: tuple
    almost_similarity: tuple
    reciprocal_product: float | None = None

    def to_dict(self) -> dict:
        out = {
            "radii": list(self.radii),
            "L": list(self.upper),
            "l": list(self.lower),
            "L_limit": self.upper_limit,
            "l_limit": self.lower_limit,
            "samples_per_radius": self.samples,
            "quasisimilarity": {"K": self.quasisimilarity[0], "C": self.quasisimilarity[1]},
            "almost_similarity": {"L": self.almost_similarity[0], "C": self.almost_similarity[1]},
        }
        if self.reciprocal_product is not None:
            out["reciprocal_product"] = self.reciprocal_product
        return out


DEFAULT_RADII = tuple(2.0 ** -j for j in range(6, -1, -1))


def _probe_points(src: QuasimetricParams, x: LieElement, r: float, samples: int, rng):
    """Points x' around x with d(x, x') known: half at exactly r, half spread over (0, 2r]."""
    u = unit_sphere_sample(src, samples, rng)
    rho = np.concatenate([np.full(samples // 2, r), rng.uniform(0.0, 2 * r, size=samples - samples // 2)])
    rho = np.maximum(rho, 1e-300)
    v = dilate(src, u, rho)
    xs = LieElement(x.n, np.broadcast_to(x.coords, v.coords.shape))
    return bch_mul(xs, v)


def _extrapolate(radii, values):
    r = np.asarray(radii[:3])
    v = np.asarray(values[:3]) / r
    if len(r) < 2:
        return float(v[0])
    slope, intercept = np.polyfit(r, v, 1)
    return float(intercept)


def distortion_probe(
    fmap: Callable,
    src: QuasimetricParams,
    dst: QuasimetricParams,
    x: LieElement,
    radii=DEFAULT_RADII,
    samples: int = 1000,
    seed: int = 0,
    inverse: Callable | None = None,
) -> DistortionReport:
    """Finite-sample L_F(x, r) and l_F(x, r) and their small-r limits.

    L_F(x, r) is the max of d(Fx, Fx') over samples with d(x, x') <= r;
    l_F(x, r) the min over samples with r <= d(x, x') <= 2r.  With ``inverse``
    the reciprocal identity L_{F^-1}(F x) * l_F(x) = 1 is evaluated.
    """
    radii = tuple(sorted(float(r) for r in radii))
    rngs = [philox(s) for s in np.random.SeedSequence(seed).spawn(len(radii))]
    fx = fmap(x)
    upper, lower, all_d, all_fd = [], [], [], []
    for r, rng in zip(radii, rngs):
        xp = _probe_points(src, x, r, samples, rng)
        d = dist_A(src, LieElement(x.n, np.broadcast_to(x.coords, xp.coords.shape)), xp)
        fxs = LieElement(fx.n, np.broadcast_to(fx.coords, xp.coords.shape))
        fd = dist_A(dst, fxs, fmap(xp))
        inside = d <= r * (1 + 1e-12)
        ring = (d >= r * (1 - 1e-12)) & (d <= 2 * r)
        upper.append(float(fd[inside].max()))
        lower.append(float(fd[ring].min()))
        all_d.append(d)
        all_fd.append(fd)
    d = np.concatenate(all_d)
    fd = np.concatenate(all_fd)
    ratio = fd / d
    K = float(np.sqrt(ratio.max() / ratio.min()))
    C = float(np.sqrt(ratio.max() * ratio.min()))
    Lfit, Cfit = _fit_almost_similarity(d, fd)
    recip = None
    l_lim = _extrapolate(radii, lower)
    if inverse is not None:
        back = distortion_probe(inverse, dst, src, fx, radii, samples, seed + 1)
        recip = back.upper_limit * l_lim
    return DistortionReport(
        radii, tuple(upper), tuple(lower), _extrapolate(radii, upper), l_lim, int(samples), (K, C), (Lfit, Cfit), recip
    )


@dataclass(frozen=True)
class EtaEnvelope:
    bin_edges: tuple
    t: tuple
    rho: tuple
    triples: int
    skipped: int

    def eta(self, t) -> np.ndarray:
        """Monotone log-log interpolation of the sampled envelope (exact for power laws)."""
        ts, rs = np.asarray(self.t), np.maximum.accumulate(np.asarray(self.rho))
        return np.exp(np.interp(np.log(t), np.log(ts), np.log(rs)))

    def eta_inverse(self, y) -> np.ndarray:
        ts, rs = np.asarray(self.t), np.maximum.accumulate(np.asarray(self.rho))
        keep = np.concatenate([[True], np.diff(rs) > 0])
        return np.exp(np.interp(np.log(y), np.log(rs[keep]), np.log(ts[keep])))

    def eta1(self, t) -> np.ndarray:
        """Gauge of the inverse map, eta_1(t) = 1 / eta^{-1}(1/t)."""
        return 1.0 / self.eta_inverse(1.0 / np.asarray(t, dtype=float))

    def to_dict(self) -> dict:
        return {
            "bin_edges": list(self.bin_edges),
            "t": list(self.t),
            "rho": list(self.rho),
            "triples": self.triples,
            "skipped": self.skipped,
        }


def eta_envelope(
    fmap: Callable,
    src: QuasimetricParams,
    dst: QuasimetricParams,
    triples: int = 100_000,
    seed: int = 0,
    bins: int = 40,
    box: float = 1.0,
) -> EtaEnvelope:
    """Upper envelope of rho = d(Fx,Fy)/d(Fx,Fz) against t = d(x,y)/d(x,z), binned in log t."""
    rng = philox(seed)
    gs = src.gs
    x, y, z = (sample_box(gs, triples, box, rng) for _ in range(3))
    dxy, dxz = dist_A(src, x, y), dist_A(src, x, z)
    fx, fy, fz = fmap(x), fmap(y), fmap(z)
    fxy, fxz = dist_A(dst, fx, fy), dist_A(dst, fx, fz)
    ok = (dxy > 0) & (dxz > 0) & (fxz > 0)
    t = dxy[ok] / dxz[ok]
    rho = fxy[ok] / fxz[ok]
    lt = np.log(t)
    edges = np.linspace(np.quantile(lt, 0.001), np.quantile(lt, 0.999), bins + 1)
    which = np.clip(np.searchsorted(edges, lt, side="right") - 1, 0, bins - 1)
    inside = (lt >= edges[0]) & (lt <= edges[-1])
    tc, rc = [], []
    for j in range(bins):
        sel = inside & (which == j)
        if np.any(sel):
            i = np.argmax(rho[sel])
            tc.append(float(t[sel][i]))
            rc.append(float(rho[sel][i]))
    return EtaEnvelope(tuple(np.exp(edges).tolist()), tuple(tc), tuple(rc), int(triples), int((~ok).sum()))


def _fit_almost_similarity(d, fd):
    L = float(np.dot(d, fd) / np.dot(d, d))
    C = float(np.max(np.abs(fd - L * d)))
    return L, C


def almost_similarity_fit(
    fmap: Callable, src: QuasimetricParams, dst: QuasimetricParams, pairs: int = 10_000, seed: int = 0, box: float = 1.0
) -> tuple:
    """Least-squares L in d(Fx, Fy) ~ L d(x, y); returns (L, C, residual) with C the max residual."""
    rng = philox(seed)
    x = sample_box(src.gs, pairs, box, rng)
    y = sample_box(src.gs, pairs, box, rng)
    d = dist_A(src, x, y)
    fd = dist_A(dst, fmap(x), fmap(y))
    L, C = _fit_almost_similarity(d, fd)
    rms = float(np.sqrt(np.mean((fd - L * d) ** 2)))
    return L, C, rms
