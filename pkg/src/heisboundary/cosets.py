"""Coset foliations of H_n and their distance geometry (k >= 2).

Subgroups used here, all sums of eigenspaces:

    U1 = U_1,   H = U_1 + ... + U_{k-1} + Z,   K = U_2 + ... + U_{k-1} + Z.

Closed forms: d_A(x_k*H, x'_k*H) = |x'_k - x_k|^(1/a_k), and for g, g' in K
d_A(g*U_1, g'*U_1) = d_A(g, g').  Two U_1-cosets are at finite Hausdorff
distance iff they lie in one H-coset.  ``point_to_coset_dist`` is an
independent numerical minimiser used to cross-check these formulas.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import LieElement, bch_mul, omega
from .derivation import GradedStructure
from .errors import DimensionError, NotInSubgroup
from .metric import QuasimetricParams, dist_A, dist_from_coords, norm_from_coords

MEMBERSHIP_TOL = 1e-9
PLATEAU_SLOPE = 0.05
DEFAULT_PROFILE_RADII = (1.0, 10.0, 100.0, 1000.0)


def _require_k2(gs: GradedStructure):
    if gs.k < 2:
        raise NotInSubgroup(f"coset geometry needs k >= 2, structure has k = {gs.k}")


def subgroup_blocks(gs: GradedStructure, subgroup: str) -> tuple[list, bool]:
    """(0-based noncentral block indices, contains-centre flag) of a subgroup."""
    _require_k2(gs)
    k = gs.k
    if subgroup == "U1":
        return [0], False
    if subgroup == "H":
        return list(range(0, k - 1)), True
    if subgroup == "K":
        return list(range(1, k - 1)), True
    raise ValueError(f"unknown subgroup {subgroup!r}")


@dataclass(frozen=True, eq=False)
class CosetSpec:
    gs: GradedStructure
    subgroup: str
    basepoint: LieElement

    def __post_init__(self):
        subgroup_blocks(self.gs, self.subgroup)
        if self.basepoint.n != self.gs.n:
            raise DimensionError("basepoint dimension mismatch")

    def point(self, params: np.ndarray) -> LieElement:
        """basepoint * t, with t given by its adapted coordinates on the subgroup."""
        c = np.zeros(params.shape[:-1] + (self.gs.dim,))
        c[..., self.mask] = params
        return bch_mul(self.basepoint, self.gs.from_coords(c))

    @property
    def mask(self) -> np.ndarray:
        blocks, central = subgroup_blocks(self.gs, self.subgroup)
        m = np.zeros(self.gs.dim, dtype=bool)
        for b in blocks:
            m[self.gs.slices[b]] = True
        m[-1] = central
        return m


@dataclass(frozen=True)
class HausdorffProfile:
    radii: tuple
    sup_inf_distances: tuple
    algebraic_verdict: str
    numeric_verdict: str
    slope: float

    @property
    def agree(self) -> bool:
        return self.algebraic_verdict == self.numeric_verdict

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "sup_inf_distances": list(self.sup_inf_distances),
            "algebraic_verdict": self.algebraic_verdict,
            "numeric_verdict": self.numeric_verdict,
            "slope": self.slope,
        }


def in_subgroup(gs: GradedStructure, x: LieElement, subgroup: str, tol: float = MEMBERSHIP_TOL) -> bool:
    blocks, central = subgroup_blocks(gs, subgroup)
    c = gs.coords(x)
    allowed = np.zeros(gs.dim, dtype=bool)
    for b in blocks:
        allowed[gs.slices[b]] = True
    allowed[-1] = central
    return bool(np.all(np.abs(c[..., ~allowed]) <= tol))


def dist_DA(qp: QuasimetricParams, x: LieElement, y: LieElement):
    """D_A(pi(x), pi(y)) = sum_{i<=k} |x_i - y_i|^(1/(s a_i)); pi drops the centre."""
    gs = qp.gs
    if x.n != gs.n or y.n != gs.n:
        raise DimensionError("dimension mismatch")
    d = gs.coords(y) - gs.coords(x)
    d[..., -1] = 0.0
    out = norm_from_coords(qp, d)
    return float(out) if np.ndim(out) == 0 else out


def coset_dist_H(gs: GradedStructure, xk: LieElement, xk2: LieElement, h: LieElement | None = None):
    """Distance between the H-cosets through x_k and x'_k, and the minimiser h'.

    Returns ``(|x'_k - x_k|^(1/a_k), h')`` where h' = x_1 + ... + x_{k-1}
    + (x_{k+1} - [x'_k - x_k, x_1]) attains d_A(x_k*h, x'_k*h') for h in H.
    """
    _require_k2(gs)
    if h is None:
        h = LieElement.zero(gs.n)
    for name, v in (("xk", xk), ("xk2", xk2)):
        c = gs.coords(v)
        outside = np.ones(gs.dim, dtype=bool)
        outside[gs.slices[gs.k - 1]] = False
        if np.any(np.abs(c[outside]) > MEMBERSHIP_TOL):
            raise NotInSubgroup(f"{name} is not in U_k")
    if not in_subgroup(gs, h, "H"):
        raise NotInSubgroup("h is not in H")
    delta = xk2 - xk
    x1 = gs.component(h, 1)
    value = float(np.linalg.norm(gs.coords(delta)[gs.slices[gs.k - 1]]) ** (1.0 / gs.alphas[gs.k - 1]))
    h_prime = LieElement(gs.n, h.coords - omega(delta.coords, x1.coords) * gs.center.coords)
    return value, h_prime


def coset_dist_U1(gs: GradedStructure, g: LieElement, g2: LieElement) -> float:
    """d_A(g*U_1, g'*U_1) for g, g' in K, which equals d_A(g, g').

    Evaluated in adapted coordinates with the blocks outside K set to zero,
    so their rounding noise is not magnified by the roots 1/a_i.
    """
    _require_k2(gs)
    for name, v in (("g", g), ("g2", g2)):
        if not in_subgroup(gs, v, "K"):
            raise NotInSubgroup(f"{name} is not in K")
    mask = CosetSpec(gs, "K", g).mask
    a = np.where(mask, gs.coords(g), 0.0)
    b = np.where(mask, gs.coords(g2), 0.0)
    return float(dist_from_coords(QuasimetricParams(gs), a, b))


def _snowflake(w, expo, slices):
    """Blockwise radial map w -> w |w|^(expo-1); the block then contributes |w|."""
    out = np.array(w, copy=True)
    for s, a in zip(slices, expo):
        r = np.linalg.norm(w[..., s], axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(r > 0, r ** (a - 1.0), 0.0)
        out[..., s] = w[..., s] * f
    return out


def point_to_coset_dist(
    qp: QuasimetricParams,
    p: LieElement,
    coset: CosetSpec,
    levels: int = 3,
    points: int = 33,
    polish: bool = True,
) -> float:
    """Numerical inf over t in the subgroup of d_A(p, g*t); an upper bound.

    Free block coordinates are recentred on the value cancelling the
    corresponding block of (-p)*g and snowflaked so that each block enters
    the objective as |w|.  When the subgroup contains the centre the central
    coordinate is solved for exactly (it only shifts the central term).
    The optimum then lies in the box |w| <= f(0), which is searched by a
    coarse-to-fine grid followed by Nelder-Mead.
    """
    gs = qp.gs
    if p.n != gs.n:
        raise DimensionError("dimension mismatch")
    blocks, central = subgroup_blocks(gs, coset.subgroup)
    a = gs.coords(bch_mul(-p, coset.basepoint))
    cp = gs.coords(p)
    cg = gs.coords(coset.basepoint)
    free = np.concatenate([np.arange(gs.dim)[gs.slices[b]] for b in blocks]) if blocks else np.zeros(0, int)
    local = []
    start = 0
    for b in blocks:
        m = gs.dims[b]
        local.append(slice(start, start + m))
        start += m
    expo = [qp.exponents[b] for b in blocks]
    W = gs.adapted_omega
    W = 0.5 * (W - W.T)

    def objective(w):
        w = np.atleast_2d(w)
        t = np.zeros((w.shape[0], gs.dim))
        t[:, free] = -a[free] + _snowflake(w, expo, local)
        # adapted coordinates of g*t
        ct = cg + t
        ct[:, -1] = cg[-1] + t[:, -1] + 0.5 * ((cg @ W) * t).sum(axis=-1)
        if central:
            # t's central coordinate cancels the central term of (-p)*(g*t) exactly;
            # recomputing it would leave a rounding residual r with |r|^(1/a_{k+1}) >> eps
            diff = ct - cp
            diff[:, -1] = 0.0
            return norm_from_coords(qp, diff)
        return dist_from_coords(qp, cp, ct)

    dimw = len(free)
    f0 = float(objective(np.zeros(dimw))[0])
    if dimw == 0 or f0 == 0.0:
        return f0
    pts = points
    while pts ** dimw > 2_000_000 and pts > 5:
        pts = (pts - 1) // 2 + 1
    center = np.zeros(dimw)
    half = np.full(dimw, f0 * (1 + 1e-9) + 1e-300)
    best_w, best_f = center, f0
    for _ in range(levels):
        axes = [np.linspace(c - h, c + h, pts) for c, h in zip(center, half)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dimw)
        vals = objective(grid)
        j = int(np.argmin(vals))
        if vals[j] < best_f:
            best_f, best_w = float(vals[j]), grid[j]
        center = best_w
        half = 2 * half / (pts - 1)
    if polish:
        res = minimize(
            lambda w: float(objective(w)[0]),
            best_w,
            method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 4000 * dimw},
        )
        if res.fun < best_f:
            best_f = float(res.fun)
    return best_f


def _directions(m: int) -> np.ndarray:
    dirs = [np.eye(m)[i] * s for i in range(m) for s in (1.0, -1.0)]
    if m > 1:
        dirs += [np.ones(m) / np.sqrt(m), -np.ones(m) / np.sqrt(m)]
    return np.array(dirs)


def hausdorff_profile(
    gs: GradedStructure,
    L1: CosetSpec,
    L2: CosetSpec,
    radii=DEFAULT_PROFILE_RADII,
    scale: float = 1.0,
) -> HausdorffProfile:
    """Growth of sup_{x in L1, |x| <= R} d_A(x, L2) and the finiteness verdicts.

    Points of L1 are g1*t with t in U_1, |t| <= R, on fixed rays.  The
    numeric verdict is "finite" when the log-log slope over the last three
    radii is below 0.05.  The algebraic verdict is "finite" iff the U_k part
    of (-g1)*g2 vanishes.
    """
    if L1.subgroup != "U1" or L2.subgroup != "U1":
        raise ValueError("hausdorff_profile compares cosets of U_1")
    qp = QuasimetricParams(gs, scale)
    m1 = gs.dims[0]
    radii = tuple(sorted(float(r) for r in radii))
    dirs = _directions(m1)
    profile = []
    running = 0.0
    for R in radii:
        for frac in (0.5, 1.0):
            params = dirs * (frac * R)
            for t in params:
                x = L1.point(t)
                running = max(running, point_to_coset_dist(qp, x, L2))
        profile.append(running)
    g = bch_mul(-L1.basepoint, L2.basepoint)
    uk = gs.coords(g)[gs.slices[gs.k - 1]]
    algebraic = "finite" if np.all(np.abs(uk) <= MEMBERSHIP_TOL) else "infinite"
    tail = np.asarray(profile[-3:])
    rtail = np.asarray(radii[-3:])
    if np.all(tail <= 0) or len(tail) < 2:
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log(rtail), np.log(np.maximum(tail, 1e-300)), 1)[0])
    numeric = "finite" if slope < PLATEAU_SLOPE else "infinite"
    return HausdorffProfile(radii, tuple(profile), algebraic, numeric, slope)


def slice_map(gs: GradedStructure, x: LieElement):
    """f(x_1 + ... + x_{k+1}) = (x_1, x_{k+1} + [x_1, x_k]/2), centre as a scalar."""
    _require_k2(gs)
    x1 = gs.component(x, 1)
    xk = gs.component(x, gs.k)
    z = gs.coords(x)[..., -1] + 0.5 * omega(x1.coords, xk.coords)
    return x1, z


def slice_dist(gs: GradedStructure, a: tuple, b: tuple) -> float:
    """D'((x_1, z), (x_1', z')) = |x_1' - x_1| + |z' - z|^(a_1/a_{k+1}).

    Evaluated at the normalisation s = 1/a_1, where the U_1 exponent is 1.
    """
    _require_k2(gs)
    (x1, z), (y1, w) = a, b
    for v in (x1, y1):
        if not in_subgroup(gs, v, "U1"):
            raise NotInSubgroup("slice coordinates must lie in U_1")
    d1 = np.linalg.norm(gs.coords(y1)[..., gs.slices[0]] - gs.coords(x1)[..., gs.slices[0]], axis=-1)
    expo = gs.alphas[0] / gs.alphas[-1]
    out = d1 + np.abs(np.asarray(w, dtype=float) - np.asarray(z, dtype=float)) ** expo
    return float(out) if np.ndim(out) == 0 else out
