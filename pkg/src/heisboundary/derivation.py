"""Diagonalizable derivations of h_n and their graded structure.

A derivation A with positive eigenvalues a_1 < ... < a_{k+1} splits
h_n = U_1 + ... + U_{k+1} into eigenspaces.  The top space is the centre,
U_i pairs nondegenerately with U_{k+1-i} under the bracket, and each pair
admits dual bases with [e_s, eta_t] = delta_st e.  This module extracts that
structure from a matrix or from an explicit eigen-listing and builds the
adapted basis used by every metric computation downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .core import LieElement, symplectic_matrix
from .errors import (
    CenterMismatch,
    ComplexSpectrum,
    DegeneratePairing,
    DimensionError,
    InvalidDerivation,
    NonDiagonalizable,
    NonPositiveEigenvalue,
)

GROUP_RTOL = 1e-9
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DerivationSpec:
    """A derivation given either as a matrix or as (eigenvalue, eigenvectors) pairs.

    Exactly one of ``matrix`` and ``spectral`` is set.  Matrices act on column
    vectors in the standard basis e_1, ..., e_{2n+1}.
    """

    n: int
    matrix: np.ndarray | None = None
    spectral: tuple | None = None
    label: str | None = None

    def __post_init__(self):
        dim = 2 * self.n + 1
        if (self.matrix is None) == (self.spectral is None):
            raise DimensionError("give exactly one of matrix or spectral form")
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=float)
            if m.shape != (dim, dim):
                raise DimensionError(f"matrix must be {dim}x{dim} for n={self.n}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise DimensionError("matrix entries must be finite")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)
        else:
            blocks = []
            for value, vectors in self.spectral:
                vecs = np.array(vectors, dtype=float)
                if vecs.ndim == 1:
                    vecs = vecs[None, :]
                if vecs.ndim != 2 or vecs.shape[1] != dim or vecs.shape[0] == 0:
                    raise DimensionError(f"eigenvectors for {value} must be a nonempty list of length-{dim} vectors")
                vecs.flags.writeable = False
                blocks.append((float(value), vecs))
            total = np.vstack([v for _, v in blocks])
            if total.shape[0] != dim or np.linalg.matrix_rank(total) != dim:
                raise NonDiagonalizable(f"eigenvectors do not form a basis of R^{dim}")
            object.__setattr__(self, "spectral", tuple(blocks))

    @classmethod
    def diag(cls, *values, label=None) -> "DerivationSpec":
        dim = len(values)
        if dim % 2 == 0:
            raise DimensionError(f"diagonal length {dim} is not odd")
        return cls((dim - 1) // 2, matrix=np.diag(np.asarray(values, dtype=float)), label=label)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def to_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        V = np.vstack([v for _, v in self.spectral]).T
        lam = np.concatenate([np.full(v.shape[0], a) for a, v in self.spectral])
        return V @ np.diag(lam) @ np.linalg.inv(V)


@dataclass(frozen=True, eq=False)
class AdaptedBlock:
    """One block of the adapted basis.

    ``kind`` is ``"paired"`` (U_i with U_{k+1-i}, vectors e_s then eta_s),
    ``"middle"`` (self-paired U_i, Darboux order e_1, eta_1, e_2, eta_2, ...)
    or ``"center"``.  Vectors are the columns of the stored matrices.
    """

    kind: str
    indices: tuple
    first: np.ndarray
    second: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    blocks: tuple
    center: LieElement

    def vectors(self, i: int) -> np.ndarray:
        """Adapted basis of U_i (1-based), as columns."""
        for b in self.blocks:
            if b.kind == "paired":
                if b.indices[0] == i:
                    return b.first
                if b.indices[1] == i:
                    return b.second
            elif b.indices[0] == i:
                return b.first
        raise KeyError(i)


@dataclass(frozen=True, eq=False)
class GradedStructure:
    n: int
    alphas: np.ndarray
    eigenspace_bases: tuple
    matrix: np.ndarray
    adapted: AdaptedBasis | None = None
    label: str | None = None

    @property
    def k(self) -> int:
        return len(self.alphas) - 1

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def dims(self) -> tuple:
        return tuple(b.shape[1] for b in self.eigenspace_bases)

    @property
    def center(self) -> LieElement:
        return LieElement.basis(self.n, self.dim)

    @cached_property
    def slices(self) -> tuple:
        out, start = [], 0
        for m in self.dims:
            out.append(slice(start, start + m))
            start += m
        return tuple(out)

    @cached_property
    def basis_matrix(self) -> np.ndarray:
        """Adapted basis as columns, ordered U_1, ..., U_{k+1}."""
        if self.adapted is None:
            raise ValueError("structure has no adapted basis yet")
        B = np.hstack([self.adapted.vectors(i + 1) for i in range(self.k + 1)])
        B.flags.writeable = False
        return B

    @cached_property
    def basis_inverse(self) -> np.ndarray:
        Binv = np.linalg.inv(self.basis_matrix)
        Binv.flags.writeable = False
        return Binv

    @cached_property
    def coord_alphas(self) -> np.ndarray:
        return np.concatenate([np.full(m, a) for a, m in zip(self.alphas, self.dims)])

    @cached_property
    def block_index(self) -> np.ndarray:
        return np.concatenate([np.full(m, i) for i, m in enumerate(self.dims)])

    @cached_property
    def adapted_omega(self) -> np.ndarray:
        """Bracket form in adapted coordinates: omega(x, y) = c(x)^T W c(y)."""
        B = self.basis_matrix
        return B.T @ symplectic_matrix(self.n) @ B

    def coords(self, x) -> np.ndarray:
        """Adapted coordinates of a point (or batch)."""
        c = x.coords if isinstance(x, LieElement) else np.asarray(x, dtype=float)
        if c.shape[-1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {c.shape[-1]}")
        return c @ self.basis_inverse.T

    def from_coords(self, c) -> LieElement:
        return LieElement(self.n, np.asarray(c, dtype=float) @ self.basis_matrix.T)

    def block_norms(self, x) -> np.ndarray:
        """Euclidean norms |x_i| of the U_i components, shape (..., k+1)."""
        c = self.coords(x)
        return np.stack([np.linalg.norm(c[..., s], axis=-1) for s in self.slices], axis=-1)

    def component(self, x, i: int) -> LieElement:
        """U_i component of x (1-based block index)."""
        c = self.coords(x)
        mask = np.zeros(self.dim)
        mask[self.slices[i - 1]] = 1.0
        return self.from_coords(c * mask)

    def spectral_spec(self) -> DerivationSpec:
        """Re-encode this structure in spectral form."""
        return DerivationSpec(
            self.n,
            spectral=tuple((float(a), b.T) for a, b in zip(self.alphas, self.eigenspace_bases)),
            label=self.label,
        )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    defect: float
    value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "defect", float(self.defect))


@dataclass(frozen=True)
class StructureReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_defect(self) -> float:
        return max(c.defect for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {
                c.name: {"passed": c.passed, "defect": c.defect, **({"value": c.value} if c.value is not None else {})}
                for c in self.checks
            },
        }


def leibniz_defect(matrix) -> float:
    """Max over basis pairs of |A[e_a,e_b] - [Ae_a,e_b] - [e_a,Ae_b]|."""
    A = np.asarray(matrix, dtype=float)
    dim = A.shape[0]
    J = symplectic_matrix((dim - 1) // 2)
    rhs = A.T @ J + J @ A
    D = J[:, :, None] * A[:, -1][None, None, :]
    D[:, :, -1] -= rhs
    return float(np.max(np.abs(D))) if D.size else 0.0


def validate_derivation(spec: DerivationSpec, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    defect = leibniz_defect(spec.to_matrix())
    return defect <= tol, defect


def _group(values, rtol=GROUP_RTOL):
    order = np.argsort(values, kind="stable")
    groups = []
    for idx in order:
        v = values[idx]
        if groups and abs(v - values[groups[-1][-1]]) <= rtol * max(abs(v), 1.0):
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return groups


def _canonical_basis(N: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(N) via pivoted Gram-Schmidt on its projector."""
    P = N @ N.T
    R = P.copy()
    out = []
    for _ in range(N.shape[1]):
        norms = np.linalg.norm(R, axis=0)
        j = int(np.argmax(norms))
        v = R[:, j] / norms[j]
        if v[j] < 0:
            v = -v
        out.append(v)
        R = R - np.outer(v, v @ R)
    return np.array(out).T


def _null_space(M: np.ndarray, m: int, tol: float) -> np.ndarray:
    _, s, Vt = np.linalg.svd(M)
    scale = max(1.0, s[0] if s.size else 1.0)
    if s[-m:].max(initial=0.0) > tol * scale:
        raise NonDiagonalizable(
            f"geometric multiplicity below algebraic multiplicity {m} (singular value {s[-m:].max():.3g})"
        )
    return Vt[-m:].T


def decompose(spec: DerivationSpec, tol: float = DEFAULT_TOL, group_rtol: float = GROUP_RTOL) -> GradedStructure:
    """Validate ``spec`` and return its graded structure with adapted basis."""
    ok, defect = validate_derivation(spec, tol)
    if not ok:
        raise InvalidDerivation(f"Leibniz identity fails, max defect {defect:.3g} > {tol:.3g}")
    A = spec.to_matrix()
    dim = spec.dim

    if spec.spectral is not None:
        values = np.array([a for a, _ in spec.spectral])
        if np.any(values <= 0):
            raise NonPositiveEigenvalue(f"eigenvalue {values.min():g} is not positive")
        groups = _group(values, group_rtol)
        alphas = np.array([values[g].mean() for g in groups])
        bases = [np.vstack([spec.spectral[i][1] for i in g]).T for g in groups]
    else:
        try:
            lam = np.linalg.eigvals(A)
        except np.linalg.LinAlgError as exc:
            raise NonDiagonalizable(f"eigenvalue iteration failed to converge: {exc}") from exc
        scale = np.maximum(np.abs(lam), 1.0)
        if np.any(np.abs(lam.imag) > group_rtol * scale):
            raise ComplexSpectrum(f"non-real eigenvalues {lam[np.abs(lam.imag) > group_rtol * scale]}")
        lam = lam.real
        if np.any(lam <= 0):
            raise NonPositiveEigenvalue(f"eigenvalue {lam.min():g} is not positive")
        groups = _group(lam, group_rtol)
        bases, alphas = [], []
        null_tol = max(1e-7, tol)
        for g in groups:
            approx = lam[g].mean()
            N = _null_space(A - approx * np.eye(dim), len(g), null_tol)
            N = _canonical_basis(N)
            bases.append(N)
            alphas.append(float(np.trace(N.T @ A @ N)) / N.shape[1])
        alphas = np.array(alphas)

    full = np.hstack(bases)
    if full.shape[1] != dim or np.linalg.cond(full) > 1e12:
        raise NonDiagonalizable("eigenspaces do not span the algebra")
    if np.any(np.diff(alphas) <= 0):
        raise NonDiagonalizable("eigenvalue groups collapsed after refinement")

    top = bases[-1]
    if top.shape[1] != 1:
        raise CenterMismatch(f"top eigenspace has dimension {top.shape[1]}, expected 1")
    v = top[:, 0]
    if np.linalg.norm(v[:-1]) > tol * max(np.linalg.norm(v), 1.0) * 10:
        raise CenterMismatch("top eigenspace is not the centre line")

    gs = GradedStructure(
        n=spec.n,
        alphas=alphas,
        eigenspace_bases=tuple(bases),
        matrix=A,
        label=spec.label,
    )
    return replace(gs, adapted=build_adapted_basis(gs, tol))


def _pair_blocks(P, Q, tol, name):
    """Dual bases of span(P) and span(Q) with omega(e_s, eta_t) = delta_st.

    Inductive choice: pick the pair with the largest pairing, normalise eta,
    then push the remaining candidates into ker ad(eta) resp. ker ad(e).
    """
    J = symplectic_matrix((P.shape[0] - 1) // 2)
    P = P.astype(float).copy()
    Q = Q.astype(float).copy()
    es, etas = [], []
    while P.shape[1]:
        M = P.T @ J @ Q
        scale = np.outer(np.linalg.norm(P, axis=0), np.linalg.norm(Q, axis=0))
        s, t = np.unravel_index(np.argmax(np.abs(M)), M.shape)
        if abs(M[s, t]) <= tol * scale[s, t]:
            raise DegeneratePairing(f"{name}: pairing matrix is numerically singular")
        e = P[:, s]
        eta = Q[:, t] / M[s, t]
        P = np.delete(P, s, axis=1)
        Q = np.delete(Q, t, axis=1)
        P = P - np.outer(e, P.T @ J @ eta)
        Q = Q - np.outer(eta, e @ J @ Q)
        es.append(e)
        etas.append(eta)
    return np.array(es).T, np.array(etas).T


def _darboux(P, tol, name):
    """Darboux basis e_1, eta_1, ... of a subspace on which omega is nondegenerate."""
    J = symplectic_matrix((P.shape[0] - 1) // 2)
    P = P.astype(float).copy()
    if P.shape[1] % 2:
        raise DegeneratePairing(f"{name}: odd dimension {P.shape[1]} cannot carry a symplectic form")
    out = []
    while P.shape[1]:
        M = P.T @ J @ P
        norms = np.linalg.norm(P, axis=0)
        s, t = np.unravel_index(np.argmax(np.abs(M)), M.shape)
        if abs(M[s, t]) <= tol * norms[s] * norms[t]:
            raise DegeneratePairing(f"{name}: bracket is degenerate on the middle block")
        e = P[:, s]
        eta = P[:, t] / M[s, t]
        P = np.delete(P, [s, t], axis=1)
        # p -> p - omega(p, eta) e + omega(p, e) eta lands in ker ad(e) and ker ad(eta)
        P = P - np.outer(e, P.T @ J @ eta) + np.outer(eta, P.T @ J @ e)
        out.extend([e, eta])
    return np.array(out).T


def build_adapted_basis(gs: GradedStructure, tol: float = DEFAULT_TOL) -> AdaptedBasis:
    k = gs.k
    bases = gs.eigenspace_bases
    blocks = []
    for i in range(1, k + 1):
        j = k + 1 - i
        if i < j:
            E, H = _pair_blocks(bases[i - 1], bases[j - 1], tol, f"U_{i} x U_{j}")
            blocks.append(AdaptedBlock("paired", (i, j), E, H))
        elif i == j:
            blocks.append(AdaptedBlock("middle", (i,), _darboux(bases[i - 1], tol, f"U_{i}")))
    center = LieElement.basis(gs.n, gs.dim)
    blocks.append(AdaptedBlock("center", (k + 1,), center.coords[:, None].copy()))
    return AdaptedBasis(tuple(blocks), center)


def verify_structure(gs: GradedStructure, tol: float = DEFAULT_TOL) -> StructureReport:
    """Numerically check the eigenspace and bracket properties of ``gs`` and its adapted basis."""
    J = symplectic_matrix(gs.n)
    k = gs.k
    dims = gs.dims
    normed = [b / np.linalg.norm(b, axis=0) for b in gs.eigenspace_bases]
    checks = []

    top = normed[-1]
    off_center = float(np.linalg.norm(top[:-1, :], axis=0).max()) if dims[-1] else 1.0
    central = float(np.abs(top.T @ J).max())
    d1 = max(float(abs(dims[-1] - 1)), off_center, central)
    checks.append(Check("center", d1 <= tol, d1))

    d2 = 0.0
    for i in range(k + 1):
        for j in range(k + 1):
            if (i + 1) + (j + 1) != k + 1:
                d2 = max(d2, float(np.abs(normed[i].T @ J @ normed[j]).max()))
    checks.append(Check("orthogonality", d2 <= tol, d2))

    smin = np.inf
    for i in range(k):
        j = k - 1 - i
        sv = np.linalg.svd(normed[i].T @ J @ normed[j], compute_uv=False)
        smin = min(smin, float(sv.min()) if dims[i] == dims[j] else 0.0)
    smin = float(smin) if k else 1.0
    checks.append(Check("nondegenerate_pairing", smin > tol, max(0.0, tol - smin), smin))

    a = gs.alphas
    d4 = max((abs(a[i] + a[k - 1 - i] - a[k]) for i in range(k)), default=0.0)
    checks.append(Check("eigenvalue_sum", d4 <= tol * max(1.0, a[k]), float(d4)))

    d5 = max((abs(dims[i] - dims[k - 1 - i]) for i in range(k)), default=0)
    if k % 2 == 1 and dims[k // 2] % 2:
        d5 = max(d5, 1)
    checks.append(Check("dimension_symmetry", d5 == 0, float(d5)))

    if gs.adapted is not None:
        d6 = 0.0
        for b in gs.adapted.blocks:
            if b.kind == "paired":
                T = b.first.T @ J @ b.second
                d6 = max(d6, float(np.abs(T - np.eye(T.shape[0])).max()))
            elif b.kind == "middle":
                T = b.first.T @ J @ b.first
                m = T.shape[0] // 2
                d6 = max(d6, float(np.abs(T - symplectic_matrix(m)[:-1, :-1]).max()))
        checks.append(Check("adapted_bracket_table", d6 <= tol, d6))
    return StructureReport(tuple(checks))


def flow(gs: GradedStructure, t, x: LieElement) -> LieElement:
    """Apply the automorphism e^{tA}: scale the U_i part of x by e^{t a_i}."""
    if x.n != gs.n:
        raise DimensionError(f"point has n={x.n}, structure has n={gs.n}")
    t = np.asarray(t, dtype=float)
    c = gs.coords(x) * np.exp(t[..., None] * gs.coord_alphas)
    return gs.from_coords(c)


def is_automorphism(phi, tol: float = 1e-10) -> bool:
    """True if the linear map ``phi`` (standard coordinates) preserves the bracket."""
    phi = np.asarray(phi, dtype=float)
    n = (phi.shape[0] - 1) // 2
    J = symplectic_matrix(n)
    mu = phi[-1, -1]
    defect = max(
        float(np.abs(phi[:-1, -1]).max(initial=0.0)),
        float(np.abs(phi.T @ J @ phi - mu * J).max()),
    )
    return abs(mu) > tol and defect <= tol * max(1.0, np.abs(phi).max() ** 2)


def random_automorphism(n: int, rng: np.random.Generator, strength: float = 0.5) -> np.ndarray:
    """Random bracket-preserving linear map of h_n.

    Built as [[c S, 0], [v^T, c^2]] with S = expm(J0 X) symplectic (X symmetric),
    so [phi x, phi y] = c^2 [x, y] = phi [x, y].
    """
    J0 = symplectic_matrix(n)[:-1, :-1]
    X = rng.normal(scale=strength, size=(2 * n, 2 * n))
    X = (X + X.T) / 2
    S = scipy.linalg.expm(J0 @ X)
    c = float(np.exp(rng.uniform(-0.5, 0.5)))
    phi = np.zeros((2 * n + 1, 2 * n + 1))
    phi[:-1, :-1] = c * S
    phi[-1, :-1] = rng.normal(scale=strength, size=2 * n)
    phi[-1, -1] = c * c
    return phi


def conjugate(spec: DerivationSpec, phi) -> DerivationSpec:
    """Derivation phi A phi^{-1}."""
    phi = np.asarray(phi, dtype=float)
    return DerivationSpec(spec.n, matrix=phi @ spec.to_matrix() @ np.linalg.inv(phi), label=spec.label)
