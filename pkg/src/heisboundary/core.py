"""Arithmetic in the Heisenberg algebra h_n and the solvable group G_A.

Points of H_n are identified with h_n = R^{2n+1} through the exponential map.
The only nonzero brackets of the standard basis are [e_{2i-1}, e_{2i}] = e_{2n+1},
and the group law is the truncated BCH product X*Y = X + Y + [X, Y]/2.

A `LieElement` may carry a batch of points: ``coords`` has shape ``(..., 2n+1)``
and every operation broadcasts over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError


@lru_cache(maxsize=None)
def symplectic_matrix(n: int) -> np.ndarray:
    """Matrix J with [x, y] = (x^T J y) e_{2n+1}."""
    J = np.zeros((2 * n + 1, 2 * n + 1))
    for i in range(n):
        J[2 * i, 2 * i + 1] = 1.0
        J[2 * i + 1, 2 * i] = -1.0
    J.flags.writeable = False
    return J


def omega(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Centre coefficient of [x, y] for raw coordinate arrays (broadcasting)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(x[..., 0:-1:2] * y[..., 1:-1:2] - x[..., 1:-1:2] * y[..., 0:-1:2], axis=-1)


@dataclass(frozen=True, eq=False)
class LieElement:
    n: int
    coords: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DimensionError(f"Heisenberg index must be a positive integer, got {self.n}")
        c = np.array(self.coords, dtype=float)
        if c.ndim == 0 or c.shape[-1] != 2 * self.n + 1:
            raise DimensionError(f"expected trailing dimension {2 * self.n + 1}, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise DimensionError("coordinates must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, coords) -> "LieElement":
        c = np.asarray(coords, dtype=float)
        dim = c.shape[-1]
        if dim % 2 == 0 or dim < 3:
            raise DimensionError(f"dimension {dim} is not 2n+1 with n >= 1")
        return cls((dim - 1) // 2, c)

    @classmethod
    def zero(cls, n: int) -> "LieElement":
        return cls(n, np.zeros(2 * n + 1))

    @classmethod
    def basis(cls, n: int, i: int) -> "LieElement":
        """Standard basis vector e_i, 1-based as in the usual notation."""
        c = np.zeros(2 * n + 1)
        c[i - 1] = 1.0
        return cls(n, c)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def shape(self) -> tuple:
        return self.coords.shape[:-1]

    def __len__(self):
        if not self.shape:
            raise TypeError("single LieElement has no length")
        return self.shape[0]

    def __getitem__(self, idx) -> "LieElement":
        if not self.shape:
            raise TypeError("single LieElement is not indexable")
        return LieElement(self.n, self.coords[idx])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __add__(self, other):
        _check_same(self, other)
        return LieElement(self.n, self.coords + other.coords)

    def __sub__(self, other):
        _check_same(self, other)
        return LieElement(self.n, self.coords - other.coords)

    def __neg__(self):
        return LieElement(self.n, -self.coords)

    def __mul__(self, scalar):
        return LieElement(self.n, self.coords * np.asarray(scalar, dtype=float)[..., None])

    __rmul__ = __mul__

    def __repr__(self):
        return f"LieElement(n={self.n}, coords={np.array2string(self.coords, precision=6)})"

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        _check_same(self, other)
        return bool(np.allclose(self.coords, other.coords, atol=atol, rtol=rtol))


@dataclass(frozen=True, eq=False)
class SolvElement:
    """Element (g, t) of G_A = H_n x| R."""

    g: LieElement
    t: float

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))


def _check_same(x: LieElement, y: LieElement) -> None:
    if not isinstance(x, LieElement) or not isinstance(y, LieElement):
        raise TypeError("expected LieElement operands")
    if x.n != y.n:
        raise DimensionError(f"mixed Heisenberg indices n={x.n} and n={y.n}")


def bracket(x: LieElement, y: LieElement) -> LieElement:
    _check_same(x, y)
    w = omega(x.coords, y.coords)
    out = np.zeros(np.broadcast_shapes(x.coords.shape, y.coords.shape))
    out[..., -1] = w
    return LieElement(x.n, out)


def bch_mul(x: LieElement, y: LieElement) -> LieElement:
    """Group product X*Y = X + Y + [X, Y]/2 (exact in step two)."""
    _check_same(x, y)
    out = x.coords + y.coords
    out[..., -1] += 0.5 * omega(x.coords, y.coords)
    return LieElement(x.n, out)


def bch_inv(x: LieElement) -> LieElement:
    return -x


def solv_mul(a: SolvElement, b: SolvElement, gs) -> SolvElement:
    """(g, t1).(h, t2) = (g * e^{t1 A} h, t1 + t2)."""
    from .derivation import flow

    return SolvElement(bch_mul(a.g, flow(gs, a.t, b.g)), a.t + b.t)


def solv_inv(a: SolvElement, gs) -> SolvElement:
    from .derivation import flow

    return SolvElement(flow(gs, -a.t, -a.g), -a.t)
