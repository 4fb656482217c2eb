"""Uniform Cartesian grids, field containers, differential operators and quadrature.

Arrays are indexed ``[..., ix, iy, iz]``; a vector field stores its three
components on the leading axis and a spinor its four.  All operators are pure
functions of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
import scipy.fft

from .errors import GridError, NonFiniteError, StencilError

SCHEMES = ("fd4", "spectral")
FD4_HALF_WIDTH = 2


@dataclass(frozen=True)
class Grid3:
    n: tuple[int, int, int]
    h: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        h = tuple(float(v) for v in self.h)
        origin = tuple(float(v) for v in self.origin)
        if len(n) != 3 or len(h) != 3 or len(origin) != 3:
            raise GridError("n, h and origin must each have three entries")
        if min(n) < 8:
            raise GridError(f"every axis needs at least 8 points, got n={n}")
        if not all(np.isfinite(v) and v > 0 for v in h):
            raise GridError(f"spacings must be positive and finite, got h={h}")
        if not all(np.isfinite(v) for v in origin):
            raise GridError("origin must be finite")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def cube(cls, n: int, half_width: float) -> "Grid3":
        """Cell-centred cube [-L, L]^3 with ``n`` nodes per axis."""
        h = 2.0 * half_width / n
        o = -half_width + 0.5 * h
        return cls((n, n, n), (h, h, h), (o, o, o))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def size(self) -> int:
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def dV(self) -> float:
        return self.h[0] * self.h[1] * self.h[2]

    @property
    def lengths(self) -> tuple[float, float, float]:
        """Periodic box lengths n*h."""
        return tuple(n * h for n, h in zip(self.n, self.h))

    @property
    def volume(self) -> float:
        a, b, c = self.lengths
        return a * b * c

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + np.arange(self.n[a]) * self.h[a]

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.axis(0), self.axis(1), self.axis(2)

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of shapes (nx,1,1), (1,ny,1), (1,1,nz)."""
        x, y, z = self.axes()
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def position(self) -> np.ndarray:
        """Dense (3, nx, ny, nz) array of node coordinates."""
        X, Y, Z = self.coords()
        return np.stack(np.broadcast_arrays(X, Y, Z))

    def r2(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        X, Y, Z = self.coords()
        return (X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2

    def extended(self, g: int) -> "Grid3":
        """The grid grown by ``g`` nodes on every side (same spacing)."""
        return Grid3(
            tuple(n + 2 * g for n in self.n),
            self.h,
            tuple(o - g * h for o, h in zip(self.origin, self.h)),
        )

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable angular wavenumbers for the periodic box."""
        ks = [2.0 * np.pi * scipy.fft.fftfreq(n, d=h) for n, h in zip(self.n, self.h)]
        return ks[0][:, None, None], ks[1][None, :, None], ks[2][None, None, :]

    def to_dict(self) -> dict:
        return {"n": list(self.n), "h": list(self.h), "origin": list(self.origin)}


@dataclass(frozen=True)
class PhysicalParams:
    """Bare mass, signed charge and unit constants; ``kappa`` is m c / hbar."""

    m: float = 1.0
    e: float = -1.0
    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not self.m >= 0:
            raise ValueError("mass must be non-negative")
        if not (self.hbar > 0 and self.c > 0):
            raise ValueError("hbar and c must be positive")
        if not np.isfinite(self.e):
            raise ValueError("charge must be finite")

    @property
    def kappa(self) -> float:
        return self.m * self.c / self.hbar

    def with_charge(self, e: float) -> "PhysicalParams":
        return PhysicalParams(m=self.m, e=float(e), hbar=self.hbar, c=self.c)

    def to_dict(self) -> dict:
        return {"m": self.m, "e": self.e, "hbar": self.hbar, "c": self.c, "kappa": self.kappa}


# ---------------------------------------------------------------------------
# field containers


@dataclass(frozen=True)
class Field:
    grid: Grid3
    data: np.ndarray = field(repr=False)

    kind: ClassVar[str] = ""
    ncomp: ClassVar[int] = 1
    complex_valued: ClassVar[bool] = False

    def __post_init__(self):
        dtype = np.complex128 if self.complex_valued else np.float64
        data = np.asarray(self.data)
        if not self.complex_valued and np.iscomplexobj(data):
            raise TypeError(f"{type(self).__name__} holds real data")
        data = np.ascontiguousarray(data, dtype=dtype)
        expected = self.grid.shape if self.ncomp == 1 else (self.ncomp,) + self.grid.shape
        if data.shape != expected:
            raise GridError(f"{type(self).__name__} expects shape {expected}, got {data.shape}")
        object.__setattr__(self, "data", data)

    def check_finite(self):
        check_finite(self.data, what=type(self).__name__)
        return self

    def __add__(self, other):
        return type(self)(self.grid, self.data + _data(other))

    def __sub__(self, other):
        return type(self)(self.grid, self.data - _data(other))

    def __mul__(self, scalar):
        return type(self)(self.grid, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.data)


def _data(obj):
    return obj.data if isinstance(obj, Field) else obj


class ScalarField(Field):
    kind = "scalar_real"


class ComplexScalarField(Field):
    kind = "scalar_complex"
    complex_valued = True


class VectorField(Field):
    kind = "vector_real"
    ncomp = 3


class SpinorField(Field):
    kind = "spinor"
    ncomp = 4
    complex_valued = True

    def density(self) -> np.ndarray:
        d = self.data
        return (d.real**2 + d.imag**2).sum(axis=0)

    def norm2(self) -> float:
        return integrate(ScalarField(self.grid, self.density()))

    def normalized(self) -> "SpinorField":
        return SpinorField(self.grid, self.data / np.sqrt(self.norm2()))


FIELD_KINDS = {cls.kind: cls for cls in (ScalarField, ComplexScalarField, VectorField, SpinorField)}


# ---------------------------------------------------------------------------
# reductions


def check_finite(arr: np.ndarray, what: str = "field"):
    ok = np.isfinite(arr)
    if not ok.all():
        node = tuple(int(i) for i in np.argwhere(~ok)[0])
        raise NonFiniteError(f"non-finite value in {what} at index {node}", node=node)


def pairwise_sum(values: np.ndarray) -> np.ndarray:
    """Sum over the last axis with a fixed binary tree.

    The last axis is zero-padded to a power of two and halved by adding
    adjacent pairs, so the association order depends only on the length.
    """
    v = np.asarray(values)
    n = v.shape[-1]
    if n == 0:
        return np.zeros(v.shape[:-1], dtype=v.dtype)
    size = 1 << (n - 1).bit_length()
    if size != n:
        pad = np.zeros(v.shape[:-1] + (size - n,), dtype=v.dtype)
        v = np.concatenate([v, pad], axis=-1)
    while v.shape[-1] > 1:
        v = v[..., 0::2] + v[..., 1::2]
    return v[..., 0]


def integrate_array(arr: np.ndarray, grid: Grid3, what: str = "integrand"):
    """Midpoint-rule volume integral of an array whose last three axes are the grid."""
    arr = np.asarray(arr)
    if arr.shape[-3:] != grid.shape:
        raise GridError(f"integrand shape {arr.shape} does not match grid {grid.shape}")
    check_finite(arr, what)
    flat = np.ascontiguousarray(arr).reshape(arr.shape[:-3] + (-1,))
    total = pairwise_sum(flat) * grid.dV
    return total if total.ndim else total[()]


def integrate(f: Field):
    """Volume integral of a field; vectors and spinors integrate per component."""
    return integrate_array(f.data, f.grid, what=type(f).__name__)


# ---------------------------------------------------------------------------
# differential operators on raw arrays


def _check_stencil(n: int, scheme: str):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "fd4" and n < 2 * FD4_HALF_WIDTH + 1:
        raise StencilError(f"fd4 stencil needs at least 5 points along an axis, got {n}")


def derivative(arr: np.ndarray, axis: int, h: float, scheme: str = "fd4", workers=None) -> np.ndarray:
    """First derivative along spatial ``axis`` (0, 1, 2) of the trailing three axes.

    fd4 is the 4th-order central stencil with zero extension outside the
    array; spectral treats the array as one period.
    """
    ax = arr.ndim - 3 + axis
    n = arr.shape[ax]
    _check_stencil(n, scheme)
    if scheme == "spectral":
        k = 2.0 * np.pi * scipy.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        shape = [1] * arr.ndim
        shape[ax] = n
        k = k.reshape(shape)
        spec = scipy.fft.fft(arr, axis=ax, workers=workers)
        out = scipy.fft.ifft(1j * k * spec, axis=ax, workers=workers)
        return out if np.iscomplexobj(arr) else out.real
    pad = [(0, 0)] * arr.ndim
    pad[ax] = (2, 2)
    p = np.pad(arr, pad)

    def s(lo):
        idx = [slice(None)] * arr.ndim
        idx[ax] = slice(lo, lo + n)
        return p[tuple(idx)]

    return (8.0 * (s(3) - s(1)) - (s(4) - s(0))) / (12.0 * h)


def second_derivative_fd2(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    ax = arr.ndim - 3 + axis
    n = arr.shape[ax]
    pad = [(0, 0)] * arr.ndim
    pad[ax] = (1, 1)
    p = np.pad(arr, pad)

    def s(lo):
        idx = [slice(None)] * arr.ndim
        idx[ax] = slice(lo, lo + n)
        return p[tuple(idx)]

    return (s(2) - 2.0 * s(1) + s(0)) / (h * h)


def grad_array(f: np.ndarray, h, scheme="fd4", workers=None) -> np.ndarray:
    return np.stack([derivative(f, a, h[a], scheme, workers) for a in range(3)])


def div_array(V: np.ndarray, h, scheme="fd4", workers=None) -> np.ndarray:
    return sum(derivative(V[a], a, h[a], scheme, workers) for a in range(3))


def curl_array(V: np.ndarray, h, scheme="fd4", workers=None) -> np.ndarray:
    d = lambda c, a: derivative(V[c], a, h[a], scheme, workers)
    return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])


def gradient(f: ScalarField, scheme: str = "fd4") -> VectorField:
    return VectorField(f.grid, grad_array(f.data, f.grid.h, scheme))


def divergence(V: VectorField, scheme: str = "fd4") -> ScalarField:
    return ScalarField(V.grid, div_array(V.data, V.grid.h, scheme))


def curl(V: VectorField, scheme: str = "fd4") -> VectorField:
    return VectorField(V.grid, curl_array(V.data, V.grid.h, scheme))


def interior(arr: np.ndarray, margin: int) -> np.ndarray:
    """View of the trailing three axes with ``margin`` layers removed on every side."""
    if margin == 0:
        return arr
    sl = (Ellipsis,) + (slice(margin, -margin),) * 3
    return arr[sl]


def l2(arr: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(arr) ** 2)))


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two (3, ...) arrays."""
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def moment_cross(grid: Grid3, V: np.ndarray) -> np.ndarray:
    """Integrand x × V on the grid nodes."""
    X, Y, Z = grid.coords()
    return np.stack([Y * V[2] - Z * V[1], Z * V[0] - X * V[2], X * V[1] - Y * V[0]])
