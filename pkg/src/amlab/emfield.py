"""Electromagnetic angular momentum and momentum integrals (Gaussian units).

The field integrands of a charged, magnetized source decay only
algebraically (x × (E × B) ~ 1/r^4), so a box integral misses a tail of
order 1/L.  ``far_field_integrals`` recovers the exterior by repeating the
field construction on nested grids of doubling spacing, with the source
restricted onto each by moment-preserving weights, and closes with the
analytic monopole-dipole tail outside the last cube.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _quad

from .errors import NotTransverseError
from .grid import (
    Grid3,
    ScalarField,
    VectorField,
    cross,
    curl_array,
    grad_array,
    integrate_array,
    interior,
    moment_cross,
)
from .helmholtz import coulomb_potential_ext, free_space_convolution_array, relative_divergence, transverse_potential_ext

TRANSVERSE_TOL = 1e-3
FAR_LEVELS = 5


@dataclass(frozen=True)
class FarField:
    """Exterior (outside the fine box) parts of the bound-field integrals."""

    J: np.ndarray
    P: np.ndarray
    energy: float
    levels: int
    radius: float
    tail_J: np.ndarray
    tail_P: np.ndarray
    tail_energy: float

    def to_dict(self) -> dict:
        return {
            "J": self.J.tolist(), "P": self.P.tolist(), "energy": self.energy,
            "levels": self.levels, "outer_half_width": self.radius,
            "tail_J": self.tail_J.tolist(), "tail_P": self.tail_P.tolist(),
            "tail_energy": self.tail_energy,
        }

    def scaled(self, f: float) -> "FarField":
        """Exterior integrals of fields multiplied by ``f`` (all quadratic in the fields)."""
        f2 = f * f
        return FarField(f2 * self.J, f2 * self.P, f2 * self.energy, self.levels, self.radius,
                        f2 * self.tail_J, f2 * self.tail_P, f2 * self.tail_energy)


@dataclass(frozen=True)
class EMConfig:
    phi: ScalarField
    A: VectorField
    E_long: VectorField
    E_trans: VectorField
    B: VectorField
    gauge_tag: str = "coulomb"
    far: FarField | None = None

    @property
    def grid(self) -> Grid3:
        return self.phi.grid

    @property
    def E(self) -> VectorField:
        return VectorField(self.grid, self.E_long.data + self.E_trans.data)

    def with_A(self, A: VectorField, gauge_tag: str) -> "EMConfig":
        return EMConfig(self.phi, A, self.E_long, self.E_trans, self.B, gauge_tag, self.far)

    def scaled(self, f: float) -> "EMConfig":
        """Fields of sources multiplied by ``f``."""
        far = self.far.scaled(f) if self.far is not None else None
        return EMConfig(self.phi * f, self.A * f, self.E_long * f, self.E_trans * f, self.B * f,
                        self.gauge_tag, far)

    def diagnostics(self) -> dict:
        h = self.grid.h
        return {
            "div_A_relative": relative_divergence(self.A.data, h),
            "curl_A_minus_B_relative": _rel(interior(curl_array(self.A.data, h), 2), interior(self.B.data, 2)),
        }


def _rel(a, b):
    den = np.sqrt(np.sum(b * b))
    return float(np.sqrt(np.sum((a - b) ** 2)) / den) if den > 0 else float(np.sqrt(np.sum(a * a)))


def zero_config(grid: Grid3) -> EMConfig:
    z3 = np.zeros((3,) + grid.shape)
    return EMConfig(ScalarField(grid, np.zeros(grid.shape)), VectorField(grid, z3), VectorField(grid, z3),
                    VectorField(grid, z3), VectorField(grid, z3), "coulomb", None)


# ---------------------------------------------------------------------------
# sources -> fields


def _fields_from_sources(rho: np.ndarray, j: np.ndarray, h, c: float, transverse: bool = True):
    """(phi, A, E_long, B) on the grid of the sources, all from free-space convolutions."""
    phi_ext = coulomb_potential_ext(rho, h, halo=2)
    E = -interior(grad_array(phi_ext, h), 2)
    if transverse:
        A_ext = transverse_potential_ext(j, h, c, halo=2)
    else:
        A_ext = free_space_convolution_array(j, h, "1/r", halo=2) / c
    B = interior(curl_array(A_ext, h), 2)
    return interior(phi_ext, 2), interior(A_ext, 2), E, B


def em_from_sources(rho: ScalarField, j: VectorField, c: float = 1.0, far_levels: int = FAR_LEVELS) -> EMConfig:
    """Instantaneous Coulomb-gauge fields of static sources.

    phi and E_long solve Gauss's law, A_t is the transverse magnetostatic
    potential of j and B = curl A_t; ``far_levels`` > 0 also attaches the
    exterior parts of the bound-field integrals.
    """
    grid = rho.grid
    if not np.any(rho.data) and not np.any(j.data):
        return zero_config(grid)
    phi, A, E, B = _fields_from_sources(rho.data, j.data, grid.h, c)
    far = far_field_integrals(rho, j, c, far_levels) if far_levels > 0 else None
    zeros = np.zeros((3,) + grid.shape)
    return EMConfig(ScalarField(grid, phi), VectorField(grid, A), VectorField(grid, E),
                    VectorField(grid, zeros), VectorField(grid, B), "coulomb", far)


# ---------------------------------------------------------------------------
# far field


@lru_cache(maxsize=1)
def cube_exterior_inverse_r4() -> float:
    """Integral of 1/r^4 over the exterior of the cube [-1, 1]^3."""
    val, _ = _quad.dblquad(lambda v, u: 1.0 / (1.0 + u * u + v * v) ** 2, -1, 1, -1, 1, epsabs=1e-13, epsrel=1e-13)
    return 6.0 * val


def _restrict_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    # linear (cloud-in-cell) weights 1/4, 3/4, 3/4, 1/4 keep the charge and the first moments
    f = np.moveaxis(arr, axis, -1)
    pad = np.zeros(f.shape[:-1] + (f.shape[-1] + 2,))
    pad[..., 1:-1] = f
    out = 0.375 * (pad[..., 1:-1:2] + pad[..., 2:-1:2]) + 0.125 * (pad[..., 0:-2:2] + pad[..., 3::2])
    return np.moveaxis(out, -1, axis)


def _coarsen(arr: np.ndarray) -> np.ndarray:
    """Moment-preserving restriction to spacing 2h, embedded in the centre of a same-sized zero array."""
    n = arr.shape[-3:]
    small = arr
    for axis in (-3, -2, -1):
        small = _restrict_axis(small, axis)
    out = np.zeros_like(arr)
    q = [m // 4 for m in n]
    out[..., q[0]:q[0] + n[0] // 2, q[1]:q[1] + n[1] // 2, q[2]:q[2] + n[2] // 2] = small
    return out


def _coarser_grid(grid: Grid3) -> Grid3:
    h = tuple(2 * v for v in grid.h)
    lo = [o - 0.5 * hh - (n // 4) * 2 * hh for o, hh, n in zip(grid.origin, grid.h, grid.n)]
    return Grid3(grid.n, h, tuple(l + 0.5 * hh for l, hh in zip(lo, h)))


def source_moments(rho: ScalarField, j: VectorField, c: float = 1.0):
    """Total charge, magnetic moment (1/2c) ∫ x × j and net current ∫ j."""
    q = float(integrate_array(rho.data, rho.grid))
    m = integrate_array(moment_cross(j.grid, j.data), j.grid) / (2.0 * c)
    current = integrate_array(j.data, j.grid)
    return q, m, current


def far_field_integrals(rho: ScalarField, j: VectorField, c: float = 1.0, levels: int = FAR_LEVELS) -> FarField:
    grid = rho.grid
    if any(n % 4 for n in grid.n):
        raise ValueError(f"far-field levels need every n divisible by 4, got {grid.n}")
    q, m, current = source_moments(rho, j, c)
    J = np.zeros(3)
    P = np.zeros(3)
    energy = 0.0
    r_src, j_src, g = rho.data, j.data, grid
    mask = np.ones(grid.shape, dtype=bool)
    q4 = [n // 4 for n in grid.n]
    mask[q4[0]:grid.n[0] - q4[0], q4[1]:grid.n[1] - q4[1], q4[2]:grid.n[2] - q4[2]] = False
    for _ in range(levels):
        r_src, j_src, g = _coarsen(r_src), _coarsen(j_src), _coarser_grid(g)
        _, _, E, B = _fields_from_sources(r_src, j_src, g.h, c, transverse=False)
        EB = cross(E, B) * mask
        J += integrate_array(moment_cross(g, EB), g) / (4.0 * np.pi * c)
        P += integrate_array(EB, g) / (4.0 * np.pi * c)
        energy += float(integrate_array(((E * E).sum(0) + (B * B).sum(0)) * mask, g)) / (8.0 * np.pi)

    L = 0.5 * np.array(g.lengths)
    cubic = np.allclose(L, L[0])
    R = float(L[0])
    if cubic:
        I4 = cube_exterior_inverse_r4() / R
        tail_J = q * m * I4 / (6.0 * np.pi * c)
        tail_P = q * current * I4 / (6.0 * np.pi * c**2)
        tail_E = (q * q + (2.0 / 3.0) * float(current @ current) / c**2) * I4 / (8.0 * np.pi)
    else:
        tail_J, tail_P, tail_E = np.zeros(3), np.zeros(3), 0.0
    return FarField(J + tail_J, P + tail_P, energy + tail_E, levels, R, tail_J, tail_P, tail_E)


# ---------------------------------------------------------------------------
# box integrals


def field_J_total(E: VectorField, B: VectorField, c: float = 1.0) -> np.ndarray:
    """(1/4πc) ∫ x × (E × B) over the grid box."""
    return integrate_array(moment_cross(E.grid, cross(E.data, B.data)), E.grid) / (4.0 * np.pi * c)


def field_J_bound_from_fields(E_long: VectorField, B: VectorField, c: float = 1.0,
                              far: FarField | None = None) -> np.ndarray:
    out = field_J_total(E_long, B, c)
    return out + far.J if far is not None else out


def check_transverse(A: VectorField, what: str = "A_t", tol: float = TRANSVERSE_TOL) -> float:
    ratio = relative_divergence(A.data, A.grid.h)
    if ratio > tol:
        raise NotTransverseError(f"{what} is not transverse: ||div||/||grad|| = {ratio:.3g} > {tol}")
    return ratio


def field_J_bound(rho: ScalarField, A_t: VectorField, c: float = 1.0, check: bool = True) -> np.ndarray:
    """(1/c) ∫ rho x × A_t; only meaningful in the Coulomb gauge."""
    if check and np.any(rho.data):
        check_transverse(A_t)
    return integrate_array(moment_cross(rho.grid, A_t.data * rho.data), rho.grid) / c


def field_J_radiative_split(E_trans: VectorField, A_t: VectorField, c: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Spin (1/4πc)∫E×A and orbital (1/4πc)∫ E_i (x×∇) A_i parts of the radiative term."""
    if not np.any(E_trans.data):
        return np.zeros(3), np.zeros(3)
    check_transverse(E_trans, "E_trans")
    check_transverse(A_t)
    grid = E_trans.grid
    spin = integrate_array(cross(E_trans.data, A_t.data), grid) / (4.0 * np.pi * c)
    orbital = np.zeros(3)
    for i in range(3):
        gA = grad_array(A_t.data[i], grid.h)
        orbital += integrate_array(moment_cross(grid, gA) * E_trans.data[i], grid)
    return spin, orbital / (4.0 * np.pi * c)


def field_P_total(E: VectorField, B: VectorField, c: float = 1.0) -> np.ndarray:
    return integrate_array(cross(E.data, B.data), E.grid) / (4.0 * np.pi * c)


def field_P_bound(rho: ScalarField, A_t: VectorField, c: float = 1.0) -> np.ndarray:
    return integrate_array(A_t.data * rho.data, rho.grid) / c


@dataclass(frozen=True)
class FieldAngularMomentum:
    total: np.ndarray
    bound_from_fields: np.ndarray
    bound_from_rho_At: np.ndarray
    radiative: np.ndarray
    rad_spin: np.ndarray
    rad_orbital: np.ndarray
    rad_boundary_residual: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}


def field_angular_momentum(em: EMConfig, rho: ScalarField, c: float = 1.0) -> FieldAngularMomentum:
    far_J = em.far.J if em.far is not None else 0.0
    bound_fields = field_J_total(em.E_long, em.B, c) + far_J
    radiative = field_J_total(em.E_trans, em.B, c)
    total = bound_fields + radiative
    bound_rho = field_J_bound(rho, em.A, c, check=em.gauge_tag == "coulomb")
    spin, orbital = field_J_radiative_split(em.E_trans, em.A, c)
    return FieldAngularMomentum(total, bound_fields, bound_rho, radiative, spin, orbital,
                                radiative - spin - orbital)
