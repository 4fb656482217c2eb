"""Dirac matrices, spinor scenarios, source densities and the fermionic angular-momentum terms.

Representation: Dirac-Pauli (standard) basis, metric diag(+1, -1, -1, -1).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import ImaginaryResidualError, UnknownScenarioError
from .grid import (
    Grid3,
    PhysicalParams,
    ScalarField,
    SpinorField,
    VectorField,
    derivative,
    integrate_array,
)

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class DiracMatrices:
    gamma: np.ndarray  # (4, 4, 4): gamma^0 .. gamma^3
    alpha: np.ndarray  # (3, 4, 4)
    beta: np.ndarray
    sigma_big: np.ndarray  # (3, 4, 4)
    pauli: np.ndarray  # (3, 2, 2)
    metric: np.ndarray


@lru_cache(maxsize=1)
def build_matrices() -> DiracMatrices:
    """Gamma matrices in the Dirac-Pauli representation.

    Entries are small Gaussian integers, so every product below is exact in
    floating point.
    """
    I2 = np.eye(2, dtype=np.complex128)
    Z2 = np.zeros((2, 2), dtype=np.complex128)
    pauli = np.array(
        [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=np.complex128
    )
    gamma0 = np.block([[I2, Z2], [Z2, -I2]])
    gammas = [gamma0] + [np.block([[Z2, s], [-s, Z2]]) for s in pauli]
    gamma = np.array(gammas)
    alpha = np.array([gamma0 @ g for g in gamma[1:]])
    sigma_big = np.array([np.block([[s, Z2], [Z2, s]]) for s in pauli])
    metric = np.diag([1.0, -1.0, -1.0, -1.0])
    for arr in (gamma, alpha, sigma_big, pauli):
        arr.flags.writeable = False
    return DiracMatrices(gamma, alpha, gamma0, sigma_big, pauli, metric)


def algebra_checks() -> dict[str, bool]:
    """Exact Clifford, spin and Hermiticity identities (bitwise equality, no tolerance)."""
    m = build_matrices()
    eye = np.eye(4, dtype=np.complex128)
    out = {}
    for mu in range(4):
        for nu in range(4):
            anti = m.gamma[mu] @ m.gamma[nu] + m.gamma[nu] @ m.gamma[mu]
            out[f"anticommutator[{mu},{nu}]"] = bool(np.array_equal(anti, 2.0 * m.metric[mu, nu] * eye))
    eps = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1}
    for i in range(3):
        out[f"Sigma[{i}]^2"] = bool(np.array_equal(m.sigma_big[i] @ m.sigma_big[i], eye))
        out[f"Sigma[{i}] hermitian"] = bool(np.array_equal(m.sigma_big[i], m.sigma_big[i].conj().T))
        out[f"alpha[{i}] hermitian"] = bool(np.array_equal(m.alpha[i], m.alpha[i].conj().T))
        out[f"alpha[{i}]^2"] = bool(np.array_equal(m.alpha[i] @ m.alpha[i], eye))
        out[f"alpha[{i}] beta anticommute"] = bool(np.array_equal(m.alpha[i] @ m.beta + m.beta @ m.alpha[i],
                                                                  np.zeros((4, 4))))
        for j in range(3):
            if i == j:
                continue
            k = 3 - i - j
            sign = eps.get((i, j, k), -1)
            comm = m.sigma_big[i] @ m.sigma_big[j] - m.sigma_big[j] @ m.sigma_big[i]
            out[f"[Sigma[{i}],Sigma[{j}]]"] = bool(np.array_equal(comm, 2j * sign * m.sigma_big[k]))
    out["beta hermitian"] = bool(np.array_equal(m.beta, m.beta.conj().T))
    out["beta^2"] = bool(np.array_equal(m.beta @ m.beta, eye))
    return out


def _nonzeros(M):
    return [(a, b, M[a, b]) for a in range(M.shape[0]) for b in range(M.shape[1]) if M[a, b] != 0]


def apply_matrix(M: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply a 4x4 spinor matrix to every node of a (4, ...) array."""
    out = np.zeros_like(psi, dtype=np.complex128)
    for a, b, v in _nonzeros(M):
        out[a] += v * psi[b]
    return out


def bilinear(psi: np.ndarray, M: np.ndarray, phi: np.ndarray | None = None) -> np.ndarray:
    """Pointwise psi^dagger M phi (phi defaults to psi)."""
    phi = psi if phi is None else phi
    out = np.zeros(psi.shape[1:], dtype=np.complex128)
    for a, b, v in _nonzeros(M):
        out += v * np.conj(psi[a]) * phi[b]
    return out


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class SourceDensities:
    rho: ScalarField
    j: VectorField


IMAG_TOL = 1e-10


def _real_checked(z: np.ndarray, what: str, scale: float) -> np.ndarray:
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if resid > IMAG_TOL * max(scale, 1e-300):
        raise ImaginaryResidualError(f"{what} has imaginary residual {resid:.3g}")
    return z.real.copy()


def densities(psi: SpinorField, params: PhysicalParams) -> SourceDensities:
    """rho = e psi^dagger psi and j_i = e c psi^dagger alpha_i psi."""
    mats = build_matrices()
    d = psi.data
    dens = psi.density()
    scale = float(dens.max()) if dens.size else 0.0
    rho = params.e * dens
    j = np.stack([
        params.e * params.c * _real_checked(bilinear(d, mats.alpha[a]), "current", scale)
        for a in range(3)
    ])
    return SourceDensities(ScalarField(psi.grid, rho), VectorField(psi.grid, j))


# ---------------------------------------------------------------------------
# angular momentum terms


def _grad_psi(psi: SpinorField, scheme: str) -> list[np.ndarray]:
    return [derivative(psi.data, a, psi.grid.h[a], scheme) for a in range(3)]


def orbital_term(psi: SpinorField, params: PhysicalParams | None = None, scheme: str = "fd4",
                 full: bool = False):
    """-i hbar integral x × psi^dagger grad psi.

    Returns the real part; with ``full=True`` returns ``(value, imag_residual)``.
    The imaginary part is a boundary/discretization diagnostic and triggers
    a warning when it is not small.
    """
    hbar = (params or PhysicalParams()).hbar
    d = psi.data
    G = _grad_psi(psi, scheme)
    P = [np.sum(np.conj(d) * G[a], axis=0) for a in range(3)]
    X, Y, Z = psi.grid.coords()
    integrand = np.stack([Y * P[2] - Z * P[1], Z * P[0] - X * P[2], X * P[1] - Y * P[0]])
    val = -1j * hbar * integrate_array(integrand, psi.grid)
    value, imag = val.real, val.imag
    scale = max(float(np.max(np.abs(value))), hbar * psi.norm2())
    if np.max(np.abs(imag)) > 1e-6 * scale:
        warnings.warn(f"orbital term imaginary residual {imag} is not negligible", RuntimeWarning)
    return (value, imag) if full else value


def kinetic_momentum(psi: SpinorField, params: PhysicalParams | None = None, scheme: str = "fd4",
                     full: bool = False):
    """-i hbar integral psi^dagger grad psi (canonical momentum)."""
    hbar = (params or PhysicalParams()).hbar
    d = psi.data
    G = _grad_psi(psi, scheme)
    P = np.stack([np.sum(np.conj(d) * G[a], axis=0) for a in range(3)])
    val = -1j * hbar * integrate_array(P, psi.grid)
    return (val.real, val.imag) if full else val.real


def gauge_term(psi: SpinorField, A: VectorField, params: PhysicalParams) -> np.ndarray:
    """-(e/c) integral x × psi^dagger A psi."""
    dens = psi.density()
    X, Y, Z = psi.grid.coords()
    a = A.data
    w = dens * (-params.e / params.c)
    integrand = np.stack([(Y * a[2] - Z * a[1]) * w, (Z * a[0] - X * a[2]) * w, (X * a[1] - Y * a[0]) * w])
    return integrate_array(integrand, psi.grid)


def gauge_momentum(psi: SpinorField, A: VectorField, params: PhysicalParams) -> np.ndarray:
    """-(e/c) integral psi^dagger A psi."""
    w = psi.density() * (-params.e / params.c)
    return integrate_array(A.data * w, psi.grid)


def spin_density(psi: SpinorField) -> np.ndarray:
    mats = build_matrices()
    return np.stack([bilinear(psi.data, mats.sigma_big[a]).real for a in range(3)])


def spin_term(psi: SpinorField, params: PhysicalParams | None = None) -> np.ndarray:
    """(hbar/2) integral psi^dagger Sigma psi."""
    hbar = (params or PhysicalParams()).hbar
    return 0.5 * hbar * integrate_array(spin_density(psi), psi.grid)


def apply_L(psi: SpinorField, axis, scheme: str = "fd4", hbar: float = 1.0) -> np.ndarray:
    a = AXES[axis] if isinstance(axis, str) else int(axis)
    b, c = (a + 1) % 3, (a + 2) % 3
    coords = psi.grid.coords()
    h = psi.grid.h
    d = psi.data
    return -1j * hbar * (coords[b] * derivative(d, c, h[c], scheme) - coords[c] * derivative(d, b, h[b], scheme))


def apply_J(psi: SpinorField, axis, scheme: str = "fd4", hbar: float = 1.0) -> SpinorField:
    """(L_axis + (hbar/2) Sigma_axis) psi."""
    a = AXES[axis] if isinstance(axis, str) else int(axis)
    out = apply_L(psi, a, scheme, hbar) + 0.5 * hbar * apply_matrix(build_matrices().sigma_big[a], psi.data)
    return SpinorField(psi.grid, out)


def commutator_defect(psi: SpinorField, scheme: str = "fd4", hbar: float = 1.0, margin: int = 8) -> float:
    """Interior max |([J_x, J_y] - i hbar J_z) psi| over the interior max |J_z psi|.

    The margin keeps the nested stencils clear of the zero-extended edge.
    """
    jx = apply_J(psi, "x", scheme, hbar)
    jy = apply_J(psi, "y", scheme, hbar)
    jz = apply_J(psi, "z", scheme, hbar).data
    comm = apply_J(jy, "x", scheme, hbar).data - apply_J(jx, "y", scheme, hbar).data
    defect = np.abs(comm - 1j * hbar * jz)
    ref = np.abs(jz)
    if margin:
        sl = (slice(None),) + (slice(margin, -margin),) * 3
        defect, ref = defect[sl], ref[sl]
    return float(defect.max() / ref.max())


def apply_hamiltonian(psi: SpinorField, params: PhysicalParams, phi: ScalarField | None = None,
                      A: VectorField | None = None, scheme: str = "fd4") -> np.ndarray:
    """H psi with H = c alpha·(-i hbar grad - (e/c) A) + beta m c^2 + e phi."""
    mats = build_matrices()
    d = psi.data
    h = psi.grid.h
    out = params.m * params.c**2 * apply_matrix(mats.beta, d)
    for a in range(3):
        kin = -1j * params.hbar * derivative(d, a, h[a], scheme)
        if A is not None and params.e != 0:
            kin = kin - (params.e / params.c) * A.data[a] * d
        out += params.c * apply_matrix(mats.alpha[a], kin)
    if phi is not None and params.e != 0:
        out += params.e * phi.data * d
    return out


# ---------------------------------------------------------------------------
# scenarios


def positive_energy_projection(data: np.ndarray, grid: Grid3, params: PhysicalParams) -> np.ndarray:
    """Project onto the free positive-energy branch, (1 + H_free/E)/2 in momentum space."""
    mats = build_matrices()
    spec = scipy.fft.fftn(data, axes=(1, 2, 3))
    kx, ky, kz = grid.wavenumbers()
    p = [params.hbar * kx, params.hbar * ky, params.hbar * kz]
    E = np.sqrt((params.m * params.c**2) ** 2 + params.c**2 * (p[0] ** 2 + p[1] ** 2 + p[2] ** 2))
    Hs = params.m * params.c**2 * apply_matrix(mats.beta, spec)
    for a in range(3):
        Hs += params.c * p[a] * apply_matrix(mats.alpha[a], spec)
    safe = np.where(E > 0, E, 1.0)
    proj = 0.5 * (spec + np.where(E > 0, Hs / safe, 0.0))
    return scipy.fft.ifftn(proj, axes=(1, 2, 3))


def helicity_spinor(direction, helicity: int) -> np.ndarray:
    """Two-spinor with sigma·n chi = helicity chi; n defaults to +z for a zero vector."""
    n = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n)
    theta, phi = (0.0, 0.0) if norm == 0 else (np.arccos(np.clip(n[2] / norm, -1, 1)), np.arctan2(n[1], n[0]))
    if helicity > 0:
        return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return np.array([-np.exp(-1j * phi) * np.sin(theta / 2), np.cos(theta / 2)])


def free_spinor(p, helicity: int, params: PhysicalParams) -> np.ndarray:
    """Unit-norm positive-energy amplitude u(p) for the free Dirac equation."""
    mats = build_matrices()
    p = np.asarray(p, dtype=float)
    mc2 = params.m * params.c**2
    E = np.sqrt(mc2**2 + params.c**2 * p @ p)
    chi = helicity_spinor(p, helicity)
    sp = sum(p[a] * mats.pauli[a] for a in range(3))
    lower = params.c * (sp @ chi) / (E + mc2) if E + mc2 > 0 else sp @ chi / max(np.linalg.norm(p), 1e-300)
    u = np.concatenate([chi, lower])
    return u / np.linalg.norm(u)


def commensurate_momentum(grid: Grid3, mode, hbar: float = 1.0) -> np.ndarray:
    return np.array([2.0 * np.pi * hbar * m / L for m, L in zip(mode, grid.lengths)])


def _plane_wave(grid, params, mode=(0, 0, 0), p=None, helicity=1, **_):
    if p is None:
        p = commensurate_momentum(grid, mode, params.hbar)
    else:
        p = np.asarray(p, dtype=float)
        m = p * np.array(grid.lengths) / (2.0 * np.pi * params.hbar)
        if np.max(np.abs(m - np.round(m))) > 1e-9:
            raise ValueError(f"momentum {tuple(p)} is not commensurate with the periodic box")
    u = free_spinor(p, helicity, params)
    X, Y, Z = grid.coords()
    phase = np.exp(1j * (p[0] * X + p[1] * Y + p[2] * Z) / params.hbar)
    return u[:, None, None, None] * phase[None] / np.sqrt(grid.volume)


def _envelope(grid, sigma, center, momentum, hbar, orbital=0):
    X, Y, Z = grid.coords()
    x, y, z = X - center[0], Y - center[1], Z - center[2]
    env = np.exp(-(x * x + y * y + z * z) / (2.0 * sigma**2)) + 0j
    if orbital > 0:
        env = env * ((x + 1j * y) / sigma) ** orbital
    elif orbital < 0:
        env = env * ((x - 1j * y) / sigma) ** (-orbital)
    if any(momentum):
        env = env * np.exp(1j * (momentum[0] * X + momentum[1] * Y + momentum[2] * Z) / hbar)
    return np.broadcast_to(env, grid.shape)


def _packet(grid, params, chi, orbital=0, sigma=1.0, center=(0.0, 0.0, 0.0),
            momentum=(0.0, 0.0, 0.0), dressed=True, **_):
    env = _envelope(grid, sigma, center, momentum, params.hbar, orbital)
    data = np.zeros((4,) + grid.shape, dtype=np.complex128)
    data[0] = chi[0] * env
    data[1] = chi[1] * env
    if dressed:
        data = positive_energy_projection(data, grid, params)
    return data


_UP = (1.0, 0.0)
_DOWN = (0.0, 1.0)
_PLUS_X = (2**-0.5, 2**-0.5)


def _torus_superposition(grid, params, **kw):
    return (_packet(grid, params, _UP, orbital=1, **kw) + _packet(grid, params, _UP, orbital=-1, **kw)) / np.sqrt(2)


SCENARIOS = {
    "gaussian-spin-up": (lambda g, p, **kw: _packet(g, p, _UP, **kw),
                         "Gaussian packet, spin along +z"),
    "gaussian-spin-down": (lambda g, p, **kw: _packet(g, p, _DOWN, **kw),
                           "Gaussian packet, spin along -z"),
    "gaussian-spin-x": (lambda g, p, **kw: _packet(g, p, _PLUS_X, **kw),
                        "Gaussian packet, equal up/down superposition (spin along +x)"),
    "torus-m1-spin-up": (lambda g, p, **kw: _packet(g, p, _UP, orbital=1, **kw),
                         "(x+iy) Gaussian, L_z = +1, spin up"),
    "torus-m-1-spin-up": (lambda g, p, **kw: _packet(g, p, _UP, orbital=-1, **kw),
                          "(x-iy) Gaussian, L_z = -1, spin up"),
    "torus-superposition": (_torus_superposition, "equal superposition of the m = +1 and m = -1 tori"),
    "boosted-gaussian": (lambda g, p, momentum=(0.0, 0.0, 0.5), **kw: _packet(g, p, _UP, momentum=momentum, **kw),
                         "spin-up Gaussian carrying momentum (default 0.5 along z)"),
    "plane-wave": (_plane_wave, "periodic plane wave u(p) exp(i p·x/hbar)/sqrt(V); p from integer mode"),
}


def scenario(name: str, grid: Grid3, params: PhysicalParams | None = None, **kwargs) -> SpinorField:
    """Build a unit-norm spinor from the catalog.

    Packet scenarios accept ``sigma``, ``center``, ``momentum`` and
    ``dressed`` (positive-energy projection, default on).  ``plane-wave``
    accepts ``mode`` (integer triple) or ``p`` and ``helicity``.
    """
    params = params or PhysicalParams()
    if name not in SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario {name!r}; catalog: {', '.join(SCENARIOS)}")
    builder, _ = SCENARIOS[name]
    psi = SpinorField(grid, builder(grid, params, **kwargs))
    if name == "plane-wave":
        return psi
    return psi.normalized()
