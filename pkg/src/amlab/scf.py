"""Self-consistent static Dirac-Maxwell iteration, as a diagnostic.

Each sweep mixes fresh self-fields into the previous ones and then takes
one descent step on F(psi) = ||(H - E) psi||^2 over unit spinors, with
E = <psi|H|psi>.  The step direction is the gradient damped at high
wavenumber by the free kinetic scale, with a Cauchy-type step length and
halving backtracking.  The Dirac energy is unbounded below, so minimizing E
itself would fall into the negative continuum; F is bounded below by zero.
No bound state is promised: stagnation is a reportable outcome.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import dirac
from .emfield import EMConfig, em_from_sources, zero_config
from .grid import PhysicalParams, SpinorField, integrate_array

HISTORY_COLUMNS = ("iteration", "energy", "residual", "step", "mix")
# damping length of the preconditioner in units of hbar/(m c); 0.5 was the best of a small scan
PRECOND_LENGTH = 0.5


def self_fields(psi: SpinorField, params: PhysicalParams, far_levels: int = 0) -> EMConfig:
    """Coulomb-gauge static fields sourced by psi itself (all zero when e = 0)."""
    if params.e == 0:
        return zero_config(psi.grid)
    src = dirac.densities(psi, params)
    return em_from_sources(src.rho, src.j, params.c, far_levels)


def _inner(a: np.ndarray, b: np.ndarray, grid) -> complex:
    return complex(integrate_array(np.sum(np.conj(a) * b, axis=0), grid))


def _norm(a: np.ndarray, grid) -> float:
    return math.sqrt(float(integrate_array(np.sum(np.abs(a) ** 2, axis=0), grid)))


def _H(data, grid, em, params, scheme):
    return dirac.apply_hamiltonian(SpinorField(grid, data), params, em.phi, em.A, scheme)


def dirac_residual(psi: SpinorField, em: EMConfig, params: PhysicalParams, scheme: str = "fd4"):
    """Rayleigh quotient and ||H psi - E psi|| / ||psi||."""
    Hpsi = _H(psi.data, psi.grid, em, params, scheme)
    n2 = psi.norm2()
    energy = _inner(psi.data, Hpsi, psi.grid).real / n2
    return energy, _norm(Hpsi - energy * psi.data, psi.grid) / math.sqrt(n2)


@dataclass(frozen=True)
class ScfParams:
    mix: float = 0.5
    tol: float = 1e-8
    max_iter: int = 50
    step: float = 1.0
    min_step: float = 1e-12
    precondition: bool = True

    def __post_init__(self):
        if not 0.0 < self.mix <= 1.0:
            raise ValueError(f"mix must lie in (0, 1], got {self.mix}")
        if self.tol < 0 or self.max_iter < 0 or self.step <= 0 or self.min_step <= 0:
            raise ValueError("tol and max_iter must be >= 0, step and min_step > 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScfState:
    psi: SpinorField
    em: EMConfig
    energy: float
    residual: float
    iteration: int
    converged: bool = False
    stagnated: bool = False
    notes: list = field(default_factory=list)


def _precondition(g: np.ndarray, psi: np.ndarray, grid, params: PhysicalParams) -> np.ndarray:
    """Damp high wavenumbers by 1/(1 + (l k)^2), then project onto the tangent space of psi."""
    kx, ky, kz = grid.wavenumbers()
    lam = PRECOND_LENGTH * params.hbar / (params.m * params.c)
    w = 1.0 / (1.0 + lam * lam * (kx * kx + ky * ky + kz * kz))
    out = scipy.fft.ifftn(scipy.fft.fftn(g, axes=(1, 2, 3)) * w[None], axes=(1, 2, 3))
    return out - _inner(psi, out, grid) * psi


def _mix(new: EMConfig, old: EMConfig, mix: float) -> EMConfig:
    if mix == 1.0:
        return new
    return EMConfig(new.phi * mix + old.phi * (1 - mix), new.A * mix + old.A * (1 - mix),
                    new.E_long * mix + old.E_long * (1 - mix), new.E_trans * mix + old.E_trans * (1 - mix),
                    new.B * mix + old.B * (1 - mix), "coulomb", None)


def _residual_of(data, grid, em, params, scheme):
    Hd = _H(data, grid, em, params, scheme)
    E = _inner(data, Hd, grid).real
    return E, _norm(Hd - E * data, grid)


def scf_iterate(psi0: SpinorField, scf_params: ScfParams | None = None, params: PhysicalParams | None = None,
                scheme: str = "fd4"):
    """Run the mixed fixed-point / residual-descent loop.

    Returns ``(state, history)`` where history rows hold iteration, energy,
    residual, accepted step and mix.  A trial step is accepted only if the
    residual, evaluated with the freshly mixed fields, does not exceed the
    last recorded one, so the history is non-increasing by construction.
    """
    sp = scf_params or ScfParams()
    params = params or PhysicalParams()
    grid = psi0.grid
    psi = psi0.normalized().data
    em = self_fields(SpinorField(grid, psi), params)
    energy, res = _residual_of(psi, grid, em, params, scheme)
    history = [{"iteration": 0, "energy": energy, "residual": res, "step": 0.0, "mix": sp.mix}]
    state = ScfState(SpinorField(grid, psi), em, energy, res, 0)
    if res <= sp.tol:
        state.converged = True
        return state, history

    for it in range(1, sp.max_iter + 1):
        em = _mix(self_fields(SpinorField(grid, psi), params), em, sp.mix)
        Hd = _H(psi, grid, em, params, scheme)
        E = _inner(psi, Hd, grid).real
        r = Hd - E * psi
        F = _norm(r, grid) ** 2
        g = _H(r, grid, em, params, scheme) - E * r - F * psi
        if sp.precondition:
            d = _precondition(g, psi, grid, params)
            gg = _inner(g, d, grid).real
        else:
            d, gg = g, _norm(g, grid) ** 2
        if gg <= 0.0:
            state.notes.append(f"zero gradient at iteration {it}")
            state.stagnated = True
            break
        Hd_dir = _H(d, grid, em, params, scheme) - E * d
        tau = sp.step * gg / max(_norm(Hd_dir, grid) ** 2, 1e-300)
        accepted = None
        while tau >= sp.min_step:
            trial = psi - tau * d
            trial = trial / _norm(trial, grid)
            e_t, r_t = _residual_of(trial, grid, em, params, scheme)
            if r_t <= history[-1]["residual"]:
                accepted = (trial, e_t, r_t)
                break
            tau *= 0.5
        if accepted is None:
            state.stagnated = True
            state.notes.append(f"step underflow at iteration {it}")
            break
        psi, energy, res = accepted
        history.append({"iteration": it, "energy": energy, "residual": res, "step": tau, "mix": sp.mix})
        state = ScfState(SpinorField(grid, psi), em, energy, res, it, notes=state.notes)
        if res <= sp.tol:
            state.converged = True
            break
    return state, history


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        w.writeheader()
        for row in history:
            w.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in HISTORY_COLUMNS})
