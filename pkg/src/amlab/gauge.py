"""Static gauge transformations of (psi, phi, A).

With A' = A + grad chi the covariant derivative grad - (ie/hbar c) A maps
psi to exp(+i e chi / hbar c) psi; ``covariance_defect`` measures exactly
this, so the sign is checked numerically rather than assumed.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dirac import gauge_term, orbital_term, spin_term
from .emfield import EMConfig, field_J_total
from .errors import NotLocalizedError
from .grid import Grid3, PhysicalParams, ScalarField, SpinorField, VectorField, derivative, grad_array, interior

LOCALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class GaugeFunction:
    chi: ScalarField
    grad_chi: VectorField
    tag: str = "chi"
    spec: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid3:
        return self.chi.grid

    def boundary_ratio(self) -> float:
        c = np.abs(self.chi.data)
        peak = float(c.max())
        if peak == 0.0:
            return 0.0
        faces = [c[0], c[-1], c[:, 0], c[:, -1], c[:, :, 0], c[:, :, -1]]
        return max(float(f.max()) for f in faces) / peak

    def check_localized(self, tol: float = LOCALIZATION_TOL) -> None:
        ratio = self.boundary_ratio()
        if ratio >= tol:
            raise NotLocalizedError(f"gauge function {self.tag} not localized: boundary/peak = {ratio:.3g}")

    def gradient_mismatch(self, scheme: str = "fd4", margin: int = 2) -> float:
        """Interior max-norm gap between the analytic and the differenced gradient."""
        num = grad_array(self.chi.data, self.grid.h, scheme)
        return float(np.max(np.abs(interior(num - self.grad_chi.data, margin))))

    def __add__(self, other: "GaugeFunction") -> "GaugeFunction":
        return GaugeFunction(self.chi + other.chi, self.grad_chi + other.grad_chi,
                             f"{self.tag}+{other.tag}", {"sum": [self.spec, other.spec]})


def zero_gauge(grid: Grid3) -> GaugeFunction:
    return GaugeFunction(ScalarField(grid, np.zeros(grid.shape)),
                         VectorField(grid, np.zeros((3,) + grid.shape)), "zero")


def gaussian_bumps(grid: Grid3, centers, widths, amplitudes, tag: str | None = None) -> GaugeFunction:
    """chi = sum_k a_k exp(-|x - c_k|^2 / 2 w_k^2) with its gradient in closed form."""
    X, Y, Z = grid.coords()
    chi = np.zeros(grid.shape)
    grad = np.zeros((3,) + grid.shape)
    for c, w, a in zip(centers, widths, amplitudes):
        dx, dy, dz = X - c[0], Y - c[1], Z - c[2]
        bump = a * np.exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * w * w))
        chi += bump
        for k, d in enumerate((dx, dy, dz)):
            grad[k] -= d / (w * w) * bump
    spec = {"centers": [list(map(float, c)) for c in centers], "widths": [float(w) for w in widths],
            "amplitudes": [float(a) for a in amplitudes]}
    if tag is None:
        tag = hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:12]
    return GaugeFunction(ScalarField(grid, chi), VectorField(grid, grad), tag, spec)


def random_gauge(grid: Grid3, rng: np.random.Generator, n_bumps: int = 3) -> GaugeFunction:
    """Seeded bumps centred within an eighth of the box of the middle, widths L/11 to L/8."""
    L = 0.5 * min(grid.lengths)
    mid = np.array(grid.origin) + 0.5 * (np.array(grid.n) - 1) * np.array(grid.h)
    centers = [mid + rng.uniform(-L / 8, L / 8, 3) for _ in range(n_bumps)]
    widths = rng.uniform(L / 11, L / 8, n_bumps)
    amps = rng.uniform(-1.0, 1.0, n_bumps)
    return gaussian_bumps(grid, centers, widths, amps)


def gauge_phase(g: GaugeFunction, params: PhysicalParams) -> np.ndarray:
    return np.exp(1j * params.e * g.chi.data / (params.hbar * params.c))


def apply_gauge(psi: SpinorField, em: EMConfig, g: GaugeFunction, params: PhysicalParams):
    """(psi, em) -> (exp(i e chi/hbar c) psi, em with A + grad chi); phi is untouched."""
    g.check_localized()
    if not np.any(g.chi.data):
        return psi, em
    if params.e == 0:
        psi_new = psi
    else:
        psi_new = SpinorField(psi.grid, psi.data * gauge_phase(g, params)[None])
    prefix = em.gauge_tag.split(":", 1)[1] + "+" if em.gauge_tag.startswith("transformed:") else ""
    em_new = em.with_A(VectorField(em.grid, em.A.data + g.grad_chi.data), f"transformed:{prefix}{g.tag}")
    return psi_new, em_new


def covariant_derivative(psi: SpinorField, A: VectorField, params: PhysicalParams, scheme: str = "fd4") -> np.ndarray:
    """(grad - (ie/hbar c) A) psi, shape (3, 4, nx, ny, nz)."""
    k = 1j * params.e / (params.hbar * params.c)
    return np.stack([
        derivative(psi.data, a, psi.grid.h[a], scheme) - k * A.data[a][None] * psi.data
        for a in range(3)
    ])


def covariance_defect(psi: SpinorField, em: EMConfig, g: GaugeFunction, params: PhysicalParams,
                      scheme: str = "fd4", margin: int = 2, method: str = "stencil") -> float:
    """||(D psi)' - phase (D psi)|| / ||D psi|| over the interior.

    ``method="stencil"`` differences the transformed spinor, so the defect
    is a discretization error.  ``method="analytic"`` differentiates the
    phase with the closed-form grad chi (product rule), which isolates the
    gauge algebra: the defect is then rounding-level for the correct sign
    and order one for the wrong one.
    """
    psi2, em2 = apply_gauge(psi, em, g, params)
    before = covariant_derivative(psi, em.A, params, scheme)
    if method == "stencil":
        after = covariant_derivative(psi2, em2.A, params, scheme)
    elif method == "analytic":
        k = 1j * params.e / (params.hbar * params.c)
        phase = gauge_phase(g, params)[None]
        after = np.stack([
            phase * derivative(psi.data, a, psi.grid.h[a], scheme)
            + k * g.grad_chi.data[a][None] * psi2.data
            - k * em2.A.data[a][None] * psi2.data
            for a in range(3)
        ])
    else:
        raise ValueError(f"unknown method {method!r}")
    diff = interior(after - gauge_phase(g, params)[None, None] * before, margin)
    den = np.sqrt(np.sum(np.abs(interior(before, margin)) ** 2))
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) / den)


def _terms(psi, em, params, scheme):
    L = orbital_term(psi, params, scheme)
    Lg = gauge_term(psi, em.A, params)
    S = spin_term(psi, params)
    Jf = field_J_total(em.E, em.B, params.c)
    if em.far is not None:
        Jf = Jf + em.far.J
    return {"L_orbital": L, "L_gauge": Lg, "S_spin": S, "J_field_total": Jf}


@dataclass
class GaugeScanReport:
    seed: int
    n_trials: int
    trials: list
    max_deviation: float

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n_trials": self.n_trials, "max_deviation": self.max_deviation,
                "trials": self.trials}


def gauge_scan(psi: SpinorField, em: EMConfig, params: PhysicalParams, n_trials: int, seed: int,
               scheme: str = "fd4", n_bumps: int = 3) -> GaugeScanReport:
    """Total J before and after seeded random gauge transformations.

    Deviations are absolute, in units of hbar.  Individual terms are
    reported as shifts; only the totals and the orbital + gauge pair
    should stay put.
    """
    rng = np.random.default_rng(seed)
    trials = []
    if n_trials == 0:
        return GaugeScanReport(seed, 0, trials, 0.0)
    base = _terms(psi, em, params, scheme)
    J0 = sum(base.values())
    worst = 0.0
    for t in range(n_trials):
        g = random_gauge(psi.grid, rng, n_bumps)
        psi2, em2 = apply_gauge(psi, em, g, params)
        terms = _terms(psi2, em2, params, scheme)
        J1 = sum(terms.values())
        dev = float(np.linalg.norm(J1 - J0)) / params.hbar
        worst = max(worst, dev)
        pair0 = base["L_orbital"] + base["L_gauge"]
        pair1 = terms["L_orbital"] + terms["L_gauge"]
        trials.append({
            "trial": t,
            "gauge": g.spec,
            "J_before": J0.tolist(),
            "J_after": J1.tolist(),
            "deviation": dev,
            "shifts": {k: (terms[k] - base[k]).tolist() for k in base},
            "orbital_plus_gauge_shift": (pair1 - pair0).tolist(),
        })
    return GaugeScanReport(seed, n_trials, trials, worst)
