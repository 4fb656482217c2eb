"""Angular and linear momentum bookkeeping for a spinor and its fields.

The total angular momentum is the sum of four quadratures,

    J = L_orbital + L_gauge + S_spin + J_field_total,

with L_orbital = -i hbar ∫ x × psi† grad psi, L_gauge = -(e/c) ∫ x × psi† A psi,
S_spin = (hbar/2) ∫ psi† Sigma psi and J_field_total = (1/4πc) ∫ x × (E × B).
In the Coulomb gauge the bound part of the field term cancels L_gauge, so
J reduces to L_orbital + S_spin.  The bound part is evaluated from the
longitudinal field (not from rho x A_t, which would cancel L_gauge by
construction), so the reported cancellation residual is a genuine check.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import dirac
from .emfield import (
    FAR_LEVELS,
    EMConfig,
    field_J_bound,
    field_J_radiative_split,
    field_J_total,
    field_P_bound,
    field_P_total,
    zero_config,
)
from .errors import GaugeTagError, IncompleteFieldsError, NotTransverseError
from .grid import PhysicalParams, ScalarField, SpinorField, VectorField, cross, derivative, integrate_array
from .scf import self_fields as _scf_self_fields

TOL_CANCEL = 0.01
TOL_EQ7 = 0.01


def self_fields(psi: SpinorField, params: PhysicalParams, far_levels: int = FAR_LEVELS) -> EMConfig:
    """Coulomb-gauge self-fields with the exterior field integrals attached."""
    return _scf_self_fields(psi, params, far_levels)


def _resolve(psi, params, field_source, far_levels):
    if isinstance(field_source, EMConfig):
        missing = [k for k in ("phi", "A", "E_long", "E_trans", "B") if getattr(field_source, k) is None]
        if missing:
            raise IncompleteFieldsError(f"field configuration lacks {', '.join(missing)}")
        if field_source.grid != psi.grid:
            raise ValueError("spinor and field configuration live on different grids")
        return field_source, "explicit"
    if field_source in (None, "self", "self-field"):
        return self_fields(psi, params, far_levels), "self-field"
    raise ValueError(f"field_source must be 'self' or an EMConfig, got {field_source!r}")


def _vec(v):
    return None if v is None else [float(x) for x in np.asarray(v)]


@dataclass
class DecompositionReport:
    L_orbital: np.ndarray
    L_gauge: np.ndarray
    S_spin: np.ndarray
    J_field_total: np.ndarray
    J_field_bound: np.ndarray
    J_field_bound_rho_At: np.ndarray | None
    J_field_radiative: np.ndarray
    rad_spin: np.ndarray
    rad_orbital: np.ndarray
    rad_boundary_residual: np.ndarray
    gauge_tag: str
    mode: str
    params_echo: dict
    grid_echo: dict
    tolerances_echo: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def J_total_eq4(self) -> np.ndarray:
        return self.L_orbital + self.L_gauge + self.S_spin + self.J_field_total

    @property
    def J_eq7(self) -> np.ndarray:
        return self.L_orbital + self.S_spin

    @property
    def cancellation_residual(self) -> np.ndarray:
        return self.L_gauge + self.J_field_bound

    @property
    def eq7_residual(self) -> np.ndarray:
        return self.J_total_eq4 - self.J_eq7

    def to_dict(self) -> dict:
        return {
            "L_orbital": _vec(self.L_orbital),
            "L_gauge": _vec(self.L_gauge),
            "S_spin": _vec(self.S_spin),
            "J_field_total": _vec(self.J_field_total),
            "J_field_bound": {"from_fields": _vec(self.J_field_bound),
                              "from_rho_At": _vec(self.J_field_bound_rho_At)},
            "J_field_radiative": _vec(self.J_field_radiative),
            "J_field_radiative_split": {"spin": _vec(self.rad_spin), "orbital": _vec(self.rad_orbital),
                                        "boundary_residual": _vec(self.rad_boundary_residual)},
            "J_total": _vec(self.J_total_eq4),
            "J_orbital_plus_spin": _vec(self.J_eq7),
            "cancellation_residual": _vec(self.cancellation_residual),
            "reduction_residual": _vec(self.eq7_residual),
            "gauge_tag": self.gauge_tag,
            "mode": self.mode,
            "params": self.params_echo,
            "grid": self.grid_echo,
            "tolerances": self.tolerances_echo,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def decompose(psi: SpinorField, params: PhysicalParams, field_source="self", scheme: str = "fd4",
              far_levels: int = FAR_LEVELS, tol_cancel: float = TOL_CANCEL, tol_eq7: float = TOL_EQ7,
              em: EMConfig | None = None) -> DecompositionReport:
    """Evaluate every term of the angular momentum balance.

    ``field_source`` is ``"self"`` (fields sourced by psi in the Coulomb
    gauge) or an explicit :class:`EMConfig`.  Passing ``em`` reuses
    precomputed self-fields.
    """
    if em is None:
        em, mode = _resolve(psi, params, field_source, far_levels)
    else:
        mode = "self-field"
    c = params.c
    L, imag = dirac.orbital_term(psi, params, scheme, full=True)
    Lg = dirac.gauge_term(psi, em.A, params)
    S = dirac.spin_term(psi, params)
    far_J = em.far.J if em.far is not None else np.zeros(3)
    bound = field_J_total(em.E_long, em.B, c) + far_J
    radiative = field_J_total(em.E_trans, em.B, c)
    diagnostics = {"orbital_imag_residual": _vec(imag), "norm": psi.norm2(),
                   "far_field": em.far.to_dict() if em.far is not None else None}
    rho = ScalarField(psi.grid, params.e * psi.density())
    try:
        bound_rho = field_J_bound(rho, em.A, c, check=em.gauge_tag == "coulomb")
    except NotTransverseError as exc:
        bound_rho = None
        diagnostics["A_not_transverse"] = str(exc)
    try:
        spin, orbital = field_J_radiative_split(em.E_trans, em.A, c)
    except NotTransverseError as exc:
        spin = orbital = np.full(3, np.nan)
        diagnostics["radiative_split"] = str(exc)
    return DecompositionReport(
        L_orbital=L, L_gauge=Lg, S_spin=S,
        J_field_total=bound + radiative, J_field_bound=bound, J_field_bound_rho_At=bound_rho,
        J_field_radiative=radiative, rad_spin=spin, rad_orbital=orbital,
        rad_boundary_residual=radiative - spin - orbital,
        gauge_tag=em.gauge_tag, mode=mode,
        params_echo=params.to_dict(), grid_echo=psi.grid.to_dict(),
        tolerances_echo={"cancellation": tol_cancel, "reduction": tol_eq7, "scheme": scheme,
                         "far_levels": far_levels},
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class CancellationCheck:
    passed: bool
    cancellation_norm: float
    eq7_norm: float
    tol_cancel: float
    tol_eq7: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_cancellation(report: DecompositionReport, tol_cancel: float | None = None,
                        tol_eq7: float | None = None) -> CancellationCheck:
    """Pass iff both the gauge/bound cancellation and the reduction residual are within tolerance (units of hbar)."""
    if report.gauge_tag != "coulomb":
        raise GaugeTagError(f"cancellation is a Coulomb-gauge statement; report is tagged {report.gauge_tag!r}")
    hbar = report.params_echo.get("hbar", 1.0)
    tc = report.tolerances_echo.get("cancellation", TOL_CANCEL) if tol_cancel is None else tol_cancel
    te = report.tolerances_echo.get("reduction", TOL_EQ7) if tol_eq7 is None else tol_eq7
    cn = float(np.linalg.norm(report.cancellation_residual)) / hbar
    en = float(np.linalg.norm(report.eq7_residual)) / hbar
    return CancellationCheck(bool(cn <= tc and en <= te), cn, en, tc, te)


def decompose_scan(psi: SpinorField, params: PhysicalParams, couplings, scheme: str = "fd4",
                   far_levels: int = FAR_LEVELS) -> list[DecompositionReport]:
    """One self-field report per charge in ``couplings``; psi itself is held fixed.

    The self-fields are linear in e, so they are built once for unit charge
    and rescaled.
    """
    couplings = [float(e) for e in couplings]
    unit = self_fields(psi, params.with_charge(1.0), far_levels) if any(couplings) else None
    reports = []
    for e in couplings:
        em = zero_config(psi.grid) if e == 0 else unit.scaled(e)
        reports.append(decompose(psi, params.with_charge(e), scheme=scheme, far_levels=far_levels, em=em))
    return reports


def scan_spread(reports: list[DecompositionReport]) -> float:
    """Largest |J(e) - J(0)| over a scan (first entry if e = 0 is absent), in units of hbar."""
    if not reports:
        return 0.0
    ref = next((r for r in reports if r.params_echo["e"] == 0.0), reports[0])
    hbar = ref.params_echo["hbar"]
    return max(float(np.linalg.norm(r.J_total_eq4 - ref.J_total_eq4)) for r in reports) / hbar


def coupling_scan(psi: SpinorField, params: PhysicalParams, couplings, scheme: str = "fd4",
                  far_levels: int = FAR_LEVELS) -> dict:
    reports = decompose_scan(psi, params, couplings, scheme, far_levels)
    rows = [{"e": r.params_echo["e"], "J_total": _vec(r.J_total_eq4),
             "cancellation_residual": _vec(r.cancellation_residual)} for r in reports]
    return {"rows": rows, "max_deviation_from_uncoupled": scan_spread(reports)}


# ---------------------------------------------------------------------------
# linear momentum


@dataclass
class MomentumReport:
    P_kinetic: np.ndarray
    P_gauge: np.ndarray
    P_field_total: np.ndarray
    P_field_bound: np.ndarray
    P_field_bound_rho_At: np.ndarray
    gauge_tag: str
    mode: str
    params_echo: dict
    grid_echo: dict

    @property
    def P_total(self) -> np.ndarray:
        return self.P_kinetic + self.P_gauge + self.P_field_total

    @property
    def cancellation_residual(self) -> np.ndarray:
        return self.P_gauge + self.P_field_bound

    def to_dict(self) -> dict:
        return {
            "P_kinetic": _vec(self.P_kinetic), "P_gauge": _vec(self.P_gauge),
            "P_field_total": _vec(self.P_field_total),
            "P_field_bound": {"from_fields": _vec(self.P_field_bound),
                              "from_rho_At": _vec(self.P_field_bound_rho_At)},
            "P_total": _vec(self.P_total), "cancellation_residual": _vec(self.cancellation_residual),
            "gauge_tag": self.gauge_tag, "mode": self.mode,
            "params": self.params_echo, "grid": self.grid_echo,
        }


def momentum_decompose(psi: SpinorField, params: PhysicalParams, field_source="self", scheme: str = "fd4",
                       far_levels: int = FAR_LEVELS, em: EMConfig | None = None) -> MomentumReport:
    if em is None:
        em, mode = _resolve(psi, params, field_source, far_levels)
    else:
        mode = "self-field"
    c = params.c
    far_P = em.far.P if em.far is not None else np.zeros(3)
    bound = field_P_total(em.E_long, em.B, c) + far_P
    rho = ScalarField(psi.grid, params.e * psi.density())
    return MomentumReport(
        P_kinetic=dirac.kinetic_momentum(psi, params, scheme),
        P_gauge=dirac.gauge_momentum(psi, em.A, params),
        P_field_total=bound + field_P_total(em.E_trans, em.B, c),
        P_field_bound=bound,
        P_field_bound_rho_At=field_P_bound(rho, em.A, c),
        gauge_tag=em.gauge_tag, mode=mode,
        params_echo=params.to_dict(), grid_echo=psi.grid.to_dict(),
    )


# ---------------------------------------------------------------------------
# energy-momentum densities


@dataclass(frozen=True)
class StressEnergySlice:
    """T00 and T0i (momentum density times c) on the grid.

    The fermion part is the static reduction of the symmetric tensor for a
    stationary state: i hbar ∂_t psi = H psi makes i hbar c D⁰ psi equal
    (H - e phi) psi, so T00 carries psi†(c alpha·pi + beta m c²) psi and the
    interaction energy lives in the field part.  ``far_energy`` and
    ``far_momentum`` hold the field contributions outside the box.
    """

    T00: ScalarField
    T0i: VectorField
    far_energy: float = 0.0
    far_momentum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reduction: str = "static"

    def energy(self) -> float:
        return float(integrate_array(self.T00.data, self.T00.grid)) + self.far_energy

    def momentum(self, c: float = 1.0) -> np.ndarray:
        return (integrate_array(self.T0i.data, self.T0i.grid) + self.far_momentum) / c


def stress_energy(psi: SpinorField, em: EMConfig, params: PhysicalParams, scheme: str = "fd4") -> StressEnergySlice:
    if psi.grid != em.grid:
        raise ValueError("spinor and field configuration live on different grids")
    mats = dirac.build_matrices()
    c, hb = params.c, params.hbar
    d = psi.data
    K = dirac.apply_hamiltonian(psi, params, None, em.A, scheme)
    t00 = np.sum(np.conj(d) * K, axis=0).real
    t0i = np.empty((3,) + psi.grid.shape)
    for a in range(3):
        pi = -1j * hb * derivative(d, a, psi.grid.h[a], scheme)
        if params.e != 0:
            pi = pi - (params.e / c) * em.A.data[a] * d
        t0i[a] = 0.5 * c * np.sum(np.conj(d) * pi, axis=0).real
        t0i[a] += 0.5 * np.sum(np.conj(d) * dirac.apply_matrix(mats.alpha[a], K), axis=0).real
    E, B = em.E.data, em.B.data
    t00 = t00 + (np.sum(E * E, axis=0) + np.sum(B * B, axis=0)) / (8.0 * np.pi)
    t0i = t0i + cross(E, B) / (4.0 * np.pi)
    far = em.far
    return StressEnergySlice(
        ScalarField(psi.grid, t00), VectorField(psi.grid, t0i),
        far.energy if far is not None else 0.0,
        c * far.P if far is not None else np.zeros(3),
    )
