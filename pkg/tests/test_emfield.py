import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from amlab.dirac import gauge_momentum, gauge_term, scenario
from amlab.emfield import (
    EMConfig,
    cube_exterior_inverse_r4,
    em_from_sources,
    field_angular_momentum,
    field_J_bound,
    field_J_bound_from_fields,
    field_J_radiative_split,
    field_J_total,
    field_P_bound,
    field_P_total,
    zero_config,
)
from amlab.errors import NotTransverseError
from amlab.grid import Grid3, PhysicalParams, ScalarField, VectorField, curl_array, grad_array, moment_cross
from amlab.helmholtz import transverse_projection


def gaussian(grid, sigma=1.0, center=(0.0, 0.0, 0.0)):
    return np.exp(-grid.r2(center) / (2 * sigma**2)) / (2 * math.pi * sigma**2) ** 1.5


def _enclosed(r, s):
    return erf(r / (math.sqrt(2) * s)) - math.sqrt(2 / math.pi) * (r / s) * math.exp(-r * r / (2 * s * s))


def _enclosed_rate(r, s):
    return math.sqrt(2 / math.pi) * r * r / s**3 * math.exp(-r * r / (2 * s * s))


def uniform_B_potential(grid, B0):
    x, y, z = np.broadcast_arrays(*grid.coords())
    return VectorField(grid, 0.5 * np.stack([B0[1] * z - B0[2] * y, B0[2] * x - B0[0] * z, B0[0] * y - B0[1] * x]))


def charge_and_dipole(grid, q=1.0, m=1.0, sq=1.0, sm=1.0, d=(0.0, 0.0, 0.0), c=1.0):
    """Gaussian charge at d and a Gaussian-regularized magnetic dipole m z at the origin."""
    rho = ScalarField(grid, q * gaussian(grid, sq, d))
    M = np.zeros((3,) + grid.shape)
    M[2] = m * gaussian(grid, sm)
    return rho, VectorField(grid, c * curl_array(M, grid.h))


@pytest.fixture(scope="module")
def g64():
    return Grid3.cube(64, 8.0)


@pytest.fixture(scope="module")
def cocentred(g64):
    rho, j = charge_and_dipole(g64, sm=0.7)
    return rho, j, em_from_sources(rho, j)


# --- field_J_total -----------------------------------------------------------

def test_total_zero_fields(g64):
    zero = VectorField(g64, np.zeros((3,) + g64.shape))
    E = VectorField(g64, grad_array(gaussian(g64), g64.h))
    assert not field_J_total(zero, E).any() and not field_J_total(E, zero).any()


def test_total_parallel_fields(g64):
    n = np.array([1.0, -2.0, 0.5])[:, None, None, None]
    E = VectorField(g64, n * gaussian(g64, 1.0, (0.3, 0, 0)))
    B = VectorField(g64, n * gaussian(g64, 1.4))
    assert np.max(np.abs(field_J_total(E, B))) <= 1e-12


def test_total_matches_brute_force_sum():
    g = Grid3.cube(16, 4.0)
    rng = np.random.default_rng(7)
    E = rng.normal(size=(3,) + g.shape) * gaussian(g)
    B = rng.normal(size=(3,) + g.shape) * gaussian(g)
    x, y, z = np.broadcast_arrays(*g.coords())
    brute = np.zeros(3)
    for k in range(3):
        terms = []
        for idx in np.ndindex(g.shape):
            e, b, r = E[(slice(None),) + idx], B[(slice(None),) + idx], np.array([x[idx], y[idx], z[idx]])
            terms.append(np.cross(r, np.cross(e, b))[k])
        brute[k] = math.fsum(terms) * g.dV / (4 * math.pi)
    assert np.allclose(field_J_total(VectorField(g, E), VectorField(g, B)), brute, rtol=1e-12, atol=1e-15)


def test_cocentred_charge_dipole_against_radial_quadrature(cocentred):
    rho, j, em = cocentred
    sq, sm = 1.0, 0.7

    # angular integral of x × (E × B) done by hand; radial part by quad over [0, inf)
    def integrand(r):
        return r * _enclosed(r, sq) * (_enclosed_rate(r, sm) / r**2 - _enclosed(r, sm) / r**3)

    radial = quad(integrand, 0, 20, limit=400)[0] + quad(integrand, 20, math.inf)[0]
    oracle = -2.0 / 3.0 * radial
    J = field_J_bound_from_fields(em.E_long, em.B, far=em.far)
    assert abs(J[2] / oracle - 1) <= 0.01
    assert np.max(np.abs(J[:2])) <= 1e-12 * abs(J[2])


# --- bound term, rho route ---------------------------------------------------

def test_bound_rho_zero(g64):
    A = uniform_B_potential(g64, (0, 0, 1))
    assert not field_J_bound(ScalarField(g64, np.zeros(g64.shape)), A).any()


def test_bound_uniform_B_second_moment(g64):
    q, sigma, B0 = -2.0, 1.0, np.array([0.2, -0.1, 0.7])
    rho = ScalarField(g64, q * gaussian(g64, sigma))
    J = field_J_bound(rho, uniform_B_potential(g64, B0))
    # <r^2> = 3 sigma^2 for a spherical Gaussian
    assert np.allclose(J, q / 3 * 3 * sigma**2 * B0, rtol=1e-10, atol=0)


def test_bound_off_centre_brute_force():
    g = Grid3.cube(16, 4.0)
    rho = gaussian(g, 0.8, (0.7, -0.4, 0.3))
    A = uniform_B_potential(g, (0.1, 0.3, -0.5)).data
    integrand = moment_cross(g, A * rho)
    brute = [math.fsum(integrand[k].ravel()) * g.dV for k in range(3)]
    got = field_J_bound(ScalarField(g, rho), VectorField(g, A))
    assert np.max(np.abs(got - brute)) <= 1e-10 * np.max(np.abs(brute))


def test_gauge_term_uniform_B(g64):
    params, B0 = PhysicalParams(e=-1.0), np.array([0, 0, 0.3])
    psi = scenario("gaussian-spin-up", g64, params, dressed=False)
    r2 = float(np.sum(psi.density() * g64.r2()) * g64.dV)
    L = gauge_term(psi, uniform_B_potential(g64, B0), params)
    assert np.allclose(L, -(params.e / 2) * (2 / 3) * B0 * r2, rtol=1e-10, atol=1e-15)
    flipped = gauge_term(psi, uniform_B_potential(g64, B0), params.with_charge(1.0))
    assert np.array_equal(flipped, -L)
    assert not gauge_term(psi, uniform_B_potential(g64, B0), params.with_charge(0.0)).any()


def test_bound_rejects_non_transverse(g64):
    rho = ScalarField(g64, gaussian(g64))
    A = VectorField(g64, grad_array(gaussian(g64, 1.2), g64.h))
    with pytest.raises(NotTransverseError):
        field_J_bound(rho, A)


# --- cross-route identities --------------------------------------------------

def test_bound_identity_both_routes(cocentred):
    rho, _, em = cocentred
    a = field_J_bound_from_fields(em.E_long, em.B, far=em.far)
    b = field_J_bound(rho, em.A)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 0.01


def test_bound_identity_improves_with_refinement():
    gaps = []
    for n in (32, 48, 64):
        g = Grid3.cube(n, 8.0)
        rho, j = charge_and_dipole(g, sm=0.7)
        em = em_from_sources(rho, j)
        a = field_J_bound_from_fields(em.E_long, em.B, far=em.far)
        b = field_J_bound(rho, em.A)
        gaps.append(np.linalg.norm(a - b) / np.linalg.norm(b))
    assert gaps[0] > gaps[1] > gaps[2]


def test_point_source_limit(g64):
    d, m, q = 4.0, 1.0, 1.0
    rho, j = charge_and_dipole(g64, q, m, sq=0.5, sm=0.5, d=(d, 0, 0))
    em = em_from_sources(rho, j)
    J = field_J_bound_from_fields(em.E_long, em.B, far=em.far)
    # (q/c) d × A_t(d) with A_t = m × x / r^3
    assert abs(J[2] / (q * m / d) - 1) <= 0.03
    P_fields = field_P_total(em.E_long, em.B) + em.far.P
    P_rho = field_P_bound(rho, em.A)
    assert abs(P_fields[1] / (q * m / d**2) - 1) <= 0.03
    assert np.linalg.norm(P_fields - P_rho) / np.linalg.norm(P_rho) <= 0.01


def test_P2_total_is_bound_plus_radiative(cocentred):
    rho, _, em = cocentred
    E_trans = VectorField(em.grid, 0.1 * em.B.data[[1, 2, 0]])
    total = field_J_total(VectorField(em.grid, em.E_long.data + E_trans.data), em.B)
    parts = field_J_total(em.E_long, em.B) + field_J_total(E_trans, em.B)
    assert np.max(np.abs(total - parts)) <= 1e-12 * max(1.0, np.max(np.abs(total)))


def test_P4_charge_sign_flip(g64):
    rho, j = charge_and_dipole(g64, d=(0.5, 0.2, -0.3))
    a = em_from_sources(rho, j)
    b = em_from_sources(ScalarField(g64, -rho.data), j)
    assert np.array_equal(field_J_total(b.E_long, b.B), -field_J_total(a.E_long, a.B))
    assert np.array_equal(field_J_bound(ScalarField(g64, -rho.data), b.A), -field_J_bound(rho, a.A))
    assert np.array_equal(field_P_total(b.E_long, b.B), -field_P_total(a.E_long, a.B))
    assert np.array_equal(b.far.J, -a.far.J) and np.array_equal(b.far.P, -a.far.P)


# --- linear momentum -----------------------------------------------------------

def test_momentum_static_coulomb_is_zero(g64):
    em = em_from_sources(ScalarField(g64, gaussian(g64)), VectorField(g64, np.zeros((3,) + g64.shape)))
    assert not field_P_total(em.E_long, em.B).any()


def test_momentum_bound_uniform_B(g64):
    q, B0 = 1.5, np.array([0.0, 0.0, 0.8])
    A = uniform_B_potential(g64, B0)
    assert np.max(np.abs(field_P_bound(ScalarField(g64, q * gaussian(g64)), A))) <= 1e-14
    d = np.array([0.6, -0.4, 0.2])
    got = field_P_bound(ScalarField(g64, q * gaussian(g64, 1.0, d)), A)
    expected = q / 2 * np.cross(B0, d)
    assert np.linalg.norm(got - expected) <= 1e-3 * np.linalg.norm(expected)
    psi = scenario("gaussian-spin-up", g64, PhysicalParams(e=q), dressed=False, center=tuple(d))
    assert np.allclose(gauge_momentum(psi, A, PhysicalParams(e=q)), -expected, rtol=1e-3)


# --- radiative split -----------------------------------------------------------

def _circular_packet(grid, hand, k=2.0, w=1.5):
    x, y, z = grid.coords()
    env = np.exp(-grid.r2() / (2 * w * w)) * np.exp(1j * k * z)
    Ac = np.stack(np.broadcast_arrays(env, 1j * hand * env, 0 * env))
    A = transverse_projection(VectorField(grid, Ac.real), method="discrete").transverse
    E = transverse_projection(VectorField(grid, (1j * k * Ac).real), method="discrete").transverse
    return A, E


@pytest.mark.parametrize("hand", [1, -1])
def test_radiative_split_circular_packet(g64, hand):
    A, E = _circular_packet(g64, hand)
    zero = VectorField(g64, np.zeros((3,) + g64.shape))
    em = EMConfig(ScalarField(g64, np.zeros(g64.shape)), A, zero, E, VectorField(g64, curl_array(A.data, g64.h)))
    fam = field_angular_momentum(em, ScalarField(g64, np.zeros(g64.shape)))
    rebuilt = fam.rad_spin + fam.rad_orbital + fam.rad_boundary_residual
    assert np.max(np.abs(rebuilt - fam.radiative)) <= 1e-14 * np.linalg.norm(fam.radiative)
    assert np.linalg.norm(fam.rad_boundary_residual) <= 0.02 * np.linalg.norm(fam.radiative)
    assert hand * fam.rad_spin[2] > 0
    assert np.linalg.norm(fam.rad_spin[:2]) <= 1e-12 * abs(fam.rad_spin[2])
    assert np.array_equal(fam.total, fam.bound_from_fields + fam.radiative)


def test_radiative_split_zero_and_non_transverse(g64):
    zero = VectorField(g64, np.zeros((3,) + g64.shape))
    assert [v.tolist() for v in field_J_radiative_split(zero, zero)] == [[0, 0, 0], [0, 0, 0]]
    G = VectorField(g64, grad_array(gaussian(g64), g64.h))
    with pytest.raises(NotTransverseError):
        field_J_radiative_split(G, G)


# --- self-field configuration -------------------------------------------------

def test_zero_config_and_cube_constant(g64):
    em = zero_config(g64)
    assert not any(f.data.any() for f in (em.phi, em.A, em.E_long, em.E_trans, em.B))
    # six faces, each seen as ∫∫ du dv / (1 + u^2 + v^2)^2 over [-1, 1]^2
    face = quad(lambda u: quad(lambda v: 1 / (1 + u * u + v * v) ** 2, -1, 1)[0], -1, 1)[0]
    assert abs(cube_exterior_inverse_r4() - 6 * face) <= 1e-12
