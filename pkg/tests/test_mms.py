import numpy as np
import pytest

from robin_fsi import fem, mms
from robin_fsi.mms import (
    ManufacturedCase,
    SchemeParams,
    alpha_opt,
    convergence_study,
    default_ladder,
    error_norms,
    example1_discretization,
    initial_states,
)


@pytest.fixture(scope="module")
def case():
    return ManufacturedCase()


def test_point_values(case):
    u = case.velocity(0.5, 0.25, 0.0)
    assert np.allclose(u, [9.375e-5, 4.6875e-5], rtol=1e-12)
    assert case.pressure(0.5, 0.25, 0.0) == pytest.approx(-1.25e-4)
    assert case.g_mass(0.5, 0.25, 0.0) == pytest.approx(1.25e-4)
    ff = case.f_fluid(0.5, 0.25, 0.0)
    fs = case.f_solid(0.5, 0.75, 0.0)
    assert np.allclose(ff, [3.34375e-3, 1.921875e-3], rtol=1e-12)
    assert np.allclose(fs, [3.34375e-3, 1.921875e-3], rtol=1e-12)


def test_velocity_vanishes_on_outer_boundary(case):
    s = np.linspace(0, 1, 11)
    for x, y in [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]:
        assert np.allclose(case.velocity(x, y, 0.3), 0.0, atol=1e-16)


def test_mass_source_matches_pressure(case):
    rng = np.random.default_rng(4)
    x, y = rng.random(50), rng.random(50)
    g = case.g_mass(x, y, 0.7)
    p = case.pressure(x, y, 0.7)
    assert np.allclose(g, -p / case.lam_s, rtol=1e-13)


def test_interface_consistency(case):
    # velocities agree across y = 1/2 by construction; the exact normal
    # tractions balance: sigma_F n_F + sigma_S n_S = 0 with n_F = (0,1)
    rng = np.random.default_rng(5)
    x = rng.random(40)
    y = np.full_like(x, 0.5)
    sf = case.fluid_stress(x, y, 0.2)
    ss = case.solid_stress(x, y, 0.2)
    tf = sf[..., 1, :]          # row contraction with (0, 1)
    ts = -ss[..., 1, :]
    assert np.allclose(tf + ts, 0.0, atol=1e-16)


def _div_stress_fd(stress, x, y, t, h=1e-5):
    sxp = stress(x + h, y, t)
    sxm = stress(x - h, y, t)
    syp = stress(x, y + h, t)
    sym = stress(x, y - h, t)
    return (
        (sxp[..., :, 0] - sxm[..., :, 0]) / (2 * h)
        + (syp[..., :, 1] - sym[..., :, 1]) / (2 * h)
    )


def test_forcing_terms_satisfy_strong_form(case):
    # finite-difference residuals of the three strong-form equations at
    # 100 random interior points
    rng = np.random.default_rng(6)
    t, h = 0.4, 1e-5
    x = 0.05 + 0.9 * rng.random(100)
    yf = 0.05 + 0.4 * rng.random(100)
    ys = 0.55 + 0.4 * rng.random(100)

    du_dt = (case.velocity(x, yf, t + h) - case.velocity(x, yf, t - h)) / (2 * h)
    res_f = (
        case.rho_f * du_dt
        - _div_stress_fd(case.fluid_stress, x, yf, t)
        - case.f_fluid(x, yf, t)
    )
    assert np.abs(res_f).max() <= 1e-6

    dxi_dt = (case.velocity(x, ys, t + h) - case.velocity(x, ys, t - h)) / (2 * h)
    res_s = (
        case.rho_s * dxi_dt
        - _div_stress_fd(case.solid_stress, x, ys, t)
        - case.f_solid(x, ys, t)
    )
    assert np.abs(res_s).max() <= 1e-6

    div_u = (
        (case.velocity(x + h, yf, t)[..., 0] - case.velocity(x - h, yf, t)[..., 0])
        + (case.velocity(x, yf + h, t)[..., 1] - case.velocity(x, yf - h, t)[..., 1])
    ) / (2 * h)
    assert np.abs(div_u - case.g_mass(x, yf, t)).max() <= 1e-6


def test_displacement_is_time_derivative_consistent(case):
    # xi = d(eta)/dt holds because both equal the velocity field and the
    # time factor is e^t
    x, y = 0.3, 0.7
    h = 1e-6
    deta = (case.displacement(x, y, 0.2 + h) - case.displacement(x, y, 0.2 - h))
    assert np.allclose(deta / (2 * h), case.solid_velocity(x, y, 0.2), rtol=1e-8)


def test_alpha_opt_values():
    p = SchemeParams(tau=1.0, theta=0.5, alpha=1.0, eps=1e-4)
    assert alpha_opt(p, 0.02) == pytest.approx(25.10666667, rel=1e-8)
    # stiff-structure constants of the pressure-wave benchmark
    p2 = SchemeParams(tau=1.0, theta=0.5, alpha=1.0, eps=1e-4,
                      rho_s=1.1, mu_s=1.67785e6, lam_s=8.22148e7,
                      H_s=0.1, R=0.5)
    assert alpha_opt(p2, 1e-4) == pytest.approx(1363.2, rel=1e-3)
    # alpha(tau) = rho H/tau + beta H tau is minimized at tau* = sqrt(rho/beta)
    # with value 2 H sqrt(rho beta); every other tau gives a larger alpha
    mu, lam = p2.mu_s, p2.lam_s
    young = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    beta = young / ((1 - nu**2) * p2.R**2)
    tau_star = np.sqrt(p2.rho_s / beta)
    floor = 2 * p2.H_s * np.sqrt(p2.rho_s * beta)
    assert alpha_opt(p2, tau_star) == pytest.approx(floor, rel=1e-12)
    for t in (1e-5, 1e-4, 1e-3):
        assert alpha_opt(p2, t) >= floor


def test_interpolant_error_decay(case):
    errs = []
    params = SchemeParams(tau=0.02, theta=0.5, alpha=100.0, eps=1e-4)
    for h in (0.25, 0.125, 0.0625):
        disc = example1_discretization(h, params, case)
        f, s = initial_states(disc, case, 0.3)
        errs.append(error_norms(f, s, case))
    errs = np.array(errs)
    rates = np.log2(errs[:-1] / errs[1:])
    assert np.all(rates[:, 0] > 1.8)  # energy-norm displacement: O(h^2)
    assert np.all(rates[:, 1:] > 2.7)  # L2 velocities: O(h^3)


def test_error_norms_squared_variant(case):
    params = SchemeParams(tau=0.02, theta=0.5, alpha=100.0, eps=1e-4)
    disc = example1_discretization(0.25, params, case)
    f, s = initial_states(disc, case, 0.1)
    e_plain = error_norms(f, s, case)
    e_sq = error_norms(f, s, case, squared_eta=True)
    assert e_sq[0] == pytest.approx(e_plain[0] ** 2, rel=1e-12)
    assert e_sq[1:] == pytest.approx(e_plain[1:])


def test_default_ladder():
    lv = default_ladder(3, eps=1e-4)
    assert lv == [(0.02, 0.25, 1e-4), (0.01, 0.125, 1e-4), (0.005, 0.0625, 1e-4)]
    lv2 = default_ladder(2, eps=1e-4, halve_eps=True)
    assert lv2[1] == (0.01, 0.125, 5e-5)


def test_convergence_study_rejects_non_refining_ladder():
    with pytest.raises(ValueError):
        convergence_study([(0.02, 0.25, 1e-4), (0.02, 0.125, 1e-4)])


def test_bad_mesh_size_raises():
    with pytest.raises(ValueError):
        mms.example1_meshes(0.3)


def test_coarsest_level_golden_errors(case):
    # full transient at the coarsest refinement level, pinned
    table = convergence_study(default_ladder(1), theta=0.5, alpha=100.0,
                              T=0.3, case=case)
    lv = table.levels[0]
    assert lv["err_eta"] == pytest.approx(0.05413869707625184, rel=1e-5)
    assert lv["err_xi"] == pytest.approx(0.0992923430566899, rel=1e-5)
    assert lv["err_u"] == pytest.approx(0.010730487899488675, rel=1e-5)
    assert lv["avg_subiters"] == pytest.approx(5.538461538461538, rel=1e-6)
