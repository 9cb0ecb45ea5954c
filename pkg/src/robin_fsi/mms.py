"""Manufactured-solution verification on the unit square split into a
lower fluid half and an upper solid half.

Exact fields (all physical constants 1, time factor c = 1e-3 e^t,
bubble phi = x(1-x)y(1-y)):

    u = eta = xi = c (2 phi, phi),   p = -lam_s c (2 phi_x + phi_y)

The mass source g = div u equals -p/lam_s identically, and the exact
fluid and solid tractions balance on the interface.  Forcing terms come
from hand differentiation of the strong forms and are cross-checked by
finite differences in the test suite.
"""

import concurrent.futures
import os
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .coupling import run_transient
from .mesh import build_rect_mesh
from .physics import Discretization, Loads, SchemeParams

FLUID_LAYOUT = {
    "left": "fluid_left",
    "right": "fluid_right",
    "bottom": "fluid_bottom",
    "top": "interface",
}
SOLID_LAYOUT = {
    "left": "solid_left",
    "right": "solid_right",
    "bottom": "interface",
    "top": "solid_top",
}
FLUID_DIRICHLET = {"fluid_bottom": (0, 1)}
SOLID_DIRICHLET = {"solid_left": (0, 1), "solid_right": (0, 1)}


def alpha_opt(params, tau):
    """Robin parameter rho_s H_s / tau + beta H_s tau, with beta =
    E/((1 - nu^2) R^2) the effective membrane stiffness of the layer."""
    mu, lam = params.mu_s, params.lam_s
    young = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    beta = young / ((1 - nu**2) * params.R**2)
    return params.rho_s * params.H_s / tau + beta * params.H_s * tau


def _phi(x, y):
    return x * (1 - x) * y * (1 - y)


def _phi_derivs(x, y):
    px = (1 - 2 * x) * y * (1 - y)
    py = x * (1 - x) * (1 - 2 * y)
    pxx = -2 * y * (1 - y)
    pyy = -2 * x * (1 - x)
    pxy = (1 - 2 * x) * (1 - 2 * y)
    return px, py, pxx, pyy, pxy


@dataclass
class ManufacturedCase:
    """Closed-form solution and derived data of the verification problem."""

    rho_f: float = 1.0
    mu_f: float = 1.0
    rho_s: float = 1.0
    mu_s: float = 1.0
    lam_s: float = 1.0
    amplitude: float = 1e-3

    def _c(self, t):
        return self.amplitude * np.exp(t)

    # exact fields -------------------------------------------------------

    def velocity(self, x, y, t):
        c = self._c(t) * _phi(x, y)
        return np.stack([2 * c, c], axis=-1)

    displacement = velocity
    solid_velocity = velocity

    def pressure(self, x, y, t):
        px, py, *_ = _phi_derivs(x, y)
        return -self.lam_s * self._c(t) * (2 * px + py)

    def exact_fields(self, x, y, t):
        u = self.velocity(x, y, t)
        return u, self.pressure(x, y, t), u, u

    def velocity_grad(self, x, y, t):
        """(n, 2, 2) array, [i, comp, deriv]."""
        px, py, *_ = _phi_derivs(x, y)
        c = self._c(t)
        g = np.empty(np.shape(x) + (2, 2))
        g[..., 0, 0] = 2 * c * px
        g[..., 0, 1] = 2 * c * py
        g[..., 1, 0] = c * px
        g[..., 1, 1] = c * py
        return g

    displacement_grad = velocity_grad

    # derived data -------------------------------------------------------

    def g_mass(self, x, y, t):
        px, py, *_ = _phi_derivs(x, y)
        return self._c(t) * (2 * px + py)

    def forcing_terms(self, x, y, t):
        return self.f_fluid(x, y, t), self.g_mass(x, y, t), self.f_solid(x, y, t)

    def f_fluid(self, x, y, t):
        px, py, pxx, pyy, pxy = _phi_derivs(x, y)
        c = self._c(t)
        lap = pxx + pyy
        grad_div = np.stack([2 * pxx + pxy, 2 * pxy + pyy], axis=-1)
        du_dt = np.stack([2 * _phi(x, y), _phi(x, y)], axis=-1)
        visc = np.stack([2 * lap + 2 * pxx + pxy, lap + 2 * pxy + pyy], axis=-1)
        return c * (self.rho_f * du_dt - self.mu_f * visc - self.lam_s * grad_div)

    def f_solid(self, x, y, t):
        px, py, pxx, pyy, pxy = _phi_derivs(x, y)
        c = self._c(t)
        lap = pxx + pyy
        grad_div = np.stack([2 * pxx + pxy, 2 * pxy + pyy], axis=-1)
        dxi_dt = np.stack([2 * _phi(x, y), _phi(x, y)], axis=-1)
        lap_eta = np.stack([2 * lap, lap], axis=-1)
        return c * (
            self.rho_s * dxi_dt
            - self.mu_s * lap_eta
            - (self.mu_s + self.lam_s) * grad_div
        )

    # exact stresses (for Neumann data) ----------------------------------

    def _shear(self, x, y, t, mu):
        px, py, *_ = _phi_derivs(x, y)
        c = self._c(t)
        s = np.empty(np.shape(x) + (2, 2))
        s[..., 0, 0] = 4 * mu * c * px
        s[..., 0, 1] = mu * c * (2 * py + px)
        s[..., 1, 0] = s[..., 0, 1]
        s[..., 1, 1] = 2 * mu * c * py
        return s

    def fluid_stress(self, x, y, t):
        s = self._shear(x, y, t, self.mu_f)
        p = self.pressure(x, y, t)
        s[..., 0, 0] -= p
        s[..., 1, 1] -= p
        return s

    def solid_stress(self, x, y, t):
        s = self._shear(x, y, t, self.mu_s)
        px, py, *_ = _phi_derivs(x, y)
        tr = self.lam_s * self._c(t) * (2 * px + py)
        s[..., 0, 0] += tr
        s[..., 1, 1] += tr
        return s

    def traction(self, stress, normal):
        def data(x, y, t):
            s = stress(x, y, t)
            return s[..., 0, :] * normal[0] + s[..., 1, :] * normal[1]

        return data

    def loads(self):
        return Loads(
            f_fluid=self.f_fluid,
            f_solid=self.f_solid,
            g_mass=self.g_mass,
            fluid_neumann={
                "fluid_left": self.traction(self.fluid_stress, (-1.0, 0.0)),
                "fluid_right": self.traction(self.fluid_stress, (1.0, 0.0)),
            },
            solid_neumann={
                "solid_top": self.traction(self.solid_stress, (0.0, 1.0)),
            },
        )


def example1_case():
    return ManufacturedCase()


def example1_meshes(h):
    """Conforming fluid/solid meshes of the unit square at cell size h."""
    nx = int(round(1.0 / h))
    ny = int(round(0.5 / h))
    if abs(nx * h - 1.0) > 1e-12 or abs(ny * h - 0.5) > 1e-12:
        raise ValueError(f"h={h} does not tile the unit square")
    fm = build_rect_mesh((0, 0), (1, 0.5), nx, ny, FLUID_LAYOUT, "fluid")
    sm = build_rect_mesh((0, 0.5), (1, 0.5), nx, ny, SOLID_LAYOUT, "solid")
    return fm, sm


def example1_discretization(h, params, case=None):
    case = case or example1_case()
    fm, sm = example1_meshes(h)
    return Discretization(
        fm, sm, params, case.loads(),
        fluid_dirichlet=FLUID_DIRICHLET, solid_dirichlet=SOLID_DIRICHLET,
    )


def initial_states(disc, case, t=0.0):
    u = fem.interpolate(lambda x, y, tt: case.velocity(x, y, tt), disc.Vf, t)
    p = fem.interpolate(lambda x, y, tt: case.pressure(x, y, tt), disc.Q, t)
    eta = fem.interpolate(lambda x, y, tt: case.displacement(x, y, tt), disc.Vs, t)
    xi = eta.copy()
    from .physics import FluidState, SolidState

    return FluidState(u, p, t), SolidState(eta, xi, t)


def error_norms(fstate, sstate, case, *, squared_eta=False, quad_degree=10):
    """Relative errors at the states' time: displacement in the elastic
    energy norm, velocities in L2.  squared_eta also returns the variant
    with squared numerator and denominator for the displacement."""
    t = sstate.t
    mu, lam = case.mu_s, case.lam_s
    num_eta = fem.s_norm_error(
        sstate.eta, lambda x, y, tt: case.displacement_grad(x, y, tt), t,
        mu, lam, quad_degree,
    )
    den_eta = fem.s_norm_exact(
        sstate.eta.space, lambda x, y, tt: case.displacement_grad(x, y, tt), t,
        mu, lam, quad_degree,
    )
    num_xi = fem.l2_error(
        sstate.xi, lambda x, y, tt: case.solid_velocity(x, y, tt), t, quad_degree
    )
    den_xi = fem.l2_norm_exact(
        sstate.xi.space, lambda x, y, tt: case.solid_velocity(x, y, tt), t,
        quad_degree,
    )
    num_u = fem.l2_error(
        fstate.u, lambda x, y, tt: case.velocity(x, y, tt), t, quad_degree
    )
    den_u = fem.l2_norm_exact(
        fstate.u.space, lambda x, y, tt: case.velocity(x, y, tt), t, quad_degree
    )
    for name, den in (("eta", den_eta), ("xi", den_xi), ("u", den_u)):
        if den < 1e-300:
            raise ZeroDivisionError(f"zero reference norm for {name}")
    e_eta = num_eta**2 / den_eta**2 if squared_eta else num_eta / den_eta
    return e_eta, num_xi / den_xi, num_u / den_u


@dataclass
class RateTable:
    """Per-level errors of a refinement study and the observed rates."""

    levels: list = field(default_factory=list)  # dicts per level

    def add(self, tau, h, eps, e_eta, e_xi, e_u, avg_subiters):
        self.levels.append(
            dict(tau=tau, h=h, eps=eps, err_eta=e_eta, err_xi=e_xi,
                 err_u=e_u, avg_subiters=avg_subiters)
        )

    def rates(self):
        out = []
        for i, lv in enumerate(self.levels):
            if i == 0:
                out.append((None, None, None))
                continue
            prev = self.levels[i - 1]
            out.append(tuple(
                np.log2(prev[k] / lv[k])
                for k in ("err_eta", "err_xi", "err_u")
            ))
        return out

    def to_csv(self, path):
        from .reports import write_rate_table

        write_rate_table(self, path)


def default_ladder(n_levels=4, eps=1e-4, halve_eps=False):
    """(tau, h, eps) triples tau = 0.02/2^i, h = 0.25/2^i."""
    out = []
    for i in range(n_levels):
        e = eps / 2**i if halve_eps else eps
        out.append((0.02 / 2**i, 0.25 / 2**i, e))
    return out


def _run_level(level, theta, alpha, scheme, T, case, squared_eta):
    tau, h, eps = level
    params = SchemeParams(
        tau=tau, theta=theta, alpha=1.0, eps=eps,
        rho_f=case.rho_f, mu_f=case.mu_f, rho_s=case.rho_s,
        mu_s=case.mu_s, lam_s=case.lam_s, H_s=0.5, R=0.5,
    )
    params.alpha = alpha_opt(params, tau) if alpha == "opt" else float(alpha)
    disc = example1_discretization(h, params, case)
    init = initial_states(disc, case, 0.0)
    result = run_transient(disc, scheme, T, initial=init, record_energy=False)
    errs = error_norms(result.fluid[-1], result.solid[-1], case,
                       squared_eta=squared_eta)
    return errs, result.avg_subiters


def max_workers(n_jobs):
    cap = os.environ.get("ROBIN_FSI_THREADS")
    cap = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, cap))


def convergence_study(ladder, *, theta=0.5, alpha=100.0, scheme="alg1",
                      T=0.3, case=None, squared_eta=False, workers=None):
    """Run the refinement ladder to T and tabulate errors and rates."""
    for (t0, h0, _), (t1, h1, _) in zip(ladder, ladder[1:]):
        if not (t1 < t0 and h1 < h0):
            raise ValueError("ladder must strictly refine tau and h")
    case = case or example1_case()
    nw = workers or max_workers(len(ladder))
    if nw > 1 and len(ladder) > 1:
        with concurrent.futures.ThreadPoolExecutor(nw) as pool:
            rows = list(pool.map(
                lambda lv: _run_level(lv, theta, alpha, scheme, T, case,
                                      squared_eta),
                ladder,
            ))
    else:
        rows = [_run_level(lv, theta, alpha, scheme, T, case, squared_eta)
                for lv in ladder]
    table = RateTable()
    for (tau, h, eps), ((e_eta, e_xi, e_u), avg) in zip(ladder, rows):
        table.add(tau, h, eps, e_eta, e_xi, e_u, avg)
    return table


def stability_run(*, theta=0.5, tau=0.02, nsteps=200, h=0.25, eps=1e-8,
                  alpha=100.0, scheme="alg1", case=None):
    """Zero-forcing run from smooth nonzero initial data, for checking
    the discrete energy estimate; returns (result, disc)."""
    case = case or example1_case()
    params = SchemeParams(
        tau=tau, theta=theta, alpha=float(alpha), eps=eps,
        rho_f=case.rho_f, mu_f=case.mu_f, rho_s=case.rho_s,
        mu_s=case.mu_s, lam_s=case.lam_s, H_s=0.5, R=0.5,
    )
    fm, sm = example1_meshes(h)
    disc = Discretization(
        fm, sm, params, Loads(),
        fluid_dirichlet=FLUID_DIRICHLET, solid_dirichlet=SOLID_DIRICHLET,
    )
    init = initial_states(disc, case, 0.0)
    result = run_transient(disc, scheme, nsteps * tau, initial=init)
    return result, disc


def iteration_study(schemes=("alg1", "rr", "rn"), *, tau=1e-2, h=0.125,
                    eps=1e-3, alpha="opt", theta=0.5, T=0.3, case=None):
    """Average sub-iteration counts of the coupling schemes on one
    manufactured-problem configuration."""
    case = case or example1_case()
    out = {}
    for scheme in schemes:
        params = SchemeParams(
            tau=tau, theta=theta, alpha=1.0, eps=eps,
            rho_f=case.rho_f, mu_f=case.mu_f, rho_s=case.rho_s,
            mu_s=case.mu_s, lam_s=case.lam_s, H_s=0.5, R=0.5,
        )
        params.alpha = alpha_opt(params, tau) if alpha == "opt" else float(alpha)
        disc = example1_discretization(h, params, case)
        init = initial_states(disc, case, 0.0)
        result = run_transient(disc, scheme, T, initial=init,
                               record_energy=False, strict=False)
        out[scheme] = (result.avg_subiters, result.all_converged)
    return out
