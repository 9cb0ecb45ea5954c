"""One-step solvers for the linear fluid/thick-structure problem.

The fluid is time-dependent Stokes, the structure linear elastodynamics
written in first-order (displacement eta, velocity xi) form.  All steps
are Backward Euler solves to an intermediate level t^n + theta*tau;
interface conditions enter either as Robin data (partitioned sub-steps)
or by strong identification of interface velocity dofs (monolithic).

Operators have constant coefficients, so every matrix and factorization
is built once per Discretization and reused across all time steps and
sub-iterations.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .fem import FieldCoeffs, Space, TraceSystem, mass_norm
from .linalg import DirectSolver
from .mesh import extract_interface


@dataclass
class SchemeParams:
    """Physical constants and scheme knobs (CGS units).

    theta is the intermediate-level fraction of the one-leg scheme and
    must lie in [1/2, 1] (the provable stability range); alpha is the
    Robin combination parameter, eps the sub-iteration tolerance.
    """

    tau: float
    theta: float = 0.5
    alpha: float = 100.0
    eps: float = 1e-4
    max_subiters: int = 400
    rho_f: float = 1.0
    mu_f: float = 1.0
    rho_s: float = 1.0
    mu_s: float = 1.0
    lam_s: float = 1.0
    gamma: float = 0.0
    H_s: float = 0.5
    R: float = 0.5

    def __post_init__(self):
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError(f"theta must be in [1/2, 1], got {self.theta}")
        for name in ("alpha", "eps", "tau"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.max_subiters < 1:
            raise ValueError("max_subiters must be at least 1")


def alpha_opt(params):
    """Robin parameter rho_s*H_s/tau + beta*H_s*tau with beta the
    membrane stiffness E/((1-nu^2) R^2) of the structure layer."""
    mu, lam = params.mu_s, params.lam_s
    young = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    beta = young / ((1 - nu**2) * params.R**2)
    return params.rho_s * params.H_s / params.tau + beta * params.H_s * params.tau


@dataclass
class FluidState:
    u: FieldCoeffs
    p: FieldCoeffs
    t: float


@dataclass
class SolidState:
    eta: FieldCoeffs
    xi: FieldCoeffs
    t: float


@dataclass
class Loads:
    """Problem data callables, each f(x, y, t); None means zero.

    fluid_neumann / solid_neumann map boundary tags to the full traction
    sigma*n on that boundary (vector-valued).
    """

    f_fluid: object = None
    f_solid: object = None
    g_mass: object = None
    fluid_neumann: dict = field(default_factory=dict)
    solid_neumann: dict = field(default_factory=dict)


@dataclass
class EnergyBudget:
    """Discrete energy ledger of a transient run.

    energy[n] is E^n; dissipation[n] and numerical[n] are the cumulative
    viscous and numerical-dissipation sums up to level n (starting at
    k=2).  slack = E^N + D^N + N^N - E^2, which the stability estimate
    bounds by the forcing terms (zero for zero forcing).
    """

    energy: np.ndarray
    dissipation: np.ndarray
    numerical: np.ndarray
    slack: float


class Discretization:
    """Taylor-Hood (P2/P1) fluid plus P2 structure on matched meshes,
    with all step operators assembled and factorized once."""

    INTERFACE = "interface"

    def __init__(self, fluid_mesh, solid_mesh, params, loads=None,
                 fluid_dirichlet=None, solid_dirichlet=None):
        self.params = params
        self.loads = loads or Loads()
        self.fluid_mesh = fluid_mesh
        self.solid_mesh = solid_mesh
        self.interface = extract_interface(fluid_mesh, solid_mesh, self.INTERFACE)

        self.Vf = Space(fluid_mesh, degree=2, ncomp=2)
        self.Q = Space(fluid_mesh, degree=1, ncomp=1)
        self.Vs = Space(solid_mesh, degree=2, ncomp=2)

        p = params
        self.Mf = fem.assemble_operator(self.Vf, self.Vf, "mass")
        self.Kf = fem.assemble_operator(self.Vf, self.Vf, "sym_grad", mu=p.mu_f)
        self.Dmat = fem.assemble_operator(self.Vf, self.Q, "divergence")
        self.Bm = (-self.Dmat).tocsr()
        self.MGf = fem.assemble_operator(
            self.Vf, self.Vf, "boundary_mass", tag=self.INTERFACE
        )
        self.Ms = fem.assemble_operator(self.Vs, self.Vs, "mass")
        self.As = fem.assemble_operator(
            self.Vs, self.Vs, "elasticity", mu=p.mu_s, lam=p.lam_s
        )
        self.MGs = fem.assemble_operator(
            self.Vs, self.Vs, "boundary_mass", tag=self.INTERFACE
        )

        self.fluid_fixed = self._fixed_dofs(self.Vf, fluid_dirichlet or {})
        self.solid_fixed = self._fixed_dofs(self.Vs, solid_dirichlet or {})
        self.fluid_free = np.setdiff1d(np.arange(self.Vf.ndof), self.fluid_fixed)
        self.solid_free = np.setdiff1d(np.arange(self.Vs.ndof), self.solid_fixed)

        self.trace_f = TraceSystem(self.Vf, self.INTERFACE)
        self.trace_s = TraceSystem(self.Vs, self.INTERFACE)
        self._build_trace_maps()

        self._solvers = {}
        self._load_cache = {}

    # -- setup helpers ---------------------------------------------------

    @staticmethod
    def _fixed_dofs(space, dirichlet):
        dofs = set()
        for tag, comps in dirichlet.items():
            s = space.boundary_sdofs(tag)
            for c in comps:
                dofs.update((c * space.nsdof + s).tolist())
        return np.array(sorted(dofs), dtype=int)

    def _build_trace_maps(self):
        fsd = self.Vf.boundary_sdofs(self.INTERFACE)
        ssd = self.Vs.boundary_sdofs(self.INTERFACE)
        cf = self.Vf.dof_coords[fsd]
        cs = self.Vs.dof_coords[ssd]
        pf = np.lexsort((cf[:, 1], cf[:, 0]))
        ps = np.lexsort((cs[:, 1], cs[:, 0]))
        if len(fsd) != len(ssd) or not np.allclose(
            cf[pf], cs[ps], rtol=0.0, atol=1e-12
        ):
            raise ValueError("interface dof coordinates do not match")
        k = len(fsd)
        f2s = np.empty(k, dtype=int)
        f2s[pf] = ps
        # trace slot i on the fluid side matches slot f2s[i] on the solid
        # side; vector traces are x-block then y-block.
        self._f2s = np.concatenate([f2s, k + f2s])
        self._s2f = np.empty_like(self._f2s)
        self._s2f[self._f2s] = np.arange(2 * k)
        self.n_iface = k

    def fluid_to_solid_trace(self, vals):
        out = np.empty_like(vals)
        out[self._f2s] = vals
        return out

    def solid_to_fluid_trace(self, vals):
        out = np.empty_like(vals)
        out[self._s2f] = vals
        return out

    # -- cached loads and solvers ----------------------------------------

    def _load(self, name, t):
        """One-slot-per-name cache of time-dependent load vectors."""
        slot = self._load_cache.get(name)
        if slot is not None and slot[0] == t:
            return slot[1]
        vec = self._assemble_load(name, t)
        self._load_cache[name] = (t, vec)
        return vec

    def _assemble_load(self, name, t):
        ld = self.loads
        if name == "f_fluid":
            if ld.f_fluid is None:
                return np.zeros(self.Vf.ndof)
            return fem.assemble_functional(self.Vf, ld.f_fluid, t=t)
        if name == "f_solid":
            if ld.f_solid is None:
                return np.zeros(self.Vs.ndof)
            return fem.assemble_functional(self.Vs, ld.f_solid, t=t)
        if name == "g_mass":
            if ld.g_mass is None:
                return np.zeros(self.Q.ndof)
            return fem.assemble_functional(self.Q, ld.g_mass, t=t)
        if name == "fluid_neumann":
            vec = np.zeros(self.Vf.ndof)
            for tag, data in ld.fluid_neumann.items():
                vec += fem.assemble_functional(self.Vf, data, region=tag, t=t)
            return vec
        if name == "solid_neumann":
            vec = np.zeros(self.Vs.ndof)
            for tag, data in ld.solid_neumann.items():
                vec += fem.assemble_functional(self.Vs, data, region=tag, t=t)
            return vec
        raise KeyError(name)

    def _solid_solver(self, theta_eff, robin):
        key = ("solid", theta_eff, robin)
        if key not in self._solvers:
            p = self.params
            tt = theta_eff * p.tau
            A = p.rho_s / tt * self.Ms + tt * (self.As + p.gamma * self.Ms)
            if robin:
                A = A + p.alpha * self.MGs
            fr = self.solid_free
            self._solvers[key] = DirectSolver(A[np.ix_(fr, fr)].tocsr())
        return self._solvers[key]

    def _fluid_solver(self, theta_eff):
        key = ("fluid", theta_eff)
        if key not in self._solvers:
            p = self.params
            tt = theta_eff * p.tau
            A = p.rho_f / tt * self.Mf + self.Kf + p.alpha * self.MGf
            fr = self.fluid_free
            A11 = A[np.ix_(fr, fr)]
            B = self.Bm[:, fr]
            S = sp.bmat([[A11, B.T], [B, None]], format="csr")
            self._solvers[key] = DirectSolver(S)
        return self._solvers[key]

    def _monolithic_solver(self, theta_eff):
        key = ("mono", theta_eff)
        if key not in self._solvers:
            P = self._prolongation()
            p = self.params
            tt = theta_eff * p.tau
            Af = p.rho_f / tt * self.Mf + self.Kf
            As = p.rho_s / tt * self.Ms + tt * (self.As + p.gamma * self.Ms)
            A = sp.bmat(
                [
                    [Af, self.Bm.T, None],
                    [self.Bm, None, None],
                    [None, None, As],
                ],
                format="csr",
            )
            Ared = (P.T @ A @ P).tocsr()
            self._solvers[key] = (DirectSolver(Ared), P)
        return self._solvers[key]

    def _prolongation(self):
        """Map reduced monolithic unknowns to the raw [u; p; xi] stacking.

        Solid interface dofs are identified with their fluid partners;
        fluid interface dofs matched to clamped solid dofs are dropped,
        so the kinematic condition holds there too.
        """
        if hasattr(self, "_P"):
            return self._P
        nf, npres, ns = self.Vf.ndof, self.Q.ndof, self.Vs.ndof
        fdofs = self.trace_f.dofs
        sdofs = self.trace_s.dofs
        # fluid dof paired with each solid interface dof
        pair_of_solid = np.full(ns, -1, dtype=int)
        for i_f, dof_f in enumerate(fdofs):
            pair_of_solid[sdofs[self._f2s[i_f]]] = dof_f

        solid_fixed = set(self.solid_fixed.tolist())
        fluid_fixed = set(self.fluid_fixed.tolist())
        for dof_s in sdofs:
            if dof_s in solid_fixed:
                fluid_fixed.add(pair_of_solid[dof_s])
        iface_solid = set(sdofs.tolist())

        cols = {}
        ncol = 0
        rows_, cols_ = [], []
        for d in range(nf):
            if d in fluid_fixed:
                continue
            cols[("f", d)] = ncol
            rows_.append(d)
            cols_.append(ncol)
            ncol += 1
        for q in range(npres):
            cols[("p", q)] = ncol
            rows_.append(nf + q)
            cols_.append(ncol)
            ncol += 1
        for d in range(ns):
            if d in solid_fixed:
                continue
            if d in iface_solid:
                partner = pair_of_solid[d]
                if partner in fluid_fixed:
                    continue
                rows_.append(nf + npres + d)
                cols_.append(cols[("f", partner)])
            else:
                cols[("s", d)] = ncol
                rows_.append(nf + npres + d)
                cols_.append(ncol)
                ncol += 1
        P = sp.coo_matrix(
            (np.ones(len(rows_)), (rows_, cols_)),
            shape=(nf + npres + ns, ncol),
        ).tocsr()
        self._P = P
        return P

    # -- states -----------------------------------------------------------

    def zero_fluid(self, t=0.0):
        return FluidState(fem.zero_field(self.Vf, t), fem.zero_field(self.Q, t), t)

    def zero_solid(self, t=0.0):
        return SolidState(fem.zero_field(self.Vs, t), fem.zero_field(self.Vs, t), t)

    # -- partitioned sub-steps ---------------------------------------------

    def solid_be_step(self, prev, iface_w, t_target, *, robin=True, theta_eff=None):
        """Backward Euler structure solve to t_target with interface data.

        iface_w holds alpha*u - sigma_F n_F (Robin) or -sigma_F n_F
        (pure Neumann, robin=False) in solid trace ordering.  eta is
        eliminated exactly via eta = eta^n + theta*tau*xi.
        """
        p = self.params
        th = p.theta if theta_eff is None else theta_eff
        tt = th * p.tau
        rhs = (
            p.rho_s / tt * (self.Ms @ prev.xi.values)
            - self.As @ prev.eta.values
            - p.gamma * (self.Ms @ prev.eta.values)
            + self._load("f_solid", t_target)
            + self._load("solid_neumann", t_target)
        )
        w_full = np.zeros(self.Vs.ndof)
        w_full[self.trace_s.dofs] = iface_w
        rhs += self.MGs @ w_full
        xi = np.zeros(self.Vs.ndof)
        xi[self.solid_free] = self._solid_solver(th, robin).solve(
            rhs[self.solid_free]
        )
        eta = prev.eta.values + tt * xi
        return SolidState(
            FieldCoeffs(self.Vs, eta, t_target),
            FieldCoeffs(self.Vs, xi, t_target),
            t_target,
        )

    def fluid_be_step(self, prev, iface_xi, iface_trac, t_target, *, theta_eff=None):
        """Backward Euler Stokes solve to t_target with Robin data
        alpha*xi + sigma_F n_F (both in fluid trace ordering)."""
        p = self.params
        th = p.theta if theta_eff is None else theta_eff
        tt = th * p.tau
        rhs_m = (
            p.rho_f / tt * (self.Mf @ prev.u.values)
            + self._load("f_fluid", t_target)
            + self._load("fluid_neumann", t_target)
        )
        w_full = np.zeros(self.Vf.ndof)
        w_full[self.trace_f.dofs] = p.alpha * iface_xi + iface_trac
        rhs_m += self.MGf @ w_full
        rhs_c = -self._load("g_mass", t_target)
        fr = self.fluid_free
        sol = self._fluid_solver(th).solve(np.concatenate([rhs_m[fr], rhs_c]))
        u = np.zeros(self.Vf.ndof)
        u[fr] = sol[: len(fr)]
        pvals = sol[len(fr):]
        return FluidState(
            FieldCoeffs(self.Vf, u, t_target),
            FieldCoeffs(self.Q, pvals, t_target),
            t_target,
        )

    def fluid_traction(self, u_vals, p_vals, prev_u_vals, t_target, *,
                       theta_eff=None):
        """Variational interface traction sigma_F(u, p) n_F in fluid
        trace ordering, recovered from the Backward Euler momentum
        residual anchored at the previous velocity."""
        p = self.params
        th = p.theta if theta_eff is None else theta_eff
        tt = th * p.tau
        r = (
            p.rho_f / tt * (self.Mf @ (u_vals - prev_u_vals))
            + self.Kf @ u_vals
            + self.Bm.T @ p_vals
            - self._load("f_fluid", t_target)
            - self._load("fluid_neumann", t_target)
        )
        return self.trace_f.project_residual(r).values

    # -- monolithic --------------------------------------------------------

    def monolithic_step(self, fprev, sprev, *, theta_eff=0.5):
        """One-leg theta step with u = xi identified strongly on the
        interface: BE solve to t^n + theta*tau, then linear extrapolation
        to t^{n+1}.  Returns (fluid_theta, solid_theta, fluid_next,
        solid_next)."""
        p = self.params
        th = theta_eff
        tt = th * p.tau
        t_mid = fprev.t + tt
        t_next = fprev.t + p.tau
        solver, P = self._monolithic_solver(th)
        rhs_f = (
            p.rho_f / tt * (self.Mf @ fprev.u.values)
            + self._load("f_fluid", t_mid)
            + self._load("fluid_neumann", t_mid)
        )
        rhs_c = -self._load("g_mass", t_mid)
        rhs_s = (
            p.rho_s / tt * (self.Ms @ sprev.xi.values)
            - self.As @ sprev.eta.values
            - p.gamma * (self.Ms @ sprev.eta.values)
            + self._load("f_solid", t_mid)
            + self._load("solid_neumann", t_mid)
        )
        raw = np.concatenate([rhs_f, rhs_c, rhs_s])
        sol = P @ solver.solve(P.T @ raw)
        nf, npres = self.Vf.ndof, self.Q.ndof
        u = sol[:nf]
        pv = sol[nf : nf + npres]
        xi = sol[nf + npres :]
        eta = sprev.eta.values + tt * xi
        f_th = FluidState(
            FieldCoeffs(self.Vf, u, t_mid), FieldCoeffs(self.Q, pv, t_mid), t_mid
        )
        s_th = SolidState(
            FieldCoeffs(self.Vs, eta, t_mid), FieldCoeffs(self.Vs, xi, t_mid), t_mid
        )
        f_next, s_next = fe_extrapolate_states(f_th, s_th, fprev, sprev, th, t_next)
        return f_th, s_th, f_next, s_next

    # -- energy monitor ----------------------------------------------------

    def s_energy_matrix(self):
        """Elastic energy operator, including the spring term when set."""
        if not hasattr(self, "_Senergy"):
            p = self.params
            A = self.As
            if p.gamma > 0:
                A = A + p.gamma * self.Ms
            self._Senergy = A.tocsr()
        return self._Senergy

    def unit_strain_matrix(self):
        """Operator whose quadratic form is ||D(u)||^2 on the fluid."""
        if not hasattr(self, "_Dunit"):
            self._Dunit = fem.assemble_operator(self.Vf, self.Vf, "sym_grad", mu=0.5)
        return self._Dunit


def fe_extrapolate_states(f_th, s_th, fprev, sprev, theta, t_next):
    """Forward Euler extrapolation y^{n+1} = y^theta/theta -
    ((1-theta)/theta) y^n for u, eta, xi; pressure stays at the theta
    level (the scheme defines no full-level pressure)."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    a, b = 1.0 / theta, (1.0 - theta) / theta
    u = a * f_th.u.values - b * fprev.u.values
    eta = a * s_th.eta.values - b * sprev.eta.values
    xi = a * s_th.xi.values - b * sprev.xi.values
    f_next = FluidState(
        FieldCoeffs(f_th.u.space, u, t_next), f_th.p.copy(), t_next
    )
    s_next = SolidState(
        FieldCoeffs(s_th.eta.space, eta, t_next),
        FieldCoeffs(s_th.xi.space, xi, t_next),
        t_next,
    )
    return f_next, s_next


def energy_budget(disc, fluid_states, solid_states, fluid_theta_states):
    """Discrete energy ledger over a run.

    fluid_states / solid_states are the full-level histories (index =
    time level); fluid_theta_states[k] is the intermediate-level fluid
    state of step k -> k+1 (entries before k=2 may be None).  The sums
    start at k=2, after the two bootstrap steps.
    """
    n_levels = len(fluid_states)
    if n_levels < 3:
        raise ValueError("need at least three time levels")
    p = disc.params
    Mf, Ms = disc.Mf, disc.Ms
    Se = disc.s_energy_matrix()
    Du = disc.unit_strain_matrix()

    E = np.empty(n_levels)
    for n in range(n_levels):
        u = fluid_states[n].u.values
        eta = solid_states[n].eta.values
        xi = solid_states[n].xi.values
        E[n] = 0.5 * (
            p.rho_s * (xi @ (Ms @ xi))
            + eta @ (Se @ eta)
            + p.rho_f * (u @ (Mf @ u))
        )

    D = np.zeros(n_levels)
    N = np.zeros(n_levels)
    cd = cn = 0.0
    # per-step numerical dissipation ((2*theta-1)/2)||y^{k+1}-y^k||^2:
    # the one-leg BE+FE combination telescopes to exactly this factor
    fac_n = (2 * p.theta - 1) / 2.0
    for n in range(3, n_levels):
        k = n - 1
        uth = fluid_theta_states[k]
        if uth is not None:
            v = uth.u.values
            cd += p.mu_f * p.tau * (v @ (Du @ v))
        du = fluid_states[k + 1].u.values - fluid_states[k].u.values
        dxi = solid_states[k + 1].xi.values - solid_states[k].xi.values
        deta = solid_states[k + 1].eta.values - solid_states[k].eta.values
        cn += fac_n * (
            p.rho_s * (dxi @ (Ms @ dxi))
            + deta @ (Se @ deta)
            + p.rho_f * (du @ (Mf @ du))
        )
        D[n] = cd
        N[n] = cn

    slack = E[-1] + D[-1] + N[-1] - E[2]
    return EnergyBudget(energy=E, dissipation=D, numerical=N, slack=slack)
