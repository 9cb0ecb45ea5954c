"""Partitioned time-stepping drivers.

One time step of the strongly-coupled scheme is: (1) linear-extrapolated
initial guesses, (2) a loop of Backward Euler solid/fluid sub-steps with
generalized Robin interface data until the iterates settle, targeting the
intermediate level t^n + theta*tau, (3) a Forward Euler extrapolation of
velocity and displacement to t^{n+1}.  The first two steps of a run are
bootstrapped with the monolithic midpoint step so the starting values are
second-order accurate.

Comparison modes reuse the same machinery: `rr` runs the sub-iteration as
a plain Backward Euler scheme to t^{n+1} (no extrapolation step), `rn`
additionally replaces the solid Robin condition by pure Neumann data, and
`loose` performs exactly one sweep of step (2) followed by step (3).
"""

from dataclasses import dataclass, field

import numpy as np

from .fem import FieldCoeffs, mass_norm
from .physics import FluidState, SolidState, fe_extrapolate_states, energy_budget

SCHEMES = ("alg1", "monolithic", "rn", "rr", "loose")


@dataclass
class IterationTrace:
    """Per-sweep diagnostics of one sub-iteration loop."""

    inc_u: list = field(default_factory=list)
    inc_xi: list = field(default_factory=list)
    inc_eta: list = field(default_factory=list)
    contraction: list = field(default_factory=list)  # interface quantity per sweep
    count: int = 0
    converged: bool = False
    diverged: bool = False


class SubiterationError(RuntimeError):
    """Sub-iterations hit the cap; carries the trace (and step index)."""

    def __init__(self, message, trace, step=None):
        super().__init__(message)
        self.trace = trace
        self.step = step


@dataclass
class TimeSeriesResult:
    """Full history of one transient run."""

    scheme: str
    times: np.ndarray
    fluid: list
    solid: list
    fluid_theta: list       # per step index; intermediate-level fluid state
    solid_theta: list
    traces: list            # per step index; None for bootstrap/monolithic
    energy: object = None

    @property
    def avg_subiters(self):
        counts = [t.count for t in self.traces if t is not None]
        return float(np.mean(counts)) if counts else 0.0

    @property
    def all_converged(self):
        return all(t.converged for t in self.traces if t is not None)


def extrapolate_guess(f_n, f_nm1, s_n, s_nm1, p_th1, p_th2, theta, tau):
    """Initial guesses for the sub-iteration loop.

    Velocity/displacement guesses are the linear extrapolations
    (1+theta) y^n - theta y^{n-1}; the pressure guess combines the two
    stored intermediate-level pressures as (1+tau) p_1 - tau p_2.
    """
    u0 = (1 + theta) * f_n.u.values - theta * f_nm1.u.values
    eta0 = (1 + theta) * s_n.eta.values - theta * s_nm1.eta.values
    xi0 = (1 + theta) * s_n.xi.values - theta * s_nm1.xi.values
    p0 = (1 + tau) * p_th1 - tau * p_th2
    return u0, p0, eta0, xi0


def fe_extrapolate(f_th, s_th, fprev, sprev, theta, t_next):
    """Forward Euler extrapolation of the intermediate-level states."""
    return fe_extrapolate_states(f_th, s_th, fprev, sprev, theta, t_next)


def be_subiterate(disc, fprev, sprev, guess, *, mode="alg1", theta_eff=None,
                  max_subiters=None, strict=True):
    """Robin-Robin sub-iteration loop for one Backward Euler step.

    guess = (u0, p0, eta0, xi0) coefficient arrays.  Stops when the
    relative L2 increments of u, xi and eta all drop below eps (the
    pressure is not part of the test).  Returns the intermediate-level
    (fluid, solid) states and an IterationTrace; with strict=True a hit
    cap raises SubiterationError.
    """
    p = disc.params
    th = p.theta if theta_eff is None else theta_eff
    cap = p.max_subiters if max_subiters is None else max_subiters
    t_target = fprev.t + th * p.tau
    alpha = p.alpha
    solid_robin = mode != "rn"

    u_k, p_k = np.array(guess[0]), np.array(guess[1])
    eta_k, xi_k = np.array(guess[2]), np.array(guess[3])
    trac_k = disc.fluid_traction(u_k, p_k, fprev.u.values, t_target, theta_eff=th)
    trace = IterationTrace()
    fdofs = disc.trace_f.dofs

    f_new = s_new = None
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cap):
            u_gamma = u_k[fdofs]
            if solid_robin:
                w_solid = disc.fluid_to_solid_trace(alpha * u_gamma - trac_k)
            else:
                w_solid = disc.fluid_to_solid_trace(-trac_k)
            try:
                s_new = disc.solid_be_step(
                    sprev, w_solid, t_target, robin=solid_robin, theta_eff=th
                )
                xi_gamma = disc.solid_to_fluid_trace(
                    s_new.xi.values[disc.trace_s.dofs]
                )
                f_new = disc.fluid_be_step(
                    fprev, xi_gamma, trac_k, t_target, theta_eff=th
                )
                trac_new = disc.fluid_traction(
                    f_new.u.values, f_new.p.values, fprev.u.values, t_target,
                    theta_eff=th,
                )
            except (ValueError, FloatingPointError):
                # iterates left the range of finite arithmetic
                trace.diverged = True
                break

            inc_u = _rel_increment(disc.Mf, f_new.u.values, u_k)
            inc_xi = _rel_increment(disc.Ms, s_new.xi.values, xi_k)
            inc_eta = _rel_increment(disc.Ms, s_new.eta.values, eta_k)
            du = f_new.u.values[fdofs] - u_k[fdofs]
            dtr = trac_new - trac_k
            q = 0.5 * alpha * disc.trace_f.l2_norm(du) ** 2
            q += disc.trace_f.l2_norm(dtr) ** 2 / (2 * alpha)
            trace.inc_u.append(inc_u)
            trace.inc_xi.append(inc_xi)
            trace.inc_eta.append(inc_eta)
            trace.contraction.append(q)
            trace.count += 1

            if not (np.isfinite(inc_u) and np.isfinite(inc_xi)
                    and np.isfinite(inc_eta)) or max(inc_u, inc_xi, inc_eta) > 1e12:
                trace.diverged = True
                break
            u_k, p_k, trac_k = f_new.u.values, f_new.p.values, trac_new
            eta_k, xi_k = s_new.eta.values, s_new.xi.values
            if inc_u < p.eps and inc_xi < p.eps and inc_eta < p.eps:
                trace.converged = True
                break

    if trace.diverged or f_new is None:
        # fall back to the last finite iterate so callers can inspect it
        f_new = FluidState(
            FieldCoeffs(disc.Vf, u_k, t_target),
            FieldCoeffs(disc.Q, p_k, t_target), t_target,
        )
        s_new = SolidState(
            FieldCoeffs(disc.Vs, eta_k, t_target),
            FieldCoeffs(disc.Vs, xi_k, t_target), t_target,
        )
    if not trace.converged and strict:
        detail = "diverged" if trace.diverged else f"hit the {cap}-sweep cap"
        if trace.inc_u:
            detail += (
                f" (last increments u={trace.inc_u[-1]:.3e}, "
                f"xi={trace.inc_xi[-1]:.3e}, eta={trace.inc_eta[-1]:.3e})"
            )
        raise SubiterationError(f"sub-iterations {detail}", trace)
    return f_new, s_new, trace


def _rel_increment(M, new, old):
    diff = mass_norm(M, new - old)
    ref = mass_norm(M, new)
    return diff if ref < 1e-14 else diff / ref


def run_transient(disc, scheme, T, *, initial=None, record_energy=True,
                  strict=None):
    """March the coupled problem from t=0 to t=T=n*tau.

    scheme is one of 'alg1', 'monolithic', 'rn', 'rr', 'loose'.  The
    first two steps always use the monolithic midpoint step.  strict
    defaults to True for alg1 (non-convergence raises) and False for the
    comparison modes (non-convergence is recorded in the traces).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    p = disc.params
    nsteps = int(round(T / p.tau))
    if abs(nsteps * p.tau - T) > 1e-10 * max(T, p.tau):
        raise ValueError(f"T={T} is not an integer multiple of tau={p.tau}")
    if strict is None:
        strict = scheme in ("alg1", "monolithic")

    if initial is None:
        f0, s0 = disc.zero_fluid(0.0), disc.zero_solid(0.0)
    else:
        f0, s0 = initial
    fluid, solid = [f0], [s0]
    fluid_theta, solid_theta, traces = [], [], []
    p_theta = []  # intermediate-level pressure coefficients per step

    be_mode = scheme in ("rr", "rn")
    th_step = 1.0 if be_mode else p.theta

    for n in range(nsteps):
        try:
            if n < 2 or scheme == "monolithic":
                th = p.theta if scheme == "monolithic" else 0.5
                f_th, s_th, f_next, s_next = disc.monolithic_step(
                    fluid[n], solid[n], theta_eff=th
                )
                tr = None
            else:
                if be_mode:
                    # comparison schemes start from the previous level,
                    # without the guess-extrapolation step
                    guess = (fluid[n].u.values, p_theta[n - 1],
                             solid[n].eta.values, solid[n].xi.values)
                else:
                    guess = extrapolate_guess(
                        fluid[n], fluid[n - 1], solid[n], solid[n - 1],
                        p_theta[n - 1], p_theta[n - 2], th_step, p.tau,
                    )
                f_th, s_th, tr = be_subiterate(
                    disc, fluid[n], solid[n], guess,
                    mode="rn" if scheme == "rn" else "alg1",
                    theta_eff=th_step,
                    max_subiters=1 if scheme == "loose" else None,
                    strict=False if scheme == "loose" else strict,
                )
                if be_mode:
                    f_next, s_next = f_th, s_th
                else:
                    f_next, s_next = fe_extrapolate(
                        f_th, s_th, fluid[n], solid[n], p.theta,
                        fluid[n].t + p.tau,
                    )
        except SubiterationError as exc:
            raise SubiterationError(f"step {n}: {exc}", exc.trace, step=n) from exc
        fluid.append(f_next)
        solid.append(s_next)
        fluid_theta.append(f_th)
        solid_theta.append(s_th)
        traces.append(tr)
        p_theta.append(f_th.p.values)

    times = p.tau * np.arange(nsteps + 1)
    result = TimeSeriesResult(
        scheme=scheme, times=times, fluid=fluid, solid=solid,
        fluid_theta=fluid_theta, solid_theta=solid_theta, traces=traces,
    )
    if record_energy and nsteps >= 2:
        result.energy = energy_budget(disc, fluid, solid, fluid_theta)
    return result
