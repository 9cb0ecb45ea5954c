"""Pressure-pulse-driven channel with an elastic wall layer.

The computational domain is the upper half of a symmetric channel: fluid
(0,5) x (0,0.5) cm below a structure layer (0,5) x (0.5,0.6) cm with a
linear spring term.  A cosine pressure pulse acts on the inlet; symmetry
(u_y = 0, zero tangential traction) holds on the bottom boundary, and the
structure is clamped at its inlet/outlet ends.
"""

from dataclasses import dataclass, field

import numpy as np

from .coupling import run_transient
from .fem import eval_field
from .mesh import build_rect_mesh
from .mms import alpha_opt
from .physics import Discretization, Loads, SchemeParams
from .quadrature import segment_rule

FLUID_LAYOUT = {
    "left": "inlet",
    "right": "outlet",
    "bottom": "symmetry",
    "top": "interface",
}
SOLID_LAYOUT = {
    "left": "solid_left",
    "right": "solid_right",
    "bottom": "interface",
    "top": "solid_top",
}

DEFAULT_STATIONS = tuple(0.25 * k for k in range(1, 20))  # 0.25 .. 4.75
DEFAULT_TIMES = (0.004, 0.008, 0.012)


@dataclass
class ChannelConfig:
    """Geometry, material constants and pulse parameters (CGS units)."""

    length: float = 5.0
    fluid_height: float = 0.5
    solid_height: float = 0.1
    rho_f: float = 1.0
    mu_f: float = 0.035
    rho_s: float = 1.1
    mu_s: float = 1.67785e6
    lam_s: float = 8.22148e7
    gamma: float = 4.0e6
    p_max: float = 1.333e4
    t_pulse: float = 0.03
    p_out: float = 0.0
    T: float = 0.012
    tau: float = 1e-4
    theta: float = 0.5
    eps: float = 1e-4
    nx: int = 50
    ny_fluid: int = 10
    ny_solid: int = 3

    def __post_init__(self):
        if self.tau <= 0 or self.T < self.tau:
            raise ValueError("need 0 < tau <= T")
        for name in ("rho_f", "mu_f", "rho_s", "mu_s", "lam_s", "p_max",
                     "t_pulse"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def inlet_pressure(self, t):
        t = np.asarray(t, dtype=float)
        p = 0.5 * self.p_max * (1 - np.cos(2 * np.pi * t / self.t_pulse))
        return np.where(t <= self.t_pulse, p, 0.0)

    def params(self, alpha="opt"):
        p = SchemeParams(
            tau=self.tau, theta=self.theta, alpha=1.0, eps=self.eps,
            rho_f=self.rho_f, mu_f=self.mu_f, rho_s=self.rho_s,
            mu_s=self.mu_s, lam_s=self.lam_s, gamma=self.gamma,
            H_s=self.solid_height, R=self.fluid_height,
        )
        p.alpha = alpha_opt(p, self.tau) if alpha == "opt" else float(alpha)
        return p

    def meshes(self):
        fm = build_rect_mesh(
            (0, 0), (self.length, self.fluid_height),
            self.nx, self.ny_fluid, FLUID_LAYOUT, "fluid",
        )
        sm = build_rect_mesh(
            (0, self.fluid_height), (self.length, self.solid_height),
            self.nx, self.ny_solid, SOLID_LAYOUT, "solid",
        )
        return fm, sm

    def loads(self):
        def inlet_traction(x, y, t):
            # sigma n = -p_in n with inward-facing flow normal n = (-1, 0)
            out = np.zeros(np.shape(x) + (2,))
            out[..., 0] = self.inlet_pressure(t)
            return out

        def outlet_traction(x, y, t):
            out = np.zeros(np.shape(x) + (2,))
            out[..., 0] = -self.p_out
            return out

        return Loads(
            fluid_neumann={"inlet": inlet_traction, "outlet": outlet_traction},
        )

    def discretization(self, alpha="opt"):
        fm, sm = self.meshes()
        return Discretization(
            fm, sm, self.params(alpha), self.loads(),
            fluid_dirichlet={"symmetry": (1,)},
            solid_dirichlet={"solid_left": (0, 1), "solid_right": (0, 1)},
        )


def inlet_pressure(t, config=None):
    return (config or ChannelConfig()).inlet_pressure(t)


def quantity_of_interest(fstate, sstate, kind, x, config=None):
    """Pointwise quantity at station x: 'flowrate' integrates u_x over
    the vertical fluid cut, 'centerline_pressure' samples p on the
    symmetry axis y=0, 'interface_disp' is |eta| at the wall y=H."""
    cfg = config or ChannelConfig()
    if kind == "flowrate":
        ny = fstate.u.space.mesh.ny
        hy = cfg.fluid_height / ny
        s, w = segment_rule(4)
        total = 0.0
        for j in range(ny):
            for half in (0.0, 0.5):
                ys = (j + half + 0.5 * s) * hy
                pts = np.column_stack([np.full_like(ys, x), ys])
                ux = eval_field(fstate.u, pts)[:, 0]
                total += 0.5 * hy * float(w @ ux)
        return total
    if kind == "centerline_pressure":
        return float(eval_field(fstate.p, [[x, 0.0]])[0])
    if kind == "interface_disp":
        d = eval_field(sstate.eta, [[x, cfg.fluid_height]])[0]
        return float(np.hypot(d[0], d[1]))
    raise ValueError(f"unknown quantity {kind!r}")


@dataclass
class QoISeries:
    """Station curves of the three output quantities at sample times."""

    scheme: str
    times: np.ndarray          # requested output times
    sampled_times: np.ndarray  # nearest intermediate-level times used
    stations: np.ndarray
    flowrate: np.ndarray       # (ntimes, nstations)
    pressure: np.ndarray
    disp: np.ndarray

    def to_csv(self, path):
        from .reports import write_qoi_series

        write_qoi_series(self, path)


def qoi_series(result, config=None, times=DEFAULT_TIMES,
               stations=DEFAULT_STATIONS):
    """Extract QoI curves from a transient run, sampling the stored
    intermediate-level states nearest each requested time (the pressure
    only exists at those levels)."""
    cfg = config or ChannelConfig()
    stations = np.asarray(stations, dtype=float)
    times = np.asarray(times, dtype=float)
    th_times = np.array([s.t for s in result.fluid_theta])
    q = np.empty((len(times), len(stations)))
    pc = np.empty_like(q)
    dm = np.empty_like(q)
    sampled = np.empty(len(times))
    for i, t in enumerate(times):
        k = int(np.argmin(np.abs(th_times - t)))
        sampled[i] = th_times[k]
        fs, ss = result.fluid_theta[k], result.solid_theta[k]
        for j, x in enumerate(stations):
            q[i, j] = quantity_of_interest(fs, ss, "flowrate", x, cfg)
            pc[i, j] = quantity_of_interest(fs, ss, "centerline_pressure", x, cfg)
            dm[i, j] = quantity_of_interest(fs, ss, "interface_disp", x, cfg)
    return QoISeries(
        scheme=result.scheme, times=times, sampled_times=sampled,
        stations=stations, flowrate=q, pressure=pc, disp=dm,
    )


def compare_series(a, b):
    """Relative L2 discrepancy over stations, per kind and sample time,
    with b as the reference."""
    if not np.allclose(a.stations, b.stations) or not np.allclose(
        a.times, b.times
    ):
        raise ValueError("series sampled on different grids")
    out = {}
    for kind in ("flowrate", "pressure", "disp"):
        va, vb = getattr(a, kind), getattr(b, kind)
        ref = np.linalg.norm(vb, axis=1)
        if np.any(ref < 1e-300):
            raise ZeroDivisionError(f"zero reference norm for {kind}")
        out[kind] = np.linalg.norm(va - vb, axis=1) / ref
    return out


def run_channel(scheme, config=None, alpha="opt", T=None):
    """Run one scheme on the channel problem from rest."""
    cfg = config or ChannelConfig()
    disc = cfg.discretization(alpha)
    result = run_transient(disc, scheme, T or cfg.T, record_energy=False)
    return result, disc
