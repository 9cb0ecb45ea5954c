import numpy as np
import pytest

from robin_fsi import fem
from robin_fsi.benchmarks import (
    ChannelConfig,
    QoISeries,
    compare_series,
    inlet_pressure,
    qoi_series,
    quantity_of_interest,
    run_channel,
)
from robin_fsi.mesh import build_rect_mesh
from robin_fsi.physics import FluidState, SolidState


def test_inlet_pressure_pulse_shape():
    cfg = ChannelConfig()
    assert inlet_pressure(0.0, cfg) == 0.0
    assert inlet_pressure(0.015, cfg) == pytest.approx(cfg.p_max)
    assert inlet_pressure(0.0075, cfg) == pytest.approx(0.5 * cfg.p_max)
    assert inlet_pressure(0.05, cfg) == 0.0
    t = np.linspace(0, 0.06, 200)
    p = inlet_pressure(t, cfg)
    assert np.all(p >= 0) and p.max() <= cfg.p_max + 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(tau=-1.0)
    with pytest.raises(ValueError):
        ChannelConfig(T=1e-5, tau=1e-4)
    with pytest.raises(ValueError):
        ChannelConfig(p_max=0.0)


def _interp_states(cfg, u_fn, p_fn, eta_fn):
    fm, sm = cfg.meshes()
    Vf = fem.Space(fm, 2, 2)
    Q = fem.Space(fm, 1, 1)
    Vs = fem.Space(sm, 2, 2)
    f = FluidState(fem.interpolate(u_fn, Vf), fem.interpolate(p_fn, Q), 0.0)
    s = SolidState(fem.interpolate(eta_fn, Vs), fem.zero_field(Vs), 0.0)
    return f, s


def test_flowrate_oracle():
    # u_x = 2e-3 x (1 - x) y (1 - y): at x = 0.5 the cut integral over
    # y in (0, 0.5) is 2e-3 * 0.25 * 1/12
    cfg = ChannelConfig(length=1.0, fluid_height=0.5, nx=8, ny_fluid=4,
                        ny_solid=2)

    def u_fn(x, y, t):
        ux = 2e-3 * x * (1 - x) * y * (1 - y)
        return np.stack([ux, np.zeros_like(ux)], axis=-1)

    f, s = _interp_states(cfg, u_fn, lambda x, y, t: np.zeros_like(x),
                          lambda x, y, t: np.zeros(np.shape(x) + (2,)))
    q = quantity_of_interest(f, s, "flowrate", 0.5, cfg)
    assert q == pytest.approx(2e-3 * 0.25 / 12, rel=1e-12)


def test_pointwise_quantities():
    cfg = ChannelConfig(length=1.0, fluid_height=0.5, nx=4, ny_fluid=2,
                        ny_solid=2)
    f, s = _interp_states(
        cfg,
        lambda x, y, t: np.zeros(np.shape(x) + (2,)),
        lambda x, y, t: 2 + x,
        lambda x, y, t: np.stack([3 * np.ones_like(x), 4 * np.ones_like(x)],
                                 axis=-1),
    )
    assert quantity_of_interest(f, s, "centerline_pressure", 0.25, cfg) == (
        pytest.approx(2.25)
    )
    assert quantity_of_interest(f, s, "interface_disp", 0.5, cfg) == (
        pytest.approx(5.0)  # |(3, 4)|
    )
    assert quantity_of_interest(f, s, "flowrate", 0.5, cfg) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        quantity_of_interest(f, s, "vorticity", 0.5, cfg)


def test_compare_series_identical_and_zero_reference():
    ones = np.ones((2, 3))
    a = QoISeries("alg1", np.array([1.0, 2.0]), np.array([1.0, 2.0]),
                  np.array([0.5, 1.0, 1.5]), ones, 2 * ones, 3 * ones)
    out = compare_series(a, a)
    for kind in ("flowrate", "pressure", "disp"):
        assert np.allclose(out[kind], 0.0)
    b = QoISeries("mono", a.times, a.sampled_times, a.stations,
                  np.zeros((2, 3)), 2 * ones, 3 * ones)
    with pytest.raises(ZeroDivisionError):
        compare_series(a, b)
    c = QoISeries("mono", a.times, a.sampled_times,
                  np.array([0.5, 1.0, 2.0]), ones, ones, ones)
    with pytest.raises(ValueError):
        compare_series(a, c)


@pytest.fixture(scope="module")
def short_channel_run():
    cfg = ChannelConfig()
    result, disc = run_channel("monolithic", cfg, T=5e-4)
    return cfg, result, disc


def test_channel_causality(short_channel_run):
    # the pulse enters at x=0; after 0.5 ms nothing has reached x=4
    cfg, result, disc = short_channel_run
    series = qoi_series(result, cfg, times=(5e-4,), stations=(0.25, 4.0))
    near, far = series.flowrate[0]
    assert abs(near) > 1e-4  # the flow is clearly moving near the inlet
    assert abs(far) <= 1e-2 * abs(near)


def test_clamped_wall_ends(short_channel_run):
    cfg, result, disc = short_channel_run
    s = result.solid[-1]
    series = qoi_series(result, cfg, times=(5e-4,), stations=(0.0, cfg.length))
    assert np.allclose(series.disp[0], 0.0, atol=1e-14)
    assert np.any(np.abs(s.eta.values) > 0)


def test_qoi_series_samples_nearest_theta_level(short_channel_run):
    cfg, result, disc = short_channel_run
    series = qoi_series(result, cfg, times=(3.2e-4,), stations=(1.0,))
    # theta levels are (n + 1/2) tau = ..., 2.5e-4, 3.5e-4, ...
    assert series.sampled_times[0] == pytest.approx(3.5e-4)
    assert series.flowrate.shape == (1, 1)
