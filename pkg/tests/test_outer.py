import math

import numpy as np
import pytest

from segbumps import geometry as geo
from segbumps import grid as gr
from segbumps import groundstate as gs
from segbumps import outer


@pytest.fixture(scope="module")
def energy8(cfg8, grid8, smooth8):
    return outer.DiscreteEnergy(cfg8, grid8, smooth8)


def test_stationarity(sol8):
    assert sol8.grad_norm < 1e-9 * (1.0 + abs(sol8.energy))
    assert 0 < sol8.iterations < 20
    residuals = [h[2] for h in sol8.history]
    assert all(a > b for a, b in zip(residuals, residuals[1:]))


def test_pinned_data_exact(sol8, inner8, energy8):
    assert np.array_equal(sol8.u.values[inner8.p_mask],
                          energy8.u_base[inner8.p_mask])
    assert np.array_equal(sol8.v.values[inner8.q_mask],
                          energy8.v_base[inner8.q_mask])


def test_energy_below_pinned_extension(sol8, energy8):
    baseline = energy8.value(energy8.u_base, energy8.v_base)
    assert sol8.energy < baseline
    assert sol8.energy == pytest.approx(138.6077, rel=1e-3)
    assert baseline == pytest.approx(138.6548, rel=1e-3)


def test_cap_reported_not_clamped(sol8, inner8, cfg8):
    # at this scale the bump tails exceed the outer sup cap near the core
    # boundaries; the solver must report it and leave the state untouched
    cap = math.log(cfg8.ell) ** -0.5
    sup_out = max(np.max(np.abs(sol8.u.values[~inner8.p_mask])),
                  np.max(np.abs(sol8.v.values[~inner8.q_mask])))
    assert sol8.cap_active
    assert sol8.cap_margin == pytest.approx(sup_out - cap)
    assert sol8.cap_margin > 0


def test_nonnegativity(sol8):
    assert np.min(sol8.u.values) > -1e-10
    assert np.min(sol8.v.values) > -1e-10


def test_deviation_in_smallness_class(sol8, cfg8):
    bound = cfg8.ell ** (-0.5 * cfg8.m - cfg8.tau)
    sup_dev = max(np.max(np.abs(sol8.deviation_u)),
                  np.max(np.abs(sol8.deviation_v)))
    assert sup_dev < 0.05
    assert sup_dev < bound


def test_decay_rates(sol8, cfg8):
    rep = outer.check_decay(sol8, cfg8)
    assert rep["rate_ok"]
    bound = -1.0 / math.sqrt(2.0) + 0.1
    assert rep["slope_u"] <= bound
    assert rep["slope_v"] <= bound
    assert rep["dev_slope_u"] < 0
    assert rep["dev_slope_v"] < 0
    assert rep["sup_dev"] < 0.05


def test_membership_score(cfg8, grid8):
    zero = outer.make_inner_data(cfg8, grid8)
    rep = outer.membership_score(zero, cfg8, grid8)
    assert rep["score"] == 0.0 and rep["ok"]
    rng = np.random.default_rng(5)
    small = outer.make_inner_data(cfg8, grid8,
                                  phi_values=1e-3 * rng.standard_normal(grid8.n_nodes),
                                  psi_values=1e-3 * rng.standard_normal(grid8.n_nodes))
    rep_small = outer.membership_score(small, cfg8, grid8)
    assert rep_small["ok"]
    big = outer.make_inner_data(cfg8, grid8,
                                phi_values=0.5 * np.ones(grid8.n_nodes))
    rep_big = outer.membership_score(big, cfg8, grid8)
    assert not rep_big["ok"]
    assert rep_big["score"] > rep_small["score"] > 0


def test_inner_data_validation(cfg8, grid8):
    p_mask, q_mask = outer.core_masks(cfg8, grid8)
    bad = np.ones(grid8.n_nodes)
    with pytest.raises(ValueError):
        outer.InnerData(phi0=bad, psi0=np.zeros(grid8.n_nodes),
                        p_mask=p_mask, q_mask=q_mask)
    # make_inner_data zeroes the fields off the cores instead
    data = outer.make_inner_data(cfg8, grid8, phi_values=bad)
    assert np.all(data.phi0[~p_mask] == 0.0)
    assert np.all(data.phi0[p_mask] == 1.0)


def test_decoupled_single_bump_matches_profile(cfg8, grid8):
    # oracle: with constant potentials and no coupling, the discrete critical
    # point near a single centered bump is the radial profile itself up to
    # discretization error
    profile = outer.bump_profiles(cfg8)[0]
    energy = outer.DiscreteEnergy(
        cfg8, grid8, None, potentials=(lambda d: np.ones_like(np.asarray(d, float)),) * 2,
        u_vertices=[[0.0, 0.0]], v_vertices=[])
    u, v, gnorm = outer.solve_discrete_bump(energy)
    assert gnorm < 1e-8
    assert np.max(np.abs(v)) < 1e-10
    expect = np.repeat(gs.evaluate(profile, grid8.r_nodes), grid8.n_theta)
    assert np.max(np.abs(u - expect)) < 1e-2


def test_pinned_roundtrip_reproduces_critical_point(cfg8, grid8):
    # decoupled single bump: pin its core at the values of the discrete
    # critical point and re-solve the free nodes from the baseline; the tail
    # relaxation must reproduce the critical point
    energy = outer.DiscreteEnergy(
        cfg8, grid8, None, potentials=(lambda d: np.ones_like(np.asarray(d, float)),) * 2,
        u_vertices=[[0.0, 0.0]], v_vertices=[])
    ub, vb, gnorm = outer.solve_discrete_bump(energy)
    core = gr.nodes_in_ball(grid8, (0.0, 0.0), math.log(math.log(cfg8.ell)))
    u0 = np.where(core, ub, energy.u_base)
    all_free = np.ones(grid8.n_nodes, dtype=bool)
    u, v, gn, _, _ = outer._newton_stationary(energy, u0, vb.copy(),
                                              ~core, all_free)
    assert np.max(np.abs(u - ub)) < 1e-8
    assert np.max(np.abs(v - vb)) < 1e-8


def test_multistart_uniqueness(inner8, cfg8, grid8, smooth8, sol8, energy8):
    bump = 0.05 * np.cos(0.3 * grid8.points()[:, 0])
    start = (energy8.u_base + bump, energy8.v_base - bump)
    alt = outer.minimize_outer(inner8, cfg8, grid8, smooth8, start=start)
    assert np.max(np.abs(alt.u.values - sol8.u.values)) < 1e-8
    assert np.max(np.abs(alt.v.values - sol8.v.values)) < 1e-8
    assert alt.energy == pytest.approx(sol8.energy, abs=1e-9)


def test_lipschitz_in_inner_data(cfg8, grid8, smooth8):
    pts = grid8.points()
    d2 = (pts[:, 0] - cfg8.r) ** 2 + pts[:, 1] ** 2
    blob = np.exp(-d2)
    inner_a = outer.make_inner_data(cfg8, grid8, phi_values=0.01 * blob)
    inner_b = outer.make_inner_data(cfg8, grid8, phi_values=0.02 * blob)
    rep = outer.lipschitz_probe(inner_a, inner_b, cfg8, grid8, smooth8)
    assert rep["data_sup"] > 0
    assert 0 < rep["ratio"] < 10.0


def test_convexity_on_constrained_set(energy8, inner8, cfg8):
    cap = math.log(cfg8.ell) ** -0.5
    rep = outer.convexity_probe(energy8, inner8, cap, n_segments=20, seed=0)
    assert rep["worst_full"] < 1e-6
    assert rep["worst_convex_part"] < 1e-6


def test_write_history(sol8, tmp_path):
    path = tmp_path / "hist.csv"
    outer.write_history(sol8, str(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    assert data.shape == (len(sol8.history), 3)
    assert data[-1, 2] < data[0, 2]


def test_fold_error_at_small_radii(cfg8, smooth8):
    d1, d2 = cfg8.d1, cfg8.d2
    low = cfg8.with_radii(d1[0] + 0.1 * (d1[1] - d1[0]),
                          d2[0] + 0.1 * (d2[1] - d2[0]))
    g = gr.build_grid(low, 0.2)
    inner = outer.make_inner_data(low, g)
    with pytest.raises(RuntimeError, match="fold"):
        outer.minimize_outer(inner, low, g, smooth8)


def test_beta_zero_rejected(cfg8, grid8, smooth8, inner8):
    with pytest.raises(ValueError):
        geo.BumpConfiguration(ell=8, beta=0.0)
