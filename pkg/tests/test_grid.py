import math

import numpy as np
import pytest

from segbumps import geometry as geo
from segbumps import grid as gr
from segbumps import groundstate as gs


CFG = geo.BumpConfiguration(ell=8)


def _k1(d):
    return CFG.potential(1, d)


def test_build_grid_basics():
    g = gr.build_grid(CFG, 0.05)
    assert g.n_nodes < gr.NODE_CAP
    assert g.r_inf == pytest.approx(CFG.rho + 20.0)
    assert np.all(g.weights > 0)
    assert np.max(np.diff(g.r_edges)) <= 1.0 + 1e-12
    fine = g.r_nodes < CFG.rho + 5.0
    assert np.max(g.dr[fine]) <= 0.05 + 1e-12
    assert g.theta_nodes[0] == 0.0
    assert g.theta_nodes[-1] == pytest.approx(math.pi / 8)


def test_refinement_halves_spacing():
    g1 = gr.build_grid(CFG, 0.2)
    g2 = gr.build_grid(CFG, 0.1)
    assert g2.h_fine == pytest.approx(0.5 * g1.h_fine, rel=0.1)
    assert g2.n_r > 1.8 * g1.n_r


def test_build_grid_errors():
    with pytest.raises(ValueError):
        gr.build_grid(CFG, -0.1)
    with pytest.raises(ValueError):
        gr.build_grid(CFG, 0.1, R_inf=CFG.rho + 5.0)
    with pytest.raises(MemoryError):
        gr.build_grid(CFG, 1e-4)


def test_quadrature_weights_exact_measure():
    g = gr.build_grid(CFG, 0.1)
    # radial midpoint weights telescope: the sector measure is exact
    assert g.fold_copies * np.sum(g.weights) == pytest.approx(
        math.pi * g.r_inf ** 2, rel=1e-13)


def test_constant_field_form_is_measure():
    g = gr.build_grid(CFG, 0.1)
    op = gr.assemble(1.0, g)
    ones = np.ones(g.n_nodes)
    assert op.form(ones, ones) == pytest.approx(
        0.5 * g.opening * g.r_inf ** 2, rel=1e-12)


def test_form_symmetry():
    g = gr.build_grid(CFG, 0.2)
    op = gr.assemble(_k1, g)
    asym = abs(op.matrix - op.matrix.T)
    assert asym.max() < 1e-12 * abs(op.matrix).max()
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, g.n_nodes))
    assert op.form(a, b) == pytest.approx(op.form(b, a), rel=1e-12)


def _manufactured_error(h):
    g = gr.build_grid(CFG, h)
    verts = geo.make_vertices(8, CFG.r, CFG.rho).x_vertices
    pts = g.points()
    kv = _k1(np.hypot(pts[:, 0], pts[:, 1]))
    u = np.zeros(g.n_nodes)
    f = np.zeros(g.n_nodes)
    for c in verts:
        s2 = (pts[:, 0] - c[0]) ** 2 + (pts[:, 1] - c[1]) ** 2
        gauss = np.exp(-s2)
        u += gauss
        f += (4.0 - 4.0 * s2 + kv) * gauss
    op = gr.assemble(_k1, g)
    sol = gr.solve_spd(op, g.weights.ravel() * f, tol=1e-12)
    w = g.weights.ravel()
    return math.sqrt(w @ (sol.values - u) ** 2 / (w @ u ** 2))


def test_manufactured_solution_second_order():
    # oracle: u* is a symmetrized Gaussian ring with closed-form source term
    errs = [_manufactured_error(h) for h in (0.4, 0.2, 0.1)]
    slopes = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 <= s <= 2.2 for s in slopes)
    assert errs[-1] < 2e-3


def test_solve_spd_trivial_and_consistency():
    g = gr.build_grid(CFG, 0.2)
    op = gr.assemble(1.0, g)
    zero = gr.solve_spd(op, np.zeros(g.n_nodes))
    assert np.all(zero.values == 0.0)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(g.n_nodes)
    sol = gr.solve_spd(op, op.matrix @ x, tol=1e-12)
    assert np.max(np.abs(sol.values - x)) < 1e-8
    with pytest.raises(RuntimeError):
        gr.solve_spd(op, op.matrix @ x, tol=1e-12, max_iter=2)


def test_condition_growth_under_refinement():
    conds = []
    for h in (0.4, 0.2):
        g = gr.build_grid(CFG, h)
        op = gr.assemble(1.0, g)
        conds.append(gr.condition_estimate(op)[2])
    assert conds[1] > 2.0 * conds[0]


def test_superpose_single_origin_bump(ground_p4):
    g = gr.build_grid(CFG, 0.2)
    f = gr.superpose_bumps(ground_p4, [[0.0, 0.0]], g)
    expect = np.repeat(gs.evaluate(ground_p4, g.r_nodes), g.n_theta)
    assert np.allclose(f.values, expect, rtol=1e-12)


def test_superpose_ring_dominated_by_center(ground_p4):
    g = gr.build_grid(CFG, 0.1)
    verts = geo.make_vertices(8, CFG.r, CFG.rho).x_vertices
    f = gr.superpose_bumps(ground_p4, verts, g)
    pts = g.points()
    k = int(np.argmin((pts[:, 0] - CFG.r) ** 2 + pts[:, 1] ** 2))
    center = gs.evaluate(ground_p4, np.hypot(pts[k, 0] - CFG.r, pts[k, 1]))
    excess = (f.values[k] - center) / center
    # neighbor tails sum to about 2 W(2 r sin(pi/8)) / W(0), roughly 3 percent
    assert 0.0 < excess < 5e-2
    with pytest.raises(ValueError):
        gr.superpose_bumps(ground_p4, [[g.r_inf - 1.0, 0.0]], g)


def test_norms_zero_and_pair():
    g = gr.build_grid(CFG, 0.2)
    zero = gr.GridFunction(values=np.zeros(g.n_nodes), grid=g)
    rep = gr.norms(zero)
    assert rep.h1 == rep.l2 == rep.lp == rep.sup == 0.0
    rng = np.random.default_rng(4)
    f = gr.GridFunction(values=rng.standard_normal(g.n_nodes), grid=g)
    pair = gr.norms((f, zero))
    single = gr.norms(f)
    assert pair.h1 == pytest.approx(single.h1, rel=1e-12)
    assert pair.l2 == pytest.approx(single.l2, rel=1e-12)
    assert pair.sup == pytest.approx(single.sup)


def test_ring_norm_close_to_ell_times_single(ground_p4):
    g = gr.build_grid(CFG, 0.1)
    verts = geo.make_vertices(8, CFG.r, CFG.rho).x_vertices
    f = gr.superpose_bumps(ground_p4, verts, g)
    h1sq = gr.norms(f).h1 ** 2
    single = (gs.gradient_square_integral(ground_p4)
              + gs.radial_integral(ground_p4, 2.0))
    assert abs(h1sq / (8 * single) - 1.0) < 0.05


def test_nodes_in_ball():
    g = gr.build_grid(CFG, 0.2)
    mask = gr.nodes_in_ball(g, (CFG.r, 0.0), 1.0)
    pts = g.points()
    d = np.hypot(pts[:, 0] - CFG.r, pts[:, 1])
    assert np.array_equal(mask, d <= 1.0)
    assert 0 < mask.sum() < g.n_nodes


def test_grid_function_validation():
    g = gr.build_grid(CFG, 0.4)
    with pytest.raises(ValueError):
        gr.GridFunction(values=np.zeros(3), grid=g)
    bad = np.zeros(g.n_nodes)
    bad[0] = np.nan
    with pytest.raises(ValueError):
        gr.GridFunction(values=bad, grid=g)


def test_exports(tmp_path):
    g = gr.build_grid(CFG, 0.4)
    f = gr.GridFunction(values=np.arange(g.n_nodes, dtype=float), grid=g)
    csv = tmp_path / "f.csv"
    gr.export_csv(f, str(csv))
    data = np.loadtxt(csv, delimiter=",", skiprows=1)
    assert data.shape == (g.n_nodes, 3)
    assert np.array_equal(data[:, 2], f.values)
    gp = tmp_path / "f.gp"
    gr.export_gnuplot(f, str(gp))
    blocks = gp.read_text().strip().split("\n\n")
    assert len(blocks) == g.n_r
