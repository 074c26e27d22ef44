"""Acceptance engine: one check per verification criterion, shared by the
command line driver and the test suite.

Each criterion function returns a CriterionResult with the measured numbers
in its details string; run_all evaluates every criterion on the desk-scale
ring counts and format_table renders one pass/fail line per criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import deadcore as dc
from . import energy as en
from . import geometry as geo
from . import grid as gr
from . import groundstate as gs
from . import model, outer
from . import reduction as rd

DESK_ELLS = (6, 8, 10, 12)

# frozen output of the independent RK4 bisection shooting integrator
# (step 1e-5, domain [0, 20], 60 bisections)
SHOOTING_W0_P4_N2 = 2.2062008646511053


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: str


class DeskRuns:
    """Lazy cache of constructed solutions and operators on the desk grid.

    Constructions run at h = 0.25 (grid-converged for every quantity the
    criteria compare, see the module tests); operators for the residual
    trend run at h = 0.3.
    """

    def __init__(self, ells=DESK_ELLS, h: float = 0.25):
        self.ells = tuple(ells)
        self.h = h
        self._built: dict = {}
        self._outer: dict = {}

    def config(self, ell):
        return geo.BumpConfiguration(ell=ell)

    def built(self, ell):
        """(config, grid, smoothed, profiles, fixed-point result, energy)."""
        if ell not in self._built:
            cfg = self.config(ell)
            grid = gr.build_grid(cfg, self.h)
            profs = outer.bump_profiles(cfg)
            sm = en.default_smoothing(cfg, profs)
            res = rd.fixed_point(cfg, grid, sm, profs)
            energy = outer.DiscreteEnergy(cfg, grid, sm, profs)
            self._built[ell] = (cfg, grid, sm, profs, res, energy)
        return self._built[ell]

    def outer_solution(self, ell):
        """(config, grid, smoothed, inner data, outer solution)."""
        if ell not in self._outer:
            cfg = self.config(ell)
            grid = gr.build_grid(cfg, self.h)
            profs = outer.bump_profiles(cfg)
            sm = en.default_smoothing(cfg, profs)
            inner = outer.make_inner_data(cfg, grid)
            sol = outer.minimize_outer(inner, cfg, grid, sm, profs)
            self._outer[ell] = (cfg, grid, sm, inner, sol)
        return self._outer[ell]

    def pair(self, ell):
        cfg, grid, sm, profs, res, energy = self.built(ell)
        u = energy.u_base + res.phi.values
        v = energy.v_base + res.psi.values
        return u, v


def criterion_ground_state(runs=None) -> CriterionResult:
    prof = gs.solve_ground_state(4.0, 2, 1e-10)
    rel = abs(prof.center_value / SHOOTING_W0_P4_N2 - 1.0)
    rate_dev = abs(prof.tail_rate - 1.0)
    ok = prof.max_residual < 1e-10 and rel < 1e-6 and rate_dev < 0.02
    return CriterionResult(
        1, "ground-state fidelity", ok,
        f"residual {prof.max_residual:.2e}, center vs shooting rel {rel:.2e},"
        f" tail rate dev {rate_dev:.4f}")


def criterion_interaction_trend(runs: DeskRuns) -> CriterionResult:
    sups = []
    for ell in runs.ells:
        cfg = runs.config(ell)
        grid = gr.build_grid(cfg, 0.3)
        ops = rd.LinearizedOperators(cfg, grid)
        res = rd.residuals(ops, None, np.zeros(grid.n_nodes),
                           np.zeros(grid.n_nodes))
        pts = grid.points()
        vs = geo.make_vertices(cfg.ell, cfg.r, cfg.rho)
        rate = 0.5 * (cfg.p - 2.0)
        weight = np.zeros(grid.n_nodes)
        for x in vs.x_vertices:
            weight += np.exp(-rate * np.hypot(pts[:, 0] - x[0],
                                              pts[:, 1] - x[1]))
        sups.append(float(np.max(np.abs(res["gamma"][0]) / weight)))
    slope = float(np.polyfit(np.log(runs.ells), np.log(sups), 1)[0])
    cfg = runs.config(runs.ells[0])
    target = -(0.5 * cfg.m + 2.0 * cfg.tau)
    ok = abs(slope - target) <= 0.3
    return CriterionResult(
        2, "interaction-estimate trend", ok,
        f"weighted-sup slope {slope:.3f} vs {target:.3f} (window 0.3),"
        f" sups {['%.2e' % s for s in sups]}")


def criterion_coercivity(runs: DeskRuns) -> CriterionResult:
    floors = []
    for ell in runs.ells:
        cfg = runs.config(ell)
        grid = gr.build_grid(cfg, 0.3)
        basis = rd.build_basis(cfg, grid)
        ops = rd.LinearizedOperators(cfg, grid)
        probe = rd.coercivity_probe(basis, ops, n_samples=40, seed=0)
        floors.append(min(probe["rho_r"], probe["rho_rho"]))
    ok = min(floors) >= 0.05
    return CriterionResult(
        3, "coercivity probe", ok,
        f"min randomized lower bounds {['%.3f' % f for f in floors]}"
        f" (floor 0.05)")


def criterion_outer_contract(runs: DeskRuns) -> CriterionResult:
    cfg, grid, sm, inner, sol = runs.outer_solution(8)
    energy = outer.DiscreteEnergy(cfg, grid, sm)
    pinned = (np.array_equal(sol.u.values[inner.p_mask],
                             energy.u_base[inner.p_mask])
              and np.array_equal(sol.v.values[inner.q_mask],
                                 energy.v_base[inner.q_mask]))
    cap = math.log(cfg.ell) ** -0.5
    sup_dev = max(np.max(np.abs(sol.deviation_u)),
                  np.max(np.abs(sol.deviation_v)))
    slack = cap - sup_dev
    bump = 0.05 * np.cos(0.3 * grid.points()[:, 0])
    alt = outer.minimize_outer(inner, cfg, grid, sm,
                               start=(energy.u_base + bump,
                                      energy.v_base - bump))
    gap = max(np.max(np.abs(alt.u.values - sol.u.values)),
              np.max(np.abs(alt.v.values - sol.v.values)))
    ok = pinned and slack > 0 and gap < 1e-8
    return CriterionResult(
        4, "outer-solver contract", ok,
        f"pinned exact {pinned}, deviation sup-cap slack {slack:.3f},"
        f" multistart gap {gap:.2e}")


def criterion_decay(runs: DeskRuns) -> CriterionResult:
    devs = []
    slopes_ok = True
    rep8 = None
    for ell in runs.ells:
        cfg, grid, sm, inner, sol = runs.outer_solution(ell)
        rep = outer.check_decay(sol, cfg)
        if ell == 8:
            rep8 = rep
        slopes_ok = slopes_ok and rep["slope_u"] <= -0.6
        devs.append(max(np.max(np.abs(sol.deviation_u)),
                        np.max(np.abs(sol.deviation_v))))
    cfg = runs.config(runs.ells[0])
    target = -(0.5 * cfg.m + cfg.tau)
    dev_slope = float(np.polyfit(np.log(runs.ells), np.log(devs), 1)[0])
    # the cited deviation estimate is an upper bound; faster decay is
    # consistent, so the slope check is one-sided
    ok = slopes_ok and dev_slope <= target + 0.3
    return CriterionResult(
        5, "decay suite", ok,
        f"u-tail slope {rep8['slope_u']:.3f} (<= -0.6),"
        f" deviation slope {dev_slope:.3f} vs upper bound {target:.3f}+0.3")


def criterion_contraction(runs: DeskRuns) -> CriterionResult:
    clauses = []
    details = []
    for ell in (8, 10, 12):
        cfg, grid, sm, profs, res, energy = runs.built(ell)
        ds = [h["d"] for h in res.history]
        qs = [h["q"] for h in res.history if not math.isnan(h["q"])]
        member = res.score <= res.bound
        clauses.append(res.converged and res.iterations <= 60
                       and ds[-1] < 1e-10 and np.median(qs) < 0.8
                       and res.t_gap < 10 * 1e-10 and member)
        details.append(f"ell={ell}: d {ds[-1]:.1e}, med q {np.median(qs):.2f},"
                       f" t-gap {res.t_gap:.1e},"
                       f" score/bound {res.score / res.bound:.2f}")
    return CriterionResult(
        6, "contraction and admissible-ball membership", all(clauses),
        "; ".join(details))


def _dual_residual_split(ell: int, h: float):
    """Dual-norm (inverse elliptic form) decomposition of the action
    gradient at the constructed pair into the component in the span of the
    shift-field multiplier directions and its orthogonal complement."""
    import scipy.sparse.linalg as spla

    runs = DeskRuns(h=h)
    cfg, grid, sm, profs, res, energy = runs.built(ell)
    u, v = runs.pair(ell)
    gu, gv = energy.gradient(u, v)
    w = grid.weights.ravel()
    basis = rd.build_basis(cfg, grid, profs)
    lu1 = spla.splu(energy.A1.tocsc())
    lu2 = spla.splu(energy.A2.tocsc())

    def dual(g, lu):
        return math.sqrt(float(g @ lu.solve(g)))

    def project_off(g, fields, lu):
        # the symmetry orbits collapse to at most two distinct sector
        # representatives, so project on those only
        cols = [w * f for f in fields]
        M = np.array([[c1 @ lu.solve(c2) for c2 in cols] for c1 in cols])
        b = np.array([c @ lu.solve(g) for c in cols])
        coef = np.linalg.lstsq(M, b, rcond=None)[0]
        for c, a in zip(cols, coef):
            g = g - a * c
        return g

    total = math.hypot(dual(gu, lu1), dual(gv, lu2))
    pu = project_off(gu.copy(), [basis.x_fields[0]], lu1)
    pv = project_off(gv.copy(), [basis.y_fields[0], basis.y_fields[1]], lu2)
    perp = math.hypot(dual(pu, lu1), dual(pv, lu2))
    span = math.sqrt(max(total * total - perp * perp, 0.0))
    return total, perp, span


def criterion_critical_point(runs: DeskRuns) -> CriterionResult:
    # at the exact reduction the residual lies in the multiplier span; the
    # numerical perpendicular part is pure discretization, so it must shrink
    # under refinement while the span component stays put
    h_c, h_f = 0.25, 0.15
    tot_c, perp_c, span_c = _dual_residual_split(8, h_c)
    tot_f, perp_f, span_f = _dual_residual_split(8, h_f)
    floor = perp_c * (h_f / h_c) ** 1.5
    ok = (perp_f < 1e-6 * tot_f + floor
          and abs(span_f / span_c - 1.0) < 0.2)
    return CriterionResult(
        7, "projected Euler-Lagrange residual", ok,
        f"perp {perp_c:.3f} -> {perp_f:.3f} under refinement"
        f" (floor {floor:.3f}), multiplier span {span_c:.3f} -> {span_f:.3f}")


def criterion_energy_expansion(runs: DeskRuns,
                               quick: bool = True) -> CriterionResult:
    h, n_line = 0.2, 12
    residuals = []
    last = None
    for ell in (8, 10, 12):
        cfg = runs.config(ell)
        rows = en.scan_samples(cfg, h=h, n_line=n_line)
        exp = en.expansion_fit(rows, cfg)
        residuals.append(exp.residual)
        last = (cfg, exp)
    cfg, exp = last
    co = en.analytic_coefficients(cfg)
    devs = {k: abs(getattr(exp, k) / co[k] - 1.0) for k in ("A", "B1", "C1")}
    tols = {"A": 0.02, "B1": 0.10, "C1": 0.15}
    coeff_ok = all(devs[k] <= tols[k] for k in devs)
    mono = all(a > b for a, b in zip(residuals, residuals[1:]))
    extra = ""
    refined_ok = True
    if not quick:
        # full mode re-runs the largest ring count on a finer grid and
        # requires the fit residual to drop with it
        rows_f = en.scan_samples(cfg, h=0.15, n_line=n_line)
        exp_f = en.expansion_fit(rows_f, cfg)
        refined_ok = exp_f.residual < residuals[-1]
        extra = f", refined residual {exp_f.residual:.1e}"
    return CriterionResult(
        8, "energy-expansion regression", coeff_ok and mono and refined_ok,
        f"rel devs A {devs['A']:.3f} B1 {devs['B1']:.3f} C1 {devs['C1']:.3f}"
        f" (tols {tols['A']}/{tols['B1']}/{tols['C1']}),"
        f" residuals {['%.1e' % r for r in residuals]} monotone {mono}"
        + extra)


def criterion_closed_form_maximizer(runs: DeskRuns) -> CriterionResult:
    cfg = runs.config(8)
    co = en.analytic_coefficients(cfg)
    s_devs, t_devs = [], []
    curv_ok = True
    for ell in (50, 100, 200, 400):
        s_pred = en.predicted_critical(ell, cfg.m, co["B1"], co["C1"],
                                       2 * math.pi)
        t_pred = en.predicted_critical(ell, cfg.m, co["B2"], co["C2"],
                                       math.pi)
        exp = en.EnergyExpansion(ell=ell, m=cfg.m, A=co["A"], B1=co["B1"],
                                 B2=co["B2"], C1=co["C1"], C2=co["C2"],
                                 residual=0.0, s_ell=s_pred, t_ell=t_pred)
        s, t = en.maximize_F(ell, exp)
        _, _, fpp = en.profile_f(s, ell, cfg.m, co["B1"], co["C1"],
                                 2 * math.pi)
        _, _, hpp = en.profile_f(t, ell, cfg.m, co["B2"], co["C2"], math.pi)
        curv_ok = curv_ok and fpp < 0 and hpp < 0
        s_devs.append(abs(s / s_pred - 1.0))
        t_devs.append(abs(t / t_pred - 1.0))
    dec = (all(a > b for a, b in zip(s_devs, s_devs[1:]))
           and all(a > b for a, b in zip(t_devs, t_devs[1:])))
    ok = dec and s_devs[-1] < 0.35 and t_devs[-1] < 0.35 and curv_ok
    return CriterionResult(
        9, "closed-form maximizer tracking", ok,
        f"|s*/s_ell - 1| {['%.3f' % d for d in s_devs]} decreasing {dec},"
        f" f'' < 0 {curv_ok}")


def criterion_dead_core_radial(runs=None) -> CriterionResult:
    cfg = geo.BumpConfiguration(ell=8)
    sp = cfg.sigma_prime
    c_tau, a_target = dc.find_c_tau(cfg.tau, cfg.m, sp)
    core = dc.solve_radial_sublinear(c_tau, sp).core_radius
    fail_low = not dc.certify_supersolution(a_target,
                                            2.0 / (1.0 - sp) + 0.05, sp)[0]
    pass_q = dc.certify_supersolution(a_target, 5.4, sp)[0]
    ok = c_tau > 0 and core >= a_target and fail_low and pass_q
    return CriterionResult(
        10, "radial dead core", ok,
        f"c_tau {c_tau:.3e}, core {core:.5f} >= target {a_target:.5f},"
        f" certificate q=5.4 {pass_q}, q just above 4 fails {fail_low}")


def criterion_dead_core_planar(runs: DeskRuns) -> CriterionResult:
    cfg, grid, sm, profs, res, energy = runs.built(12)
    u, v = runs.pair(12)
    rep = dc.detect_dead_cores(u, v, cfg, grid)
    sup = float(np.max(rep.u_ball_sups))
    suppressed = sup <= rep.envelope
    # control: nearly linear coupling (sigma = 0.99; exactly 1 leaves the
    # admissible exponent range) must show no suppression
    ctrl_cfg = geo.BumpConfiguration(ell=12, sigma1=0.99, sigma2=0.99)
    ctrl_grid = gr.build_grid(ctrl_cfg, runs.h)
    ctrl_profs = outer.bump_profiles(ctrl_cfg)
    ctrl_sm = en.default_smoothing(ctrl_cfg, ctrl_profs)
    ctrl = rd.fixed_point(ctrl_cfg, ctrl_grid, ctrl_sm, ctrl_profs)
    ctrl_energy = outer.DiscreteEnergy(ctrl_cfg, ctrl_grid, ctrl_sm,
                                       ctrl_profs)
    ctrl_rep = dc.detect_dead_cores(
        ctrl_energy.u_base + ctrl.phi.values,
        ctrl_energy.v_base + ctrl.psi.values, ctrl_cfg, ctrl_grid)
    ratio = float(np.max(ctrl_rep.u_ball_sups)) / sup
    ok = suppressed and ratio >= 10.0
    return CriterionResult(
        11, "planar dead core with linear-coupling control", ok,
        f"ball sup {sup:.2e} vs envelope {rep.envelope:.2e}"
        f" (suppressed {suppressed}), control ratio {ratio:.2f} (>= 10)")


def _fold_angle(theta, opening):
    t = np.mod(theta, 2.0 * opening)
    return np.where(t <= opening, t, 2.0 * opening - t)


def criterion_symmetry(runs: DeskRuns) -> CriterionResult:
    worst_neg, worst_sym = 0.0, 0.0
    for ell in runs.ells:
        cfg, grid, sm, profs, res, energy = runs.built(ell)
        u, v = runs.pair(ell)
        worst_neg = max(worst_neg, -min(np.min(u), np.min(v)))
        # fold the group images (rotation by 2 pi / ell and the reflection)
        # of every node back into the sector; they land on nodes exactly,
        # so invariance of the folded representation is checked pointwise
        r_idx, th = np.meshgrid(np.arange(grid.n_r), grid.theta_nodes,
                                indexing="ij")
        for image in (th + 2.0 * math.pi / ell, -th):
            back = _fold_angle(image, grid.opening)
            j = np.rint((back - grid.theta_nodes[0]) / grid.dtheta).astype(int)
            exact = np.max(np.abs(back - grid.theta_nodes[j]))
            if exact > 1e-9:
                worst_sym = max(worst_sym, float("inf"))
                continue
            for f in (u, v):
                fm = f.reshape(grid.n_r, grid.n_theta)
                worst_sym = max(worst_sym, float(np.max(np.abs(
                    fm[r_idx, j] - fm))))
    ok = worst_neg <= 1e-10 and worst_sym <= 1e-12
    return CriterionResult(
        12, "nonnegativity and dihedral symmetry", ok,
        f"worst negative part {worst_neg:.2e},"
        f" worst symmetry defect {worst_sym:.2e}")


CRITERIA = (
    criterion_ground_state,
    criterion_interaction_trend,
    criterion_coercivity,
    criterion_outer_contract,
    criterion_decay,
    criterion_contraction,
    criterion_critical_point,
    criterion_energy_expansion,
    criterion_closed_form_maximizer,
    criterion_dead_core_radial,
    criterion_dead_core_planar,
    criterion_symmetry,
)


def run_all(quick: bool = True, runs: DeskRuns | None = None) -> list:
    runs = DeskRuns() if runs is None else runs
    results = []
    for fn in CRITERIA:
        if fn is criterion_energy_expansion:
            results.append(fn(runs, quick=quick))
        else:
            results.append(fn(runs))
    return results


def format_table(results) -> str:
    lines = []
    for r in results:
        lines.append(f"{r.number:2d}  {'PASS' if r.passed else 'FAIL'}  "
                     f"{r.title}: {r.details}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)
