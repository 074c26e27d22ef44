"""Dead cores of the sublinear radial problem and their planar signature.

First the unit-ball problem -(r w')' - w'/r + w^sigma' = 0, w(1) = c: for
small boundary values the solution vanishes identically on an inner ball.
The script locates the largest c keeping a prescribed core, certifies it
with the closed-form power supersolution, and then measures how small the
constructed u-component actually is around the opposite-species vertices
at ell = 12.
"""

import numpy as np

from segbumps import deadcore as dc
from segbumps import energy as en
from segbumps import geometry as geo
from segbumps import grid as gr
from segbumps import outer
from segbumps import reduction as rd


def main():
    print("core radius versus boundary value (sigma' = 1/2):")
    for c in (1e-2, 1e-4, 1e-6, 1e-8):
        sol = dc.solve_radial_sublinear(c, 0.5)
        print(f"  c = {c:.0e}: core radius {sol.core_radius:.4f},"
              f" residual {sol.residual:.1e}")

    cfg = geo.BumpConfiguration(ell=12)
    c_tau, a_target = dc.find_c_tau(cfg.tau, cfg.m, cfg.sigma_prime)
    print(f"\nlargest c keeping core >= {a_target:.5f}: c_tau = {c_tau:.3e}")
    ok, margin, bracket = dc.certify_supersolution(a_target, 5.4,
                                                   cfg.sigma_prime)
    print(f"power supersolution certificate (q = 5.4): passed = {ok},"
          f" margin {margin:.2f}")

    grid = gr.build_grid(cfg, 0.25)
    profs = outer.bump_profiles(cfg)
    sm = en.default_smoothing(cfg, profs)
    res = rd.fixed_point(cfg, grid, sm, profs)
    energy = outer.DiscreteEnergy(cfg, grid, sm, profs)
    rep = dc.detect_dead_cores(energy.u_base + res.phi.values,
                               energy.v_base + res.psi.values, cfg, grid)
    print(f"\nplanar detection at ell = 12 (balls of radius"
          f" {rep.ball_radius:.2f} around the v-vertices):")
    print(f"  sup u on the balls: {np.max(rep.u_ball_sups):.3e}")
    print(f"  sublinear envelope: {rep.envelope:.3e}")
    print(f"  exact-core flags: u_dead = {rep.u_dead}, v_dead = {rep.v_dead}")
    print("  (at desk scale the smoothed coupling is flat below 1/n, so the")
    print("   tails stop at quadrature size instead of forming exact cores)")


if __name__ == "__main__":
    main()
