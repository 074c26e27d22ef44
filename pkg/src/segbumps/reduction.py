"""Constrained linearization around the bump superposition: the truncated
radial-shift basis fields, the linearized operator on their orthogonal
complement, the residual fields feeding the correction map, and the
tail-relaxed fixed-point driver.

The correction map T sends a deviation pair to the solution of the linearized
equation with the orthogonality constraints enforced by Lagrange multipliers.
Iterating T alone is not contractive for sublinear coupling; the driver
iterates S o T, re-solving the outer tail problem after each linear
correction, and measures progress in the core metric (weighted H1 plus sup on
the core balls).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from . import grid as gr
from . import groundstate as gs
from . import outer

SUPPORT_INNER = 1.0
SUPPORT_OUTER = 2.0


def _chi0(d):
    """C2 radial cutoff: 1 inside radius 1, 0 outside radius 2, quintic
    smoothstep in between."""
    t = np.clip((np.asarray(d, float) - SUPPORT_INNER)
                / (SUPPORT_OUTER - SUPPORT_INNER), 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def radial_shift_field(profile, center, pts, truncate: bool = True):
    """Derivative of the translated bump with respect to its ring radius,
    evaluated at pts: -U'(|x-c|) (x-c).e_c / |x-c| with e_c = c/|c|,
    optionally cut off at distance 2 from the center."""
    c = np.asarray(center, float)
    rc = math.hypot(c[0], c[1])
    if rc == 0:
        raise ValueError("radial-shift field needs an off-origin center")
    e = c / rc
    dx = pts[:, 0] - c[0]
    dy = pts[:, 1] - c[1]
    d = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where(d > 0, (dx * e[0] + dy * e[1]) / d, 0.0)
    vals = -gs.evaluate_deriv(profile, d) * proj
    if truncate:
        vals = np.where(d < SUPPORT_OUTER, _chi0(d) * vals, 0.0)
    return vals


@dataclass(frozen=True)
class OrthoBasis:
    """Symmetry-folded radial-shift fields around every bump site.

    x_fields[j] is the sector representation of the plane field supported in
    B_2(x^j); for symmetric test functions the plane pairing <X_j, u> equals
    the plain sector quadrature of x_fields[j] * u.  gram holds the plane
    L2 Gram matrix of all fields (x block first)."""

    x_fields: np.ndarray
    y_fields: np.ndarray
    gram: np.ndarray
    grid: gr.SectorGrid

    @property
    def count_x(self) -> int:
        return self.x_fields.shape[0]

    @property
    def count_y(self) -> int:
        return self.y_fields.shape[0]

    def pair_x(self, u) -> np.ndarray:
        w = self.grid.weights.ravel()
        return (self.x_fields * w) @ np.asarray(u, float).ravel()

    def pair_y(self, v) -> np.ndarray:
        w = self.grid.weights.ravel()
        return (self.y_fields * w) @ np.asarray(v, float).ravel()

    def constraints_x(self) -> np.ndarray:
        """Distinct constraint rows for the u component (one per site orbit)."""
        w = self.grid.weights.ravel()
        return self.x_fields[:1] * w

    def constraints_y(self) -> np.ndarray:
        """Distinct constraint rows for the v component (two site orbits)."""
        w = self.grid.weights.ravel()
        return self.y_fields[:2] * w


def _group_transforms(ell: int):
    for sign in (1.0, -1.0):
        for k in range(ell):
            yield sign, 2.0 * math.pi * k / ell


def build_basis(config, grid, profiles=None,
                u_vertices=None, v_vertices=None) -> OrthoBasis:
    """Assemble the folded basis fields and their plane Gram matrix by
    summing each site field over the symmetry orbit of the sector."""
    if profiles is None:
        profiles = outer.bump_profiles(config)
    u_prof, v_prof = profiles
    if u_vertices is None or v_vertices is None:
        vs = geo.make_vertices(config.ell, config.r, config.rho)
        u_vertices = vs.x_vertices if u_vertices is None else u_vertices
        v_vertices = vs.y_vertices if v_vertices is None else v_vertices
    u_vertices = np.atleast_2d(np.asarray(u_vertices, float))
    v_vertices = np.atleast_2d(np.asarray(v_vertices, float))
    R, T = grid.polar()
    rr, tt = R.ravel(), T.ravel()
    n = grid.n_nodes
    nx, ny = len(u_vertices), len(v_vertices)
    x_fields = np.zeros((nx, n))
    y_fields = np.zeros((ny, n))
    gram = np.zeros((nx + ny, nx + ny))
    w = grid.weights.ravel()
    for sign, shift in _group_transforms(config.ell):
        ang = sign * tt + shift
        pts = np.column_stack([rr * np.cos(ang), rr * np.sin(ang)])
        pieces = np.empty((nx + ny, n))
        for j, c in enumerate(u_vertices):
            pieces[j] = radial_shift_field(u_prof, c, pts)
        for j, c in enumerate(v_vertices):
            pieces[nx + j] = radial_shift_field(v_prof, c, pts)
        x_fields += pieces[:nx]
        y_fields += pieces[nx:]
        gram += (pieces * w) @ pieces.T
    return OrthoBasis(x_fields=x_fields, y_fields=y_fields, gram=gram,
                      grid=grid)


class LinearizedOperators:
    """Second-variation blocks of the action at the bump superposition,
    without the coupling term, plus the H1 form used for Riesz norms."""

    def __init__(self, config, grid, profiles=None, potentials=None,
                 u_vertices=None, v_vertices=None):
        self.config = config
        self.grid = grid
        self.energy = outer.DiscreteEnergy(
            config, grid, None, profiles=profiles,
            u_vertices=u_vertices, v_vertices=v_vertices,
            potentials=potentials)
        w = grid.weights.ravel()
        self.w = w
        U, V = self.energy.u_base, self.energy.v_base
        p = config.p
        self.B_r = (self.energy.A1
                    - sp.diags((p - 1.0) * config.mu * w * U ** (p - 2.0))).tocsc()
        self.B_rho = (self.energy.A2
                      - sp.diags((p - 1.0) * config.nu * w * V ** (p - 2.0))).tocsc()
        self.M = gr.assemble(1.0, grid).matrix.tocsc()
        if potentials is None:
            potentials = (lambda d: config.potential(1, d),
                          lambda d: config.potential(2, d))
        dist = np.repeat(grid.r_nodes, grid.n_theta)
        self.k1_vals = np.broadcast_to(
            np.asarray(potentials[0](dist), float), (grid.n_nodes,)).copy()
        self.k2_vals = np.broadcast_to(
            np.asarray(potentials[1](dist), float), (grid.n_nodes,)).copy()
        self.u_power_sum = self._power_superposition(
            self.energy.u_profile, self.energy.u_vertices, p - 1.0)
        self.v_power_sum = self._power_superposition(
            self.energy.v_profile, self.energy.v_vertices, p - 1.0)
        self._m_factor = None
        self._saddle = {}

    def _power_superposition(self, profile, vertices, power):
        pts = self.grid.points()
        out = np.zeros(self.grid.n_nodes)
        for c in vertices:
            d = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
            out += gs.evaluate(profile, d) ** power
        return out

    def riesz(self, load) -> np.ndarray:
        """H1 representative of a load vector."""
        if self._m_factor is None:
            self._m_factor = spla.splu(self.M)
        return self._m_factor.solve(np.asarray(load, float).ravel())

    def h1_norm(self, values) -> float:
        v = np.asarray(values, float).ravel()
        return math.sqrt(max(float(v @ (self.M @ v)), 0.0))

    def dual_norm(self, load) -> float:
        """Operator-output norm: H1 norm of the Riesz representative."""
        return self.h1_norm(self.riesz(load))


def apply_L(ops: LinearizedOperators, phi, psi):
    """Riesz representatives of (L_r phi, L_rho psi) as grid functions."""
    pv = phi.values if isinstance(phi, gr.GridFunction) else np.asarray(phi, float).ravel()
    qv = psi.values if isinstance(psi, gr.GridFunction) else np.asarray(psi, float).ravel()
    zu = ops.riesz(ops.B_r @ pv)
    zv = ops.riesz(ops.B_rho @ qv)
    return (gr.GridFunction(values=zu, grid=ops.grid),
            gr.GridFunction(values=zv, grid=ops.grid))


def residuals(ops: LinearizedOperators, smoothed, phi, psi) -> dict:
    """Pointwise residual fields at the deviation pair: the ansatz defect
    gamma, the superlinear remainder R, and the coupling forcing N."""
    cfg = ops.config
    U, V = ops.energy.u_base, ops.energy.v_base
    pv = np.asarray(phi, float).ravel()
    qv = np.asarray(psi, float).ravel()
    p = cfg.p
    gamma1 = cfg.mu * (U ** (p - 1.0) - ops.u_power_sum
                       + (1.0 - ops.k1_vals) * U)
    gamma2 = cfg.nu * (V ** (p - 1.0) - ops.v_power_sum
                       + (1.0 - ops.k2_vals) * V)
    up = U + pv
    vp = V + qv
    R1 = cfg.mu * (np.abs(up) ** (p - 2.0) * up - U ** (p - 1.0)
                   - (p - 1.0) * U ** (p - 2.0) * pv)
    R2 = cfg.nu * (np.abs(vp) ** (p - 2.0) * vp - V ** (p - 1.0)
                   - (p - 1.0) * V ** (p - 2.0) * qv)
    if smoothed is None:
        N1 = np.zeros_like(pv)
        N2 = np.zeros_like(qv)
    else:
        _, d1, d2 = smoothed.G_n(up, vp)
        N1 = cfg.beta * d1
        N2 = cfg.beta * d2
    return {"gamma": (gamma1, gamma2), "R": (R1, R2), "N": (N1, N2)}


@dataclass(frozen=True)
class ReductionIterate:
    """Deviation pair on the constrained complement with its orthogonality
    residuals, multipliers, core-metric coordinates, and smallness score."""

    phi: gr.GridFunction
    psi: gr.GridFunction
    multipliers_x: np.ndarray
    multipliers_y: np.ndarray
    ortho_x: np.ndarray
    ortho_y: np.ndarray
    norm_P: float
    norm_Q: float
    score: float
    bound: float

    @property
    def in_complement(self) -> bool:
        scale = 1.0 + max(np.max(np.abs(self.phi.values)),
                          np.max(np.abs(self.psi.values)))
        return bool(max(np.max(np.abs(self.ortho_x)),
                        np.max(np.abs(self.ortho_y))) <= 1e-10 * scale)

    @property
    def in_smallness_class(self) -> bool:
        return bool(self.score <= self.bound)


def _masked_h1_sq(values, grid, mask) -> float:
    vals = np.asarray(values, float).reshape(grid.n_r, grid.n_theta)
    g_r = np.gradient(vals, grid.r_nodes, axis=0)
    g_t = np.gradient(vals, grid.theta_nodes, axis=1) / grid.r_nodes[:, None]
    w = grid.weights.ravel()
    # the gradient stencil at a ball-boundary node reads one node outside the
    # ball; restrict the gradient part to the eroded mask so the quantity
    # depends on the ball values only
    m = mask.reshape(grid.n_r, grid.n_theta)
    interior = m.copy()
    interior[1:] &= m[:-1]
    interior[:-1] &= m[1:]
    interior[:, 1:] &= m[:, :-1]
    interior[:, :-1] &= m[:, 1:]
    grad_sq = (g_r ** 2 + g_t ** 2).ravel()
    out = float(np.sum(w[interior.ravel()] * grad_sq[interior.ravel()]))
    out += float(np.sum(w[mask] * (vals.ravel()[mask]) ** 2))
    return grid.fold_copies * out


def core_norms(phi_values, psi_values, config, grid, masks=None):
    """The two pieces of the core metric: ell^(-1/2) H1 + sup, each taken on
    the respective core-ball system."""
    if masks is None:
        masks = outer.core_masks(config, grid)
    p_mask, q_mask = masks
    scale = config.ell ** -0.5
    pv = np.asarray(phi_values, float).ravel()
    qv = np.asarray(psi_values, float).ravel()
    norm_p = (scale * math.sqrt(_masked_h1_sq(pv, grid, p_mask))
              + float(np.max(np.abs(pv[p_mask]), initial=0.0)))
    norm_q = (scale * math.sqrt(_masked_h1_sq(qv, grid, q_mask))
              + float(np.max(np.abs(qv[q_mask]), initial=0.0)))
    return norm_p, norm_q


def metric_d(pair_a, pair_b, config, grid, masks=None) -> float:
    """Core metric between two deviation pairs (arrays or grid functions)."""
    def _vals(x):
        return x.values if isinstance(x, gr.GridFunction) else np.asarray(x, float).ravel()
    np_, nq = core_norms(_vals(pair_a[0]) - _vals(pair_b[0]),
                         _vals(pair_a[1]) - _vals(pair_b[1]),
                         config, grid, masks)
    return np_ + nq


def smallness_score(phi_values, psi_values, config, grid) -> tuple:
    rep = gr.norms((gr.GridFunction(values=phi_values, grid=grid),
                    gr.GridFunction(values=psi_values, grid=grid)))
    score = config.ell ** -0.5 * rep.h1 + rep.sup
    bound = config.ell ** (-0.5 * config.m - config.tau)
    return score, bound


def invert_L_on_E(rhs_pair, basis: OrthoBasis, ops: LinearizedOperators,
                  tol: float = 1e-10) -> ReductionIterate:
    """Solve the linearized equation on the constrained complement via the
    bordered (saddle-point) system; multipliers enforce the orthogonality to
    the basis fields."""
    f1, f2 = rhs_pair
    w = ops.w
    loads = (w * np.asarray(f1, float).ravel(),
             w * np.asarray(f2, float).ravel())
    blocks = ((ops.B_r, basis.constraints_x()),
              (ops.B_rho, basis.constraints_y()))
    sols, mults = [], []
    for key, ((B, C), load) in enumerate(zip(blocks, loads)):
        m = C.shape[0]
        if key not in ops._saddle:
            K = sp.bmat([[B, sp.csc_matrix(C.T)],
                         [sp.csc_matrix(C), None]], format="csc")
            ops._saddle[key] = (spla.splu(K), K)
        factor, K = ops._saddle[key]
        rhs = np.concatenate([load, np.zeros(m)])
        sol = factor.solve(rhs)
        res = np.linalg.norm(K @ sol - rhs)
        if not np.all(np.isfinite(sol)) or res > 1e-8 * (1.0 + np.linalg.norm(rhs)):
            raise RuntimeError(
                "bordered linear solve lost accuracy: the grid is too coarse "
                "to resolve the coercive complement")
        sols.append(sol[:-m] if m else sol)
        mults.append(sol[-m:] if m else np.zeros(0))
    phi, psi = sols
    cfg = ops.config
    ortho_x = basis.pair_x(phi)
    ortho_y = basis.pair_y(psi)
    scale = 1.0 + max(np.max(np.abs(phi)), np.max(np.abs(psi)))
    if max(np.max(np.abs(ortho_x)), np.max(np.abs(ortho_y))) > tol * scale:
        raise RuntimeError("orthogonality constraints not met after solve")
    norm_p, norm_q = core_norms(phi, psi, cfg, ops.grid)
    score, bound = smallness_score(phi, psi, cfg, ops.grid)
    return ReductionIterate(
        phi=gr.GridFunction(values=phi, grid=ops.grid),
        psi=gr.GridFunction(values=psi, grid=ops.grid),
        multipliers_x=mults[0], multipliers_y=mults[1],
        ortho_x=ortho_x, ortho_y=ortho_y,
        norm_P=norm_p, norm_Q=norm_q, score=score, bound=bound)


def T_map(phi, psi, basis: OrthoBasis, ops: LinearizedOperators,
          smoothed) -> ReductionIterate:
    """One linear correction: assemble the residual fields at the current
    pair and solve the constrained linearized equation."""
    pv = phi.values if isinstance(phi, gr.GridFunction) else np.asarray(phi, float).ravel()
    qv = psi.values if isinstance(psi, gr.GridFunction) else np.asarray(psi, float).ravel()
    res = residuals(ops, smoothed, pv, qv)
    rhs = (res["gamma"][0] + res["R"][0] + res["N"][0],
           res["gamma"][1] + res["R"][1] + res["N"][1])
    return invert_L_on_E(rhs, basis, ops)


@dataclass
class FixedPointResult:
    phi: gr.GridFunction
    psi: gr.GridFunction
    converged: bool
    iterations: int
    history: list = field(default_factory=list)
    t_gap: float = math.nan
    score: float = math.nan
    bound: float = math.nan


def fixed_point(config, grid, smoothed, profiles=None, max_iter: int = 60,
                tol: float = 1e-10, log_path: str | None = None,
                tail_relax: bool = True) -> FixedPointResult:
    """Iterate the tail-relaxed correction map z -> S(T(z)) from the zero-data
    tail solution until the core metric stalls below tol.

    With tail_relax=False the driver iterates the bare correction map T
    (diagnostic mode; not expected to contract for sublinear coupling)."""
    if profiles is None:
        profiles = outer.bump_profiles(config)
    basis = build_basis(config, grid, profiles)
    ops = LinearizedOperators(config, grid, profiles)
    masks = outer.core_masks(config, grid)
    energy = outer.DiscreteEnergy(config, grid, smoothed, profiles)

    def tail(pv, qv, start=None):
        inner = outer.make_inner_data(config, grid, phi_values=pv,
                                      psi_values=qv)
        sol = outer.minimize_outer(inner, config, grid, smoothed, profiles,
                                   start=start)
        return sol

    sol = tail(None, None)
    z = (sol.deviation_u, sol.deviation_v)
    warm = (sol.u.values, sol.v.values)
    history = []
    prev_d = None
    diverging = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        t = T_map(z[0], z[1], basis, ops, smoothed)
        if tail_relax:
            sol = tail(t.phi.values, t.psi.values, start=warm)
            z_new = (sol.deviation_u, sol.deviation_v)
            warm = (sol.u.values, sol.v.values)
            en = sol.energy
        else:
            z_new = (t.phi.values, t.psi.values)
            en = energy.value(energy.u_base + z_new[0],
                              energy.v_base + z_new[1])
        d = metric_d(z_new, z, config, grid, masks)
        q = d / prev_d if prev_d not in (None, 0.0) else math.nan
        score, bound = smallness_score(z_new[0], z_new[1], config, grid)
        history.append({"k": it, "d": d, "q": q, "score": score,
                        "bound": bound, "energy": en})
        z = z_new
        if d < tol:
            converged = True
            break
        if not math.isnan(q) and q >= 1.0:
            diverging += 1
            if diverging >= 3:
                if log_path is not None:
                    _write_log(log_path, history)
                raise RuntimeError(
                    "fixed-point iteration diverged: contraction factors "
                    f"{[round(h['q'], 3) for h in history[-3:]]} at distances "
                    f"{[h['d'] for h in history[-3:]]}")
        else:
            diverging = 0
        prev_d = d
    t_final = T_map(z[0], z[1], basis, ops, smoothed)
    t_gap = metric_d((t_final.phi, t_final.psi), z, config, grid, masks)
    score, bound = smallness_score(z[0], z[1], config, grid)
    if log_path is not None:
        _write_log(log_path, history)
    return FixedPointResult(
        phi=gr.GridFunction(values=z[0], grid=grid),
        psi=gr.GridFunction(values=z[1], grid=grid),
        converged=converged, iterations=it, history=history,
        t_gap=t_gap, score=score, bound=bound)


def _write_log(path: str, history: list) -> None:
    with open(path, "w") as fh:
        json.dump(history, fh, indent=1)


def coercivity_probe(basis: OrthoBasis, ops: LinearizedOperators,
                     n_samples: int = 50, seed: int = 0) -> dict:
    """Randomized lower bound on the operator norm ratio ||L u|| / ||u|| over
    smooth fields in the constrained complement (H1 norms via Riesz)."""
    rng = np.random.default_rng(seed)
    grid = ops.grid
    pts = grid.points()
    cfg = ops.config

    def smooth_field():
        f = np.zeros(grid.n_nodes)
        for _ in range(6):
            rc = rng.uniform(1.0, cfg.rho + 3.0)
            tc = rng.uniform(0.0, grid.opening)
            c = (rc * math.cos(tc), rc * math.sin(tc))
            width = rng.uniform(0.5, 3.0)
            amp = rng.standard_normal()
            f += amp * np.exp(-((pts[:, 0] - c[0]) ** 2
                                + (pts[:, 1] - c[1]) ** 2) / width ** 2)
        return f

    w = ops.w

    def project(f, fields):
        # subtract along the basis fields themselves so the constraints hold
        # exactly without introducing mesh-scale roughness
        for x in fields:
            c = w * x
            f = f - x * (float(c @ f) / float(c @ x))
        return f

    out = {}
    for name, B, fields in (("rho_r", ops.B_r, basis.x_fields[:1]),
                            ("rho_rho", ops.B_rho, basis.y_fields[:2])):
        ratios = []
        for _ in range(n_samples):
            f = project(smooth_field(), fields)
            nu = ops.h1_norm(f)
            if nu < 1e-12:
                continue
            ratios.append(ops.dual_norm(B @ f) / nu)
        out[name] = float(np.min(ratios))
        out[name + "_median"] = float(np.median(ratios))
    return out
