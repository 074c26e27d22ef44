"""Sector-reduced finite-difference discretization of the plane.

A dihedrally symmetric field is stored on one fundamental sector of opening
pi/ell in polar coordinates: cell-centered graded radial nodes, vertex-centered
angular nodes including both edges.  Even reflection across the angular edges
is the natural (zero-flux) boundary of the conservative stencil; a homogeneous
Dirichlet condition truncates the plane at R_inf.  Quadrature weights make the
full-plane integral of a symmetric field exactly 2 ell times the sector sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

NODE_CAP = 2_000_000


@dataclass(frozen=True)
class SectorGrid:
    """Polar mesh on the sector 0 <= theta <= pi/ell, 0 <= r <= r_inf.

    Radial nodes are cell centers of a graded partition (uniform fine spacing
    out to the bump region, geometric coarsening beyond); angular nodes are
    uniformly spaced and include both edges with trapezoid half-weights.
    """

    ell: int
    r_inf: float
    r_nodes: np.ndarray
    r_edges: np.ndarray
    theta_nodes: np.ndarray
    h_fine: float

    @property
    def opening(self) -> float:
        return math.pi / self.ell

    @property
    def fold_copies(self) -> int:
        return 2 * self.ell

    @property
    def n_r(self) -> int:
        return self.r_nodes.size

    @property
    def n_theta(self) -> int:
        return self.theta_nodes.size

    @property
    def n_nodes(self) -> int:
        return self.n_r * self.n_theta

    @property
    def dr(self) -> np.ndarray:
        return np.diff(self.r_edges)

    @property
    def dtheta(self) -> float:
        return self.theta_nodes[1] - self.theta_nodes[0]

    @property
    def theta_weights(self) -> np.ndarray:
        w = np.full(self.n_theta, self.dtheta)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @property
    def weights(self) -> np.ndarray:
        """Sector quadrature weights, shape (n_r, n_theta)."""
        return np.outer(self.r_nodes * self.dr, self.theta_weights)

    def points(self) -> np.ndarray:
        """Cartesian node coordinates, shape (n_nodes, 2), row-major in
        (radial, angular) order."""
        R, T = np.meshgrid(self.r_nodes, self.theta_nodes, indexing="ij")
        return np.column_stack([(R * np.cos(T)).ravel(),
                                (R * np.sin(T)).ravel()])

    def polar(self):
        return np.meshgrid(self.r_nodes, self.theta_nodes, indexing="ij")


@dataclass(frozen=True)
class GridFunction:
    """Real field sampled at the sector nodes (flat, row-major over
    (radial, angular))."""

    values: np.ndarray
    grid: SectorGrid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.grid.n_nodes:
            raise ValueError("value count does not match the grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function contains non-finite values")
        object.__setattr__(self, "values", vals)

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_r, self.grid.n_theta)


@dataclass(frozen=True)
class EllipticOperator:
    """Sparse symmetric form a, b -> sum grad a . grad b + K a b over the
    sector (quadrature weights included; Dirichlet ghost at r_inf)."""

    matrix: sp.csr_matrix
    open_matrix: sp.csr_matrix
    grid: SectorGrid
    potential_tag: str

    def form(self, a, b) -> float:
        """Quadrature value of sum grad a . grad b + K a b without the
        Dirichlet boundary closure (exact for fields supported away from
        r_inf)."""
        av = a.values if isinstance(a, GridFunction) else np.asarray(a).ravel()
        bv = b.values if isinstance(b, GridFunction) else np.asarray(b).ravel()
        return float(av @ (self.open_matrix @ bv))

    def apply(self, a) -> np.ndarray:
        av = a.values if isinstance(a, GridFunction) else np.asarray(a).ravel()
        return self.matrix @ av


def _radial_partition(h: float, r_fine: float, r_inf: float):
    n_fine = max(4, math.ceil(r_fine / h))
    edges = list(np.linspace(0.0, r_fine, n_fine + 1))
    w = edges[-1] - edges[-2]
    while edges[-1] < r_inf - 1e-12:
        w = min(1.0, 1.09 * w)
        edges.append(min(edges[-1] + w, r_inf))
    if len(edges) > 2 and edges[-1] - edges[-2] < 0.4 * (edges[-2] - edges[-3]):
        edges[-2] = 0.5 * (edges[-3] + edges[-1])
    return np.asarray(edges)


def build_grid(config, h_target: float, R_inf: float | None = None) -> SectorGrid:
    """Build the sector mesh for a bump configuration.

    The radial spacing is h_target out to rho + 5 and coarsens geometrically
    (capped at 1) to R_inf, default rho + 20.  The angular spacing keeps the
    arc length at radius rho + 3 near h_target.
    """
    if h_target <= 0:
        raise ValueError("h_target must be positive")
    if R_inf is None:
        R_inf = config.rho + 20.0
    if R_inf < config.rho + 20.0 - 1e-9:
        raise ValueError("R_inf must be at least rho + 20")
    r_edges = _radial_partition(h_target, config.rho + 5.0, R_inf)
    r_nodes = 0.5 * (r_edges[:-1] + r_edges[1:])
    opening = math.pi / config.ell
    n_theta = max(9, math.ceil(opening * (config.rho + 3.0) / h_target) + 1)
    theta_nodes = np.linspace(0.0, opening, n_theta)
    if r_nodes.size * n_theta > NODE_CAP:
        raise MemoryError(
            f"grid would need {r_nodes.size * n_theta} nodes (cap {NODE_CAP})")
    return SectorGrid(ell=config.ell, r_inf=float(R_inf), r_nodes=r_nodes,
                      r_edges=r_edges, theta_nodes=theta_nodes,
                      h_fine=float(r_edges[1] - r_edges[0]))


def stiffness_matrix(grid: SectorGrid) -> sp.csr_matrix:
    """Conservative flux-form discretization of sum grad a . grad b over the
    sector with even reflection on the angular edges (no outer boundary
    closure; see boundary_closure).  Cached on the grid object."""
    cached = getattr(grid, "_stiffness", None)
    if cached is not None:
        return cached
    nr, nt = grid.n_r, grid.n_theta
    r = grid.r_nodes
    dr = grid.dr
    dth = grid.dtheta
    thw = grid.theta_weights
    n = nr * nt

    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    idx = np.arange(n).reshape(nr, nt)

    # radial faces between cells i and i+1 at r_edges[i+1]
    for i in range(nr - 1):
        c = grid.r_edges[i + 1] / (r[i + 1] - r[i])
        for j in range(nt):
            k = c * thw[j]
            a, b = idx[i, j], idx[i + 1, j]
            add(a, a, k)
            add(b, b, k)
            add(a, b, -k)
            add(b, a, -k)
    # angular faces between nodes j and j+1 (zero flux past the edges)
    for i in range(nr):
        k = dr[i] / (r[i] * dth)
        for j in range(nt - 1):
            a, b = idx[i, j], idx[i, j + 1]
            add(a, a, k)
            add(b, b, k)
            add(a, b, -k)
            add(b, a, -k)

    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    object.__setattr__(grid, "_stiffness", mat)
    return mat


def boundary_closure(grid: SectorGrid) -> sp.csr_matrix:
    """Diagonal flux term of the homogeneous Dirichlet ghost at r_inf."""
    c = grid.r_edges[-1] / (grid.r_inf - grid.r_nodes[-1])
    diag = np.zeros(grid.n_nodes)
    diag[(grid.n_r - 1) * grid.n_theta:] = c * grid.theta_weights
    return sp.diags(diag).tocsr()


def assemble(K_choice, grid: SectorGrid) -> EllipticOperator:
    """Operator for the form sum grad a . grad b + K a b on the sector.

    K_choice is a positive constant or a callable of the distance to the
    origin (the radial potentials K_i(|x|))."""
    if callable(K_choice):
        kvals = np.asarray(K_choice(grid.r_nodes), dtype=float)
        tag = getattr(K_choice, "__name__", "callable")
    else:
        kvals = np.full(grid.n_r, float(K_choice))
        tag = f"constant={float(K_choice):g}"
    if np.any(kvals <= 0):
        raise ValueError("potential must be positive for definiteness")
    mass = sp.diags((grid.weights * kvals[:, None]).ravel())
    open_mat = (stiffness_matrix(grid) + mass).tocsr()
    mat = (open_mat + boundary_closure(grid)).tocsr()
    return EllipticOperator(matrix=mat, open_matrix=open_mat, grid=grid,
                            potential_tag=tag)


def solve_spd(op: EllipticOperator, rhs, tol: float = 1e-10,
              max_iter: int = 20000) -> GridFunction:
    """Jacobi-preconditioned conjugate gradients down to a relative residual
    below tol."""
    b = rhs.values if isinstance(rhs, GridFunction) else np.asarray(rhs, float).ravel()
    if not np.any(b):
        return GridFunction(values=np.zeros_like(b), grid=op.grid)
    dinv = 1.0 / op.matrix.diagonal()
    M = spla.LinearOperator(op.matrix.shape, matvec=lambda x: dinv * x)
    x, info = spla.cg(op.matrix, b, rtol=tol, atol=0.0, maxiter=max_iter, M=M)
    if info != 0:
        raise RuntimeError(f"conjugate gradients did not converge (info={info})")
    return GridFunction(values=x, grid=op.grid)


def condition_estimate(op: EllipticOperator, tol: float = 1e-6):
    """Extremal eigenvalue estimates of the assembled matrix by Lanczos
    iteration; returns (lam_min, lam_max, cond)."""
    lam_max = float(spla.eigsh(op.matrix, k=1, which="LA", tol=tol,
                               return_eigenvectors=False)[0])
    lam_min = float(spla.eigsh(op.matrix, k=1, sigma=0.0, which="LM", tol=tol,
                               return_eigenvectors=False)[0])
    return lam_min, lam_max, lam_max / lam_min


def superpose_bumps(profile, vertices, grid: SectorGrid) -> GridFunction:
    """Sum of copies of a radial profile centered at the given plane vertices,
    sampled at the sector nodes.

    The vertex array must contain every symmetry copy (a full ring), so the
    restriction of the symmetric plane field to the sector is plain pointwise
    evaluation."""
    from . import groundstate as gs

    verts = np.atleast_2d(np.asarray(vertices, dtype=float))
    if verts.size and np.max(np.hypot(verts[:, 0], verts[:, 1])) > grid.r_inf - 10.0:
        raise ValueError("vertices must lie inside r_inf - 10")
    pts = grid.points()
    total = np.zeros(grid.n_nodes)
    for vx in verts:
        d = np.hypot(pts[:, 0] - vx[0], pts[:, 1] - vx[1])
        total += gs.evaluate(profile, d)
    return GridFunction(values=total, grid=grid)


@dataclass(frozen=True)
class NormReport:
    h1: float
    l2: float
    lp: float
    sup: float
    p: float = 4.0


def norms(f, p: float = 4.0) -> NormReport:
    """Full-plane quadrature norms of a symmetric field given on the sector.

    Accepts a single GridFunction or a pair; the pair norm is the
    root-sum-square for the integral norms and the max for the sup norm."""
    if isinstance(f, (tuple, list)):
        reps = [norms(g, p) for g in f]
        return NormReport(
            h1=math.hypot(*[r.h1 for r in reps]),
            l2=math.hypot(*[r.l2 for r in reps]),
            lp=float(sum(r.lp ** p for r in reps)) ** (1.0 / p),
            sup=max(r.sup for r in reps), p=p)
    grid = f.grid
    w = grid.weights.ravel()
    fold = grid.fold_copies
    v = f.values
    l2sq = fold * float(w @ v ** 2)
    gradsq = fold * float(v @ (stiffness_matrix(grid) @ v))
    lpint = fold * float(w @ np.abs(v) ** p)
    return NormReport(h1=math.sqrt(gradsq + l2sq), l2=math.sqrt(l2sq),
                      lp=lpint ** (1.0 / p), sup=float(np.max(np.abs(v))), p=p)


def nodes_in_ball(grid: SectorGrid, center, radius: float) -> np.ndarray:
    """Boolean mask over flat node indices for |x - center| <= radius."""
    pts = grid.points()
    d = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    return d <= radius


def export_csv(f: GridFunction, path: str) -> None:
    R, T = f.grid.polar()
    data = np.column_stack([R.ravel(), T.ravel(), f.values])
    np.savetxt(path, data, delimiter=",", header="r,theta,value",
               comments="", fmt="%.17g")


def export_gnuplot(f: GridFunction, path: str) -> None:
    """Structured-grid dump: one block per radial line, blank-line separated,
    columns x y value."""
    pts = f.grid.points().reshape(f.grid.n_r, f.grid.n_theta, 2)
    vals = f.as_matrix()
    with open(path, "w") as fh:
        for i in range(f.grid.n_r):
            for j in range(f.grid.n_theta):
                fh.write(f"{pts[i, j, 0]:.17g} {pts[i, j, 1]:.17g} "
                         f"{vals[i, j]:.17g}\n")
            fh.write("\n")
