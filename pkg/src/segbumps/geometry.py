"""Problem parameters, polygon vertex layout, admissible ring-radius ranges,
symmetry sector bookkeeping, and the nested inner-ball systems."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np


def parameter_box(ell: int, m: float):
    """Admissible ranges for the two ring radii:
    D1 = [(m/2pi) l ln(l/2), (m/2pi) l ln(2l)] and D2 with prefactor m/pi."""
    if ell < 3:
        raise ValueError("ell must be at least 3 so ln(ell/2) > 0")
    c1 = m / (2.0 * math.pi) * ell
    c2 = m / math.pi * ell
    lo, hi = math.log(ell / 2.0), math.log(2.0 * ell)
    return (c1 * lo, c1 * hi), (c2 * lo, c2 * hi)


def n_for_ell(ell: int) -> int:
    """Smoothing index strictly above 4 (ln ell)^5."""
    if ell < 3:
        raise ValueError("ell must be at least 3")
    return math.ceil(4.0 * math.log(ell) ** 5) + 1


@dataclass(frozen=True)
class BumpConfiguration:
    """All problem parameters plus the current ring radii (r, rho).

    Defaults realize the reference parameter pack: quartic focusing power,
    square-root coupling exponents, inverse-square potential tails.
    """

    ell: int
    p: float = 4.0
    mu: float = 1.0
    nu: float = 1.0
    beta: float = -1.0
    sigma1: float = 0.5
    sigma2: float = 0.5
    sigma_prime: float = 0.5
    m: float = 2.0
    a1: float = 1.0
    a2: float = 1.0
    theta: float = 1.0
    tau: float = 0.025
    n_smooth: int = 0
    r: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.ell < 3:
            raise ValueError("ell must be at least 3")
        if self.p <= 2:
            raise ValueError("p must exceed 2")
        if self.beta >= 0:
            raise ValueError("beta must be negative")
        if not (0 < self.sigma1 < 1 and 0 < self.sigma2 < 1):
            raise ValueError("sigma1, sigma2 must lie in (0, 1)")
        if not (0 < self.sigma_prime < 1):
            raise ValueError("sigma_prime must lie in (0, 1)")
        if self.m <= 1:
            raise ValueError("m must exceed 1")
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("a1, a2 must be positive")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        tau_cap = min(1.0 / 16.0, (self.p - 2.0) / 16.0, self.sigma / 16.0)
        if not (0 < self.tau < tau_cap):
            raise ValueError(
                f"tau must lie in (0, {tau_cap:.6g}) for these exponents")
        if self.n_smooth == 0:
            object.__setattr__(self, "n_smooth", n_for_ell(self.ell))
        if self.n_smooth <= 4.0 * math.log(self.ell) ** 5:
            raise ValueError("n_smooth must exceed 4 (ln ell)^5")
        # default radii sit at the upper admissible endpoints, where bump
        # separation is largest; at desk scale the lower part of the box can
        # cross the fold of the outer problem (separated bumps stop being a
        # stationary configuration when the ring gap drops near 4)
        d1, d2 = parameter_box(self.ell, self.m)
        if self.r == 0.0:
            object.__setattr__(self, "r", d1[1])
        if self.rho == 0.0:
            object.__setattr__(self, "rho", d2[1])

    @property
    def sigma(self) -> float:
        return min(self.sigma1, self.sigma2)

    @property
    def d1(self):
        return parameter_box(self.ell, self.m)[0]

    @property
    def d2(self):
        return parameter_box(self.ell, self.m)[1]

    def admissible(self) -> bool:
        d1, d2 = parameter_box(self.ell, self.m)
        return d1[0] <= self.r <= d1[1] and d2[0] <= self.rho <= d2[1]

    def with_radii(self, r: float, rho: float) -> "BumpConfiguration":
        return replace(self, r=r, rho=rho)

    def potential(self, which: int, dist):
        """K_i(|x|) = 1 + a_i/(1+|x|)^m for which = 1 or 2."""
        a = self.a1 if which == 1 else self.a2
        return 1.0 + a / (1.0 + np.asarray(dist, dtype=float)) ** self.m


@dataclass(frozen=True)
class VertexSet:
    x_vertices: np.ndarray
    y_vertices: np.ndarray

    def __post_init__(self):
        rx = np.hypot(*self.x_vertices.T)
        ry = np.hypot(*self.y_vertices.T)
        if not (np.allclose(rx, rx[0]) and np.allclose(ry, ry[0])):
            raise ValueError("vertices must lie on circles")


def make_vertices(ell: int, r: float, rho: float) -> VertexSet:
    """Inner ring of ell u-bump sites at angles 2(j-1)pi/ell and outer ring of
    2 ell v-bump sites at angles (j-1)pi/ell."""
    if ell < 2 or r <= 0 or rho <= 0:
        raise ValueError("need ell >= 2 and positive radii")
    jx = np.arange(ell)
    jy = np.arange(2 * ell)
    ax = 2.0 * jx * np.pi / ell
    ay = jy * np.pi / ell
    x = np.column_stack([r * np.cos(ax), r * np.sin(ax)])
    y = np.column_stack([rho * np.cos(ay), rho * np.sin(ay)])
    return VertexSet(x_vertices=x, y_vertices=y)


def inner_regions(config: BumpConfiguration, k: int):
    """Ball systems P_k (around x-vertices) and Q_k (around y-vertices) of
    radius k ln ln ell; returns two lists of (center, radius)."""
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be one of 1, 2, 3, 4")
    if config.ell <= math.e:
        raise ValueError("ln ln ell must be positive")
    rad = k * math.log(math.log(config.ell))
    vs = make_vertices(config.ell, config.r, config.rho)
    p_balls = [(c, rad) for c in vs.x_vertices]
    q_balls = [(c, rad) for c in vs.y_vertices]
    min_gap = min(2.0 * config.r * math.sin(math.pi / config.ell),
                  2.0 * config.rho * math.sin(math.pi / (2 * config.ell)),
                  config.rho - config.r)
    if 2.0 * rad >= min_gap:
        warnings.warn(f"inner balls of radius {rad:.3f} overlap "
                      f"(minimal vertex gap {min_gap:.3f})")
    return p_balls, q_balls


@dataclass(frozen=True)
class SectorDescriptor:
    """Fundamental sector of the dihedral symmetry class: opening pi/ell with
    even reflection across both radial edges."""
    ell: int
    opening: float = field(init=False)
    edge_condition: str = "even-reflection"

    def __post_init__(self):
        object.__setattr__(self, "opening", math.pi / self.ell)

    def fold_angle(self, theta):
        """Map plane angles into [0, pi/ell] by the dihedral action."""
        period = 2.0 * math.pi / self.ell
        t = np.mod(theta, period)
        return np.where(t > 0.5 * period, period - t, t)


def fundamental_sector(ell: int) -> SectorDescriptor:
    if ell < 2:
        raise ValueError("ell must be at least 2")
    return SectorDescriptor(ell=ell)
