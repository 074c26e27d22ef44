"""Coupling nonlinearity: the power family G(s1,s2) = |s1|^(sigma1+1) |s2|^(sigma2+1),
its smoothed C^2 regularization built from a flattened ramp phi_n, and sampled
certification of the structural conditions both must satisfy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import n_for_ell  # noqa: F401  (re-exported: smoothing index)


@dataclass(frozen=True)
class CouplingSpec:
    sigma1: float = 0.5
    sigma2: float = 0.5
    beta: float = -1.0
    power_family: bool = True

    def __post_init__(self):
        if not (0 < self.sigma1 < 1 and 0 < self.sigma2 < 1):
            raise ValueError("sigma exponents must lie in (0, 1)")
        if self.beta >= 0:
            raise ValueError("beta must be negative")

    @property
    def sigma(self) -> float:
        return min(self.sigma1, self.sigma2)


def G_eval(spec: CouplingSpec, s1, s2):
    """Value and one-sided partial derivatives of the power coupling; the
    derivatives vanish identically on the axes."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    a1, a2 = np.abs(s1), np.abs(s2)
    q1, q2 = spec.sigma1 + 1.0, spec.sigma2 + 1.0
    g = a1 ** q1 * a2 ** q2
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.where(a1 > 0, q1 * a1 ** (q1 - 1.0) * np.sign(s1) * a2 ** q2, 0.0)
        d2 = np.where(a2 > 0, q2 * a2 ** (q2 - 1.0) * np.sign(s2) * a1 ** q1, 0.0)
    if g.ndim == 0:
        return float(g), float(d1), float(d2)
    return g, d1, d2


def _smoothstep(x):
    """Quintic smoothstep: 0 -> 1 on [0, 1] with vanishing first and second
    derivatives at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x ** 2)


def _smoothstep_antideriv(x):
    # Antiderivative of the quintic smoothstep, zero at 0; equals x - 1/2 for x >= 1.
    xc = np.clip(x, 0.0, 1.0)
    base = xc ** 4 * (2.5 - 3.0 * xc + xc ** 2)
    return base + np.maximum(x - 1.0, 0.0)


def _smoothstep_deriv(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    return np.where(inside, 30.0 * x ** 2 * (1.0 - x) ** 2, 0.0)


@dataclass(frozen=True)
class SmoothedCoupling:
    """Composition G_n(s1, s2) = G(phi_n(|s1|), phi_n(|s2|)) with a C^2 ramp
    phi_n: flattened below 1/n, slope one on [1/n, alpha0], capped above 2 alpha0."""

    spec: CouplingSpec
    n: int
    alpha0: float
    s0: float = field(default=0.0)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha0 <= 2.0 / self.n:
            raise ValueError("alpha0 must exceed 2/n for a well-ordered ramp")
        if self.s0 == 0.0:
            object.__setattr__(self, "s0", estimate_s0(self))

    # ---- scalar ramp ----------------------------------------------------

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        inv_n = 1.0 / self.n
        a0 = self.alpha0
        # rising region: phi' = smoothstep(t n), so phi = (1/n) * antideriv(t n);
        # the antiderivative already continues as t - 1/(2n) past t = 1/n.
        low = inv_n * _smoothstep_antideriv(t * self.n)
        # capped region: phi' = 1 - smoothstep((t - a0)/a0) beyond alpha0.
        x = (t - a0) / a0
        cap = np.where(t > a0, a0 * _smoothstep_antideriv(np.clip(x, 0.0, 1.0)), 0.0)
        out = np.where(t <= a0, low, a0 - 0.5 * inv_n + (t - a0) - cap)
        out = np.where(t >= 2.0 * a0, 1.5 * a0 - 0.5 * inv_n, out)
        return out if out.ndim else float(out)

    def phi_deriv(self, t):
        t = np.asarray(t, dtype=float)
        a0 = self.alpha0
        ramp = _smoothstep(t * self.n)
        fall = 1.0 - _smoothstep((t - a0) / a0)
        out = np.where(t <= a0, ramp, fall)
        out = np.where(t < 0.0, 0.0, out)
        return out if out.ndim else float(out)

    def phi_second(self, t):
        t = np.asarray(t, dtype=float)
        a0 = self.alpha0
        rise = self.n * _smoothstep_deriv(t * self.n)
        fall = -_smoothstep_deriv((t - a0) / a0) / a0
        out = np.where(t <= a0, rise, fall)
        return out if out.ndim else float(out)

    # ---- smoothed coupling ---------------------------------------------

    def G_n(self, s1, s2):
        """Value and partial derivatives of the smoothed coupling."""
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        f1, f2 = self.phi(np.abs(s1)), self.phi(np.abs(s2))
        g, d1, d2 = G_eval(self.spec, f1, f2)
        d1 = d1 * self.phi_deriv(np.abs(s1)) * np.sign(s1)
        d2 = d2 * self.phi_deriv(np.abs(s2)) * np.sign(s2)
        if np.ndim(g) == 0:
            return float(g), float(d1), float(d2)
        return g, d1, d2

    def G_n_hess(self, s1, s2):
        """Second partial derivatives (d11, d12, d22) of the smoothed
        coupling; everything vanishes on the axes because phi is flat at 0."""
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        a1, a2 = np.abs(s1), np.abs(s2)
        f1 = np.asarray(self.phi(a1), dtype=float)
        f2 = np.asarray(self.phi(a2), dtype=float)
        p1, p2 = self.phi_deriv(a1), self.phi_deriv(a2)
        pp1, pp2 = self.phi_second(a1), self.phi_second(a2)
        q1, q2 = self.spec.sigma1 + 1.0, self.spec.sigma2 + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = np.where(f1 > 0, q1 * f1 ** (q1 - 1.0), 0.0)
            g2 = np.where(f2 > 0, q2 * f2 ** (q2 - 1.0), 0.0)
            c1 = np.where(f1 > 0, q1 * (q1 - 1.0) * f1 ** (q1 - 2.0), 0.0)
            c2 = np.where(f2 > 0, q2 * (q2 - 1.0) * f2 ** (q2 - 2.0), 0.0)
        d11 = (c1 * p1 ** 2 + g1 * pp1) * f2 ** q2
        d22 = (c2 * p2 ** 2 + g2 * pp2) * f1 ** q1
        d12 = g1 * p1 * g2 * p2 * np.sign(s1) * np.sign(s2)
        if np.ndim(d11) == 0:
            return float(d11), float(d12), float(d22)
        return d11, d12, d22


def alpha0_from_amplitudes(u_max: float, v_max: float) -> float:
    """Cap parameter strictly above four times the largest bump amplitude."""
    return 4.0 * max(u_max, v_max) + 1.0


def build_smoothing(spec: CouplingSpec, n: int, alpha0: float) -> SmoothedCoupling:
    return SmoothedCoupling(spec=spec, n=n, alpha0=alpha0)


def estimate_s0(sm: SmoothedCoupling) -> float:
    """Largest sampled threshold for the mixed-derivative bound
    |d12 G_n| <= |s1 s2|^sigma on [-alpha0, alpha0] x [-s0, s0], halved."""
    spec = sm.spec
    sig = spec.sigma
    q1, q2 = spec.sigma1 + 1.0, spec.sigma2 + 1.0
    s1 = np.geomspace(1e-8, sm.alpha0, 80)
    candidates = np.geomspace(1e-6, sm.alpha0 * 0.999, 60)
    ok_up_to = candidates[0]
    for c in candidates:
        s2 = np.geomspace(1e-8, c, 60)
        A, B = np.meshgrid(s1, s2, indexing="ij")
        f1, f2 = sm.phi(A), sm.phi(B)
        d12 = q1 * q2 * f1 ** spec.sigma1 * f2 ** spec.sigma2 \
            * sm.phi_deriv(A) * sm.phi_deriv(B)
        bound = (A * B) ** sig
        if np.all(np.abs(d12) <= bound * (1.0 + 1e-12)):
            ok_up_to = c
        else:
            break
    return float(0.5 * ok_up_to)


def certify_conditions(spec: CouplingSpec, smoothed: SmoothedCoupling | None = None) -> dict:
    """Sampled verification report for the structural conditions on G (axis
    annihilation, monotone partials, mixed-derivative smallness, sublinear
    positivity) and, when given, on its smoothed version."""
    sig = spec.sigma
    q1, q2 = spec.sigma1 + 1.0, spec.sigma2 + 1.0
    report = {"sigma": sig, "conditions": {}}

    # Axis annihilation (value and gradient vanish when either argument is 0).
    s = np.geomspace(1e-8, 10.0, 25)
    worst = 0.0
    for a in s:
        for pair in ((0.0, a), (a, 0.0)):
            g, d1, d2 = G_eval(spec, *pair)
            worst = max(worst, abs(g), abs(d1), abs(d2))
    report["conditions"]["axis_annihilation"] = {"worst": worst, "pass": worst == 0.0}

    # Monotone partials: d1 G increasing in s1 on a sampled grid.
    grid = np.linspace(-3.0, 3.0, 121)
    t = np.linspace(0.25, 3.0, 12)
    S1, T = np.meshgrid(grid, t, indexing="ij")
    _, d1, _ = G_eval(spec, S1, T)
    mono = float(np.min(np.diff(d1, axis=0)))
    report["conditions"]["partials_monotone"] = {"min_increment": mono,
                                                "pass": mono >= -1e-12}

    # Mixed-derivative smallness: |s1 s2 d12 G| / |s1 s2|^(sigma+1) bounded
    # near the axes (log-spaced window).
    w = np.geomspace(1e-8, 1e-1, 40)
    A, B = np.meshgrid(w, w, indexing="ij")
    d12 = q1 * q2 * A ** spec.sigma1 * B ** spec.sigma2
    ratio = np.abs(A * B * d12) / (A * B) ** (sig + 1.0)
    report["conditions"]["mixed_smallness"] = {
        "max_ratio": float(ratio.max()),
        "trend_to_zero": bool(ratio[0, 0] <= ratio[-1, -1] + 1e-12),
        "pass": bool(np.isfinite(ratio).all() and ratio.max() < 10.0),
    }

    # Sublinear positivity: liminf of s_i d_i G / |s1 s2|^(sigma'+1) along the
    # diagonal with sigma' = sigma.
    diag = np.geomspace(1e-8, 1e-2, 30)
    g, d1, _ = G_eval(spec, diag, diag)
    val = diag * d1 / (diag * diag) ** (sig + 1.0)
    report["conditions"]["sublinear_positivity"] = {
        "min_ratio": float(np.min(val)),
        "limit": float(val[0]),
        "expected_limit": q1,
        "pass": bool(np.min(val) > 0),
    }

    if smoothed is not None:
        report["smoothing"] = _certify_smoothing(smoothed)
    return report


def _certify_smoothing(sm: SmoothedCoupling) -> dict:
    spec = sm.spec
    out = {"n": sm.n, "alpha0": sm.alpha0, "s0": sm.s0}

    # Axis annihilation of G_n is exact.
    s = np.geomspace(1e-8, 2.5 * sm.alpha0, 20)
    worst = 0.0
    for a in s:
        for pair in ((0.0, a), (a, 0.0)):
            g, d1, d2 = sm.G_n(*pair)
            worst = max(worst, abs(g), abs(d1), abs(d2))
    out["axis_annihilation"] = {"worst": worst, "pass": worst == 0.0}

    # Domination: 0 <= G_n <= min(G, G(2a0, 2a0)) and 0 <= s_i d_i G_n <= s_i d_i G.
    grid = np.linspace(-2.0 * sm.alpha0, 2.0 * sm.alpha0, 81)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    gn, d1n, d2n = sm.G_n(A, B)
    g, d1, d2 = G_eval(spec, A, B)
    cap = G_eval(spec, 2.0 * sm.alpha0, 2.0 * sm.alpha0)[0]
    tol = 1e-12
    dom = (np.all(gn >= -tol) and np.all(gn <= np.minimum(g, cap) + tol)
           and np.all(A * d1n >= -tol) and np.all(A * d1n <= A * d1 + tol)
           and np.all(B * d2n >= -tol) and np.all(B * d2n <= B * d2 + tol))
    out["domination"] = {"pass": bool(dom)}

    # Monotone partials below alpha0.
    s1 = np.linspace(-sm.alpha0, sm.alpha0, 161)
    t = np.linspace(0.25, sm.alpha0, 8)
    S1, T = np.meshgrid(s1, t, indexing="ij")
    _, d1n, _ = sm.G_n(S1, T)
    mono = float(np.min(np.diff(d1n, axis=0)))
    out["partials_monotone"] = {"min_increment": mono, "pass": mono >= -1e-10}

    # Uniform convergence proxy: sup |G_n - G| on the alpha0 box scales with
    # the flattening width.
    grid = np.linspace(-sm.alpha0, sm.alpha0, 101)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    gap = float(np.max(np.abs(sm.G_n(A, B)[0] - G_eval(spec, A, B)[0])))
    out["uniform_gap"] = {"sup": gap, "flatten_width": 1.0 / sm.n}

    # Mixed-derivative bound on the s0 strip.
    s1 = np.geomspace(1e-7, sm.alpha0, 60)
    s2 = np.geomspace(1e-7, sm.s0, 40)
    A, B = np.meshgrid(s1, s2, indexing="ij")
    f1, f2 = sm.phi(A), sm.phi(B)
    d12 = ((spec.sigma1 + 1.0) * (spec.sigma2 + 1.0)
           * f1 ** spec.sigma1 * f2 ** spec.sigma2
           * sm.phi_deriv(A) * sm.phi_deriv(B))
    margin = float(np.max(np.abs(d12) - (A * B) ** spec.sigma))
    out["mixed_bound"] = {"worst_margin": margin, "pass": margin <= 1e-12}
    return out
