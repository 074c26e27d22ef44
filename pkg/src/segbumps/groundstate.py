"""Radial ground states of the scalar field equation -Dw + w = w^(p-1).

Solves the radial ODE

    -w'' - (N-1)/r w' + w = w^(p-1),   w'(0) = 0,  w(r) -> 0,

by bisection shooting followed by a collocation-Newton polish, and provides
the profile algebra the rest of the package is built on: amplitude scaling
for coefficient-mu equations, monotone interpolation with an analytic
exponential tail, and the translation-interaction integrals that feed the
reduced-energy coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp, solve_bvp
from scipy.interpolate import PchipInterpolator


@dataclass(frozen=True)
class RadialProfile:
    """Tabulated radial profile with exponential far-field tail.

    values[i] = w(radii[i]); beyond radii[-1] = R_tab the profile is
    evaluated as tail_amplitude * r^(-(N-1)/2) * exp(-tail_rate * r).
    """

    dimension: int
    exponent: float
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    tail_amplitude: float
    tail_rate: float
    center_value: float
    coefficient: float = 1.0
    max_residual: float = np.nan
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_interp", PchipInterpolator(self.radii, self.values, extrapolate=False)
        )

    @property
    def r_tab(self) -> float:
        return float(self.radii[-1])

    def __call__(self, r):
        return evaluate(self, r)


def _series_start(w0, r0, p, N):
    # Taylor expansion at the origin: w(r) = w0 + (w0 - w0^(p-1)) r^2 / (2N) + O(r^4)
    g = (w0 - w0 ** (p - 1.0)) / (2.0 * N)
    return w0 + g * r0 ** 2, 2.0 * g * r0


def _shoot_classify(w0, p, N, r_max, rtol=1e-12):
    """Integrate outward from the origin; return +1 on zero crossing (w0 too
    large), -1 on turning up (w0 too small), 0 if neither occurred."""
    r0 = 1e-8
    y0 = _series_start(w0, r0, p, N)

    def rhs(r, y):
        w, dw = y
        return [dw, w - np.abs(w) ** (p - 2.0) * w - (N - 1.0) / r * dw]

    def cross(r, y):
        return y[0]

    def turn(r, y):
        return y[1]

    cross.terminal = True
    cross.direction = -1
    turn.terminal = True
    turn.direction = 1
    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=1e-16,
                    events=(cross, turn), dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def _bisect_center_value(p, N, r_max=40.0, iters=80):
    lo, hi = 1.0 + 1e-9, 2.0
    s, _ = _shoot_classify(hi, p, N, r_max)
    tries = 0
    while s <= 0:
        hi *= 1.5
        tries += 1
        if tries > 60:
            raise RuntimeError("shooting bracket not found: no zero crossing located")
        s, _ = _shoot_classify(hi, p, N, r_max)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s, _ = _shoot_classify(mid, p, N, r_max)
        if s >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def solve_ground_state(p: float, N: int = 2, tol: float = 1e-10) -> RadialProfile:
    """Compute the positive decreasing radial solution of -Dw + w = w^(p-1).

    Shooting with bisection on w(0) provides the global shape; a collocation
    Newton polish (adaptive 4th-order scheme) drives the collocation residual
    below tol and supplies the tabulated mesh.
    """
    if p <= 2:
        raise ValueError("exponent p must exceed 2")
    if N < 2:
        raise ValueError("dimension N must be at least 2")
    if tol <= 0:
        raise ValueError("tol must be positive")

    w0 = _bisect_center_value(p, N)
    _, sol = _shoot_classify(w0, p, N, r_max=60.0)

    # Shooting is only trustworthy down to amplitudes ~1e-6 (the unstable
    # e^{+r} mode amplifies the bisection error beyond that). Match there and
    # extend the polish domain so the boundary-value Newton rebuilds the tail
    # down to the tabulation floor.
    floor = 1e-13
    trust = 1e-6
    pos = sol.y[0] > 0
    t_pos, w_pos = sol.t[pos], sol.y[0, pos]
    if w_pos[-1] < trust:
        idx = int(np.argmax(w_pos < trust))
        t_end = float(np.interp(np.log(trust),
                                np.log(w_pos[idx - 1:idx + 1])[::-1],
                                t_pos[idx - 1:idx + 1][::-1]))
        w_match = trust
    else:
        t_end, w_match = float(t_pos[-1]), float(w_pos[-1])
    r_end = max(t_end + np.log(w_match / floor), 12.0)

    r0 = 0.01
    mesh = np.unique(np.concatenate([
        np.linspace(r0, 0.5, 120),
        np.linspace(0.5, min(10.0, r_end), 1400),
        np.linspace(min(10.0, r_end), r_end, 900),
    ]))
    good = sol.t <= t_end
    w_interp = np.interp(mesh, sol.t[good], sol.y[0, good])
    dw_interp = np.interp(mesh, sol.t[good], sol.y[1, good])
    beyond = mesh > t_end
    if np.any(beyond):
        w_last = float(np.interp(t_end, sol.t[good], sol.y[0, good]))
        w_interp[beyond] = w_last * np.exp(-(mesh[beyond] - t_end))
        dw_interp[beyond] = -w_interp[beyond]
    y_init = np.vstack([np.maximum(w_interp, floor / 10.0), dw_interp])

    def rhs(r, y):
        w, dw = y
        return np.vstack([dw, w - np.abs(w) ** (p - 2.0) * w - (N - 1.0) / r * dw])

    def series_coeffs(w0):
        # w = w0 + a r^2 + b r^4 near the origin, from matching the ODE.
        V = w0 - np.abs(w0) ** (p - 2.0) * w0
        dV = 1.0 - (p - 1.0) * np.abs(w0) ** (p - 2.0)
        a = V / (2.0 * N)
        b = dV * a / (8.0 + 4.0 * N)
        return a, b

    # Pin the left boundary at the bisected center value via the series; the
    # far tail sits below the collocation residual normalization, so a free
    # left end would let the polish drift w(0).
    a0, b0 = series_coeffs(w0)
    w_left = w0 + a0 * r0 ** 2 + b0 * r0 ** 4

    def bc(ya, yb):
        # Far-field slope from the Bessel asymptotics of r^(1-N/2) K_(N/2-1)(r):
        # w'/w = -1 - (N-1)/(2r) - (N-1)(N-3)/(8 r^2) + O(r^-3).
        slope = (1.0 + (N - 1.0) / (2.0 * r_end)
                 + (N - 1.0) * (N - 3.0) / (8.0 * r_end ** 2))
        return np.array([
            ya[0] - w_left,
            yb[1] + slope * yb[0],
        ])

    bvp = solve_bvp(rhs, bc, mesh, y_init, tol=0.5 * tol, max_nodes=500000)
    if not bvp.success:
        raise RuntimeError(f"Newton refinement did not converge: {bvp.message}")
    max_res = float(np.max(bvp.rms_residuals))
    if max_res >= tol:
        raise RuntimeError(
            f"collocation residual {max_res:.3e} did not reach tolerance {tol:.3e}")

    a, b = series_coeffs(bvp.y[0, 0])
    w_center = float(bvp.y[0, 0] - a * r0 ** 2 - b * r0 ** 4)
    radii = np.concatenate([[0.0], bvp.x])
    values = np.concatenate([[w_center], bvp.y[0]])
    derivs = np.concatenate([[0.0], bvp.y[1]])

    c_inf, rate = _fit_tail(radii, values, N)
    keep = values >= 1e-13
    keep[:2] = True
    radii, values, derivs = radii[keep], values[keep], derivs[keep]

    return RadialProfile(
        dimension=N, exponent=p, radii=radii, values=values, derivs=derivs,
        tail_amplitude=c_inf, tail_rate=rate, center_value=float(values[0]),
        coefficient=1.0, max_residual=max_res,
    )


def _fit_tail(radii, values, N):
    """Least-squares fit of log w = log c - rate*r - ((N-1)/2) log r on the
    far-field window, returning (c, rate)."""
    window = (values > 1e-12) & (values < 1e-7) & (radii > 1.0)
    if window.sum() < 8:
        window = (values > 0) & (values < 1e-3) & (radii > 1.0)
    r = radii[window]
    y = np.log(values[window]) + 0.5 * (N - 1.0) * np.log(r)
    A = np.vstack([np.ones_like(r), -r]).T
    (logc, rate), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.exp(logc)), float(rate)


def scale_profile(base: RadialProfile, coeff: float) -> RadialProfile:
    """Rescale a unit-coefficient profile so it solves -Du + u = coeff * u^(p-1)."""
    if coeff <= 0:
        raise ValueError("coefficient must be positive")
    amp = coeff ** (1.0 / (2.0 - base.exponent))
    return replace(
        base,
        values=base.values * amp,
        derivs=base.derivs * amp,
        tail_amplitude=base.tail_amplitude * amp,
        center_value=base.center_value * amp,
        coefficient=base.coefficient * coeff,
        max_residual=base.max_residual * amp,
    )


def evaluate(profile: RadialProfile, r):
    """Profile value at radius r >= 0 (scalar or array); monotone cubic on the
    table, analytic tail beyond R_tab."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    out = np.empty_like(r)
    inside = r <= profile.r_tab
    out[inside] = profile._interp(r[inside])
    rt = r[~inside]
    out[~inside] = (profile.tail_amplitude
                    * rt ** (-(profile.dimension - 1.0) / 2.0)
                    * np.exp(-profile.tail_rate * rt))
    return float(out[0]) if scalar else out


def evaluate_deriv(profile: RadialProfile, r):
    """dw/dr at radius r; tabulated derivative inside, tail formula outside."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    inside = r <= profile.r_tab
    out[inside] = np.interp(r[inside], profile.radii, profile.derivs)
    rt = r[~inside]
    nu = (profile.dimension - 1.0) / 2.0
    w_t = profile.tail_amplitude * rt ** (-nu) * np.exp(-profile.tail_rate * rt)
    out[~inside] = -w_t * (profile.tail_rate + nu / rt)
    return out


def radial_integral(profile: RadialProfile, power: float = 1.0) -> float:
    """Integral of w^power over R^N (surface measure times trapezoid in r),
    including the analytic tail contribution."""
    N = profile.dimension
    surf = 2.0 * np.pi ** (N / 2.0) / _gamma_half(N)
    r, w = profile.radii, profile.values
    core = np.trapezoid(w ** power * r ** (N - 1.0), r)
    # Tail: w^power ~ c^power r^(-power(N-1)/2) e^(-power r); integrate by
    # fine quadrature over a few e-foldings.
    rt = np.linspace(profile.r_tab, profile.r_tab + 60.0 / power, 4000)
    wt = (profile.tail_amplitude * rt ** (-(N - 1.0) / 2.0)
          * np.exp(-profile.tail_rate * rt))
    tail = np.trapezoid(wt ** power * rt ** (N - 1.0), rt)
    return float(surf * (core + tail))


def gradient_square_integral(profile: RadialProfile) -> float:
    """Integral of |grad w|^2 over R^N."""
    N = profile.dimension
    surf = 2.0 * np.pi ** (N / 2.0) / _gamma_half(N)
    r = profile.radii
    core = np.trapezoid(profile.derivs ** 2 * r ** (N - 1.0), r)
    return float(surf * core)


def _gamma_half(N):
    from math import gamma
    return gamma(N / 2.0)


def functional_value(profile: RadialProfile) -> float:
    """Discrete value of (1/2) Int(|grad w|^2 + w^2) - (mu/p) Int w^p for the
    profile's own coefficient mu."""
    p = profile.exponent
    quad = 0.5 * (gradient_square_integral(profile) + radial_integral(profile, 2.0))
    return quad - profile.coefficient / p * radial_integral(profile, p)


def interaction_integral(profile: RadialProfile, d: float, rel_tol: float = 1e-8) -> float:
    """Int over R^N of w(|x|)^(p-1) w(|x - d e1|) dx by nested refinement of a
    tensor Gauss-Legendre rule in polar coordinates about the first factor."""
    if d <= 0:
        raise ValueError("separation d must be positive")
    if profile.dimension != 2:
        raise NotImplementedError("interaction integrals are implemented for N = 2")
    p = profile.exponent
    R = profile.r_tab

    def level(n):
        xs, ws = np.polynomial.legendre.leggauss(n)
        s = 0.5 * R * (xs + 1.0)
        w_s = 0.5 * R * ws
        th = 0.5 * np.pi * (xs + 1.0)
        w_th = 0.5 * np.pi * ws
        S, TH = np.meshgrid(s, th, indexing="ij")
        dist = np.sqrt(S ** 2 + d ** 2 - 2.0 * S * d * np.cos(TH))
        vals = evaluate(profile, S.ravel()) ** (p - 1.0) * evaluate(profile, dist.ravel())
        integ = (vals.reshape(S.shape) * S) @ w_th
        return 2.0 * float(w_s @ integ)

    n = 60
    prev = level(n)
    for _ in range(5):
        n *= 2
        cur = level(n)
        if abs(cur - prev) <= rel_tol * abs(cur):
            return cur
        prev = cur
    raise RuntimeError("interaction quadrature did not converge")


def interaction_prefactor(profile: RadialProfile, d_values=None) -> float:
    """Prefactor P in interaction(d) ~ P d^(-(N-1)/2) e^(-d), fitted over a
    far-field range of separations."""
    if d_values is None:
        d_values = np.arange(10.0, 21.0)
    nu = (profile.dimension - 1.0) / 2.0
    vals = np.array([interaction_integral(profile, d) for d in d_values])
    y = np.log(vals) + nu * np.log(d_values) + d_values
    return float(np.exp(np.mean(y)))


def radial_linearization_eigs(profile: RadialProfile, k: int = 4):
    """Smallest eigenvalues of the radial linearized operator
    -d^2/dr^2 - (N-1)/r d/dr + 1 - (p-1) mu w^(p-2) in the radial class.

    Diagnostic only: expects exactly one negative eigenvalue and a spectral
    gap away from zero (nondegeneracy spot-check)."""
    from scipy.linalg import eigh_tridiagonal

    N, p = profile.dimension, profile.exponent
    R = profile.r_tab
    n = 2000
    h = R / n
    r = (np.arange(n) + 0.5) * h
    w = evaluate(profile, r)
    pot = 1.0 - (p - 1.0) * profile.coefficient * w ** (p - 2.0)
    r_face = np.arange(1, n) * h
    main = np.zeros(n)
    main[:-1] += r_face ** (N - 1.0) / h
    main[1:] += r_face ** (N - 1.0) / h
    off = -r_face ** (N - 1.0) / h
    # Dirichlet at R adds the boundary face to the last diagonal entry.
    main[-1] += R ** (N - 1.0) / h
    mass = r ** (N - 1.0) * h
    # Symmetrize the generalized problem A z = lambda M z with M diagonal:
    # M^(-1/2) A M^(-1/2) stays tridiagonal.
    s = 1.0 / np.sqrt(mass)
    diag = (main + pot * mass) * s ** 2
    offd = off * s[:-1] * s[1:]
    vals = eigh_tridiagonal(diag, offd, select="i",
                            select_range=(0, k - 1), eigvals_only=True)
    return np.sort(vals)


def save_profile(profile: RadialProfile, csv_path: str) -> str:
    """Write the (radius, value) table as CSV plus a JSON header alongside;
    returns the header path."""
    header_path = str(csv_path)
    if header_path.endswith(".csv"):
        header_path = header_path[:-4]
    header_path += ".json"
    with open(csv_path, "w") as fh:
        fh.write("radius,value\n")
        for r, w in zip(profile.radii, profile.values):
            fh.write(f"{r:.17g},{w:.17g}\n")
    header = {
        "p": profile.exponent,
        "N": profile.dimension,
        "c_inf": profile.tail_amplitude,
        "R_tab": profile.r_tab,
        "tail_rate": profile.tail_rate,
        "coefficient": profile.coefficient,
        "center_value": profile.center_value,
        "max_residual": profile.max_residual,
    }
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=2)
    return header_path
