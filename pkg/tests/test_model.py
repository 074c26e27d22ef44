import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segbumps import model


SPEC = model.CouplingSpec()
SM = model.build_smoothing(SPEC, n=50, alpha0=9.8)


def test_G_axis_values():
    assert model.G_eval(SPEC, 0.0, 5.0) == (0.0, 0.0, 0.0)
    assert model.G_eval(SPEC, 5.0, 0.0) == (0.0, 0.0, 0.0)


def test_G_power_rule():
    g, d1, d2 = model.G_eval(SPEC, 1.0, 1.0)
    assert np.isclose(g, 1.0)
    assert np.isclose(d1, 1.5)
    assert np.isclose(d2, 1.5)


def test_G_partial_nonnegative():
    s = np.linspace(0.0, 4.0, 41)
    t = np.linspace(0.1, 4.0, 11)
    S, T = np.meshgrid(s, t, indexing="ij")
    _, d1, _ = model.G_eval(SPEC, S, T)
    assert np.all(d1 >= 0)


def test_G_even_in_each_argument():
    g1, d11, d21 = model.G_eval(SPEC, 1.3, -2.1)
    g2, d12, d22 = model.G_eval(SPEC, 1.3, 2.1)
    assert np.isclose(g1, g2)
    assert np.isclose(d11, d12)
    assert np.isclose(d21, -d22)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_G_finite_difference_consistency(s1, s2):
    if min(abs(s1), abs(s2)) < 1e-3:
        return
    h = 1e-6
    g, d1, d2 = model.G_eval(SPEC, s1, s2)
    fd1 = (model.G_eval(SPEC, s1 + h, s2)[0] - model.G_eval(SPEC, s1 - h, s2)[0]) / (2 * h)
    fd2 = (model.G_eval(SPEC, s1, s2 + h)[0] - model.G_eval(SPEC, s1, s2 - h)[0]) / (2 * h)
    assert abs(d1 - fd1) < 1e-5 * (1 + abs(d1))
    assert abs(d2 - fd2) < 1e-5 * (1 + abs(d2))


# ---------------------------------------------------------------------------
# Ramp phi_n
# ---------------------------------------------------------------------------

def test_phi_boundary_values():
    assert SM.phi(0.0) == 0.0
    assert SM.phi_deriv(0.0) == 0.0
    inv_n = 1.0 / SM.n
    # linear segment phi(t) = t - 1/(2n) on [1/n, alpha0]
    for t in (inv_n, 0.5, 2.0, SM.alpha0):
        assert np.isclose(SM.phi(t), t - 0.5 * inv_n, atol=1e-14)
        assert np.isclose(SM.phi_deriv(t), 1.0)
    assert SM.phi_deriv(2.0 * SM.alpha0) == 0.0
    assert np.isclose(SM.phi(2.5 * SM.alpha0), SM.phi(2.0 * SM.alpha0))


def test_phi_below_identity_and_monotone():
    t = np.linspace(0.0, 2.5 * SM.alpha0, 1000)
    ph = SM.phi(t)
    assert np.all(ph <= t + 1e-14)
    assert np.all(np.diff(ph) >= -1e-14)
    interior = (t > 0) & (t < 2.0 * SM.alpha0)
    assert np.all(SM.phi_deriv(t[interior]) > 0)


def test_phi_convex_on_flattening_interval():
    t = np.linspace(1e-6, 1.0 / SM.n - 1e-9, 200)
    assert np.all(SM.phi_second(t) > 0)


def test_phi_c2_matching():
    # second derivative is continuous at the knots 1/n, alpha0, 2 alpha0
    for knot in (1.0 / SM.n, SM.alpha0, 2.0 * SM.alpha0):
        left = SM.phi_second(knot - 1e-9)
        right = SM.phi_second(knot + 1e-9)
        assert abs(left - right) < 1e-4


def test_phi_fd_consistency():
    t = np.linspace(0.01, 2.2 * SM.alpha0, 57)
    h = 1e-6
    fd = (SM.phi(t + h) - SM.phi(t - h)) / (2 * h)
    assert np.max(np.abs(fd - SM.phi_deriv(t))) < 1e-6


# ---------------------------------------------------------------------------
# Smoothed coupling
# ---------------------------------------------------------------------------

def test_Gn_axis_annihilation_exact():
    for s in (0.1, 1.0, 7.5, 25.0):
        assert SM.G_n(0.0, s) == (0.0, 0.0, 0.0)
        assert SM.G_n(s, 0.0) == (0.0, 0.0, 0.0)
    # gradient also vanishes with vanishing first argument at finite second
    _, d1, _ = SM.G_n(0.0, 3.0)
    assert d1 == 0.0


def test_Gn_below_G_and_capped():
    grid = np.linspace(-2 * SM.alpha0, 2 * SM.alpha0, 101)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    gn = SM.G_n(A, B)[0]
    g = model.G_eval(SPEC, A, B)[0]
    cap = model.G_eval(SPEC, 2 * SM.alpha0, 2 * SM.alpha0)[0]
    assert np.all(gn >= 0)
    assert np.all(gn <= np.minimum(g, cap) + 1e-12)


def test_Gn_uniform_convergence():
    grid = np.linspace(-SM.alpha0, SM.alpha0, 81)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    gaps = []
    for n in (10, 40, 160, 640):
        smn = model.build_smoothing(SPEC, n=n, alpha0=SM.alpha0)
        gaps.append(np.max(np.abs(smn.G_n(A, B)[0] - model.G_eval(SPEC, A, B)[0])))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    # the sup gap decays like 1/n (flattening shift 1/(2n) times the largest
    # gradient on the box): successive quadrupling of n shrinks it ~4x
    for a, b in zip(gaps, gaps[1:]):
        assert 2.5 < a / b < 6.0
    assert gaps[-1] < 0.5


def test_Gn_gradient_fd_consistency():
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.05, 1.5 * SM.alpha0, size=(40, 2))
    h = 1e-7
    for s1, s2 in pts:
        if min(abs(s1 - 1.0 / SM.n), abs(s1 - SM.alpha0), abs(s1 - 2 * SM.alpha0)) < 1e-3:
            continue
        _, d1, d2 = SM.G_n(s1, s2)
        fd1 = (SM.G_n(s1 + h, s2)[0] - SM.G_n(s1 - h, s2)[0]) / (2 * h)
        fd2 = (SM.G_n(s1, s2 + h)[0] - SM.G_n(s1, s2 - h)[0]) / (2 * h)
        assert abs(d1 - fd1) < 1e-6 * (1 + abs(d1))
        assert abs(d2 - fd2) < 1e-6 * (1 + abs(d2))


def test_Gn_hessian_fd_consistency():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.05, 1.5 * SM.alpha0, size=(40, 2))
    h = 1e-5
    for s1, s2 in pts:
        if min(abs(s1 - 1.0 / SM.n), abs(s1 - SM.alpha0), abs(s1 - 2 * SM.alpha0),
               abs(s2 - 1.0 / SM.n), abs(s2 - SM.alpha0), abs(s2 - 2 * SM.alpha0)) < 1e-3:
            continue
        d11, d12, d22 = SM.G_n_hess(s1, s2)
        fd11 = (SM.G_n(s1 + h, s2)[1] - SM.G_n(s1 - h, s2)[1]) / (2 * h)
        fd12 = (SM.G_n(s1, s2 + h)[1] - SM.G_n(s1, s2 - h)[1]) / (2 * h)
        fd22 = (SM.G_n(s1, s2 + h)[2] - SM.G_n(s1, s2 - h)[2]) / (2 * h)
        assert abs(d11 - fd11) < 1e-4 * (1 + abs(d11))
        assert abs(d12 - fd12) < 1e-4 * (1 + abs(d12))
        assert abs(d22 - fd22) < 1e-4 * (1 + abs(d22))


def test_Gn_hess_axis_zero():
    assert SM.G_n_hess(0.0, 2.0) == (0.0, 0.0, 0.0)
    d11, d12, d22 = SM.G_n_hess(1e-10, 2.0)
    assert abs(d11) < 1e-12 and abs(d12) < 1e-12


def test_alpha0_rule():
    assert model.alpha0_from_amplitudes(2.2, 1.1) == pytest.approx(9.8)
    assert model.alpha0_from_amplitudes(2.2, 1.1) > 4 * 2.2


def test_certify_report():
    rep = model.certify_conditions(SPEC, SM)
    conds = rep["conditions"]
    assert conds["axis_annihilation"]["pass"]
    assert conds["partials_monotone"]["pass"]
    assert conds["mixed_smallness"]["pass"]
    assert conds["mixed_smallness"]["max_ratio"] == pytest.approx(2.25, rel=1e-6)
    assert conds["sublinear_positivity"]["pass"]
    assert conds["sublinear_positivity"]["limit"] == pytest.approx(1.5, rel=1e-6)
    smrep = rep["smoothing"]
    assert smrep["axis_annihilation"]["pass"]
    assert smrep["domination"]["pass"]
    assert smrep["partials_monotone"]["pass"]
    assert smrep["mixed_bound"]["pass"]
    assert 0 < smrep["s0"] < SM.alpha0


def test_validation_errors():
    with pytest.raises(ValueError):
        model.CouplingSpec(sigma1=1.2)
    with pytest.raises(ValueError):
        model.CouplingSpec(beta=1.0)
    with pytest.raises(ValueError):
        model.build_smoothing(SPEC, n=1, alpha0=5.0)
    with pytest.raises(ValueError):
        model.build_smoothing(SPEC, n=10, alpha0=-1.0)
