import numpy as np
import pytest

from segbumps import geometry as geo
from segbumps import grid as gr
from segbumps import groundstate as gs
from segbumps import model, outer


@pytest.fixture(scope="session")
def ground_p4():
    return gs.solve_ground_state(4.0, 2, 1e-10)


@pytest.fixture(scope="session")
def ground_p3():
    return gs.solve_ground_state(3.0, 2, 1e-10)


@pytest.fixture(scope="session")
def cfg8():
    return geo.BumpConfiguration(ell=8)


@pytest.fixture(scope="session")
def grid8(cfg8):
    return gr.build_grid(cfg8, 0.1)


@pytest.fixture(scope="session")
def smooth8(cfg8):
    profs = outer.bump_profiles(cfg8)
    a0 = model.alpha0_from_amplitudes(profs[0].center_value,
                                      profs[1].center_value)
    spec = model.CouplingSpec(sigma1=cfg8.sigma1, sigma2=cfg8.sigma2,
                              beta=cfg8.beta)
    return model.build_smoothing(spec, n=cfg8.n_smooth, alpha0=a0)


@pytest.fixture(scope="session")
def inner8(cfg8, grid8):
    return outer.make_inner_data(cfg8, grid8)


@pytest.fixture(scope="session")
def sol8(inner8, cfg8, grid8, smooth8):
    return outer.minimize_outer(inner8, cfg8, grid8, smooth8)
