import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mobility_ldp.errors import ConfigError, DomainError
from mobility_ldp.potentials import (CellGeometry, Potential, cell_stats, eval_potential,
                                     midpoints)


def test_energy_at_corner(cell2):
    pot = Potential.energy(1.0, 4.0)
    assert eval_potential(pot, cell2, [0.5, 0.5]) == pytest.approx(0.25, rel=1e-15)
    assert eval_potential(pot, cell2, [0.0, 0.0]) == 0.0


def test_throughput_cap_value(cell2):
    pot = Potential.throughput(alpha=1.0, p=0.01, beta=4.0, r0=0.1)
    # p / r0**beta = 100
    assert pot.rate_cap == pytest.approx(math.log(101.0), rel=1e-14)
    assert eval_potential(pot, cell2, [0.0, 0.0]) == pytest.approx(4.61512051684126, rel=1e-13)
    assert eval_potential(pot, cell2, [0.05, 0.05]) == pytest.approx(math.log(101.0))


def test_throughput_continuous_at_r0():
    pot = Potential.throughput(r0=0.1)
    inside = pot(np.array([[0.1 - 1e-12, 0.0]]))[0]
    outside = pot(np.array([[0.1 + 1e-12, 0.0]]))[0]
    assert inside == pytest.approx(outside, rel=1e-9)


@pytest.mark.parametrize("point", [[0.6, 0.0], [0.0, -0.51], [1.0, 1.0]])
def test_outside_cell_rejected(cell2, energy4, point):
    with pytest.raises(DomainError):
        eval_potential(energy4, cell2, point)


def test_wrong_shape_rejected(cell2, energy4):
    with pytest.raises(DomainError):
        eval_potential(energy4, cell2, [0.1, 0.1, 0.1])


@pytest.mark.parametrize("beta,expected", [(2.0, 1.0 / 6.0), (4.0, 7.0 / 180.0)])
def test_cell_mean_2d(cell2, beta, expected):
    # exact integrals of (x^2 + y^2)^(beta/2) over the unit square
    st_ = cell_stats(Potential.energy(1.0, beta), cell2, 1024)
    assert st_.v_mean == pytest.approx(expected, rel=1e-5)
    assert st_.v_min == 0.0
    assert st_.v_max == pytest.approx(0.5**beta * 2 ** (beta / 2))


def test_cell_mean_1d(cell1):
    st_ = cell_stats(Potential.energy(1.0, 4.0), cell1, 4096)
    assert st_.v_mean == pytest.approx(1.0 / 80.0, rel=1e-6)
    assert st_.v_max == 1.0 / 16.0


def test_constant_stats(cell2):
    st_ = cell_stats(Potential.constant(3.5), cell2)
    assert (st_.v_min, st_.v_max, st_.v_mean) == (3.5, 3.5, 3.5)


def test_custom_bound_enforced(cell2):
    pot = Potential.custom(lambda p: np.abs(p[..., 0]), v_max=0.1)
    with pytest.raises(DomainError):
        cell_stats(pot, cell2, 64)
    ok = Potential.custom(lambda p: np.abs(p[..., 0]), v_max=0.5)
    assert cell_stats(ok, cell2, 64).v_max == 0.5


@pytest.mark.parametrize("kwargs", [dict(beta=0.0), dict(beta=-1.0), dict(gamma=-1.0)])
def test_bad_energy_params(kwargs):
    with pytest.raises(ConfigError):
        Potential.energy(**{"gamma": 1.0, "beta": 4.0, **kwargs})


def test_bad_geometry():
    with pytest.raises(ConfigError):
        CellGeometry(3, 1.0)
    with pytest.raises(ConfigError):
        CellGeometry(2, 0.0)


def test_midpoints_order():
    pts = midpoints(CellGeometry(2, 1.0), 4)
    assert pts.shape == (16, 2)
    # first coordinate varies slowest
    assert np.all(pts[:4, 0] == pts[0, 0])
    assert np.allclose(pts[:4, 1], [-0.375, -0.125, 0.125, 0.375])


coords = st.floats(-0.5, 0.5, allow_nan=False)


@given(x=coords, y=coords)
def test_energy_symmetric(x, y):
    pot = Potential.energy(1.0, 4.0)
    pts = np.array([[x, y], [-x, y], [x, -y], [y, x]])
    vals = pot(pts)
    assert np.allclose(vals, vals[0], rtol=1e-14, atol=0)


@given(r1=st.floats(0.0, 0.7), r2=st.floats(0.0, 0.7), beta=st.floats(0.5, 6.0))
def test_radial_monotonicity(r1, r2, beta):
    lo, hi = sorted((r1, r2))
    e = Potential.energy(1.0, beta)
    t = Potential.throughput(beta=beta)
    pts = np.array([[lo, 0.0], [hi, 0.0]])
    ev, tv = e(pts), t(pts)
    assert ev[0] <= ev[1]
    assert tv[0] >= tv[1]
    assert tv.min() >= 0 and tv.max() <= t.rate_cap
