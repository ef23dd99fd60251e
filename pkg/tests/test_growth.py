import numpy as np
import pytest
from hypothesis import given, strategies as st

from lenialab.growth import growth, growth_and_dgrowth, obstacle_growth


def test_growth_peak_exact():
    assert growth(0.3, 0.3, 0.05) == 1.0


def test_growth_far_tail():
    mu, sigma = 0.2, 0.03
    assert growth(mu + 10 * sigma, mu, sigma) == pytest.approx(-1.0, abs=1e-9)


def test_growth_reference_value():
    # 2*exp(-0.5) - 1 for u one sigma away.
    assert growth(0.4, 0.3, 0.1) == pytest.approx(2 * np.exp(-0.5) - 1,
                                                  abs=1e-6)


@given(st.floats(0.05, 0.5), st.floats(0.001, 0.18),
       st.floats(-2.0, 3.0))
def test_growth_range(mu, sigma, u):
    g = float(growth(u, mu, sigma))
    assert -1.0 <= g <= 1.0
    assert g > -1.0 or u != mu


@given(st.floats(0.05, 0.5), st.floats(0.001, 0.18))
def test_growth_peak_property(mu, sigma):
    assert growth(mu, mu, sigma) == 1.0


def test_obstacle_growth_values():
    assert obstacle_growth(0.0) == 0.0
    assert obstacle_growth(1.0) == pytest.approx(-10.0, abs=1e-6)
    assert obstacle_growth(0.5) == pytest.approx(-5.0 + 1e-7, abs=1e-6)
    # saturates at full strength
    assert obstacle_growth(2.0) == pytest.approx(-10.0)


def test_dgrowth_matches_finite_difference():
    u = np.linspace(0, 1, 11)
    mu, sigma = 0.3, 0.08
    _, dg = growth_and_dgrowth(u, mu, sigma)
    h = 1e-6
    fd = (growth(u + h, mu, sigma) - growth(u - h, mu, sigma)) / (2 * h)
    assert np.allclose(dg, fd, atol=1e-6)
