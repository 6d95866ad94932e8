"""Shared fixtures for the test suite."""
import pytest

from wkstab.geometry import half_line, orthant_shifted
from wkstab.weights import Weight, soliton_weight_w


@pytest.fixture
def flat_1d():
    """The flat half-line model: P = [-1, inf), v = e^{-x}, w = 2(1-x)e^{-x}."""
    P = half_line(-1)
    v = Weight.exponential([1])
    return P, v, soliton_weight_w(v)


@pytest.fixture
def flat_2d():
    P = orthant_shifted(2)
    v = Weight.exponential([1, 1])
    return P, v, soliton_weight_w(v)
