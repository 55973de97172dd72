import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvmp.exceptions import DataError
from cvmp.model import (ComplexImageSeries, DesignPair, PolarCoefficients,
                        arctan4, build_design, phase_basis, polar_mean,
                        wrap_angle)
from cvmp.simulate import default_design

from oracles import dense_mean

finite = st.floats(-10, 10, allow_nan=False)


def ramp(T=8):
    return build_design(np.linspace(0, 1, T))


def test_phase_basis_masked_slope():
    d = ramp()
    a = phase_basis([np.pi / 4, 123.0], 0, d)
    assert np.allclose(a, np.sqrt(2) / 2, atol=1e-15)


def test_phase_basis_zero():
    d = ramp()
    a = phase_basis([0.0, 0.0], 1, d)
    assert np.all(a[:8] == 1) and np.all(a[8:] == 0)


def test_phase_basis_scalar_oracle():
    d = build_design(np.linspace(0, 1, 6), np.ones(6))
    a = phase_basis([np.pi / 4, np.pi / 36], 1, d)
    angle = np.pi / 4 + np.pi / 36
    for t in range(6):
        assert a[t] == pytest.approx(np.cos(angle), abs=1e-15)
        assert a[6 + t] == pytest.approx(np.sin(angle), abs=1e-15)


def test_phase_basis_rejects_nonfinite():
    with pytest.raises(DataError, match="invalid phase coefficients"):
        phase_basis([np.nan, 0.0], 1, ramp())


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.integers(0, 1),
       st.lists(finite, min_size=2, max_size=16))
def test_phase_basis_unit_circle(g0, g1, omega, u):
    u = np.asarray(u)
    d = DesignPair(np.arange(u.size, dtype=float), u)
    a = phase_basis([g0, g1], omega, d)
    T = u.size
    assert np.allclose(a[:T] ** 2 + a[T:] ** 2, 1.0, atol=1e-12)


def test_polar_mean_examples():
    d = ramp()
    m = polar_mean([1.0, 0.0], 0, [0.0, 0.0], 0, d)
    assert np.array_equal(m, np.r_[np.ones(8), np.zeros(8)])
    assert np.all(polar_mean([0.0, 0.0], 1, [0.3, 0.2], 1, d) == 0)
    args = ([0.4909, 0.04909], 1, [np.pi / 4, np.pi / 36], 1, d)
    assert np.allclose(polar_mean(*args), dense_mean(*args), rtol=1e-12,
                       atol=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2 ** 32 - 1), st.integers(0, 1),
       st.integers(0, 1))
def test_polar_mean_matches_dense(T, seed, lam, omega):
    rng = np.random.default_rng(seed)
    d = DesignPair(rng.normal(size=T), rng.normal(size=T))
    beta, gamma = rng.normal(size=2), rng.normal(size=2)
    fast = polar_mean(beta, lam, gamma, omega, d)
    dense = dense_mean(beta, lam, gamma, omega, d)
    assert np.allclose(fast, dense, rtol=1e-12, atol=1e-14)


def test_polar_mean_shape_error():
    with pytest.raises(DataError):
        polar_mean([1.0, 2.0, 3.0], 1, [0.0, 0.0], 1, ramp())


def test_arctan4_examples():
    assert arctan4(0, 1) == 0
    assert arctan4(1, 0) == pytest.approx(np.pi / 2)
    assert arctan4(-1, -1) == pytest.approx(-3 * np.pi / 4)
    assert arctan4(0.0, -1.0) == pytest.approx(np.pi)
    assert arctan4(-0.0, -1.0) == pytest.approx(np.pi)
    with pytest.raises(DataError, match="undefined angle"):
        arctan4(0, 0)


def test_arctan4_inverts_trig():
    theta = np.linspace(-np.pi, np.pi, 2001)[1:]
    assert np.allclose(arctan4(np.sin(theta), np.cos(theta)), theta,
                       atol=1e-12)


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_angle_range(theta):
    w = wrap_angle(theta)
    assert -np.pi < w <= np.pi
    assert np.isclose(np.cos(w), np.cos(theta), atol=1e-9)


def test_build_design():
    d = default_design()
    assert np.array_equal(d.u, d.x)
    assert d.X.shape == (200, 2) and d.U.shape == (200, 2)
    d2 = build_design(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert np.array_equal(d2.U[:, 1], [1.0, 0.0])
    with pytest.raises(DataError, match="rank-deficient"):
        build_design(np.ones(5))


def test_polar_coefficients_wrap_gamma0():
    c = PolarCoefficients(1.0, 0.1, 3 * np.pi, 0.2)
    assert c.gamma0 == pytest.approx(np.pi)
    with pytest.raises(DataError):
        PolarCoefficients(np.inf, 0, 0, 0)


def test_series_masking_and_grid():
    mask = np.array([[True, False], [True, True]])
    data = ComplexImageSeries(np.ones((3, 4)), np.zeros((3, 4)), (2, 2),
                              mask)
    assert data.n_voxels == 3 and data.n_times == 4
    assert data.voxel_coords().tolist() == [[0, 0], [1, 0], [1, 1]]
    grid = data.to_grid(np.array([1.0, 2.0, 3.0]))
    assert grid.tolist() == [[1.0, 0.0], [2.0, 3.0]]
    with pytest.raises(DataError):
        ComplexImageSeries(np.ones((3, 4)), np.zeros((3, 4)), (2, 2))
