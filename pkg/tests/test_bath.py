"""Bath dispersion and self-energy checks against independent sums and quadrature."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qebath.bath import (
    ABOVE_BAND,
    BELOW_BAND,
    IN_BAND_RETARDED,
    BathSpec,
    CouplingSpec,
    InBandError,
    decaying_root,
    dispersion,
    lattice_greens_derivative,
    lattice_greens_point,
    markovian_vdd,
    markovian_vdd_quadrature,
    self_energy_diag,
    self_energy_offdiag,
)

BATH_CONT = BathSpec(1.0, None)


def test_dispersion_band_edges():
    assert dispersion(BATH_CONT, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert dispersion(BATH_CONT, np.pi) == pytest.approx(4.0, abs=1e-15)
    assert dispersion(BATH_CONT, np.pi / 2) == pytest.approx(2.0, abs=1e-15)


@given(k=st.floats(min_value=0.0, max_value=2.0 * np.pi))
def test_dispersion_parity(k):
    assert dispersion(BATH_CONT, k) == pytest.approx(dispersion(BATH_CONT, 2.0 * np.pi - k), abs=1e-12)


def test_dispersion_range_on_grid():
    bath = BathSpec(1.0, 64)
    eps = dispersion(bath, bath.momenta())
    assert eps.min() == pytest.approx(0.0, abs=1e-15)
    assert eps.max() <= 4.0 + 1e-15


def test_sigma_d_zero_coupling():
    val = self_energy_diag(BATH_CONT, CouplingSpec(-1.0, 0.0), -1.0)
    assert val.value == 0.0
    assert val.branch == BELOW_BAND


def test_sigma_d_closed_form_value():
    # -Omega^2 / sqrt(omega (omega - 4J)) at omega = -1 is -1/sqrt(5)
    val = self_energy_diag(BATH_CONT, CouplingSpec(0.0, 1.0), -1.0)
    assert val.value.imag == 0.0
    assert val.value.real == pytest.approx(-1.0 / np.sqrt(5.0), abs=1e-14)


def test_sigma_d_finite_n8_explicit_sum():
    bath = BathSpec(1.0, 8)
    coupling = CouplingSpec(0.0, 1.0)
    k = 2.0 * np.pi * np.arange(8) / 8
    expected = np.mean(1.0 / (-1.0 - (2.0 - 2.0 * np.cos(k))))
    val = self_energy_diag(bath, coupling, -1.0)
    assert val.value.real == pytest.approx(expected, abs=1e-15)


def test_sigma_closed_forms_match_finite_sums():
    # continuum expressions agree with direct N=4096 sums to 1e-6
    rng = np.random.default_rng(7)
    bath = BathSpec(1.0, 4096)
    coupling = CouplingSpec(0.0, 1.3)
    for _ in range(20):
        omega = -float(rng.uniform(0.05, 12.0))
        d = int(rng.integers(0, 6))
        cont = self_energy_offdiag(BATH_CONT, coupling, omega, d).value
        fin = self_energy_offdiag(bath, coupling, omega, d).value
        assert abs(cont - fin) < 1e-6


def test_sigma_o_reduces_to_diag_at_d0():
    coupling = CouplingSpec(0.5, 0.8)
    for omega in (-2.0, 5.5):
        a = self_energy_offdiag(BATH_CONT, coupling, omega, 0).value
        b = self_energy_diag(BATH_CONT, coupling, omega).value
        assert a == pytest.approx(b, rel=1e-14)


def test_sigma_o_contour_equals_decaying_root_power():
    coupling = CouplingSpec(0.0, 1.0)
    omega, d = -1.0, 3
    x = decaying_root(1.0, omega)
    assert abs(x) < 1.0
    sd = self_energy_diag(BATH_CONT, coupling, omega).value.real
    so = self_energy_offdiag(BATH_CONT, coupling, omega, d).value.real
    assert so == pytest.approx(sd * x**d, rel=1e-12)


def test_sigma_d_monotone_and_negative_below_band():
    # Sigma_d' = -(Omega^2/N) sum 1/(omega-eps)^2 < 0: strictly decreasing and
    # negative on (-inf, 0), which keeps the secular function omega - Delta -
    # Sigma monotone increasing (the pole-free bisection guarantee).
    coupling = CouplingSpec(0.0, 1.0)
    grid = -np.geomspace(30.0, 1e-4, 100)  # ascending toward the band edge
    vals = np.array([self_energy_diag(BATH_CONT, coupling, w).value.real for w in grid])
    assert np.all(vals < 0.0)
    assert np.all(np.diff(vals) < 0.0)


@given(
    omega=st.floats(min_value=-20.0, max_value=-0.01),
    d=st.integers(min_value=0, max_value=8),
)
@settings(max_examples=60, deadline=None)
def test_offdiag_bounded_by_diag(omega, d):
    coupling = CouplingSpec(0.0, 1.0)
    so = abs(self_energy_offdiag(BATH_CONT, coupling, omega, d).value)
    sd = abs(self_energy_diag(BATH_CONT, coupling, omega).value)
    assert so <= sd * (1.0 + 1e-12)


def test_branches_and_in_band_error():
    coupling = CouplingSpec(0.0, 1.0)
    assert self_energy_diag(BATH_CONT, coupling, -0.5).branch == BELOW_BAND
    assert self_energy_diag(BATH_CONT, coupling, 4.5).branch == ABOVE_BAND
    with pytest.raises(InBandError):
        self_energy_diag(BATH_CONT, coupling, 2.0)
    with pytest.raises(InBandError):
        self_energy_offdiag(BathSpec(1.0, 64), coupling, 1.0, 2)


def test_retarded_in_band_continuum():
    # at band center the retarded value is -i Omega^2 / sqrt(omega (4J - omega))
    val = self_energy_diag(BATH_CONT, CouplingSpec(0.0, 1.0), 2.0, branch=IN_BAND_RETARDED)
    assert val.branch == IN_BAND_RETARDED
    assert val.value.imag <= 0.0
    assert val.value == pytest.approx(-0.5j, abs=1e-9)


def test_lattice_greens_derivative_matches_finite_difference():
    h = 1e-6
    for omega in (-1.7, 6.2):
        num = (lattice_greens_point(1.0, omega + h, 3) - lattice_greens_point(1.0, omega - h, 3)) / (2 * h)
        ana = lattice_greens_derivative(1.0, omega, 3)
        assert ana == pytest.approx(num, rel=1e-7)


def test_markovian_vdd_trivials():
    # e^{-1/xi} = J/|Delta|, so d=1 gives -Omega^2 J / Delta^2
    assert markovian_vdd(1.0, -10.0, 1.0, 1) == pytest.approx(-0.01, rel=1e-12)
    assert markovian_vdd(1.0, -3.0, 0.7, 0) == pytest.approx(-(0.7**2) / 3.0, rel=1e-12)


def test_markovian_vdd_rejects_positive_detuning():
    with pytest.raises(ValueError):
        markovian_vdd(1.0, 0.5, 1.0, 1)
    with pytest.raises(ValueError):
        markovian_vdd_quadrature(1.0, 0.0, 1.0, 1)


def test_vdd_quadrature_against_midpoint_oracle():
    # independent oracle: midpoint rule with 2^20 points
    j, delta, om, d = 1.0, -5.0, 0.5, 2
    n = 1 << 20
    k = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    oracle = om**2 * np.mean(np.cos(k * d) / (delta - 2.0 * j * (1.0 - np.cos(k))))
    assert oracle == pytest.approx(-0.0007932911874176, abs=1e-12)
    assert markovian_vdd_quadrature(j, delta, om, d) == pytest.approx(oracle, abs=1e-8)
    # the contour closed form agrees too
    contour = om**2 * lattice_greens_point(j, delta, d).real
    assert contour == pytest.approx(oracle, abs=1e-10)


def test_bathspec_validation():
    with pytest.raises(ValueError):
        BathSpec(0.0, 64)
    with pytest.raises(ValueError):
        BathSpec(1.0, 3)
    with pytest.raises(ValueError):
        CouplingSpec(0.0, -0.1)
