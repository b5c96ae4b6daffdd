"""Three-excitation solver against ED momentum sectors and structural checks."""

import numpy as np
import pytest

from qebath import ed
from qebath.array_pair import scan_doublon_band
from qebath.bath import BathSpec, CouplingSpec
from qebath.single_excitation import polariton_bands
from qebath.triplon import (
    TriplonBand,
    TriplonSolver,
    residue_and_wavefunctions,
    scan_triplon_band,
    three_excitation_continua,
    triplon_energy,
    triplon_hoppings,
    triplon_midgap,
)

from _edstates import momentum_state_vector


def _setup(delta, omega, nb):
    bath = BathSpec(1.0, nb, spacing=1)
    spec = polariton_bands(bath, CouplingSpec(delta, omega), nb)
    band2 = scan_doublon_band(spec)
    return bath, spec, band2


def test_continua_free_photon_limit():
    # photon band lowest when the emitter level sits far above it; the free
    # three-photon convolution spans [0, 12J] over the Brillouin zone
    _, spec, band2 = _setup(5.0, 0.0, 8)
    intervals = [three_excitation_continua(spec, band2, q) for q in range(8)]
    lo = min(c3[0] for c3, _ in intervals)
    hi = max(c3[1] for c3, _ in intervals)
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi == pytest.approx(12.0, abs=1e-12)
    assert all(cpd is None for _, cpd in intervals)


def test_no_triplon_without_coupling():
    _, spec, band2 = _setup(-1.0, 0.0, 6)
    band3 = scan_triplon_band(spec, band2)
    assert not np.any(band3.defined)


def test_midgap_opens_only_at_strong_coupling():
    _, spec1, b21 = _setup(0.0, 1.0, 6)
    assert triplon_midgap(spec1, b21, 0) is None
    _, spec5, b25 = _setup(0.0, 5.0, 6)
    window = triplon_midgap(spec5, b25, 0)
    assert window is not None and window[1] - window[0] > 0.5


def test_continua_symmetric_in_q():
    _, spec, band2 = _setup(0.0, 5.0, 6)
    for q in range(6):
        a = three_excitation_continua(spec, band2, q)
        b = three_excitation_continua(spec, band2, (-q) % 6)
        assert np.allclose(a[0], b[0], atol=1e-12)
        assert np.allclose(a[1], b[1], atol=1e-12)


def test_m_matrix_finite_and_q_reflection():
    _, spec, band2 = _setup(0.0, 5.0, 6)
    solver = TriplonSolver(spec)
    window = triplon_midgap(spec, band2, 1)
    e = 0.5 * (window[0] + window[1])
    m1 = solver.m_matrix(1, e).matrix
    m2 = solver.m_matrix(5, e).matrix
    assert np.all(np.isfinite(m1))
    ev1 = np.sort(np.linalg.eigvals(m1))
    ev2 = np.sort(np.linalg.eigvals(m2))
    assert np.max(np.abs(ev1 - ev2)) < 1e-9


@pytest.mark.parametrize("omega", [5.0, 6.0])
def test_triplon_band_exists_and_matches_ed(omega):
    bath, spec, band2 = _setup(0.0, omega, 6)
    coupling = CouplingSpec(0.0, omega)
    band3 = scan_triplon_band(spec, band2)
    assert np.all(band3.defined)
    for q in range(6):
        rep = ed.sector_spectrum(ed.build_sector(6, 1, 3, cap=3, momentum=q), bath, coupling)
        assert np.min(np.abs(rep.eigenvalues - band3.energies[q])) < 1e-5
        lo, hi = triplon_midgap(spec, band2, q)
        assert lo + 1e-9 < band3.energies[q] < hi - 1e-9


def test_triplon_absent_at_weak_coupling():
    _, spec, band2 = _setup(0.0, 1.0, 6)
    band3 = scan_triplon_band(spec, band2)
    assert not np.any(band3.defined)


def test_singular_value_residual_at_root():
    _, spec, band2 = _setup(0.0, 5.0, 6)
    solver = TriplonSolver(spec)
    e3b, null = triplon_energy(solver, band2, 0)
    mm = solver.m_matrix(0, e3b)
    assert mm.smallest_singular_value() < 1e-8
    dim = mm.matrix.shape[0]
    resid = (mm.matrix - np.eye(dim)) @ null.ravel()
    assert np.max(np.abs(resid)) < 1e-7


def test_band_reflection_symmetry_and_hopping_decay():
    _, spec, band2 = _setup(0.0, 5.0, 24)
    band3 = scan_triplon_band(spec, band2)
    assert np.all(band3.defined)
    assert np.max(np.abs(band3.energies[1:] - band3.energies[1:][::-1])) < 1e-10
    t = triplon_hoppings(band3)
    assert abs(t[1]) > abs(t[2]) > abs(t[3])
    assert np.max(np.abs(np.fft.fft(t).real - band3.energies)) < 1e-10


def test_flat_band_hoppings_trivial():
    _, spec, _ = _setup(0.0, 5.0, 8)
    synthetic = TriplonBand(spec=spec, energies=np.full(8, -9.7), continua=[None] * 8)
    t = triplon_hoppings(synthetic)
    assert t[0] == pytest.approx(-9.7)
    assert np.max(np.abs(t[1:])) == 0.0


def test_wavefunctions_match_ed_eigenvector():
    bath, spec, band2 = _setup(0.0, 5.0, 6)
    coupling = CouplingSpec(0.0, 5.0)
    solver = TriplonSolver(spec)
    basis = ed.build_sector(6, 1, 3, cap=3)
    rep = ed.sector_spectrum(basis, bath, coupling, eigenvectors=True)
    ks = 2.0 * np.pi * np.arange(6) / 6
    for q in (0, 2):
        e3b, null = triplon_energy(solver, band2, q)
        wf = residue_and_wavefunctions(spec, band2, q, e3b, null, solver=solver)
        terms = []
        for m1 in range(6):
            for m2 in range(6):
                m3 = (q - m1 - m2) % 6
                k1, k2, k3 = ks[m1], ks[m2], ks[m3]
                terms.append((wf.f_b[m1, m2], [("b", k1), ("b", k2), ("b", k3)]))
                terms.append((wf.f_bba[m1, m2, 0], [("b", k1), ("b", k2), ("a", k3)]))
                terms.append((wf.f_baa[m1, m2, 0, 0], [("b", k1), ("a", k2), ("a", k3)]))
                terms.append((wf.f_a[m1, m2, 0, 0, 0], [("a", k1), ("a", k2), ("a", k3)]))
        vec = momentum_state_vector(terms, basis)
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-5)
        assert ed.overlap_with_eigenspace(rep, vec, e3b) > 0.98


def test_wavefunction_permutation_symmetry():
    _, spec, band2 = _setup(0.0, 5.0, 6)
    solver = TriplonSolver(spec)
    e3b, null = triplon_energy(solver, band2, 0)
    wf = residue_and_wavefunctions(spec, band2, 0, e3b, null, solver=solver)
    assert np.max(np.abs(wf.f_b - wf.f_b.T)) < 1e-12
    # exchanging the two photon slots of f_baa maps (m2,K2),(m3,K3)
    for m1 in range(6):
        for m2 in range(6):
            m3 = (0 - m1 - m2) % 6
            assert wf.f_baa[m1, m2, 0, 0] == pytest.approx(wf.f_baa[m1, m3, 0, 0], abs=1e-12)


def test_real_space_localization():
    _, spec, band2 = _setup(0.0, 5.0, 12)
    solver = TriplonSolver(spec)
    e3b, null = triplon_energy(solver, band2, 0)
    wf = residue_and_wavefunctions(spec, band2, 0, e3b, null, solver=solver)
    for arr, axes in ((wf.f_b, (0, 1)), (wf.f_bba[:, :, 0], (0, 1)), (wf.f_baa[:, :, 0, 0], (0, 1)), (wf.f_a[:, :, 0, 0, 0], (0, 1))):
        amp = np.fft.ifft2(arr) * 12
        dens = np.abs(amp) ** 2
        dens /= dens.sum()
        prof = dens.sum(axis=1)
        central = prof[:3].sum() + prof[-2:].sum()
        assert central > 0.9
