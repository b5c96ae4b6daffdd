"""Exact-diagonalization oracle self-checks: counting, symmetries, decoupled limits."""

import numpy as np
import pytest

from qebath.bath import BathSpec, CouplingSpec
from qebath.ed import (
    SectorTooLarge,
    _apply_hamiltonian,
    build_sector,
    compare,
    sector_hamiltonian,
    sector_spectrum,
    two_qe_sector,
)


def test_dimension_counting():
    assert build_sector(2, 2, 1, cap=1).dimension == 6  # 2 emitters + 4 photon sites
    assert build_sector(1, 2, 2, cap=2).dimension == 5
    assert build_sector(8, 1, 3, cap=3).dimension == 688


def test_sector_too_large():
    with pytest.raises(SectorTooLarge):
        build_sector(20, 2, 10, cap=10)


def test_decoupled_single_excitation_spectrum():
    bath = BathSpec(1.0, 8)
    coupling = CouplingSpec(-1.5, 0.0)
    rep = sector_spectrum(build_sector(4, 2, 1, cap=1), bath, coupling)
    eps = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(8) / 8))
    expect = np.sort(np.concatenate([[-1.5] * 4, eps]))
    assert np.max(np.abs(np.sort(rep.eigenvalues) - expect)) < 1e-12


def test_hamiltonian_stays_in_sector():
    # constructional [H, N_exc] = 0: every image config conserves the total
    basis = build_sector(3, 2, 2, cap=2)
    bath = BathSpec(1.0, 6)
    coupling = CouplingSpec(0.3, 0.9)
    rng = np.random.default_rng(3)
    for idx in rng.integers(0, basis.dimension, size=12):
        em, ph = basis.configs[idx]
        for (em2, ph2), _ in _apply_hamiltonian(basis, bath, coupling, (em, ph)):
            assert sum(em2) + sum(ph2) == basis.n_exc
            assert (em2, ph2) in basis.index


def test_hermiticity_residual():
    basis = build_sector(4, 1, 2, cap=2)
    h = sector_hamiltonian(basis, BathSpec(1.0, 4), CouplingSpec(0.2, 1.1)).toarray()
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_momentum_sectors_tile_full_spectrum():
    bath = BathSpec(1.0, 8)
    coupling = CouplingSpec(0.5, 0.7)
    full = np.sort(sector_spectrum(build_sector(8, 1, 2, cap=2), bath, coupling).eigenvalues)
    per_q = np.sort(
        np.concatenate(
            [
                sector_spectrum(build_sector(8, 1, 2, cap=2, momentum=q), bath, coupling).eigenvalues
                for q in range(8)
            ]
        )
    )
    assert np.max(np.abs(full - per_q)) < 1e-10


def test_momentum_reflection_symmetry():
    bath = BathSpec(1.0, 8)
    coupling = CouplingSpec(0.5, 0.7)
    e_q = sector_spectrum(build_sector(8, 1, 2, cap=2, momentum=3), bath, coupling).eigenvalues
    e_mq = sector_spectrum(build_sector(8, 1, 2, cap=2, momentum=5), bath, coupling).eigenvalues
    assert np.max(np.abs(e_q - e_mq)) < 1e-10


def test_single_emitter_bound_state_large_lattice():
    # closed-form oracle: E = -x with x^3 (x + 4) = 1
    from scipy.optimize import brentq

    x = brentq(lambda t: t**3 * (t + 4.0) - 1.0, 0.1, 1.0, xtol=1e-15)
    bath = BathSpec(1.0, 256)
    basis = build_sector(1, 256, 1, cap=1)
    rep = sector_spectrum(basis, bath, CouplingSpec(0.0, 1.0), m=1)
    assert rep.eigenvalues[0] == pytest.approx(-x, abs=1e-10)


def test_compare_table():
    bath = BathSpec(1.0, 6)
    coupling = CouplingSpec(-1.0, 0.5)
    rep = sector_spectrum(two_qe_sector(6, 1, 1), bath, coupling)
    rows = compare(rep.eigenvalues[:3], rep, tolerance=0.0)
    assert all(r.passed for r in rows)
    rows = compare(rep.eigenvalues[:3] + 1e-6, rep, tolerance=1e-8)
    assert not any(r.passed for r in rows)


def test_two_qe_layout_positions():
    basis = two_qe_sector(10, 3, 1)
    assert basis.qe_positions == (0, 3)
    assert basis.dimension == 12
    with pytest.raises(ValueError):
        build_sector(2, 1, 1, cap=1, momentum=0, qe_positions=(0, 3), n_sites=10)
