"""Two-excitation pair solver against ED: poles, residues, ansatz fidelity."""

import numpy as np
import pytest

from qebath import ed
from qebath.bath import BathSpec, CouplingSpec
from qebath.single_excitation import _finite_channel_spectrum, solve_two_qe
from qebath.two_qe_pair import (
    DegenerateResidue,
    PairChannelT,
    PairPole,
    bound_pair_weight,
    delta_eg,
    doublon_hopping_two_qe,
    pair_wavefunctions,
    solve_pair_poles,
    spin_model_parameters,
    variational_ground_state,
)


def _ed_vector(wf, basis, n):
    """Analytic pair state written in the ED occupation basis."""
    v = np.zeros(basis.dimension, dtype=complex)
    for i, (em, ph) in enumerate(basis.configs):
        if em == (1, 1):
            v[i] = wf.amp_qe
        elif sum(em) == 1:
            j = 0 if em[0] == 1 else 1
            site = next(s for s in range(n) if ph[s] == 1)
            v[i] = wf.phi1[j, site]
        else:
            occ = [s for s in range(n) if ph[s] > 0]
            if len(occ) == 1:
                v[i] = np.sqrt(2.0) * wf.phi2[occ[0], occ[0]]
            else:
                v[i] = 2.0 * wf.phi2[occ[0], occ[1]]
    return v


def test_channel_t_decoupled_limit():
    # Omega=0: only the emitter level at Delta contributes, bracket = 1/(w - 2 Delta)
    bath = BathSpec(1.0, 16)
    coupling = CouplingSpec(-1.0, 0.0)
    spectra = {s: _finite_channel_spectrum(bath, coupling, 1, s) for s in (+1, -1)}
    for s in (+1, -1):
        chan = PairChannelT.from_spectra(spectra, s)
        for w in (-3.0, -2.5):
            assert chan.bracket(w) == pytest.approx(1.0 / (w - 2.0 * coupling.delta), rel=1e-12)
            assert chan(w) == pytest.approx(-(w - 2.0 * coupling.delta), rel=1e-12)


def test_channel_relabel_symmetry():
    bath = BathSpec(1.0, 32)
    st = solve_two_qe(bath, CouplingSpec(-0.5, 0.8), 2)
    swapped = {+1: st.spectra[-1], -1: st.spectra[+1]}
    for s in (+1, -1):
        a = PairChannelT.from_spectra(st.spectra, s)
        b = PairChannelT.from_spectra(swapped, s)
        for w in (-4.3, -2.1):
            assert a.bracket(w) == pytest.approx(b.bracket(w), rel=1e-12)


def test_pole_hit_refusal():
    bath = BathSpec(1.0, 16)
    st = solve_two_qe(bath, CouplingSpec(-1.0, 1.0), 1)
    chan = PairChannelT.from_spectra(st.spectra, +1)
    with pytest.raises(Exception):
        chan(float(chan.pair_energies[0]))


@pytest.mark.parametrize("d", [1, 2])
def test_pair_levels_match_ed(d):
    bath = BathSpec(1.0, 10)
    coupling = CouplingSpec(-1.0, 1.0)
    spec = solve_pair_poles(bath, coupling, d)
    rep = ed.sector_spectrum(ed.two_qe_sector(10, d, 2), bath, coupling)
    assert np.min(np.abs(rep.eigenvalues - spec.e_ground)) < 1e-8
    for pole in (spec.doublon_plus, spec.doublon_minus):
        if pole is not None:
            assert np.min(np.abs(rep.eigenvalues - pole.energy)) < 1e-8


def test_fig5_point_has_both_doublons():
    bath = BathSpec(1.0, 1024)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 2)
    assert spec.e_doublon_plus is not None
    assert spec.e_doublon_minus is not None
    assert spec.e_ground < spec.e_doublon_plus
    assert spec.e_ground < spec.e_doublon_minus


def test_bracket_residuals_small():
    bath = BathSpec(1.0, 256)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 2)
    for pole in (spec.ground, spec.doublon_plus, spec.doublon_minus):
        assert abs(spec.channels[pole.s].bracket(pole.energy)) < 1e-12


def test_arc_ground_state_is_noninteracting():
    spec = solve_pair_poles(BathSpec(1.0, 1024), CouplingSpec(-3.0, 0.3), 2)
    assert abs(delta_eg(spec)) < 1e-3


def test_wavefunction_norm_closure_and_ed_overlap():
    bath = BathSpec(1.0, 10)
    coupling = CouplingSpec(-1.0, 2.0)
    spec = solve_pair_poles(bath, coupling, 2)
    basis = ed.two_qe_sector(10, 2, 2)
    rep = ed.sector_spectrum(basis, bath, coupling, eigenvectors=True)
    for pole in (spec.ground, spec.doublon_plus, spec.doublon_minus):
        wf = pair_wavefunctions(spec, pole)
        assert wf.norm == pytest.approx(1.0, abs=1e-8)
        vec = _ed_vector(wf, basis, 10)
        assert ed.overlap_with_eigenspace(rep, vec, pole.energy) > 0.999
        assert np.max(np.abs(wf.phi2_k - wf.phi2_k.T)) < 1e-12


def test_wavefunction_mirror_parity():
    bath = BathSpec(1.0, 12)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 2)
    for pole, sign in ((spec.ground, +1), (spec.doublon_plus, +1), (spec.doublon_minus, -1)):
        wf = pair_wavefunctions(spec, pole)
        mirror = np.array([wf.phi1[1, (2 - n) % 12] for n in range(12)])
        assert np.max(np.abs(wf.phi1[0] - sign * mirror)) < 1e-10


def test_ground_state_repulsion_profile():
    # in the emitter-dominated regime the two photons sit near distinct emitters
    bath = BathSpec(1.0, 64)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 1.0), 2)
    wf = pair_wavefunctions(spec, spec.ground)
    dens = np.abs(wf.phi2) ** 2
    same_site = dens[0, 0] + dens[2, 2]
    split = dens[0, 2] + dens[2, 0]
    assert split > same_site


def test_degenerate_residue_refusal():
    bath = BathSpec(1.0, 16)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 2)
    chan = spec.channels[+1]
    fake = PairPole(s=+1, energy=float(chan.pair_energies[3]) + 1e-12, z0=1.0, amp_qe=0.5)
    with pytest.raises(DegenerateResidue):
        pair_wavefunctions(spec, fake)


def test_doublon_hopping_and_distance_decay():
    bath = BathSpec(1.0, 1024)
    spec2 = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 2)
    mu, td2 = doublon_hopping_two_qe(spec2)
    assert mu == pytest.approx(0.5 * (spec2.e_doublon_plus + spec2.e_doublon_minus))
    assert td2 == pytest.approx(0.5 * (spec2.e_doublon_plus - spec2.e_doublon_minus))
    # splitting shrinks as the separation grows (where both poles exist)
    spec3 = solve_pair_poles(bath, CouplingSpec(-1.0, 2.0), 3)
    _, td3 = doublon_hopping_two_qe(spec3)
    assert abs(td3) < abs(td2)
    spec1 = solve_pair_poles(bath, CouplingSpec(-1.0, 4.0), 1)
    specw = solve_pair_poles(bath, CouplingSpec(-1.0, 4.0), 2)
    _, td1 = doublon_hopping_two_qe(spec1)
    _, tdw = doublon_hopping_two_qe(specw)
    assert abs(tdw) < abs(td1)


def test_doublon_hopping_requires_both_poles():
    bath = BathSpec(1.0, 256)
    spec = solve_pair_poles(bath, CouplingSpec(-1.0, 1.0), 1)  # merged at these parameters
    assert spec.doublon_plus is None and spec.doublon_minus is None
    with pytest.raises(RuntimeError):
        doublon_hopping_two_qe(spec)


def test_doublon_splitting_matches_ed_splitting():
    bath = BathSpec(1.0, 10)
    coupling = CouplingSpec(-1.0, 2.0)
    spec = solve_pair_poles(bath, coupling, 2)
    rep = ed.sector_spectrum(ed.two_qe_sector(10, 2, 2), bath, coupling)
    _, td = doublon_hopping_two_qe(spec)
    ip = int(np.argmin(np.abs(rep.eigenvalues - spec.e_doublon_plus)))
    im = int(np.argmin(np.abs(rep.eigenvalues - spec.e_doublon_minus)))
    ed_split = 0.5 * (rep.eigenvalues[ip] - rep.eigenvalues[im])
    assert td == pytest.approx(ed_split, abs=1e-8)


def test_variational_fidelity_sample():
    bath = BathSpec(1.0, 256)
    for delta in (-2.0, 0.5, 2.5):
        for om in (0.5, 1.7):
            coupling = CouplingSpec(delta, om)
            spec = solve_pair_poles(bath, coupling, 1)
            vs = variational_ground_state(bath, coupling, 1, spectrum=spec)
            assert vs.energy >= spec.e_ground - 1e-9  # variational upper bound
            assert vs.overlap_pv > 0.98
            p, sym_only = bound_pair_weight(spec)
            assert sym_only == (delta > om**2 / 2.0)
            if not sym_only:
                assert p > 0.85


def test_variational_decoupled_limit():
    bath = BathSpec(1.0, 128)
    coupling = CouplingSpec(-1.5, 1e-4)
    vs = variational_ground_state(bath, coupling, 1)
    assert vs.energy == pytest.approx(2.0 * coupling.delta, abs=1e-6)
    assert abs(vs.v[+1]) < 1e-3 and abs(vs.v[-1]) < 1e-3


def test_spin_model_parameters():
    spec = solve_pair_poles(BathSpec(1.0, 1024), CouplingSpec(-3.0, 0.3), 2)
    params = spin_model_parameters(spec)
    assert abs(params["j_z"]) < 1e-3  # deep arc: noninteracting bound states
    assert params["e_ground"] == pytest.approx(spec.e_ground)
    # exact splitting tracks the bath-elimination integral in the Markovian arc
    from qebath.bath import markovian_vdd_quadrature

    specm = solve_pair_poles(BathSpec(1.0, 1024), CouplingSpec(-10.0, 0.5), 1)
    pm = spin_model_parameters(specm)
    assert pm["t_eff"] == pytest.approx(markovian_vdd_quadrature(1.0, -10.0, 0.5, 1), rel=0.01)
    # strong-coupling point: |t_eff| saturating toward J/2 (exact value 0.4508 at Omega=10)
    specs = solve_pair_poles(BathSpec(1.0, 1024), CouplingSpec(0.0, 10.0), 1)
    ps = spin_model_parameters(specs)
    assert abs(ps["t_eff"]) == pytest.approx(0.5, rel=0.10)
