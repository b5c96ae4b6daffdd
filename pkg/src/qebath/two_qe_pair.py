"""Two excitations on two emitters: channel T-matrix, pair poles, wavefunctions.

In the hard-core limit the two-excitation resolvent resums into a T-matrix
that diagonalizes in the symmetric/anti-symmetric exchange channels,
``T_s = -1/B_s`` with the channel bracket

    B_s(omega) = (1/2) sum_{lam lam' sigma} Z^sigma_lam Z^{s sigma}_lam'
                 / (omega - E_lam - E_lam')

built from the finite-N one-excitation channel spectra.  The bracket is
strictly decreasing between consecutive two-particle poles, so every root is
isolated by bisection.  The smallest root of ``B_+`` is the two-excitation
ground state; the higher isolated roots of ``B_+``/``B_-`` are the symmetric
and anti-symmetric doublon states, present only when the bracket is still
negative at the scattering threshold.

All sums here are exact finite-N sums (N = 1024 by default upstream), which
makes every returned level directly comparable with exact diagonalization on
the same lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bath import BathSpec, CouplingSpec, dispersion
from .single_excitation import ChannelSpectrum, TwoQeBoundStates, solve_two_qe

_WEIGHT_FLOOR = 1e-30


class PoleHit(ValueError):
    """Channel bracket evaluated on top of a two-particle pole."""


class DegenerateResidue(ValueError):
    """Residue evaluation refused: pole too close to a denominator term."""


class OptimizerDidNotConverge(RuntimeError):
    pass


@dataclass
class PairChannelT:
    """Sampler of the channel T-matrix T_s(omega) = -1/B_s(omega)."""

    s: int
    pair_energies: np.ndarray
    pair_weights: np.ndarray

    @classmethod
    def from_spectra(cls, spectra: dict[int, ChannelSpectrum], s: int) -> "PairChannelT":
        energies = []
        weights = []
        for sigma in (+1, -1):
            a = spectra[sigma]
            b = spectra[s * sigma]
            e = a.energies[:, None] + b.energies[None, :]
            w = 0.5 * a.weights[:, None] * b.weights[None, :]
            energies.append(e.ravel())
            weights.append(w.ravel())
        e = np.concatenate(energies)
        w = np.concatenate(weights)
        keep = w > _WEIGHT_FLOOR
        return cls(s=s, pair_energies=e[keep], pair_weights=w[keep])

    def bracket(self, omega: float) -> float:
        return float(np.sum(self.pair_weights / (omega - self.pair_energies)))

    def bracket_slope(self, omega: float) -> float:
        return float(-np.sum(self.pair_weights / (omega - self.pair_energies) ** 2))

    def __call__(self, omega: float) -> float:
        gap = np.min(np.abs(omega - self.pair_energies))
        if gap < 1e-12:
            raise PoleHit(f"evaluated at a two-particle pole (distance {gap:.1e})")
        return -1.0 / self.bracket(omega)

    def poles(self) -> np.ndarray:
        return np.unique(self.pair_energies)


@dataclass
class PairPole:
    """One isolated two-excitation level with its T-matrix residue data.

    ``amp_qe`` is the signed doubly-excited-emitter amplitude whose square is
    the probability ``z2``.
    """

    s: int
    energy: float
    z0: float
    amp_qe: float

    @property
    def z2(self) -> float:
        return self.amp_qe**2


@dataclass
class PairSpectrum:
    """Isolated poles of the two-excitation sector for two emitters."""

    bath: BathSpec
    coupling: CouplingSpec
    d: int
    single: TwoQeBoundStates
    channels: dict[int, PairChannelT]
    ground: PairPole
    doublon_plus: PairPole | None
    doublon_minus: PairPole | None

    @property
    def e_ground(self) -> float:
        return self.ground.energy

    @property
    def e_doublon_plus(self) -> float | None:
        return self.doublon_plus.energy if self.doublon_plus else None

    @property
    def e_doublon_minus(self) -> float | None:
        return self.doublon_minus.energy if self.doublon_minus else None


@dataclass
class PairWavefunctions:
    """Momentum and coordinate wavefunctions of one isolated pair level.

    Conventions: the state is ``amp_qe b_1^+ b_2^+ |0> + sum_{jk} phi1_k[j,k]
    a_k^+ b_j^+ |0> + sum_{kk'} phi2_k[k,k'] a_k^+ a_k'^+ |0>`` with ``phi2_k``
    symmetric, so the total norm is ``z2 + sum |phi1|^2 + 2 sum |phi2|^2``.
    """

    pole: PairPole
    amp_qe: float
    phi1_k: np.ndarray
    phi2_k: np.ndarray
    phi1: np.ndarray = field(init=False)
    phi2: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = self.phi1_k.shape[1]
        self.phi1 = np.fft.ifft(self.phi1_k, axis=1) * np.sqrt(n)
        self.phi2 = np.fft.ifft2(self.phi2_k) * n

    @property
    def norm(self) -> float:
        return float(
            self.amp_qe**2
            + np.sum(np.abs(self.phi1_k) ** 2)
            + 2.0 * np.sum(np.abs(self.phi2_k) ** 2)
        )


def channel_t(bath: BathSpec, coupling: CouplingSpec, d: int, s: int, omega: float) -> float:
    """T_s(omega) built from a fresh finite-N one-excitation solve."""
    states = solve_two_qe(bath, coupling, d)
    return PairChannelT.from_spectra(states.spectra, s)(omega)


def _root_in_window(channel: PairChannelT, lo: float, hi: float) -> float | None:
    """Root of the decreasing bracket inside (lo, hi); None without a sign change."""
    span = hi - lo
    if span <= 0:
        return None
    delta = max(1e-12 * span, 1e-14 * max(abs(lo), abs(hi), 1.0))
    a, b = lo + delta, hi - delta
    if a >= b:
        return None
    fa, fb = channel.bracket(a), channel.bracket(b)
    if not (fa > 0.0 > fb):
        return None
    root = brentq(channel.bracket, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    for _ in range(3):
        fv = channel.bracket(root)
        if fv == 0.0:
            break
        step = fv / channel.bracket_slope(root)
        if not np.isfinite(step) or abs(step) > span:
            break
        root -= step
    return float(root)


def solve_pair_poles(bath: BathSpec, coupling: CouplingSpec, d: int | None = None) -> PairSpectrum:
    """Ground state and doublon poles of two emitters at separation d.

    Existence of the higher poles follows the threshold criteria: the
    symmetric doublon requires ``E_1+ > 2 E_1-`` and ``T_+(E_1+) > 0``; the
    anti-symmetric one requires the anti-symmetric bound state and
    ``T_-(E_1+) > 0``.
    """
    if bath.n is None:
        raise ValueError("pair poles are built from finite-N spectra; pass a finite bath")
    if d is None:
        d = bath.spacing
    single = solve_two_qe(bath, coupling, d)
    spectra = single.spectra
    channels = {s: PairChannelT.from_spectra(spectra, s) for s in (+1, -1)}

    e_plus = spectra[+1].energies[0]
    e_minus = spectra[-1].energies[0] if single.exists_minus else None

    poles_plus = channels[+1].poles()
    ground_energy = _root_in_window(channels[+1], poles_plus[0], poles_plus[1])
    if ground_energy is None:
        raise RuntimeError("no ground-state root between the two lowest pair poles")
    ground = _residue(channels[+1], spectra, ground_energy)

    doublon_plus = None
    if e_minus is not None and e_plus > 2.0 * e_minus and channels[+1].bracket(e_plus) < 0.0:
        e2p = _root_in_window(channels[+1], 2.0 * e_minus, e_plus)
        if e2p is not None:
            doublon_plus = _residue(channels[+1], spectra, e2p)

    doublon_minus = None
    if e_minus is not None and channels[-1].bracket(e_plus) < 0.0:
        e2m = _root_in_window(channels[-1], e_plus + e_minus, e_plus)
        if e2m is not None:
            doublon_minus = _residue(channels[-1], spectra, e2m)

    return PairSpectrum(
        bath=bath,
        coupling=coupling,
        d=d,
        single=single,
        channels=channels,
        ground=ground,
        doublon_plus=doublon_plus,
        doublon_minus=doublon_minus,
    )


def _residue(channel: PairChannelT, spectra: dict[int, ChannelSpectrum], energy: float) -> PairPole:
    """T-matrix residue Z_0^s and the signed emitter-pair amplitude at a pole."""
    gap = np.min(np.abs(energy - channel.pair_energies))
    if gap < 1e-9:
        raise DegenerateResidue(f"pole within {gap:.1e} of a two-particle denominator term")
    z0 = -1.0 / channel.bracket_slope(energy)
    s = channel.s
    acc = 0.0
    for sigma in (+1, -1):
        a, b = spectra[sigma], spectra[s * sigma]
        h = energy - a.energies[:, None] - b.energies[None, :]
        acc += sigma * a.weights @ (1.0 / h) @ b.weights
    amp = 0.5 * np.sqrt(z0) * acc
    return PairPole(s=s, energy=energy, z0=z0, amp_qe=float(amp))


def pair_wavefunctions(spectrum: PairSpectrum, pole: PairPole) -> PairWavefunctions:
    """Residue wavefunctions of one isolated pair level, momentum and real space.

    Evaluates the emitter-photon amplitudes phi1[j,k] and the symmetric
    two-photon amplitude phi2[k,k'] from the T-matrix residue at the pole,
    then Fourier transforms to the lattice.  Refuses degenerate residues
    (pole within 1e-9 of a denominator term).
    """
    bath, d, s = spectrum.bath, spectrum.d, pole.s
    spectra = spectrum.single.spectra
    coupling = spectrum.coupling
    e2 = pole.energy
    k = bath.momenta()
    eps = dispersion(bath, k)
    n = bath.n

    min_gap = min(
        float(np.min(np.abs(e2 - eps[:, None] - spectra[sig].energies[None, :])))
        for sig in (+1, -1)
    )
    min_gap = min(min_gap, float(np.min(np.abs(e2 - eps[:, None] - eps[None, :]))))
    chan = spectrum.channels[s]
    min_gap = min(min_gap, float(np.min(np.abs(e2 - chan.pair_energies))))
    if min_gap < 1e-9:
        raise DegenerateResidue(f"pole within {min_gap:.1e} of a denominator h term")

    sqrt_z0 = np.sqrt(pole.z0)
    om = coupling.omega

    phi1 = np.zeros((2, n), dtype=complex)
    phi2 = np.zeros((n, n), dtype=complex)
    for sigma in (+1, -1):
        a, b = spectra[sigma], spectra[s * sigma]
        h_pair = e2 - a.energies[:, None] - b.energies[None, :]
        # c_lam = sum_lam' Z^{s sigma}_lam' / h_pair
        c = (1.0 / h_pair) @ b.weights
        denom_a = e2 - eps[:, None] - a.energies[None, :]  # (k, lam)
        denom_b = e2 - eps[:, None] - b.energies[None, :]  # (k', lam')
        phase_k = 1.0 + s * sigma * np.exp(-1j * k * d)
        phase_kp = 1.0 + sigma * np.exp(-1j * k * d)
        prof = (1.0 / denom_a) @ (a.weights * c)
        for j in (0, 1):
            phi1[j] += sigma**j * phase_k * prof
        # two-photon amplitude: separable resolvent pieces
        res_a = (1.0 / denom_a) @ a.weights  # A^sigma(k)
        res_b = (1.0 / denom_b) @ b.weights  # A^{s sigma}(k')
        term_a = ((1.0 / denom_a) * a.weights[None, :]) @ (1.0 / h_pair) @ (
            ((1.0 / denom_b) * b.weights[None, :]).T
        )
        h_kk = e2 - eps[:, None] - eps[None, :]
        term_b = np.outer(res_a, res_b) / h_kk
        phi2 += np.outer(phase_k, phase_kp) * (term_a + term_b)
    phi1 *= sqrt_z0 * om / (2.0 * np.sqrt(n))
    phi2 *= sqrt_z0 * om**2 / (4.0 * n)
    return PairWavefunctions(pole=pole, amp_qe=pole.amp_qe, phi1_k=phi1, phi2_k=phi2)


def doublon_hopping_two_qe(spectrum: PairSpectrum) -> tuple[float, float]:
    """Doublon chemical potential and hopping ((E2+ + E2-)/2, (E2+ - E2-)/2)."""
    if spectrum.doublon_plus is None or spectrum.doublon_minus is None:
        raise RuntimeError("doublon pair incomplete: need both higher poles")
    ep = spectrum.doublon_plus.energy
    em = spectrum.doublon_minus.energy
    return 0.5 * (ep + em), 0.5 * (ep - em)


def delta_eg(spectrum: PairSpectrum) -> float:
    """Interaction shift E_G - 2 E_1B of the pair ground state."""
    from .single_excitation import solve_single_qe

    e1b, _ = solve_single_qe(spectrum.bath, spectrum.coupling)
    return spectrum.e_ground - 2.0 * e1b


def spin_model_parameters(
    spectrum: PairSpectrum,
) -> dict[str, float]:
    """Effective XXZ parameters from the one- and two-excitation levels.

    ``t_eff`` and ``E_0`` come from the bound doublet, ``J_z = E_G - 2 E_0``.
    """
    from .single_excitation import effective_hopping_two_qe

    e0, teff = effective_hopping_two_qe(spectrum.single)
    return {
        "t_eff": teff,
        "e0": e0,
        "e_ground": spectrum.e_ground,
        "j_z": spectrum.e_ground - 2.0 * e0,
    }


# ----------------------------------------------------------------------------
# Variational ground state


@dataclass
class VariationalState:
    """Optimized two-mode pair ansatz and its fidelity with the exact ground state."""

    v: dict[int, float]
    e: dict[int, float]
    energy: float
    overlap_pv: float
    symmetric_only: bool
    n2: float


def _logistic(y: float, lo: float, hi: float) -> float:
    return lo + (hi - lo) / (1.0 + np.exp(-y))


def _logit(x: float, lo: float, hi: float) -> float:
    t = np.clip((x - lo) / (hi - lo), 1e-12, 1.0 - 1e-12)
    return float(np.log(t / (1.0 - t)))


class _VariationalProblem:
    """Variational energy of the deformed-pair ansatz on the finite k grid."""

    def __init__(self, bath: BathSpec, coupling: CouplingSpec, d: int):
        self.bath = bath
        self.coupling = coupling
        self.d = d
        k = bath.momenta()
        self.eps = dispersion(bath, k)
        self.cos_kd = np.cos(k * d)
        self.lo = -40.0 * bath.j - max(0.0, -coupling.delta) - coupling.omega
        self.hi = -1e-9 * bath.j

    def moments(self, e: float, sigma: int) -> tuple[float, float]:
        w = 1.0 + sigma * self.cos_kd
        i1 = float(np.mean(w / (e - self.eps)))
        n1 = float(np.mean(w / (e - self.eps) ** 2))
        return i1, n1

    def energy(self, params: np.ndarray) -> float:
        v = {+1: params[0], -1: params[1]}
        e = {+1: _logistic(params[2], self.lo, self.hi), -1: _logistic(params[3], self.lo, self.hi)}
        delta, om = self.coupling.delta, self.coupling.omega
        n2 = sum((1.0 + v[s] ** 2) ** 2 for s in (+1, -1)) / 2.0
        total = 2.0 * delta
        for s in (+1, -1):
            i1, n1 = self.moments(e[s], s)
            vs = v[s]
            total += delta * vs**2 + vs**2 * (1.0 + vs**2) * e[s]
            total += (vs * (1.0 + vs**2) / np.sqrt(n1)) * (2.0 * om - vs / np.sqrt(n1)) * i1
        return total / n2


def variational_ground_state(
    bath: BathSpec,
    coupling: CouplingSpec,
    d: int | None = None,
    spectrum: PairSpectrum | None = None,
    max_cycles: int = 200,
    tol: float = 1e-10,
) -> VariationalState:
    """Minimize the four-parameter pair ansatz and score it against the exact state.

    Coordinate descent with golden-section line searches, restarted from a
    Markovian, a strong-coupling, and a photon-dominated seed; the variational
    energies e_sigma are kept below the band by a logistic reparameterization.
    """
    if coupling.omega <= 0:
        raise ValueError("variational ansatz needs Omega > 0")
    if d is None:
        d = bath.spacing
    if spectrum is None:
        spectrum = solve_pair_poles(bath, coupling, d)
    problem = _VariationalProblem(bath, coupling, d)

    single = spectrum.single
    e_seed = {}
    for s in (+1, -1):
        bound = single.e_plus if s == +1 else single.e_minus
        e_seed[s] = bound if bound is not None else min(-0.5 * bath.j, coupling.delta)
        e_seed[s] = float(np.clip(e_seed[s], problem.lo + 1e-6, problem.hi - 1e-12))
    v_markov = coupling.omega / max(abs(coupling.delta), 0.2 * bath.j)
    seeds = [v_markov, 1.0, 5.0]

    best: np.ndarray | None = None
    best_e = np.inf
    last_delta = np.inf
    for v0 in seeds:
        params = np.array(
            [v0, v0, _logit(e_seed[+1], problem.lo, problem.hi), _logit(e_seed[-1], problem.lo, problem.hi)]
        )
        e_prev = problem.energy(params)
        converged = False
        for _ in range(max_cycles):
            for i in range(4):
                def line(x, i=i):
                    trial = params.copy()
                    trial[i] = x
                    return problem.energy(trial)

                res = minimize_scalar(line, method="golden", bracket=(params[i] - 0.5, params[i] + 0.5))
                if res.fun < problem.energy(params):
                    params[i] = res.x
            e_now = problem.energy(params)
            if abs(e_now - e_prev) < tol * bath.j:
                converged = True
                break
            e_prev = e_now
        if not converged:
            last_delta = min(last_delta, abs(e_now - e_prev))
            continue
        if e_now < best_e:
            best_e = e_now
            best = params.copy()
    if best is None:
        raise OptimizerDidNotConverge(
            f"variational optimizer did not converge within {max_cycles} cycles "
            f"from any seed (best remaining delta {last_delta:.1e})"
        )

    v = {+1: float(best[0]), -1: float(best[1])}
    e = {+1: _logistic(best[2], problem.lo, problem.hi), -1: _logistic(best[3], problem.lo, problem.hi)}
    n2 = sum((1.0 + v[s] ** 2) ** 2 for s in (+1, -1)) / 2.0
    pv = _variational_overlap(spectrum, v, e)
    symmetric_only = not spectrum.single.exists_minus
    return VariationalState(v=v, e=e, energy=best_e, overlap_pv=pv, symmetric_only=symmetric_only, n2=n2)


def _variational_components(
    bath: BathSpec, coupling: CouplingSpec, d: int, v: dict[int, float], e: dict[int, float]
) -> tuple[float, np.ndarray, np.ndarray]:
    """(amp_qe, phi1[j,k], phi2[k,k']) of the normalized variational state."""
    k = bath.momenta()
    eps = dispersion(bath, k)
    n = bath.n
    phi = {}
    for s in (+1, -1):
        eta = (1.0 + s * np.exp(-1j * k * d)) / np.sqrt(2.0)
        _, n1 = (np.mean((1.0 + s * np.cos(k * d)) / (e[s] - eps)), np.mean((1.0 + s * np.cos(k * d)) / (e[s] - eps) ** 2))
        phi[s] = eta / (np.sqrt(n1 * n) * (e[s] - eps))
    n2 = sum((1.0 + v[s] ** 2) ** 2 for s in (+1, -1)) / 2.0
    amp = 1.0 / np.sqrt(n2)
    phi1 = np.empty((2, n), dtype=complex)
    phi1[0] = (v[+1] * phi[+1] - v[-1] * phi[-1]) / np.sqrt(2.0) * amp
    phi1[1] = (v[+1] * phi[+1] + v[-1] * phi[-1]) / np.sqrt(2.0) * amp
    phi2 = 0.5 * amp * (v[+1] ** 2 * np.outer(phi[+1], phi[+1]) - v[-1] ** 2 * np.outer(phi[-1], phi[-1]))
    return amp, phi1, phi2


def _variational_overlap(spectrum: PairSpectrum, v: dict[int, float], e: dict[int, float]) -> float:
    wf = pair_wavefunctions(spectrum, spectrum.ground)
    amp, phi1, phi2 = _variational_components(spectrum.bath, spectrum.coupling, spectrum.d, v, e)
    norm_g = np.sqrt(wf.norm)
    ov = (
        amp * wf.amp_qe
        + np.sum(phi1.conj() * wf.phi1_k)
        + 2.0 * np.sum(phi2.conj() * wf.phi2_k)
    )
    return float(abs(ov) / norm_g)


def bound_pair_weight(spectrum: PairSpectrum) -> tuple[float, bool]:
    """Probability of two bound-mode excitations in the exact ground state.

    Returns (p, symmetric_only).  When the anti-symmetric one-excitation mode
    has merged into the continuum only the symmetric projection enters, which
    is flagged by the second return value.
    """
    bath, coupling, d = spectrum.bath, spectrum.coupling, spectrum.d
    single = spectrum.single
    wf = pair_wavefunctions(spectrum, spectrum.ground)
    k = bath.momenta()
    eps = dispersion(bath, k)
    n = bath.n
    norm_g = np.sqrt(wf.norm)
    p = 0.0
    channels = [+1] if not single.exists_minus else [+1, -1]
    for s in channels:
        e1 = single.e_plus if s == +1 else single.e_minus
        u2 = single.u_plus_sq if s == +1 else single.u_minus_sq
        u = np.sqrt(u2)
        f = coupling.omega / np.sqrt(2.0 * n) * u * (1.0 + s * np.exp(-1j * k * d)) / (e1 - eps)
        # hard-core projected (beta_s^+)^2 |0>: emitter pair, emitter-photon, photon pair
        amp_qe = u * u * s
        phi1 = np.empty((2, n), dtype=complex)
        phi1[0] = np.sqrt(2.0) * u * f
        phi1[1] = np.sqrt(2.0) * u * s * f
        phi2 = np.outer(f, f)
        ov = (
            amp_qe * wf.amp_qe
            + np.sum(phi1.conj() * wf.phi1_k)
            + 2.0 * np.sum(phi2.conj() * wf.phi2_k)
        )
        p += 0.5 * abs(ov / norm_g) ** 2
    return float(p), not single.exists_minus
