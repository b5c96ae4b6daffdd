"""Three excitations on the emitter array: M-matrix, triplon band, wavefunctions.

The three-body problem closes into a finite matrix equation for the on-shell
residue samples ``f_{k lam} = F(k, E_lam(k))``,

    M[(p,lam1),(k,lam)](E) = (2/N_b) Z_lam(k) T(q-k, E - E_lam(k))
                             G_b(q-p-k, E - E_lam1(p) - E_lam(k)),

with ``G_b`` the emitter-projected one-polariton resolvent and ``T`` the pair
T-matrix of the two-excitation sector.  A triplon at total momentum q is a
solution of ``det[M(E) - I] = 0`` inside the gap between the three-polariton
continuum and the polariton+doublon continuum.  The determinant sign scan is
cross-checked with the smallest singular value of ``M - I``, which also
supplies the null vector used to reconstruct the full wavefunctions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .array_pair import DoublonBand, PairBubble
from .bath import dispersion
from .single_excitation import PolaritonSpectrum

_MARGIN = 1e-9
_SV_TOL = 1e-8


class DenominatorHit(ValueError):
    """A propagator denominator fell within the safety margin."""


@dataclass
class MMatrix:
    """Dense three-excitation kernel at one (q, E) probe."""

    q_index: int
    energy: float
    matrix: np.ndarray

    def det_sign_and_log(self) -> tuple[float, float]:
        dim = self.matrix.shape[0]
        sign, logdet = np.linalg.slogdet(self.matrix - np.eye(dim))
        return float(sign), float(logdet)

    def smallest_singular_value(self) -> float:
        dim = self.matrix.shape[0]
        return float(np.linalg.svd(self.matrix - np.eye(dim), compute_uv=False)[-1])


@dataclass
class TriplonBand:
    """Triplon dispersion on the q grid; NaN marks momenta without a root."""

    spec: PolaritonSpectrum
    energies: np.ndarray
    continua: list[tuple[tuple[float, float], tuple[float, float]] | None]

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.energies)


@dataclass
class TriplonWavefunctions:
    """Momentum-space triplon amplitudes and their total (pre-normalization) norm.

    Index convention: ``f_b[m1, m2]`` pairs emitter momenta (k1, k2, q-k1-k2);
    ``f_bba[m1, m2, K]`` has the photon at q-k1-k2+K; ``f_baa[m1, m2, K2, K3]``
    photons at k2+K2 and q-k1-k2+K3; ``f_a[m1, m2, K1, K2, K3]`` all photons.
    The raw prefactor is reported via ``raw_norm``; amplitudes are normalized.
    """

    q_index: int
    energy: float
    f_b: np.ndarray
    f_bba: np.ndarray
    f_baa: np.ndarray
    f_a: np.ndarray
    raw_norm: float


class TriplonSolver:
    """Caches per-momentum pair bubbles and polariton data for one spectrum."""

    def __init__(self, spec: PolaritonSpectrum):
        self.spec = spec
        self.nb = spec.n_cells
        self.z = spec.spacing
        self.bands = spec.bands
        self.weights = spec.weights
        self.n_bands = spec.n_bands
        self.bubbles = [PairBubble.build(spec, q) for q in range(self.nb)]
        n_modes = self.nb * self.z
        kk = 2.0 * np.pi * (np.arange(self.nb)[:, None] + self.nb * np.arange(self.z)[None, :]) / n_modes
        self.eps = dispersion(spec.bath, kk)  # (nb, z): eps(k + K)

    def t_matrix(self, q_index: int, omega: float) -> float:
        return self.bubbles[q_index % self.nb].t_matrix(omega)

    def resolvent(self, m_index, omega):
        """Emitter-projected resolvent G_b(m, w) = sum_lam Z_lam(m)/(w - E_lam(m))."""
        m = np.asarray(m_index) % self.nb
        w = np.asarray(omega)
        z = self.weights[m]
        e = self.bands[m]
        return np.sum(z / (w[..., None] - e), axis=-1)

    def m_matrix(self, q_index: int, energy: float) -> MMatrix:
        nb, nl = self.nb, self.n_bands
        e1, z1 = self.bands, self.weights
        # columns: (k, lam) -> T(q-k, E - E_lam(k))
        t_col = np.empty((nb, nl))
        for k in range(nb):
            qk = (q_index - k) % nb
            for lam in range(nl):
                arg = energy - e1[k, lam]
                bubble = self.bubbles[qk]
                gap = np.min(np.abs(arg - bubble.pair_energies))
                if gap < _MARGIN:
                    raise DenominatorHit(
                        f"T pole hit at momentum index {qk}, offset {gap:.1e} (column k={k}, lam={lam})"
                    )
                t_col[k, lam] = bubble.t_matrix(arg)
        p_idx = np.arange(nb)
        m_idx = (q_index - p_idx[:, None] - p_idx[None, :]) % nb  # (p, k)
        omega_g = (
            energy
            - e1[:, :, None, None]  # (p, lam1, 1, 1)
            - e1[None, None, :, :]  # (1, 1, k, lam)
        )
        zg = self.weights[m_idx]  # (p, k, nl)
        eg = self.bands[m_idx]
        denom = omega_g[:, :, :, :, None] - eg[:, None, :, None, :]  # (p,lam1,k,lam,lam2)
        if np.min(np.abs(denom)) < _MARGIN:
            raise DenominatorHit("resolvent pole hit while assembling the kernel")
        g = np.sum(zg[:, None, :, None, :] / denom, axis=-1)
        mat = (2.0 / nb) * z1[None, None, :, :] * t_col[None, None, :, :] * g
        return MMatrix(q_index=q_index, energy=energy, matrix=mat.reshape(nb * nl, nb * nl))


def three_excitation_continua(
    spec: PolaritonSpectrum, band2: DoublonBand, q_index: int
) -> tuple[tuple[float, float], tuple[float, float] | None]:
    """(three-polariton interval, polariton+doublon interval) at fixed q."""
    nb = spec.n_cells
    e0 = spec.bands[:, 0]
    p1 = np.arange(nb)
    e3 = e0[p1][:, None] + e0[p1][None, :] + e0[(q_index - p1[:, None] - p1[None, :]) % nb]
    cont3 = (float(e3.min()), float(e3.max()))
    e2 = band2.energies[(q_index - p1) % nb]
    mask = ~np.isnan(e2)
    if not np.any(mask):
        return cont3, None
    epd = e0[p1][mask] + e2[mask]
    return cont3, (float(epd.min()), float(epd.max()))


def triplon_midgap(
    spec: PolaritonSpectrum, band2: DoublonBand, q_index: int
) -> tuple[float, float] | None:
    cont3, cont_pd = three_excitation_continua(spec, band2, q_index)
    if cont_pd is None:
        return None
    lo, hi = sorted([cont3, cont_pd])
    if lo[1] < hi[0]:
        return (lo[1], hi[0])
    return None


def triplon_energy(
    solver: TriplonSolver,
    band2: DoublonBand,
    q_index: int,
    n_scan: int = 200,
) -> tuple[float, np.ndarray] | None:
    """Root of det[M(E) - I] in the midgap at one q, with its null vector.

    The location from the determinant sign scan must agree with the smallest
    singular value of M - I (below 1e-8) before the root is accepted; absence
    of a sign change (or of a midgap) is data, not an error.
    """
    window = triplon_midgap(solver.spec, band2, q_index)
    if window is None:
        return None
    lo, hi = window
    span = hi - lo
    if span <= 20.0 * _MARGIN:
        return None
    grid = np.linspace(lo + 1e-6 * span, hi - 1e-6 * span, n_scan)
    signs = np.empty(n_scan)
    for i, e in enumerate(grid):
        try:
            signs[i] = solver.m_matrix(q_index, e).det_sign_and_log()[0]
        except DenominatorHit:
            signs[i] = solver.m_matrix(q_index, e + 10.0 * _MARGIN).det_sign_and_log()[0]
    flips = np.where(signs[:-1] * signs[1:] < 0)[0]
    if len(flips) == 0:
        return None
    i = int(flips[0])
    a, b = grid[i], grid[i + 1]
    fa = signs[i]
    for _ in range(100):
        mid = 0.5 * (a + b)
        sm = solver.m_matrix(q_index, mid).det_sign_and_log()[0]
        if sm == fa:
            a = mid
        else:
            b = mid
        if b - a < 1e-13 * max(1.0, abs(mid)):
            break
    root = 0.5 * (a + b)
    mm = solver.m_matrix(q_index, root)
    sv = mm.smallest_singular_value()
    if sv > _SV_TOL:
        return None
    dim = mm.matrix.shape[0]
    _, _, vt = np.linalg.svd(mm.matrix - np.eye(dim))
    null = vt[-1]
    null = null / null[np.argmax(np.abs(null))]
    return float(root), null.reshape(solver.nb, solver.n_bands)


def scan_triplon_band(spec: PolaritonSpectrum, band2: DoublonBand, n_scan: int = 200) -> TriplonBand:
    solver = TriplonSolver(spec)
    nb = spec.n_cells
    energies = np.full(nb, np.nan)
    continua = []
    for q in range(nb):
        continua.append(three_excitation_continua(spec, band2, q))
        res = triplon_energy(solver, band2, q, n_scan=n_scan)
        if res is not None:
            energies[q] = res[0]
    return TriplonBand(spec=spec, energies=energies, continua=continua)


def triplon_hoppings(band: TriplonBand) -> np.ndarray:
    """Hoppings t^T_r of the triplon band; requires every momentum defined."""
    if not np.all(band.defined):
        missing = int(np.sum(~band.defined))
        raise ValueError(f"band incomplete: {missing} of {band.energies.size} momenta undefined")
    t = np.fft.ifft(band.energies)
    if np.max(np.abs(t.imag)) > 1e-12 * max(np.max(np.abs(t)), 1e-300):
        raise RuntimeError("triplon hoppings acquired an imaginary part")
    return t.real.copy()


def _residue_function(solver: TriplonSolver, q_index: int, e3b: float, null: np.ndarray):
    """Return F(p, omega) evaluating the reduced on-shell recursion."""

    def f_general(p_index: int, omega: float) -> float:
        k = np.arange(solver.nb)
        total = 0.0
        for lam in range(solver.n_bands):
            tv = np.array(
                [solver.t_matrix((q_index - kk) % solver.nb, e3b - solver.bands[kk, lam]) for kk in k]
            )
            g = solver.resolvent(
                (q_index - p_index - k) % solver.nb,
                np.full(solver.nb, e3b - omega) - solver.bands[k, lam],
            )
            total += np.sum(solver.weights[k, lam] * tv * g * null[k, lam])
        return 2.0 / solver.nb * total

    return f_general


def residue_and_wavefunctions(
    spec: PolaritonSpectrum,
    band2: DoublonBand,
    q_index: int,
    e3b: float,
    null: np.ndarray,
    solver: TriplonSolver | None = None,
) -> TriplonWavefunctions:
    """Evaluate the four triplon wavefunctions from the residue function.

    The permutation operators act literally: full symmetrization over the
    three constituents for f_b and f_a, pair exchanges for the mixed
    amplitudes.  The final state is normalized; the raw norm of the printed
    formulas is reported separately.
    """
    if solver is None:
        solver = TriplonSolver(spec)
    nb, nl, z = solver.nb, solver.n_bands, solver.z
    e1, z1 = solver.bands, solver.weights
    eps = solver.eps  # (nb, z)
    om = spec.coupling.omega
    q = q_index

    f_on_shell = null  # f_{k lam}
    f_general = _residue_function(solver, q_index, e3b, null)

    t_cache: dict[tuple[int, float], float] = {}

    def t_of(mom: int, omega: float) -> float:
        key = (mom % nb, omega)
        if key not in t_cache:
            t_cache[key] = solver.t_matrix(mom % nb, omega)
        return t_cache[key]

    # photon-shell residue samples F(p, eps(p+K)) used by the mixed amplitudes
    f_photon = np.empty((nb, z))
    for p in range(nb):
        for kk in range(z):
            f_photon[p, kk] = f_general(p, eps[p, kk])

    guard = lambda x: np.min(np.abs(x))

    # ---- f_b(p1, p2): fully symmetrized emitter-triple amplitude
    f_b = np.zeros((nb, nb))
    for m1 in range(nb):
        for m2 in range(nb):
            m3 = (q - m1 - m2) % nb
            acc = 0.0
            for a, b, c in permutations((m1, m2, m3)):
                for l1 in range(nl):
                    tval = t_of(q - a, e3b - e1[a, l1])
                    for l2 in range(nl):
                        den = e3b - e1[a, l1] - e1[b, l2]
                        g = solver.resolvent(np.array([c]), np.array([den]))[0]
                        acc += z1[a, l1] * z1[b, l2] * tval * g * f_on_shell[a, l1]
            f_b[m1, m2] = acc / (6.0 * nb)

    # ---- f_bba(p1, p2, K): two emitters + one photon at q-p1-p2+K
    f_bba = np.zeros((nb, nb, z))
    for m1 in range(nb):
        for m2 in range(nb):
            m3 = (q - m1 - m2) % nb
            for kk in range(z):
                e_ph = eps[m3, kk]
                acc = 0.0
                for a, b in ((m1, m2), (m2, m1)):
                    for l1 in range(nl):
                        t1f1 = t_of(q - a, e3b - e1[a, l1]) * f_on_shell[a, l1]
                        for l2 in range(nl):
                            for l3 in range(nl):
                                pref = (
                                    z1[a, l1]
                                    * z1[b, l2]
                                    * z1[m3, l3]
                                    / (2.0 * (e_ph - e1[m3, l3]))
                                )
                                term1 = (
                                    2.0 * t1f1
                                    + t_of(q - m3, e3b - e_ph) * f_photon[m3, kk]
                                ) / (e3b - e1[a, l1] - e1[b, l2] - e_ph)
                                term2 = (
                                    2.0 * t1f1
                                    + t_of(q - m3, e3b - e1[m3, l3]) * f_on_shell[m3, l3]
                                ) / (e3b - e1[a, l1] - e1[b, l2] - e1[m3, l3])
                                acc += pref * (term1 - term2)
                f_bba[m1, m2, kk] = om / (nb * np.sqrt(z)) * acc

    # ---- f_baa(p1, p2, K2, K3): one emitter at p1, photons at p2+K2, q-p1-p2+K3
    f_baa = np.zeros((nb, nb, z, z))
    for m1 in range(nb):
        for m2 in range(nb):
            m3 = (q - m1 - m2) % nb
            for k2 in range(z):
                for k3 in range(z):
                    acc = 0.0
                    # P_23 exchanges the two photon slots (p2,K2) <-> (p3,K3)
                    for (b, kb), (c, kc) in (((m2, k2), (m3, k3)), ((m3, k3), (m2, k2))):
                        e_b = eps[b, kb]
                        e_c = eps[c, kc]
                        for l1 in range(nl):
                            t1f1 = t_of(q - m1, e3b - e1[m1, l1]) * f_on_shell[m1, l1]
                            for l2 in range(nl):
                                for l3 in range(nl):
                                    pref = (
                                        z1[m1, l1]
                                        * z1[b, l2]
                                        * z1[c, l3]
                                        / (2.0 * (e_b - e1[b, l2]))
                                    )
                                    num1 = t1f1 + 2.0 * t_of(q - b, e3b - e_b) * f_photon[b, kb]
                                    den1 = (e3b - e1[m1, l1] - e_b - e_c) * (
                                        e3b - e1[m1, l1] - e_b - e1[c, l3]
                                    )
                                    num2 = t1f1 + 2.0 * t_of(q - b, e3b - e1[b, l2]) * f_on_shell[b, l2]
                                    den2 = (e3b - e1[m1, l1] - e1[b, l2] - e_c) * (
                                        e3b - e1[m1, l1] - e1[b, l2] - e1[c, l3]
                                    )
                                    acc += pref * (num1 / den1 - num2 / den2)
                    f_baa[m1, m2, k2, k3] = om**2 / (nb * z) * acc

    # ---- f_a(p1, p2, K1, K2, K3): three photons
    f_a = np.zeros((nb, nb, z, z, z))
    for m1 in range(nb):
        for m2 in range(nb):
            m3 = (q - m1 - m2) % nb
            for k1 in range(z):
                for k2 in range(z):
                    for k3 in range(z):
                        acc = 0.0
                        slots = ((m1, k1), (m2, k2), (m3, k3))
                        for (a, ka), (b, kb), (c, kc) in permutations(slots):
                            e_a, e_b, e_c = eps[a, ka], eps[b, kb], eps[c, kc]
                            for l1 in range(nl):
                                for l2 in range(nl):
                                    for l3 in range(nl):
                                        pref = (
                                            z1[a, l1]
                                            * z1[b, l2]
                                            * z1[c, l3]
                                            / (e_a - e1[a, l1])
                                        )
                                        num1 = (
                                            2.0 * e3b
                                            - 2.0 * e_a
                                            - e_b
                                            - e_c
                                            - e1[b, l2]
                                            - e1[c, l3]
                                        )
                                        den1 = (
                                            (e3b - e_a - e_b - e_c)
                                            * (e3b - e_a - e_b - e1[c, l3])
                                            * (e3b - e_a - e1[b, l2] - e_c)
                                            * (e3b - e_a - e1[b, l2] - e1[c, l3])
                                        )
                                        piece1 = (
                                            num1
                                            / den1
                                            * t_of(q - a, e3b - e_a)
                                            * f_photon[a, ka]
                                        )
                                        num2 = (
                                            2.0 * e3b
                                            - 2.0 * e1[a, l1]
                                            - e_b
                                            - e_c
                                            - e1[b, l2]
                                            - e1[c, l3]
                                        )
                                        den2 = (
                                            (e3b - e1[a, l1] - e_b - e_c)
                                            * (e3b - e1[a, l1] - e_b - e1[c, l3])
                                            * (e3b - e1[a, l1] - e1[b, l2] - e_c)
                                            * (e3b - e1[a, l1] - e1[b, l2] - e1[c, l3])
                                        )
                                        piece2 = (
                                            num2
                                            / den2
                                            * t_of(q - a, e3b - e1[a, l1])
                                            * f_on_shell[a, l1]
                                        )
                                        acc += pref * (piece1 - piece2)
                        f_a[m1, m2, k1, k2, k3] = om**3 / (6.0 * nb * z ** 1.5) * acc

    raw_norm = np.sqrt(
        6.0 * np.sum(f_b**2) + 2.0 * np.sum(f_bba**2) + 2.0 * np.sum(f_baa**2) + 6.0 * np.sum(f_a**2)
    )
    if raw_norm == 0.0:
        raise DenominatorHit("wavefunction reconstruction collapsed to zero")
    return TriplonWavefunctions(
        q_index=q_index,
        energy=e3b,
        f_b=f_b / raw_norm,
        f_bba=f_bba / raw_norm,
        f_baa=f_baa / raw_norm,
        f_a=f_a / raw_norm,
        raw_norm=float(raw_norm),
    )
