"""Two excitations on the periodic emitter array: bubble, doublon band, interaction.

The hard-core T-matrix at total quasimomentum q is ``T(q, w) = -1/Pi_b(q, w)``
with the pair bubble

    Pi_b(q, w) = (1/N_b) sum_{p, lam, lam'} Z_lam(p) Z_lam'(q-p)
                 / (w - E_lam(p) - E_lam'(q-p))

built on the same finite momentum grid as the polariton bands, so root
bracketing and the ED cross-checks share one discretization.  Zeros of the
bubble inside a gap of the two-polariton continua are doublon states; the
Feshbach elimination of the higher bands turns the same structure into an
energy-dependent interaction for two lowest-band polaritons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bath import dispersion
from .single_excitation import PolaritonSpectrum

_MARGIN = 1e-9


class PoleHit(ValueError):
    """Bubble evaluated on top of a two-polariton energy."""


class IncompleteBand(ValueError):
    """Doublon band undefined at some momenta; hoppings unavailable."""


class DegenerateResidue(ValueError):
    pass


@dataclass
class PairBubble:
    """Precomputed sampler of Pi_b(q, .) at one total quasimomentum."""

    q_index: int
    pair_energies: np.ndarray
    pair_weights: np.ndarray

    @classmethod
    def build(cls, spec: PolaritonSpectrum, q_index: int) -> "PairBubble":
        nb = spec.n_cells
        idx_p = np.arange(nb)
        idx_q = (q_index - idx_p) % nb
        e = spec.bands[idx_p][:, :, None] + spec.bands[idx_q][:, None, :]
        w = spec.weights[idx_p][:, :, None] * spec.weights[idx_q][:, None, :]
        return cls(q_index=q_index, pair_energies=e.ravel(), pair_weights=w.ravel() / nb)

    def __call__(self, omega: float) -> float:
        gap = np.min(np.abs(omega - self.pair_energies))
        if gap < 1e-12:
            raise PoleHit(f"bubble evaluated at a two-polariton pole (distance {gap:.1e})")
        return float(np.sum(self.pair_weights / (omega - self.pair_energies)))

    def slope(self, omega: float) -> float:
        return float(-np.sum(self.pair_weights / (omega - self.pair_energies) ** 2))

    def t_matrix(self, omega: float) -> float:
        return -1.0 / self(omega)


def pair_bubble(spec: PolaritonSpectrum, q_index: int, omega: float) -> float:
    return PairBubble.build(spec, q_index)(omega)


def scattering_band_edges(
    spec: PolaritonSpectrum, q_index: int, band_pairs: tuple[tuple[int, int], ...] | None = None
) -> list[tuple[float, float]]:
    """Min/max intervals of E_a(p) + E_b(q-p), merged where they overlap.

    The default pairs are lowest-lowest and lowest-second, which bound the
    primary doublon gap; pass explicit pairs for higher continua.
    """
    if band_pairs is None:
        band_pairs = ((0, 0), (0, 1)) if spec.n_bands > 1 else ((0, 0),)
    nb = spec.n_cells
    idx_p = np.arange(nb)
    idx_q = (q_index - idx_p) % nb
    raw = []
    for a, b in band_pairs:
        e = np.concatenate(
            [
                spec.bands[idx_p, a] + spec.bands[idx_q, b],
                spec.bands[idx_p, b] + spec.bands[idx_q, a],
            ]
        )
        raw.append((float(e.min()), float(e.max())))
    raw.sort()
    merged = [raw[0]]
    for lo, hi in raw[1:]:
        mlo, mhi = merged[-1]
        if lo <= mhi:
            merged[-1] = (mlo, max(mhi, hi))
        else:
            merged.append((lo, hi))
    return merged


def _all_pairs(n_bands: int) -> tuple[tuple[int, int], ...]:
    return tuple((a, b) for a in range(n_bands) for b in range(a, n_bands))


def gap_windows(
    spec: PolaritonSpectrum, q_index: int, all_bands: bool = False
) -> list[tuple[float, float]]:
    """Pole-free windows between consecutive scattering continua at fixed q."""
    pairs = _all_pairs(spec.n_bands) if all_bands else None
    edges = scattering_band_edges(spec, q_index, band_pairs=pairs)
    return [(edges[i][1], edges[i + 1][0]) for i in range(len(edges) - 1)]


def doublon_band(
    spec: PolaritonSpectrum, q_index: int, window: int = 0, all_bands: bool = False
) -> float | None:
    """Zero of the bubble in the chosen midgap window at one q; None when absent."""
    windows = gap_windows(spec, q_index, all_bands=all_bands)
    if window >= len(windows):
        return None
    lo, hi = windows[window]
    if hi - lo <= 2.0 * _MARGIN:
        return None
    bubble = PairBubble.build(spec, q_index)
    a, b = lo + _MARGIN, hi - _MARGIN
    fa, fb = bubble(a), bubble(b)
    if not (fa > 0.0 > fb):
        return None
    root = brentq(bubble, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    for _ in range(3):
        fv = bubble(root)
        if fv == 0.0:
            break
        step = fv / bubble.slope(root)
        if not np.isfinite(step) or abs(step) > (hi - lo):
            break
        root -= step
    return float(root)


@dataclass
class DoublonBand:
    """Doublon dispersion on the q grid; NaN marks momenta without a root."""

    spec: PolaritonSpectrum
    energies: np.ndarray
    windows: list[tuple[float, float] | None]

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.energies)


def scan_doublon_band(spec: PolaritonSpectrum, window: int = 0, all_bands: bool = False) -> DoublonBand:
    nb = spec.n_cells
    energies = np.full(nb, np.nan)
    windows: list[tuple[float, float] | None] = []
    for q in range(nb):
        w = gap_windows(spec, q, all_bands=all_bands)
        windows.append(w[window] if window < len(w) else None)
        root = doublon_band(spec, q, window=window, all_bands=all_bands)
        if root is not None:
            energies[q] = root
    return DoublonBand(spec=spec, energies=energies, windows=windows)


def doublon_hoppings(band: DoublonBand) -> np.ndarray:
    """Hoppings t^D_r = (1/N_b) sum_q E_2B(q) e^{iqr d}; needs the full band."""
    if not np.all(band.defined):
        missing = int(np.sum(~band.defined))
        raise IncompleteBand(f"band incomplete: {missing} of {band.energies.size} momenta undefined")
    t = np.fft.ifft(band.energies)
    if np.max(np.abs(t.imag)) > 1e-12 * max(np.max(np.abs(t)), 1e-300):
        raise RuntimeError("doublon hoppings acquired an imaginary part")
    return t.real.copy()


@dataclass
class DoublonWavefunctions:
    """Residue wavefunctions of a doublon state at fixed q.

    Momentum amplitudes are indexed by the grid momentum k1 = q/2 + p of the
    first constituent: ``f_b[m1]`` pairs emitters at k1 and q - k1,
    ``f_ab[m1, K]`` one emitter at k1 with a photon at q - k1 + K, and
    ``f_a[m1, K, K']`` photons at k1 + K and q - k1 + K'.  Real-space
    probability profiles are relative-coordinate transforms.
    """

    q_index: int
    energy: float
    f_b: np.ndarray
    f_ab: np.ndarray
    f_a: np.ndarray

    @property
    def norm(self) -> float:
        return float(
            2.0 * np.sum(np.abs(self.f_b) ** 2)
            + np.sum(np.abs(self.f_ab) ** 2)
            + 2.0 * np.sum(np.abs(self.f_a) ** 2)
        )

    def pair_density(self) -> np.ndarray:
        """|f_b(r)|^2 of the emitter-pair separation r."""
        nb = self.f_b.size
        amp = np.fft.ifft(self.f_b) * np.sqrt(nb)
        return np.abs(amp) ** 2


def doublon_wavefunctions(
    spec: PolaritonSpectrum, q_index: int, energy: float
) -> DoublonWavefunctions:
    """Evaluate the residue wavefunctions of a verified doublon root at one q."""
    nb = spec.n_cells
    z = spec.spacing
    coupling = spec.coupling
    bath = spec.bath
    om = coupling.omega

    bubble = PairBubble.build(spec, q_index)
    residual = bubble(energy)
    if abs(residual) > 1e-8:
        raise ValueError(f"energy is not a bubble root (residual {residual:.1e})")
    z2 = -1.0 / bubble.slope(energy)

    m1 = np.arange(nb)
    m2 = (q_index - m1) % nb
    e1 = spec.bands[m1]  # (nb, L)
    e2 = spec.bands[m2]
    w1 = spec.weights[m1]
    w2 = spec.weights[m2]
    n_modes = nb * z
    # photon momenta k1 + K and k2 + K on the full lattice grid
    kk = 2.0 * np.pi * (m1[:, None] + nb * np.arange(z)[None, :]) / n_modes
    eps1 = dispersion(bath, kk)  # (nb, z): eps(k1 + K)
    eps2 = eps1[m2]  # eps(k2 + K)

    h_pair = energy - e1[:, :, None] - e2[:, None, :]  # (nb, L, L)
    if np.min(np.abs(h_pair)) < _MARGIN:
        raise DegenerateResidue("pole within 1e-9 of a two-polariton denominator")
    zz = w1[:, :, None] * w2[:, None, :]

    f_b = np.sqrt(z2 / (2.0 * nb)) * np.sum(zz / h_pair, axis=(1, 2))

    h_1k = energy - e1[:, :, None] - eps2[:, None, :]  # (nb, L, z): emitter k1, photon k2+K
    if np.min(np.abs(h_1k)) < _MARGIN:
        raise DegenerateResidue("pole within 1e-9 of a polariton-photon denominator")
    inner = np.sum(zz / h_pair, axis=2)  # (nb, L): sum over lam'
    f_ab = om * np.sqrt(2.0 * z2 / (nb * z)) * np.einsum("ml,mlK->mK", inner, 1.0 / h_1k)

    h_kk = energy - eps1[:, :, None] - eps2[:, None, :]  # (nb, z, z)
    if np.min(np.abs(h_kk)) < _MARGIN:
        raise DegenerateResidue("pole within 1e-9 of a two-photon denominator")
    h_2k = energy - e2[:, :, None] - eps1[:, None, :]  # (nb, L, z): emitter k2, photon k1+K
    if np.min(np.abs(h_2k)) < _MARGIN:
        raise DegenerateResidue("pole within 1e-9 of a polariton-photon denominator")
    # sum_{lam lam'} Z Z [1/h_pair + 1/h_kk] / (h_2k[lam', K] h_1k[lam, K'])
    # einsum output axes: J <- h_2k reciprocal index (photon on k1), K <- h_1k (photon on k2)
    term1 = np.einsum("mab,mab,maK,mbJ->mJK", zz, 1.0 / h_pair, 1.0 / h_1k, 1.0 / h_2k)
    sep = np.einsum("mab,maK,mbJ->mJK", zz, 1.0 / h_1k, 1.0 / h_2k)
    term2 = sep / h_kk
    f_a = om**2 * np.sqrt(z2 / (2.0 * nb)) / z * (term1 + term2)
    return DoublonWavefunctions(q_index=q_index, energy=energy, f_b=f_b, f_ab=f_ab, f_a=f_a)


def feshbach_interaction(spec: PolaritonSpectrum, q_index: int, energy: float) -> float:
    """Energy-dependent interaction of two lowest-band polaritons at momentum q.

    The higher bands (closed channel) are eliminated, leaving
    ``U_int = -1/Pi'`` where the primed bubble excludes the lowest-lowest
    band pair from the sum.
    """
    nb = spec.n_cells
    idx_p = np.arange(nb)
    idx_q = (q_index - idx_p) % nb
    e = spec.bands[idx_p][:, :, None] + spec.bands[idx_q][:, None, :]
    w = spec.weights[idx_p][:, :, None] * spec.weights[idx_q][:, None, :]
    mask = np.ones_like(w, dtype=bool)
    mask[:, 0, 0] = False
    de = energy - e[mask]
    if np.min(np.abs(de)) < 1e-12:
        raise PoleHit("interaction evaluated at an excluded-band pole")
    bracket = np.sum(w[mask] / de) / nb
    return float(-1.0 / bracket)


def u_eff(spec: PolaritonSpectrum) -> float:
    """Low-energy interaction Z_1(0)^2 U_int(0, 2 E_1(0)) at the band bottom."""
    e0 = 2.0 * spec.bands[0, 0]
    return float(spec.weights[0, 0] ** 2 * feshbach_interaction(spec, 0, e0))
