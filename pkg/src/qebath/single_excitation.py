"""One-excitation sector: two-emitter bound states and emitter-array polariton bands.

Two emitters at separation ``d`` decouple into symmetric/anti-symmetric
channels; the bound-state energies are the roots of

    omega - Delta - Sigma_d(omega) -/+ Sigma_o(omega) = 0

below (and, at strong coupling, above) the band.  The symmetric root always
exists for the 1D cosine band; the anti-symmetric one only for
``Delta < Omega^2 d / 2``.  For the periodic emitter array the one-excitation
Hamiltonian block-diagonalizes over the sublattice quasimomentum into
``(z+1)``-dimensional blocks, giving polariton bands whose lowest-band Fourier
coefficients are the effective Wannier hoppings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bath import (
    BathSpec,
    CouplingSpec,
    dispersion,
    lattice_greens_derivative,
    lattice_greens_point,
)

_EDGE = 1e-12
_RESIDUAL_TOL = 1e-12
_N_PROBES = 400


class MergedIntoContinuum(RuntimeError):
    """The anti-symmetric bound state does not exist at these parameters."""


class BandTouching(RuntimeError):
    """Lowest polariton band touches the next one; Wannier extraction ambiguous."""


@dataclass(frozen=True)
class ChannelSpectrum:
    """Finite-N eigenpairs of one symmetry channel.

    ``weights[l]`` is the probability of the (anti-)symmetric emitter mode in
    eigenstate ``l``; the weights of each channel sum to one.
    """

    energies: np.ndarray
    weights: np.ndarray


@dataclass
class TwoQeBoundStates:
    """Bound-state data of two emitters at separation d.

    ``e_plus``/``e_minus`` are the below-band symmetric/anti-symmetric roots,
    ``u_plus``/``u_minus`` the squared emitter amplitudes from the
    normalization condition.  Above-band roots, when present, are stored
    separately.  At finite N the full channel spectra are attached; they feed
    the two-excitation machinery.
    """

    bath: BathSpec
    coupling: CouplingSpec
    d: int
    e_plus: float | None
    e_minus: float | None
    u_plus_sq: float | None
    u_minus_sq: float | None
    e_plus_above: float | None = None
    e_minus_above: float | None = None
    spectra: dict[int, ChannelSpectrum] | None = None

    @property
    def exists_minus(self) -> bool:
        return self.e_minus is not None


@dataclass
class PolaritonSpectrum:
    """Single-excitation bands of the periodic emitter array.

    ``bands[m, lam]`` is the energy of band ``lam`` at quasimomentum
    ``momenta[m]``; ``weights`` carries the emitter probability per band.
    """

    momenta: np.ndarray
    bands: np.ndarray
    weights: np.ndarray
    bath: BathSpec
    coupling: CouplingSpec

    @property
    def n_cells(self) -> int:
        return len(self.momenta)

    @property
    def n_bands(self) -> int:
        return self.bands.shape[1]

    @property
    def spacing(self) -> int:
        return self.bath.spacing


@dataclass
class WannierHoppings:
    """Fourier coefficients t_l of the lowest polariton band; t_0 is on-site."""

    t: np.ndarray

    @property
    def e0(self) -> float:
        return float(self.t[0])

    def __getitem__(self, l: int) -> float:
        return float(self.t[l % len(self.t)])


def _channel_value(bath: BathSpec, coupling: CouplingSpec, d: int, sigma: int, omega) -> float:
    """Secular function omega - Delta - Sigma_d - sigma*Sigma_o, real omega off band."""
    o2 = coupling.omega**2
    if bath.n is None:
        g0 = lattice_greens_point(bath.j, omega, 0)
        gd = lattice_greens_point(bath.j, omega, d)
        return float(omega - coupling.delta - o2 * (g0 + sigma * gd).real)
    k = bath.momenta()
    eps = dispersion(bath, k)
    return float(omega - coupling.delta - o2 * np.mean((1.0 + sigma * np.cos(k * d)) / (omega - eps)))


def _channel_slope(bath: BathSpec, coupling: CouplingSpec, d: int, sigma: int, omega: float) -> float:
    o2 = coupling.omega**2
    if bath.n is None:
        g0 = lattice_greens_derivative(bath.j, omega, 0)
        gd = lattice_greens_derivative(bath.j, omega, d)
        return float(1.0 - o2 * (g0 + sigma * gd).real)
    k = bath.momenta()
    eps = dispersion(bath, k)
    return float(1.0 + o2 * np.mean((1.0 + sigma * np.cos(k * d)) / (omega - eps) ** 2))


def _bracketed_root(f, probes: np.ndarray, slope=None) -> float | None:
    """Single root of the increasing function f located by sign scan + bisection.

    A Newton polish with the analytic slope pushes the residual to the local
    floating-point floor, which matters for roots at large |omega|.
    """
    vals = np.array([f(w) for w in probes])
    sign = np.sign(vals)
    idx = np.where((sign[:-1] < 0) & (sign[1:] >= 0))[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    root = float(brentq(f, probes[i], probes[i + 1], xtol=1e-15, rtol=8.9e-16, maxiter=200))
    if slope is not None:
        for _ in range(3):
            fv = f(root)
            if fv == 0.0:
                break
            step = fv / slope(root)
            if not np.isfinite(step) or abs(step) > abs(probes[i + 1] - probes[i]):
                break
            root -= step
    return root


def _below_band_probes(j: float, coupling: CouplingSpec | None = None) -> np.ndarray:
    lo = 40.0 * j
    if coupling is not None:
        # Deep detunings / strong couplings push the root below -40J.
        lo += max(0.0, -coupling.delta) + coupling.omega
    return -np.geomspace(lo, _EDGE * j, _N_PROBES)


def _above_band_probes(bath: BathSpec, coupling: CouplingSpec) -> np.ndarray:
    top = 4.0 * bath.j
    hi = coupling.delta + coupling.omega + 40.0 * bath.j
    if hi <= top + 2.0 * _EDGE * bath.j:
        hi = top + 1.0 * bath.j
    return top + np.geomspace(_EDGE * bath.j, hi - top, _N_PROBES)


def _channel_weight(bath, coupling, d, sigma, energy) -> float:
    """Emitter weight 1/F'(E); equals u^2 from the normalization condition."""
    return 1.0 / _channel_slope(bath, coupling, d, sigma, energy)


def _finite_channel_spectrum(bath: BathSpec, coupling: CouplingSpec, d: int, sigma: int) -> ChannelSpectrum:
    """Exact eigenpairs of one channel at finite N.

    The (anti-)symmetric emitter mode couples to one photon combination per
    distinct band energy; pairing k with -k reduces the channel to a real
    arrowhead matrix of size ~N/2 whose first component is the emitter mode.
    """
    n = bath.n
    k = bath.momenta()
    eps = dispersion(bath, k)
    w = coupling.omega**2 * (1.0 + sigma * np.cos(k * d)) / n  # squared couplings
    m_half = n // 2
    idx = np.arange(m_half + 1)
    mult = np.where((idx == 0) | (idx == m_half), 1.0, 2.0)
    eps_r = eps[idx]
    w_r = w[idx] * mult
    keep = w_r > 1e-30
    eps_r, w_r = eps_r[keep], w_r[keep]
    dim = len(eps_r) + 1
    h = np.zeros((dim, dim))
    h[0, 0] = coupling.delta
    h[1:, 1:] = np.diag(eps_r)
    h[0, 1:] = h[1:, 0] = np.sqrt(w_r)
    vals, vecs = np.linalg.eigh(h)
    return ChannelSpectrum(energies=vals, weights=vecs[0, :] ** 2)


def solve_two_qe(bath: BathSpec, coupling: CouplingSpec, d: int | None = None) -> TwoQeBoundStates:
    """Bound states of two emitters at separation d (defaults to bath.spacing).

    Roots are isolated by a 400-point sign scan and bisection on each channel
    secular function, which is monotone between poles.  ``e_minus`` is absent
    when the anti-symmetric root has merged into the continuum, which for the
    cosine band happens exactly at Delta = Omega^2 d / 2.
    """
    if coupling.omega <= 0:
        raise ValueError("two-emitter bound-state solve requires Omega > 0")
    if d is None:
        d = bath.spacing
    below = _below_band_probes(bath.j, coupling)
    above = _above_band_probes(bath, coupling)
    roots: dict[int, float | None] = {}
    roots_above: dict[int, float | None] = {}
    weights: dict[int, float | None] = {}
    for sigma in (+1, -1):
        f = lambda w, s=sigma: _channel_value(bath, coupling, d, s, w)
        df = lambda w, s=sigma: _channel_slope(bath, coupling, d, s, w)
        r = _bracketed_root(f, below, slope=df)
        roots[sigma] = r
        weights[sigma] = _channel_weight(bath, coupling, d, sigma, r) if r is not None else None
        roots_above[sigma] = _bracketed_root(f, above, slope=df)
    if roots[+1] is None and coupling.delta < 0:
        raise RuntimeError(
            "no symmetric root below the band at Delta < 0; the symmetric bound "
            "state must always exist for the 1D cosine band"
        )
    for sigma in (+1, -1):
        r = roots[sigma]
        if r is not None:
            res = abs(_channel_value(bath, coupling, d, sigma, r))
            if res > _RESIDUAL_TOL * bath.j * max(1.0, 1.0 / weights[sigma]):
                raise RuntimeError(f"root residual {res:.2e} too large in channel {sigma:+d}")
    spectra = None
    if bath.n is not None:
        spectra = {s: _finite_channel_spectrum(bath, coupling, d, s) for s in (+1, -1)}
    return TwoQeBoundStates(
        bath=bath,
        coupling=coupling,
        d=d,
        e_plus=roots[+1],
        e_minus=roots[-1],
        u_plus_sq=weights[+1],
        u_minus_sq=weights[-1],
        e_plus_above=roots_above[+1],
        e_minus_above=roots_above[-1],
        spectra=spectra,
    )


def antisymmetric_threshold(delta: float, d: int) -> float:
    """Rabi coupling at which the anti-symmetric bound state appears, sqrt(2*Delta/d)."""
    if delta <= 0:
        return 0.0
    return float(np.sqrt(2.0 * delta / d))


def effective_hopping_two_qe(states: TwoQeBoundStates) -> tuple[float, float]:
    """Level splitting of the bound doublet: (E_0, t_eff) = ((E+ + E-)/2, (E+ - E-)/2)."""
    if not states.exists_minus or states.e_plus is None:
        raise MergedIntoContinuum("undefined: anti-symmetric state merged into continuum")
    e0 = 0.5 * (states.e_plus + states.e_minus)
    teff = 0.5 * (states.e_plus - states.e_minus)
    return e0, teff


def solve_single_qe(bath: BathSpec, coupling: CouplingSpec) -> tuple[float, float]:
    """Below-band bound state of a single emitter: energy and weight (E_1B, Z_1B)."""
    f = lambda w: _single_value(bath, coupling, w)
    df = lambda w: _single_slope(bath, coupling, w)
    root = _bracketed_root(f, _below_band_probes(bath.j, coupling), slope=df)
    if root is None:
        raise RuntimeError("single-emitter bound state not found below the band")
    z = 1.0 / _single_slope(bath, coupling, root)
    return root, z


def _single_value(bath, coupling, omega) -> float:
    o2 = coupling.omega**2
    if bath.n is None:
        return float(omega - coupling.delta - o2 * lattice_greens_point(bath.j, omega, 0).real)
    k = bath.momenta()
    eps = dispersion(bath, k)
    return float(omega - coupling.delta - o2 * np.mean(1.0 / (omega - eps)))


def _single_slope(bath, coupling, omega) -> float:
    o2 = coupling.omega**2
    if bath.n is None:
        return float(1.0 - o2 * lattice_greens_derivative(bath.j, omega, 0).real)
    k = bath.momenta()
    eps = dispersion(bath, k)
    return float(1.0 + o2 * np.mean(1.0 / (omega - eps) ** 2))


def markovian_teff_estimate(bath: BathSpec, coupling: CouplingSpec, d: int | None = None) -> float:
    """Single-pole estimate of the effective hopping, Z_1B * Sigma_o(E_1B, d).

    The exact splitting from :func:`effective_hopping_two_qe` is the oracle;
    this estimate is accurate in the arc region where the bound state is
    tightly localized.
    """
    if d is None:
        d = bath.spacing
    e1b, z1b = solve_single_qe(bath, coupling)
    o2 = coupling.omega**2
    if bath.n is None:
        sig_o = o2 * lattice_greens_point(bath.j, e1b, d).real
    else:
        k = bath.momenta()
        eps = dispersion(bath, k)
        sig_o = o2 * np.mean(np.cos(k * d) / (e1b - eps))
    return float(z1b * sig_o)


def teff_arc_form(j: float, e1b: float, z1b: float, omega: float, d: int) -> float:
    """Exponential arc form -Z_1B Omega^2 e^{-d/xi} / sqrt(E_1B (E_1B - 4J))."""
    if e1b >= 0:
        raise ValueError("arc form requires a below-band bound energy")
    root = np.sqrt(e1b * (e1b - 4.0 * j))
    xi_inv = np.log(0.5 * (2.0 - e1b / j + root / j))
    return float(-z1b * omega**2 * np.exp(-d * xi_inv) / root)


def polariton_bands(bath: BathSpec, coupling: CouplingSpec, n_cells: int) -> PolaritonSpectrum:
    """All z+1 polariton bands of the periodic emitter array on an n_cells grid.

    Each quasimomentum block couples the emitter mode to the z folded photon
    branches with strength Omega/sqrt(z); bands are sorted ascending per
    momentum and ``weights`` carries the emitter probability.
    """
    z = bath.spacing
    if bath.n is not None and bath.n != n_cells * z:
        raise ValueError(f"bath has n={bath.n} modes but the array needs {n_cells * z}")
    n_modes = n_cells * z
    p = 2.0 * np.pi * np.arange(n_cells) / n_modes
    kk = 2.0 * np.pi * np.arange(z) / z
    bands = np.empty((n_cells, z + 1))
    weights = np.empty((n_cells, z + 1))
    g = coupling.omega / np.sqrt(z)
    for m in range(n_cells):
        h = np.zeros((z + 1, z + 1))
        h[0, 0] = coupling.delta
        eps = 2.0 * bath.j * (1.0 - np.cos(p[m] + kk))
        h[1:, 1:] = np.diag(eps)
        h[0, 1:] = h[1:, 0] = g
        vals, vecs = np.linalg.eigh(h)
        bands[m] = vals
        weights[m] = vecs[0, :] ** 2
    return PolaritonSpectrum(momenta=p, bands=bands, weights=weights, bath=bath, coupling=coupling)


def wannier_hoppings(spec: PolaritonSpectrum, band: int = 0) -> WannierHoppings:
    """Hoppings t_l = (1/N_b) sum_p E(p) e^{i p l d} of one band (lowest by default)."""
    if band + 1 < spec.n_bands:
        gap = np.min(spec.bands[:, band + 1] - spec.bands[:, band])
        if gap < 1e-9:
            raise BandTouching(
                f"band identification ambiguous: bands {band} and {band + 1} "
                f"approach within {gap:.2e}"
            )
    e = spec.bands[:, band]
    t = np.fft.ifft(e)
    scale = max(np.max(np.abs(t)), 1e-300)
    if np.max(np.abs(t.imag)) > 1e-12 * scale:
        raise RuntimeError("Wannier hoppings acquired an imaginary part; band not parity symmetric")
    return WannierHoppings(t=t.real.copy())


def band_from_hoppings(hoppings: WannierHoppings) -> np.ndarray:
    """Inverse transform; reconstructs E(p) on the same grid (round-trip check)."""
    return np.fft.fft(hoppings.t).real
