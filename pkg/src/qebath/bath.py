"""1D tight-binding bath: dispersion, momentum grids, and emitter self-energies.

Everything downstream (bound-state solvers, pair/triplon spectra, the ED
cross-checks) is built on the quantities defined here: the cosine band
``eps_k = 2J - 2J cos k``, the diagonal and off-diagonal self-energies as
finite-N mode sums, and their N -> infinity closed forms obtained by contour
integration of the lattice Green function.

Two evaluation paths are exposed on purpose.  The finite-N path uses plain
uniform-weight sums over ``k = 2*pi*m/N`` and is exactly comparable with exact
diagonalization on the same lattice.  The continuum path uses the closed form
and carries no quadrature error, which keeps pole finding clean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

BELOW_BAND = "below-band"
ABOVE_BAND = "above-band"
IN_BAND_RETARDED = "in-band-retarded"

# Regulator for retarded in-band sums, in units of J.
_ETA = 1e-8


class InBandError(ValueError):
    """Raised when a real in-band frequency is evaluated without a branch choice."""


@dataclass(frozen=True)
class BathSpec:
    """Bath dispersion parameters and lattice geometry.

    ``j`` is the hopping energy and sets the global energy scale.  ``n`` is the
    number of bath modes; ``n=None`` selects the continuum (N -> infinity)
    closed forms.  ``spacing`` is the emitter separation ``d`` in the two-QE
    setting and doubles as the number of bath sites per unit cell ``z`` in the
    array setting.
    """

    j: float
    n: int | None = None
    spacing: int = 1

    def __post_init__(self) -> None:
        if self.j <= 0:
            raise ValueError(f"bath hopping must be positive, got j={self.j}")
        if self.n is not None and self.n < 4:
            raise ValueError(f"need at least 4 bath modes, got n={self.n}")
        if self.spacing < 1:
            raise ValueError(f"spacing must be a positive integer, got {self.spacing}")

    @property
    def band_top(self) -> float:
        return 4.0 * self.j

    def momenta(self) -> np.ndarray:
        """Uniform momentum grid k = 2*pi*m/N, m = 0..N-1."""
        if self.n is None:
            raise ValueError("momentum grid undefined in the continuum limit")
        return 2.0 * np.pi * np.arange(self.n) / self.n


@dataclass(frozen=True)
class CouplingSpec:
    """Emitter detuning (relative to the band bottom) and Rabi coupling."""

    delta: float
    omega: float

    def __post_init__(self) -> None:
        if self.omega < 0:
            raise ValueError(f"Rabi coupling must be non-negative, got {self.omega}")


@dataclass(frozen=True)
class SelfEnergyValue:
    """A self-energy sample together with its branch label.

    Below-band values are purely real; in-band retarded values have a
    non-positive imaginary part.
    """

    value: complex
    branch: str


def dispersion(bath: BathSpec, k):
    """Cosine band 2J - 2J cos(k); minimum 0 at k=0, maximum 4J at k=pi."""
    return 2.0 * bath.j * (1.0 - np.cos(k))


def _classify(bath: BathSpec, omega: float, branch: str | None) -> str:
    if np.iscomplexobj(omega):
        raise ValueError("pass a real frequency; the retarded branch adds the regulator")
    if omega < 0.0:
        return BELOW_BAND
    if omega > bath.band_top:
        return ABOVE_BAND
    if branch != IN_BAND_RETARDED:
        raise InBandError(
            f"omega={omega} lies inside the band [0, {bath.band_top}]; "
            f"request branch={IN_BAND_RETARDED!r} for the retarded value"
        )
    return IN_BAND_RETARDED


def lattice_greens_point(j: float, omega: complex, d: int) -> complex:
    """Momentum integral (1/2pi) int dk e^{i k d} / (omega - eps_k).

    Valid for any complex ``omega`` off the band [0, 4J].  Evaluated by
    residues: the integrand has poles at the roots of J z^2 + (omega-2J) z + J
    in ``z = e^{ik}``, whose product is 1; only the root inside the unit circle
    contributes.  The branch satisfies value -> 1/omega as omega -> -infinity,
    which is the decaying-bound-state branch.
    """
    z = _inner_root(j, omega)
    return z ** (d + 1) / (j * (z * z - 1.0))


def _inner_root(j: float, omega: complex) -> complex:
    """|z|<1 root of J z^2 + (omega-2J) z + J = 0, cancellation-free.

    The root product is exactly 1, so the small root is the reciprocal of the
    large one, which is computed without subtractive cancellation.
    """
    b = omega - 2.0 * j
    disc = np.sqrt(b * b - 4.0 * j * j + 0j)
    r1 = (-b + disc) / (2.0 * j)
    r2 = (-b - disc) / (2.0 * j)
    big = r1 if abs(r1) > abs(r2) else r2
    return 1.0 / big


def lattice_greens_derivative(j: float, omega: complex, d: int) -> complex:
    """d/d(omega) of :func:`lattice_greens_point` at fixed separation."""
    b = omega - 2.0 * j
    z = _inner_root(j, omega)
    dz = -z / (2.0 * j * z + b)
    num = z**d * ((d - 1.0) * z * z - (d + 1.0))
    return num / (j * (z * z - 1.0) ** 2) * dz


def decaying_root(j: float, omega: float) -> float:
    """Magnitude-<1 root of the dispersion quadratic; |Sigma_o| = |Sigma_d| |x|^d."""
    z = _inner_root(j, omega)
    if abs(z.imag) > 1e-12 * max(1.0, abs(z.real)):
        raise ValueError("decaying root is real only outside the band")
    return float(z.real)


def _finite_sum(bath: BathSpec, coupling: CouplingSpec, omega: complex, d: int) -> complex:
    k = bath.momenta()
    eps = dispersion(bath, k)
    # cos(kd) carries the full sum: the sin part cancels by k -> -k parity.
    return coupling.omega**2 * np.mean(np.cos(k * d) / (omega - eps))


def _sigma(bath: BathSpec, coupling: CouplingSpec, omega: float, d: int, branch: str | None) -> SelfEnergyValue:
    label = _classify(bath, omega, branch)
    if coupling.omega == 0.0:
        return SelfEnergyValue(0.0 + 0.0j, label)
    if label == IN_BAND_RETARDED:
        eta = _ETA * bath.j
        if bath.n is None:
            # Closed form is analytic off the real axis; a tiny regulator is exact enough.
            val = coupling.omega**2 * lattice_greens_point(bath.j, omega + 1e-12j * bath.j, d)
        else:
            # eta -> 0 Richardson step on the finite sum; skipped when omega sits
            # within ~eta of a grid mode, where the limit does not exist.
            f1 = _finite_sum(bath, coupling, omega + 1j * eta, d)
            f2 = _finite_sum(bath, coupling, omega + 0.5j * eta, d)
            val = f1 if abs(f2) > 2.0 * abs(f1) else 2.0 * f2 - f1
        return SelfEnergyValue(complex(val), label)
    if bath.n is None:
        val = coupling.omega**2 * lattice_greens_point(bath.j, omega, d)
    else:
        val = _finite_sum(bath, coupling, omega, d)
    return SelfEnergyValue(complex(np.real_if_close(val, tol=100)), label)


def self_energy_diag(
    bath: BathSpec, coupling: CouplingSpec, omega: float, branch: str | None = None
) -> SelfEnergyValue:
    """Diagonal self-energy Sigma_d(omega) = (Omega^2/N) sum_k 1/(omega - eps_k).

    For ``n=None`` and omega below the band this equals
    ``-Omega^2 / sqrt(omega (omega - 4J))``.
    """
    return _sigma(bath, coupling, omega, 0, branch)


def self_energy_offdiag(
    bath: BathSpec, coupling: CouplingSpec, omega: float, d: int, branch: str | None = None
) -> SelfEnergyValue:
    """Off-diagonal self-energy Sigma_o(omega, d) = (Omega^2/N) sum_k e^{ikd}/(omega - eps_k).

    Real for real omega outside the band; in the continuum it equals
    ``Sigma_d(omega) x^d`` with ``x`` the decaying root of the dispersion
    quadratic.
    """
    if d < 0:
        raise ValueError("separation must be non-negative")
    return _sigma(bath, coupling, omega, d, branch)


def markovian_vdd(j: float, delta: float, omega: float, d: int) -> float:
    """Markovian dipole-dipole strength -(Omega^2/|Delta|) e^{-d/xi}, xi = 1/ln(|Delta|/J).

    Derived for in-gap detuning; rejects delta >= 0.  ``e^{-d/xi}`` is
    evaluated as ``(J/|Delta|)^d``, which extends smoothly through
    ``|Delta| = J``.
    """
    if delta >= 0.0:
        raise ValueError("Markovian dipole-dipole formula requires in-gap detuning delta < 0")
    return -(omega**2 / abs(delta)) * (j / abs(delta)) ** d


def markovian_vdd_quadrature(j: float, delta: float, omega: float, d: int) -> float:
    """Bath-elimination integral Omega^2 int dk/(2pi) e^{ikd}/(Delta - eps_k), at D=1.

    The general-dimension quadrature form restricted to one dimension; used as
    a cross-check of both :func:`markovian_vdd` and the contour closed form.
    """
    if delta >= 0.0:
        raise ValueError("quadrature form requires in-gap detuning delta < 0")

    def integrand(k: float) -> float:
        return np.cos(k * d) / (delta - 2.0 * j * (1.0 - np.cos(k)))

    val, _ = quad(integrand, 0.0, 2.0 * np.pi, limit=200, epsabs=1e-13, epsrel=1e-13)
    return omega**2 * val / (2.0 * np.pi)
