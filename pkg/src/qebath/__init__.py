"""Few-excitation spectra of quantum emitters coupled to a 1D tight-binding bath.

Subpackages cover the bath self-energies, the one-, two- and three-excitation
analytic solvers (bound states, polariton bands, doublon and triplon bands),
an exact-diagonalization oracle, a small finite-chain MPS ground-state solver
with superfluid/Mott diagnostics, and a sweep CLI.
"""

from .bath import BathSpec, CouplingSpec, SelfEnergyValue

__all__ = ["BathSpec", "CouplingSpec", "SelfEnergyValue"]
__version__ = "0.1.0"
