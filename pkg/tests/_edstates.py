"""Helpers that expand analytic momentum-space states in the ED occupation basis."""

from collections import defaultdict

import numpy as np

from qebath.ed import SectorBasis


def apply_creation(states: dict, kind: str, k: float, n_sites: int, qe_positions, cap: int) -> dict:
    """Apply a momentum creation operator to a dict of occupation amplitudes.

    ``b``-type operators are hard-core on the emitter sublattice (unitary
    Fourier convention over the emitters); ``a``-type operators are bosonic
    over all lattice sites.
    """
    out: dict = defaultdict(complex)
    if kind == "b":
        norm = 1.0 / np.sqrt(len(qe_positions))
        for (em, ph), amp in states.items():
            for j, site in enumerate(qe_positions):
                if em[j] == 1:
                    continue  # hard-core
                em2 = list(em)
                em2[j] = 1
                out[(tuple(em2), ph)] += amp * norm * np.exp(1j * k * site)
    elif kind == "a":
        norm = 1.0 / np.sqrt(n_sites)
        for (em, ph), amp in states.items():
            for n in range(n_sites):
                if ph[n] >= cap:
                    continue
                ph2 = list(ph)
                ph2[n] += 1
                out[(em, tuple(ph2))] += amp * norm * np.exp(1j * k * n) * np.sqrt(ph[n] + 1.0)
    else:
        raise ValueError(kind)
    return dict(out)


def momentum_state_vector(terms, basis: SectorBasis) -> np.ndarray:
    """Sum of creation-operator strings applied to the vacuum, as a basis vector.

    ``terms`` is an iterable of ``(coeff, [(kind, k), ...])``.
    """
    n_sites = basis.n_sites
    qe_positions = basis.qe_positions
    total: dict = defaultdict(complex)
    vacuum = {((0,) * len(qe_positions), (0,) * n_sites): 1.0 + 0.0j}
    for coeff, ops in terms:
        if coeff == 0.0:
            continue
        state = vacuum
        for kind, k in ops:
            state = apply_creation(state, kind, k, n_sites, qe_positions, basis.cap)
        for cfg, amp in state.items():
            total[cfg] += coeff * amp
    v = np.zeros(basis.dimension, dtype=complex)
    for cfg, amp in total.items():
        idx = basis.index.get(cfg)
        if idx is not None:
            v[idx] = amp
    return v
