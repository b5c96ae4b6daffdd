"""Exact diagonalization of the emitter-bath Hamiltonian in fixed-excitation sectors.

The full Hamiltonian conserves the total excitation number, so each sector can
be enumerated and diagonalized on its own.  Emitters are hard-core two-level
sites (the infinite-repulsion limit is exact in this representation) and bath
sites hold up to ``cap`` photons.  With ``cap = n_exc`` the truncation is
exact, since no site can hold more photons than the sector carries.

For periodic emitter arrays the basis can additionally be adapted to the
translation symmetry (shift by one unit cell), which resolves the spectrum by
quasi-momentum.  This module is the ground-truth oracle for the analytic
solvers; it is deliberately brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import eigsh

from .bath import BathSpec, CouplingSpec

_DIM_BOUND = 5_000_000
_DENSE_CUTOFF = 4000


class SectorTooLarge(ValueError):
    """Sector dimension exceeds the brute-force bound."""


Config = tuple[tuple[int, ...], tuple[int, ...]]  # (emitter bits, photon occupations)


@dataclass
class SectorBasis:
    """Occupation basis of one fixed-excitation sector.

    ``configs`` holds (emitter, photon) occupation tuples.  With a momentum
    label the basis is built from translation orbits; ``configs`` then stores
    orbit representatives and ``orbit_sizes`` their periods.
    """

    n_sites: int
    qe_positions: tuple[int, ...]
    n_exc: int
    cap: int
    periodic: bool = True
    momentum: int | None = None
    n_cells: int = 0
    configs: list[Config] = field(default_factory=list)
    index: dict[Config, int] = field(default_factory=dict)
    orbit_sizes: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return len(self.configs)


@dataclass
class SpectrumReport:
    """Lowest eigenvalues of one sector, optionally with eigenvectors."""

    basis: SectorBasis
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


def _photon_configs(n_sites: int, total: int, cap: int):
    """All occupation tuples of ``total`` photons on ``n_sites`` sites, each <= cap."""
    if total == 0:
        yield (0,) * n_sites
        return
    if total > n_sites * cap:
        return
    # Depth-first over sites, iterative to stay clear of the recursion limit.
    prefix: list[int] = []
    counters = [min(total, cap)]
    while counters:
        occ = counters[-1]
        if occ < 0:
            counters.pop()
            if prefix:
                prefix.pop()
            continue
        counters[-1] -= 1
        placed = sum(prefix) + occ
        remaining_sites = n_sites - len(prefix) - 1
        rest = total - placed
        if rest < 0 or rest > remaining_sites * cap:
            continue
        if remaining_sites == 0:
            yield tuple(prefix) + (occ,)
            continue
        prefix.append(occ)
        counters.append(min(rest, cap))


def _enumerate_sector(n_qe: int, n_sites: int, n_exc: int, cap: int) -> list[Config]:
    configs: list[Config] = []
    for n_up in range(min(n_qe, n_exc) + 1):
        for up_sites in combinations(range(n_qe), n_up):
            em = [0] * n_qe
            for j in up_sites:
                em[j] = 1
            for ph in _photon_configs(n_sites, n_exc - n_up, cap):
                configs.append((tuple(em), ph))
                if len(configs) > _DIM_BOUND:
                    raise SectorTooLarge(
                        f"sector exceeds {_DIM_BOUND} configurations "
                        f"(n_qe={n_qe}, n_sites={n_sites}, n_exc={n_exc}, cap={cap})"
                    )
    return configs


def _translate(config: Config, z: int) -> Config:
    """Shift every occupation by one unit cell (z bath sites, one emitter slot)."""
    em, ph = config
    em2 = em[-1:] + em[:-1]
    ph2 = ph[-z:] + ph[:-z]
    return (em2, ph2)


def build_sector(
    n_qe: int,
    z: int,
    n_exc: int,
    cap: int,
    momentum: int | None = None,
    qe_positions: tuple[int, ...] | None = None,
    n_sites: int | None = None,
    periodic: bool = True,
) -> SectorBasis:
    """Enumerate the fixed-excitation sector.

    By default the emitters sit on a periodic array, one per unit cell of
    ``z`` bath sites (``n_sites = n_qe * z``).  Passing ``qe_positions`` and
    ``n_sites`` explicitly instead describes an arbitrary layout such as two
    emitters at distance ``d``; momentum adaptation is only defined for the
    periodic array layout.
    """
    if qe_positions is None:
        n_sites = n_qe * z
        qe_positions = tuple(j * z for j in range(n_qe))
        array_layout = True
    else:
        if n_sites is None:
            raise ValueError("explicit qe_positions requires n_sites")
        qe_positions = tuple(qe_positions)
        array_layout = False
    if momentum is not None and not array_layout:
        raise ValueError("momentum sectors require the periodic array layout")
    if momentum is not None and not periodic:
        raise ValueError("momentum sectors require periodic boundaries")

    basis = SectorBasis(
        n_sites=n_sites,
        qe_positions=qe_positions,
        n_exc=n_exc,
        cap=cap,
        periodic=periodic,
        momentum=momentum,
        n_cells=n_qe if array_layout else 0,
    )
    all_configs = _enumerate_sector(len(qe_positions), n_sites, n_exc, cap)

    if momentum is None:
        basis.configs = all_configs
        basis.index = {c: i for i, c in enumerate(all_configs)}
        return basis

    n_cells = n_qe
    if not (0 <= momentum < n_cells):
        raise ValueError(f"momentum index must lie in [0, {n_cells}), got {momentum}")
    seen: set[Config] = set()
    reps: list[Config] = []
    sizes: list[int] = []
    for c in all_configs:
        if c in seen:
            continue
        orbit = [c]
        cur = _translate(c, z)
        while cur != c:
            orbit.append(cur)
            cur = _translate(cur, z)
        seen.update(orbit)
        period = len(orbit)
        # |q; c> survives only when q * period = 0 mod n_cells.
        if (momentum * period) % n_cells == 0:
            rep = min(orbit)
            reps.append(rep)
            sizes.append(period)
    basis.configs = reps
    basis.index = {c: i for i, c in enumerate(reps)}
    basis.orbit_sizes = np.asarray(sizes)
    return basis


def _rep_and_shift(config: Config, z: int, period_hint: int | None = None) -> tuple[Config, int]:
    """Canonical orbit representative of ``config`` and the shift reaching it."""
    best = config
    best_r = 0
    cur = config
    r = 0
    while True:
        cur = _translate(cur, z)
        r += 1
        if cur == config:
            break
        if cur < best:
            best = cur
            best_r = r
    return best, best_r


def _apply_hamiltonian(
    basis: SectorBasis, bath: BathSpec, coupling: CouplingSpec, config: Config
) -> list[tuple[Config, float]]:
    """All (target config, amplitude) pairs of H acting on one basis config."""
    em, ph = config
    n = basis.n_sites
    out: list[tuple[Config, float]] = []

    diag = coupling.delta * sum(em) + 2.0 * bath.j * sum(ph)
    out.append((config, diag))

    # Bath hopping -J (a^dag_{n+1} a_n + h.c.); the wrap bond only when periodic.
    for site in range(n):
        if ph[site] == 0:
            continue
        neighbors = [(site + 1) % n, (site - 1) % n]
        if not basis.periodic:
            neighbors = [nb for nb in (site + 1, site - 1) if 0 <= nb < n]
        for nb in neighbors:
            if ph[nb] >= basis.cap:
                continue
            amp = -bath.j * np.sqrt(ph[site] * (ph[nb] + 1))
            ph2 = list(ph)
            ph2[site] -= 1
            ph2[nb] += 1
            out.append(((em, tuple(ph2)), amp))

    # Local emitter-bath exchange Omega (b^dag a + a^dag b).
    for jq, site in enumerate(basis.qe_positions):
        if em[jq] == 1 and ph[site] < basis.cap:
            amp = coupling.omega * np.sqrt(ph[site] + 1)
            em2 = list(em)
            em2[jq] = 0
            ph2 = list(ph)
            ph2[site] += 1
            out.append(((tuple(em2), tuple(ph2)), amp))
        if em[jq] == 0 and ph[site] > 0:
            amp = coupling.omega * np.sqrt(ph[site])
            em2 = list(em)
            em2[jq] = 1
            ph2 = list(ph)
            ph2[site] -= 1
            out.append(((tuple(em2), tuple(ph2)), amp))
    return out


def sector_hamiltonian(basis: SectorBasis, bath: BathSpec, coupling: CouplingSpec):
    """Sector Hamiltonian as a sparse matrix (complex in momentum sectors)."""
    dim = basis.dimension
    dtype = complex if basis.momentum is not None else float
    h = lil_matrix((dim, dim), dtype=dtype)
    if basis.momentum is None:
        for i, c in enumerate(basis.configs):
            for target, amp in _apply_hamiltonian(basis, bath, coupling, c):
                h[basis.index[target], i] += amp
        return h.tocsr()

    z = basis.n_sites // basis.n_cells
    q_phase = 2.0 * np.pi * basis.momentum / basis.n_cells
    sizes = basis.orbit_sizes
    for i, c in enumerate(basis.configs):
        for target, amp in _apply_hamiltonian(basis, bath, coupling, c):
            rep, shift = _rep_and_shift(target, z)
            jdx = basis.index.get(rep)
            if jdx is None:
                continue  # target orbit incompatible with this momentum
            factor = np.exp(-1j * q_phase * shift) * np.sqrt(sizes[i] / sizes[jdx])
            h[jdx, i] += amp * factor
    return h.tocsr()


def sector_spectrum(
    basis: SectorBasis,
    bath: BathSpec,
    coupling: CouplingSpec,
    m: int | None = None,
    eigenvectors: bool = False,
) -> SpectrumReport:
    """Lowest ``m`` eigenvalues of the sector (all of them when ``m`` is None).

    Dense diagonalization below dimension 4000, Lanczos above.  Hermiticity is
    asserted to 1e-12 before solving.
    """
    h = sector_hamiltonian(basis, bath, coupling)
    dim = basis.dimension
    herm = abs(h - h.conj().T)
    if herm.count_nonzero() and herm.max() > 1e-12:
        raise AssertionError(f"sector Hamiltonian not Hermitian: residual {herm.max():.3e}")
    if m is None or dim <= _DENSE_CUTOFF:
        dense = h.toarray()
        if eigenvectors:
            vals, vecs = np.linalg.eigh(dense)
        else:
            vals = np.linalg.eigvalsh(dense)
            vecs = None
        if m is not None:
            vals = vals[:m]
            vecs = vecs[:, :m] if vecs is not None else None
        return SpectrumReport(basis, vals, vecs)
    k = min(m, dim - 2)
    if eigenvectors:
        vals, vecs = eigsh(h, k=k, which="SA", maxiter=5000)
        order = np.argsort(vals)
        return SpectrumReport(basis, vals[order], vecs[:, order])
    vals = eigsh(h, k=k, which="SA", maxiter=5000, return_eigenvectors=False)
    return SpectrumReport(basis, np.sort(vals))


@dataclass
class ComparisonRow:
    analytic: float
    nearest_ed: float
    deviation: float
    passed: bool


def compare(analytic_levels, report: SpectrumReport, tolerance: float) -> list[ComparisonRow]:
    """Per-level deviation table of analytic levels against the ED spectrum."""
    rows = []
    ed = np.asarray(report.eigenvalues)
    for level in np.atleast_1d(np.asarray(analytic_levels, dtype=float)):
        idx = int(np.argmin(np.abs(ed - level)))
        dev = abs(ed[idx] - level)
        rows.append(ComparisonRow(float(level), float(ed[idx]), float(dev), dev <= tolerance))
    return rows


def two_qe_sector(n_sites: int, d: int, n_exc: int, momentum: int | None = None) -> SectorBasis:
    """Sector for two emitters at sites 0 and d on an n_sites ring; cap = n_exc."""
    return build_sector(
        2, 1, n_exc, cap=n_exc, momentum=momentum, qe_positions=(0, d), n_sites=n_sites
    )


def overlap_with_eigenspace(
    report: SpectrumReport, state: np.ndarray, energy: float, degeneracy_tol: float = 1e-9
) -> float:
    """Norm of the projection of ``state`` onto the ED eigenspace nearest ``energy``.

    Degenerate levels (within ``degeneracy_tol``) are projected as a block so
    that momentum pairs q and -q do not artificially depress the overlap.
    """
    if report.eigenvectors is None:
        raise ValueError("spectrum report carries no eigenvectors")
    vals = report.eigenvalues
    idx = int(np.argmin(np.abs(vals - energy)))
    members = np.where(np.abs(vals - vals[idx]) <= degeneracy_tol)[0]
    block = report.eigenvectors[:, members]
    psi = state / np.linalg.norm(state)
    return float(np.linalg.norm(block.conj().T @ psi))
