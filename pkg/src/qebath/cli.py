"""Command-line sweep driver with CSV/JSON output.

Tasks cover the detuning-coupling plane sweeps (two-emitter hopping, Wannier
hoppings, pair ground state with ansatz fidelities, low-energy interaction),
momentum-resolved band exports for the doublon and triplon sectors, single
ground-state MPS points with phase diagnostics, and the ED-oracle check
suite.  Every run writes one CSV (one row per grid point, absent quantities
carried as empty fields next to explicit flags) plus a JSON manifest echoing
the configuration, tolerances, and timing.  Output is deterministic: rows are
sorted by parameter tuple and floats are serialized via repr, so reruns and
parallel runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bath import BathSpec, CouplingSpec
from .single_excitation import (
    BandTouching,
    effective_hopping_two_qe,
    polariton_bands,
    solve_two_qe,
    wannier_hoppings,
)

SCHEMA_VERSION = 1
PLANE_TASKS = ("teff-2qe", "wannier-hoppings", "pair-ground", "ueff")
TASKS = PLANE_TASKS + ("doublon-band", "triplon-band", "dmrg-point", "check-suite")

CHECK_TOLERANCES = {
    "single_excitation_vs_ed": 1e-8,
    "pair_levels_vs_ed": 1e-8,
    "doublon_band_vs_ed": 1e-6,
    "triplon_band_vs_ed": 1e-5,
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _teff_point(args, delta, omega):
    bath = BathSpec(1.0, args.n if args.n else None, spacing=args.d)
    row = {"delta": delta, "omega": omega, "d": args.d}
    st = solve_two_qe(bath, CouplingSpec(delta, omega), args.d)
    row["e_plus"] = st.e_plus
    row["e_minus"] = st.e_minus
    row["exists_minus"] = st.exists_minus
    if st.exists_minus and st.e_plus is not None:
        e0, teff = effective_hopping_two_qe(st)
        row["e0"] = e0
        row["t_eff"] = teff
    else:
        row["e0"] = None
        row["t_eff"] = None
    row["status"] = "ok"
    return row


def _wannier_point(args, delta, omega):
    nb = args.nb
    bath = BathSpec(1.0, nb * args.z, spacing=args.z)
    row = {"delta": delta, "omega": omega, "z": args.z, "nb": nb}
    try:
        spec = polariton_bands(bath, CouplingSpec(delta, omega), nb)
        hop = wannier_hoppings(spec)
        for l in range(4):
            row[f"t{l}"] = hop[l]
        row["status"] = "ok"
    except BandTouching as exc:
        for l in range(4):
            row[f"t{l}"] = None
        row["status"] = f"error: {exc}"
    return row


def _pair_point(args, delta, omega):
    from .two_qe_pair import (
        bound_pair_weight,
        delta_eg,
        doublon_hopping_two_qe,
        solve_pair_poles,
        variational_ground_state,
    )

    bath = BathSpec(1.0, args.n or 1024, spacing=args.d)
    coupling = CouplingSpec(delta, omega)
    row = {"delta": delta, "omega": omega, "d": args.d, "n": bath.n}
    spec = solve_pair_poles(bath, coupling, args.d)
    row["e_ground"] = spec.e_ground
    row["delta_eg"] = delta_eg(spec)
    row["e_doublon_plus"] = spec.e_doublon_plus
    row["e_doublon_minus"] = spec.e_doublon_minus
    row["doublons_exist"] = spec.doublon_plus is not None and spec.doublon_minus is not None
    if row["doublons_exist"]:
        mu, td = doublon_hopping_two_qe(spec)
        row["mu_d"], row["t_d"] = mu, td
    else:
        row["mu_d"] = row["t_d"] = None
    vs = variational_ground_state(bath, coupling, args.d, spectrum=spec)
    p, sym_only = bound_pair_weight(spec)
    row["p_v"] = vs.overlap_pv
    row["p_weight"] = p
    row["symmetric_only"] = sym_only
    row["status"] = "ok"
    return row


def _ueff_point(args, delta, omega):
    from .array_pair import u_eff

    nb = args.nb
    bath = BathSpec(1.0, nb * args.z, spacing=args.z)
    row = {"delta": delta, "omega": omega, "z": args.z, "nb": nb}
    spec = polariton_bands(bath, CouplingSpec(delta, omega), nb)
    row["u_eff"] = u_eff(spec)
    row["e0_convention"] = "2*E_1(0)"
    row["status"] = "ok"
    return row


_POINT_WORKERS = {
    "teff-2qe": _teff_point,
    "wannier-hoppings": _wannier_point,
    "pair-ground": _pair_point,
    "ueff": _ueff_point,
}


def _run_point(payload):
    task, args, idx, delta, omega = payload
    try:
        row = _POINT_WORKERS[task](args, delta, omega)
    except Exception as exc:  # partial failures become rows, not crashes
        row = {"delta": delta, "omega": omega, "status": f"error: {exc}"}
    return idx, row


def export_band(task: str, args) -> tuple[list[str], list[dict]]:
    """Momentum-resolved continua and isolated-band export for one parameter set."""
    from .array_pair import gap_windows, scan_doublon_band

    delta, omega = args.dmin, args.omin
    nb = args.nb
    bath = BathSpec(1.0, nb * args.z, spacing=args.z)
    spec = polariton_bands(bath, CouplingSpec(delta, omega), nb)
    band2 = scan_doublon_band(spec)
    rows = []
    if task == "doublon-band":
        columns = [
            "q_index", "q", "cont1_lo", "cont1_hi", "cont2_lo", "cont2_hi",
            "band", "band_defined", "status",
        ]
        from .array_pair import scattering_band_edges

        for q in range(nb):
            edges = scattering_band_edges(spec, q)
            row = {"q_index": q, "q": spec.momenta[q]}
            row["cont1_lo"], row["cont1_hi"] = edges[0]
            if len(edges) > 1:
                row["cont2_lo"], row["cont2_hi"] = edges[1]
            else:
                row["cont2_lo"] = row["cont2_hi"] = None
            defined = bool(band2.defined[q])
            row["band"] = float(band2.energies[q]) if defined else None
            row["band_defined"] = defined
            row["status"] = "ok"
            rows.append(row)
        return columns, rows
    # triplon-band
    from .triplon import scan_triplon_band, three_excitation_continua

    band3 = scan_triplon_band(spec, band2)
    columns = [
        "q_index", "q", "cont3_lo", "cont3_hi", "contpd_lo", "contpd_hi",
        "band", "band_defined", "status",
    ]
    for q in range(nb):
        cont3, cont_pd = three_excitation_continua(spec, band2, q)
        row = {"q_index": q, "q": spec.momenta[q]}
        row["cont3_lo"], row["cont3_hi"] = cont3
        if cont_pd is not None:
            row["contpd_lo"], row["contpd_hi"] = cont_pd
        else:
            row["contpd_lo"] = row["contpd_hi"] = None
        defined = bool(band3.defined[q])
        row["band"] = float(band3.energies[q]) if defined else None
        row["band_defined"] = defined
        row["status"] = "ok"
        rows.append(row)
    return columns, rows


def _dmrg_rows(args) -> tuple[list[str], list[dict]]:
    from .mps import ChainSpec, classify_phase, ground_state

    columns = [
        "delta", "omega", "n_imp", "z", "cap", "bond_max", "energy", "sweeps",
        "n_exc", "phase", "lambda1", "lambda2", "eig_ratio", "central_charge",
        "charge_offset", "fit_rms", "f_exponent", "bulk_entropy_variation", "status",
    ]
    rows = []
    for delta in _grid(args.dmin, args.dmax, args.dsteps):
        for omega in _grid(args.omin, args.omax, args.osteps):
            chain = ChainSpec(n_imp=args.nb, z=args.z, cap=5, bond_max=128)
            row = {
                "delta": delta, "omega": omega, "n_imp": args.nb, "z": args.z,
                "cap": chain.cap, "bond_max": chain.bond_max,
            }
            try:
                state = ground_state(chain, 1.0, delta, omega, seed=args.seed)
                diag = classify_phase(state)
                row.update(
                    energy=state.energy,
                    sweeps=state.sweeps,
                    n_exc=state.n_exc_value,
                    phase=diag.phase,
                    lambda1=float(diag.corr_eigs[0]),
                    lambda2=float(diag.corr_eigs[1]),
                    eig_ratio=float(diag.corr_eigs[0] / diag.corr_eigs[1]),
                    central_charge=diag.central_charge,
                    charge_offset=diag.charge_offset,
                    fit_rms=diag.fit_rms,
                    f_exponent=diag.exponent,
                    bulk_entropy_variation=diag.bulk_entropy_variation,
                    status="ok",
                )
            except Exception as exc:
                row.update({c: None for c in columns if c not in row})
                row["status"] = f"error: {exc}"
            rows.append(row)
    return columns, rows


def _check_suite(args) -> tuple[list[str], list[dict], bool]:
    """ED-oracle comparisons for the analytic solvers; the acceptance core."""
    from . import ed
    from .array_pair import gap_windows, scan_doublon_band
    from .two_qe_pair import solve_pair_poles
    from .triplon import scan_triplon_band

    rng = np.random.default_rng(args.seed)
    rows = []

    def record(check, point, quantity, analytic, reference, tol):
        dev = abs(analytic - reference)
        rows.append(
            {
                "check": check,
                "point": point,
                "quantity": quantity,
                "analytic": analytic,
                "reference": reference,
                "deviation": dev,
                "tolerance": tol,
                "passed": dev <= tol,
            }
        )

    # one- and two-excitation levels vs ED on 10 sites
    tol1 = CHECK_TOLERANCES["single_excitation_vs_ed"]
    tol2 = CHECK_TOLERANCES["pair_levels_vs_ed"]
    for d in (1, 2):
        for _ in range(5):
            delta = float(rng.uniform(-3.0, 3.0))
            omega = float(rng.uniform(0.05, 3.0))
            point = f"d={d},delta={delta:.3f},omega={omega:.3f}"
            bath = BathSpec(1.0, 10, spacing=d)
            coupling = CouplingSpec(delta, omega)
            st = solve_two_qe(bath, coupling, d)
            rep1 = ed.sector_spectrum(ed.two_qe_sector(10, d, 1), bath, coupling)
            levels = {"e_plus": st.e_plus, "e_minus": st.e_minus,
                      "e_plus_above": st.e_plus_above, "e_minus_above": st.e_minus_above}
            for name, val in levels.items():
                if val is None:
                    continue
                ref = float(rep1.eigenvalues[np.argmin(np.abs(rep1.eigenvalues - val))])
                record("single_excitation_vs_ed", point, name, val, ref, tol1)
            pair = solve_pair_poles(bath, coupling, d)
            rep2 = ed.sector_spectrum(ed.two_qe_sector(10, d, 2), bath, coupling)
            pair_levels = {"e_ground": pair.e_ground,
                           "e_doublon_plus": pair.e_doublon_plus,
                           "e_doublon_minus": pair.e_doublon_minus}
            for name, val in pair_levels.items():
                if val is None:
                    continue
                ref = float(rep2.eigenvalues[np.argmin(np.abs(rep2.eigenvalues - val))])
                record("pair_levels_vs_ed", point, name, val, ref, tol2)

    # doublon band vs momentum-resolved ED at N_b = 8
    tol_d = CHECK_TOLERANCES["doublon_band_vs_ed"]
    for delta, omega in ((0.0, 2.0), (1.0, 1.0)):
        bath = BathSpec(1.0, 8, spacing=1)
        coupling = CouplingSpec(delta, omega)
        spec = polariton_bands(bath, coupling, 8)
        band = scan_doublon_band(spec)
        for q in range(8):
            if not band.defined[q]:
                continue
            rep = ed.sector_spectrum(ed.build_sector(8, 1, 2, cap=2, momentum=q), bath, coupling)
            ref = float(rep.eigenvalues[np.argmin(np.abs(rep.eigenvalues - band.energies[q]))])
            record("doublon_band_vs_ed", f"delta={delta},omega={omega},q={q}",
                   "e_2b", float(band.energies[q]), ref, tol_d)

    # triplon band vs ED at N_b = 6
    tol_t = CHECK_TOLERANCES["triplon_band_vs_ed"]
    bath = BathSpec(1.0, 6, spacing=1)
    coupling = CouplingSpec(0.0, 5.0)
    spec = polariton_bands(bath, coupling, 6)
    band3 = scan_triplon_band(spec, scan_doublon_band(spec))
    for q in range(6):
        if not band3.defined[q]:
            continue
        rep = ed.sector_spectrum(ed.build_sector(6, 1, 3, cap=3, momentum=q), bath, coupling)
        ref = float(rep.eigenvalues[np.argmin(np.abs(rep.eigenvalues - band3.energies[q]))])
        record("triplon_band_vs_ed", f"delta=0,omega=5,q={q}",
               "e_3b", float(band3.energies[q]), ref, tol_t)

    columns = ["check", "point", "quantity", "analytic", "reference", "deviation", "tolerance", "passed"]
    all_passed = all(r["passed"] for r in rows)
    return columns, rows, all_passed


def _grid(lo: float, hi: float, steps: int) -> list[float]:
    if steps == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, steps)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qebath",
        description="Few-excitation spectra sweeps for emitters in a 1D photonic bath",
    )
    parser.add_argument("--task", required=True, choices=TASKS)
    parser.add_argument("--dmin", type=float, default=-4.0, help="detuning range minimum")
    parser.add_argument("--dmax", type=float, default=4.0, help="detuning range maximum")
    parser.add_argument("--dsteps", type=int, default=2)
    parser.add_argument("--omin", type=float, default=0.5, help="Rabi range minimum")
    parser.add_argument("--omax", type=float, default=4.0, help="Rabi range maximum")
    parser.add_argument("--osteps", type=int, default=2)
    parser.add_argument("--d", type=int, default=1, help="two-emitter separation")
    parser.add_argument("--z", type=int, default=1, help="bath sites per unit cell")
    parser.add_argument("--nb", type=int, default=256, help="unit cells (or MPS cells)")
    parser.add_argument("--n", type=int, default=0, help="bath modes (0 = continuum/default)")
    parser.add_argument("--out", required=True)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def _validate(args) -> None:
    for name in ("dmin", "dmax", "omin", "omax"):
        if not np.isfinite(getattr(args, name)):
            raise ValueError(f"--{name} must be finite")
    if args.task in PLANE_TASKS and (args.dsteps < 2 or args.osteps < 2):
        raise ValueError("plane tasks need at least a 2x2 grid")
    if args.dsteps < 1 or args.osteps < 1:
        raise ValueError("grid steps must be positive")
    if args.jobs is not None and args.jobs < 1:
        raise ValueError("--jobs must be positive")


def _write_outputs(args, columns, rows, started, extra_meta=None):
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "task": args.task,
        "columns": columns,
        "config": {
            k: getattr(args, k)
            for k in ("dmin", "dmax", "dsteps", "omin", "omax", "osteps", "d", "z", "nb", "n", "seed")
        },
        "jobs": args.jobs,
        "tolerances": CHECK_TOLERANCES,
        "wall_time_s": round(time.time() - started, 3),
        "rows": len(rows),
    }
    with open(_manifest_path(args.out), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest_path(out: str) -> str:
    stem = out[:-4] if out.endswith(".csv") else out
    return stem + ".manifest.json"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
    except ValueError as exc:
        parser.error(str(exc))
    started = time.time()
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("QEBATH_JOBS", "1"))

    if args.task in PLANE_TASKS:
        points = [
            (idx, delta, omega)
            for idx, (delta, omega) in enumerate(
                (d, o) for d in _grid(args.dmin, args.dmax, args.dsteps)
                for o in _grid(args.omin, args.omax, args.osteps)
            )
        ]
        payloads = [(args.task, args, idx, delta, omega) for idx, delta, omega in points]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_point, payloads))
        else:
            results = [_run_point(p) for p in payloads]
        results.sort(key=lambda t: t[0])
        rows = [row for _, row in results]
        columns = _plane_columns(args.task)
        _write_outputs(args, columns, rows, started)
    elif args.task in ("doublon-band", "triplon-band"):
        columns, rows = export_band(args.task, args)
        _write_outputs(args, columns, rows, started)
    elif args.task == "dmrg-point":
        columns, rows = _dmrg_rows(args)
        _write_outputs(args, columns, rows, started)
    else:  # check-suite
        columns, rows, all_passed = _check_suite(args)
        _write_outputs(args, columns, rows, started)
        width = max(len(r["check"]) for r in rows) + 2
        for row in rows:
            mark = "PASS" if row["passed"] else "FAIL"
            print(f"{mark}  {row['check']:<{width}} {row['point']:<34} "
                  f"{row['quantity']:<16} dev={row['deviation']:.2e} tol={row['tolerance']:.0e}")
        n_pass = sum(r["passed"] for r in rows)
        print(f"{n_pass}/{len(rows)} checks passed")
        if not all_passed:
            return 1
    hard_errors = [r for r in rows if str(r.get("status", "ok")).startswith("error")]
    if hard_errors:
        print(f"{len(hard_errors)} point(s) failed; see status column", file=sys.stderr)
        return 1
    return 0


def _plane_columns(task: str) -> list[str]:
    if task == "teff-2qe":
        return ["delta", "omega", "d", "e_plus", "e_minus", "exists_minus", "e0", "t_eff", "status"]
    if task == "wannier-hoppings":
        return ["delta", "omega", "z", "nb", "t0", "t1", "t2", "t3", "status"]
    if task == "pair-ground":
        return [
            "delta", "omega", "d", "n", "e_ground", "delta_eg", "e_doublon_plus",
            "e_doublon_minus", "doublons_exist", "mu_d", "t_d", "p_v", "p_weight",
            "symmetric_only", "status",
        ]
    return ["delta", "omega", "z", "nb", "u_eff", "e0_convention", "status"]


if __name__ == "__main__":
    sys.exit(main())
