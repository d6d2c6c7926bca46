"""Command-line front end.

JSON reports go to stdout (or ``--out``); diagnostics go to stderr. Exit
codes: 0 success, 1 input error, 2 not converged / check failed.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import density, fockspace
from .integrals import (AoSystem, SpatialSystem, expand_spatial_to_spin, random_system,
                        read_aoints, write_aoints)
from .report import RunReport, dumps, trace_csv
from .scf import FrontierDegeneracyError, ScfOptions, aufbau, run_scf, verify_equivalence

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2
SOLVERS = ("roothaan", "density_descent")
EQUIVALENCE_TOL = 1e-8


class InputError(Exception):
    pass


def _load(path: str) -> AoSystem:
    try:
        system = read_aoints(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if isinstance(system, SpatialSystem):
        system = expand_spatial_to_spin(system)
    return system


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _options(args, solver: str, grad_tol: float | None = None) -> ScfOptions:
    return ScfOptions(
        max_iterations=args.max_iter,
        energy_tolerance=args.tol_energy,
        gradient_tolerance=args.tol_grad if grad_tol is None else grad_tol,
        diis_depth=args.diis,
        solver=solver,
    )


def _solve(system: AoSystem, args, solver: str, grad_tol: float | None = None):
    t0 = time.perf_counter()
    sol = run_scf(system, _options(args, solver, grad_tol))
    wall = time.perf_counter() - t0
    print(f"{solver}: converged={sol.converged} E={sol.energy:.12f} "
          f"iterations={sol.iterations} ({wall:.3f} s)", file=sys.stderr)
    report = RunReport.from_solution(sol, system.label, wall if args.timing else None)
    return sol, report


def cmd_run(args) -> int:
    system = _load(args.input)
    solvers = SOLVERS if args.solver == "both" else (args.solver,)
    reports = {}
    for name in solvers:
        _, reports[name] = _solve(system, args, name)
        if args.trace_csv:
            path = Path(args.trace_csv)
            if len(solvers) > 1:
                path = path.with_name(f"{path.stem}.{name}{path.suffix}")
            path.write_text(trace_csv(reports[name]), encoding="utf-8")

    if len(solvers) == 1:
        report = reports[solvers[0]]
        doc = report.to_dict()
        ok = report.converged
    else:
        ok = all(r.converged for r in reports.values())
        doc = {
            "system_label": system.label,
            "solver": "both",
            "converged": ok,
            "energy_agreement": abs(reports["roothaan"].energy - reports["density_descent"].energy),
            "reports": {k: r.to_dict() for k, r in reports.items()},
        }
    _emit(dumps(doc) + "\n", args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check(args) -> int:
    system = _load(args.input)
    # the equivalence residuals run up to ~2x the max-norm gradient
    grad_tol = min(args.tol_grad, 0.1 * EQUIVALENCE_TOL)
    sol, report = _solve(system, args, args.solver, grad_tol)
    dens = density.check_density_conditions(sol.density, system.metric, system.n_electrons)
    doc = {"system_label": system.label, "solver": args.solver, "converged": sol.converged,
           "energy": sol.energy, "gradient_norm": sol.gradient_norm,
           "gradient_tolerance": grad_tol,
           "density_conditions": dens.as_dict(),
           "density_tolerance": density.IDEMPOTENCY_TOL}
    ok = sol.converged and dens.passed()
    if sol.converged:
        eq = verify_equivalence(sol, system, tol=EQUIVALENCE_TOL)
        doc["equivalence"] = eq.as_dict()
        ok = ok and eq.passed
    else:
        doc["equivalence"] = None
    doc["passed"] = ok
    _emit(dumps(doc) + "\n", args.out)
    return EXIT_OK if ok else EXIT_FAIL


def oracle_suite(system: AoSystem, seed: int = 0) -> dict:
    """Run every Fock-space identity check on one system."""
    S, N, M = system.metric, system.n_electrons, system.n_spin_orbitals
    rng = np.random.default_rng(seed)
    rep = fockspace.build_ao_operators(S)
    D, _, C = aufbau(system.core_h, S, N)
    Cocc = C[:, :N]
    psi = fockspace.determinant_state(rep, Cocc)
    Delta = fockspace.expectation_delta(rep, psi)
    Gamma = fockspace.expectation_gamma(rep, psi)
    H0 = fockspace.build_h0(rep, system)

    kappa = rng.standard_normal((M, M))
    kappa = kappa + kappa.T
    kappa /= max(np.linalg.norm(kappa), 1e-300)
    rotated = fockspace.apply_kappa_rotation(rep, psi, kappa)
    law = fockspace.predicted_delta_transform(Delta, kappa, S)
    law_res = np.max(np.abs(fockspace.expectation_delta(rep, rotated, real=False) - law))

    X = rng.standard_normal((M, M))
    X = X - X.T
    X /= max(np.linalg.norm(X @ S), 1e-300)
    consistency = fockspace.verify_transform_consistency(D, X, S, rep, N)
    X_red = X - density.project_rotation(X, D, S).generator
    redundant = fockspace.verify_transform_consistency(D, X_red, S, rep, N)

    anti = rep.anticommutator_residuals()
    rows = [
        ("anticommutator_create_create", anti["create_create"], 1e-12),
        ("anticommutator_annihilate_annihilate", anti["annihilate_annihilate"], 1e-12),
        ("anticommutator_create_annihilate", anti["create_annihilate"], 1e-12),
        ("determinant_norm", abs(np.linalg.norm(psi) - 1.0), 1e-10),
        ("delta_equals_SDS", float(np.max(np.abs(Delta - density.delta_from_d(D, S)))), 1e-10),
        ("wick_factorization", fockspace.verify_wick(Gamma, Delta), 1e-10),
        ("h0_hermiticity", fockspace.hermiticity_residual(H0), 1e-11),
        ("energy_metric_cancellation",
         abs(fockspace.oracle_energy(rep, system, psi, H0)
             - density.energy(D, system.core_h, system.g, system.energy_shift)), 1e-10),
        ("delta_transformation_law", float(law_res), 1e-10),
        ("real_generator_consistency", consistency.deviation, 1e-9),
        ("redundant_rotation_invariance", float(np.max(np.abs(redundant.d_oracle - D))), 1e-9),
    ]
    identities = {name: {"residual": float(r), "threshold": t, "passed": bool(r < t)}
                  for name, r, t in rows}
    return {
        "system_label": system.label,
        "n_spin_orbitals": M,
        "n_electrons": N,
        "identities": identities,
        "passed": all(v["passed"] for v in identities.values()),
    }


def cmd_oracle(args) -> int:
    system = _load(args.input)
    M = system.n_spin_orbitals
    cap = min(args.max_M, fockspace.MAX_MODES_TWO_BODY)
    if M > cap:
        print(f"error: system has {M} spin orbitals, above the oracle limit of {cap}; "
              f"dimension 2^{M} = {2**M} needs about "
              f"{fockspace.format_bytes(fockspace.dense_bytes(M))} per dense operator", file=sys.stderr)
        return EXIT_INPUT
    doc = oracle_suite(system, args.seed)
    for name, row in doc["identities"].items():
        flag = "ok  " if row["passed"] else "FAIL"
        print(f"{flag} {name:40s} {row['residual']:.3e} < {row['threshold']:.0e}", file=sys.stderr)
    _emit(dumps(doc) + "\n", args.out)
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_gen(args) -> int:
    try:
        system = random_system(args.m, args.n, args.seed, args.overlap)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(write_aoints(system), args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    try:
        system = read_aoints(args.input)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InputError(f"{args.input}: {exc}") from None
    if not isinstance(system, SpatialSystem):
        raise InputError("input is already a spin-orbital system; nothing to convert")
    _emit(write_aoints(expand_spatial_to_spin(system)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--out", help="write the result here instead of stdout")
    shared.add_argument("--tol-energy", type=float, default=1e-10)
    shared.add_argument("--tol-grad", type=float, default=1e-8)
    shared.add_argument("--max-iter", type=int, default=200)
    shared.add_argument("--diis", type=int, default=8, help="DIIS depth, 0 disables")
    shared.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="aohf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[shared], help="solve the SCF problem")
    run.add_argument("input")
    run.add_argument("--solver", choices=SOLVERS + ("both",), default="roothaan")
    run.add_argument("--trace-csv", help="write the iteration trace as CSV")
    run.add_argument("--timing", action="store_true", help="include wall time in the report")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", parents=[shared], help="solve and verify all conditions",
                           description="Solve, then verify the density conditions and both "
                           "directions of the eigenproblem equivalence. The solver runs to "
                           "min(--tol-grad, 1e-9).")
    check.add_argument("input")
    check.add_argument("--solver", choices=SOLVERS, default="roothaan")
    check.set_defaults(func=cmd_check, timing=False)

    oracle = sub.add_parser("oracle", parents=[shared], help="Fock-space identity suite")
    oracle.add_argument("input")
    oracle.add_argument("--max-M", dest="max_M", type=int, default=fockspace.MAX_MODES_TWO_BODY)
    oracle.set_defaults(func=cmd_oracle)

    gen = sub.add_parser("gen", parents=[shared], help="write a random system")
    gen.add_argument("--m", type=int, required=True, help="number of spin orbitals")
    gen.add_argument("--n", type=int, required=True, help="number of electrons")
    gen.add_argument("--overlap", type=float, default=0.5)
    gen.set_defaults(func=cmd_gen)

    conv = sub.add_parser("convert", parents=[shared], help="expand a spatial system to spin orbitals")
    conv.add_argument("input")
    conv.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FrontierDegeneracyError, fockspace.OracleCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
