"""Command-line entry point: ``fermitherm {thermo,ness,verify,fig2a,fig2b}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .experiments import (
    ConfigError,
    ExperimentConfig,
    default_fig2a,
    default_fig2b,
    run_fig2a,
    run_fig2b,
    run_verify,
)
from .liouvillian import ConvergenceError, build_superoperator, fidelity, ness_kernel
from .model import PreconditionError
from .mps import BondOverflowError, CanonicalMPS
from .thermo import IntegrityError, build_thermo_state, log_partition_from_state, occupations_from_reduced

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 2, 3

log = logging.getLogger("fermitherm")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermitherm", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("thermo", "build the grand-canonical state and report Xi and occupations"),
        ("ness", "build the stationary state (closed form, or kernel for explicit baths)"),
        ("verify", "run the invariant checks relevant to a config"),
        ("fig2a", "overlap along beta at fixed beta*mu"),
        ("fig2b", "overlap along the uniform off-diagonal coupling omega"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON experiment config (fig2a/fig2b default to the N=10 setup)")
        p.add_argument("--out", help="CSV path for sweeps, .npz snapshot path for thermo/ness")
        p.add_argument("--oracle", action="store_true", help="also compare against dense oracles (N <= 4)")
        p.add_argument("--chi", type=int, help="maximum bond dimension")
        p.add_argument("--tau", type=float, help="relative singular-value cutoff")
        p.add_argument("--branch", choices=["plus", "minus"], help="bath-ratio root")
    return ap


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.command == "fig2a":
        cfg = default_fig2a()
    elif args.command == "fig2b":
        cfg = default_fig2b()
    else:
        raise ConfigError(f"{args.command} needs --config")
    if args.oracle:
        cfg = cfg.override(oracle=True)
    return cfg.override(chi=args.chi, tau=args.tau).with_branch(args.branch)


def _out_path(args, cfg: ExperimentConfig, key: str):
    return args.out or cfg.raw.get("output", {}).get(key)


def _cmd_thermo(args, cfg: ExperimentConfig) -> int:
    h = cfg.hamiltonian()
    th = build_thermo_state(h, cfg.thermo_params(), cfg.chi, cfg.tau)
    f = occupations_from_reduced(th.reduced, th.factorization, th.A0)
    print(f"log_xi {log_partition_from_state(th.state):.12g}")
    print("eps " + " ".join(f"{e:.12g}" for e in th.eps))
    print("occupations " + " ".join(f"{x:.12g}" for x in f))
    print(f"bond_dims {th.state.bond_dims} discarded {th.state.discarded:.3e}")
    path = _out_path(args, cfg, "state")
    if path:
        th.state.save(path)
    return EXIT_OK


def _cmd_ness(args, cfg: ExperimentConfig) -> int:
    state = cfg.closed_form_state()
    if state is None:
        baths, _, _ = cfg.bath_setup()
        res = ness_kernel(build_superoperator(cfg.hamiltonian(), baths))
        print(f"kernel_dim {res.kernel_dim} residual {res.residual:.3e} method {res.method}")
        if res.note:
            print(f"note: {res.note}")
        state = CanonicalMPS.from_dense(res.vector, chi=cfg.chi, tau=cfg.tau)
    elif cfg.solver("oracle", False) and cfg.n_sites <= 4:
        baths, _, _ = cfg.bath_setup()
        res = ness_kernel(build_superoperator(cfg.hamiltonian(), baths))
        fid = fidelity(res.vector, state.to_dense())
        print(f"kernel_dim {res.kernel_dim} fidelity {fid:.15f}")
        if res.kernel_dim != 1 or 1 - fid > 1e-10:
            return EXIT_FAIL
    print(f"norm {state.norm:.12g} bond_dims {state.bond_dims}")
    path = _out_path(args, cfg, "state")
    if path:
        state.save(path)
    return EXIT_OK


def _cmd_sweep(args, cfg: ExperimentConfig) -> int:
    result = (run_fig2a if args.command == "fig2a" else run_fig2b)(cfg)
    path = _out_path(args, cfg, "csv")
    result.write_csv(path if path else sys.stdout)
    for r in result.rows:
        if r.residual > max(cfg.tol, 1e-9):
            print(f"warning: param {r.param:.6g} residual {r.residual:.3e}", file=sys.stderr)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    status = "PASS" if result.peak_ok else "FAIL"
    print(f"{status} peak at {result.peak_param:.6g} overlap {result.peak_overlap:.12f}", file=sys.stderr)
    return EXIT_OK if result.peak_ok else EXIT_FAIL


def _cmd_verify(args, cfg: ExperimentConfig) -> int:
    report = run_verify(cfg, oracle=True if args.oracle else None)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"thermo": _cmd_thermo, "ness": _cmd_ness, "verify": _cmd_verify, "fig2a": _cmd_sweep, "fig2b": _cmd_sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, PreconditionError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrityError, ConvergenceError, BondOverflowError, np.linalg.LinAlgError) as err:
        print(f"failure: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
