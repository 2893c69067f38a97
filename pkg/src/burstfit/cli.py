"""Command-line experiment runner.

Subcommands: list-presets, synth, fit, validate, sweep, sa-run, import,
export. Every run writes its outputs under a directory named by the resolved
config hash plus a timestamp; the files themselves contain no timestamps, so
rerunning a config reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import experiment
from .data import write_pairings
from .dynamics import builtin_system, catalog_names
from .presets import ALIASES, list_presets, preset
from .regression import load_coefficients
from .dynamics import LearnedSystem


def _load_config(args) -> dict:
    if getattr(args, "preset", None):
        cfg = preset(args.preset)
    elif getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    else:
        raise SystemExit("need --preset NAME or --config FILE")
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "acknowledge_resources", False):
        cfg["resources_ack"] = True
    return cfg


def _run_dir(cfg: dict, root: str) -> str:
    resolved = experiment.resolve_config(cfg)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    path = os.path.join(root, f"{experiment.config_hash(resolved)}-{stamp}")
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_list_presets(args) -> int:
    for name in list_presets():
        print(name)
    for alias, target in sorted(ALIASES.items()):
        print(f"{alias} -> {target}")
    print("systems: " + ", ".join(catalog_names()))
    return 0


def _cmd_synth(args) -> int:
    cfg = _load_config(args)
    resolved = experiment.resolve_config(cfg)
    out = _run_dir(resolved, args.out)
    system = builtin_system(resolved["system"])
    domain = experiment._domain_from_config(resolved["domain"], system.domain)
    pairings = experiment.build_pairings(resolved, system, domain, out)
    write_pairings(os.path.join(out, "pairings.csv"), pairings)
    print(f"wrote {len(pairings)} pairings under {out}")
    return 0


def _cmd_fit(args) -> int:
    cfg = _load_config(args)
    if getattr(args, "pairings", None):
        cfg.setdefault("data", {})
        cfg["data"]["source"] = "pairings-file"
        cfg["data"]["path"] = args.pairings
    out = _run_dir(cfg, args.out)
    t0 = time.perf_counter()
    summary, _ = experiment.run_experiment(cfg, out)
    dt = time.perf_counter() - t0
    print(f"run complete in {dt:.2f}s; outputs under {out}")
    _print_summary(summary)
    return 0


def _cmd_sa_run(args) -> int:
    cfg = _load_config(args)
    if cfg.get("solver", {}).get("method") != "sa":
        raise SystemExit("sa-run requires a config whose solver method is 'sa'")
    return _cmd_fit(args)


def _cmd_validate(args) -> int:
    cfg = experiment.resolve_config(_load_config(args))
    system = builtin_system(cfg["system"])
    coeffs = load_coefficients(args.coeffs)
    constraint = load_coefficients(args.constraint_coeffs) if args.constraint_coeffs else None
    learned = LearnedSystem(basis=coeffs.basis, coeffs=coeffs,
                            constraint_coeffs=constraint)
    from .analysis import trajectory_error

    out = _run_dir(cfg, args.out)
    val = cfg.get("validation")
    if val is None:
        raise SystemExit("config carries no validation section")
    for i, u0 in enumerate(val["initial_states"]):
        steps = max(1, int(round(val["horizon"] / val["dt"])))
        cmpres = trajectory_error(system, learned, np.asarray(u0, dtype=float),
                                  val["dt"], steps, substeps=val["substeps"])
        path = os.path.join(out, f"validation_{i}.csv")
        experiment._write_validation_csv(path, cmpres)
        line = (f"initial state {u0}: max state error "
                f"{float(np.max(cmpres.state_error)):.3e}")
        if cmpres.algebraic_error is not None:
            line += f", max algebraic error {float(np.max(cmpres.algebraic_error)):.3e}"
        print(line)
    print(f"outputs under {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [float(v) for v in args.values.split(",")]
    if args.axis in ("degree", "M", "seed"):
        values = [int(v) for v in values]
    out = _run_dir(cfg, args.out)
    rows = experiment.run_sweep(cfg, args.axis, values, out, workers=args.workers)
    failures = [r for r in rows if r["status"] != "ok"]
    for row in rows:
        print(row)
    print(f"sweep outputs under {out}")
    return 1 if failures else 0


def _cmd_import(args) -> int:
    pairings = experiment.import_pairings(args.path, expected_dim=args.dim)
    d_alg = 0 if pairings[0].algebraic is None else len(pairings[0].algebraic)
    print(f"{len(pairings)} pairings, state dimension {len(pairings[0].x)}, "
          f"algebraic dimension {d_alg}")
    if args.out:
        write_pairings(args.out, pairings)
        print(f"re-emitted canonical copy at {args.out}")
    return 0


def _cmd_export(args) -> int:
    cfg = experiment.resolve_config(_load_config(args))
    system = builtin_system(cfg["system"])
    domain = experiment._domain_from_config(cfg["domain"], system.domain)
    pairings = experiment.build_pairings(cfg, system, domain, None)
    write_pairings(args.out, pairings)
    print(f"wrote {len(pairings)} pairings to {args.out}")
    return 0


def _print_summary(summary: dict) -> None:
    ce = summary.get("coefficient_errors")
    if ce:
        print(f"max termwise coefficient error: {ce['max_termwise']:.3e}")
    for rec in summary.get("validation", []) or []:
        line = (f"validation from {rec['initial_state']}: "
                f"max state error {rec['max_state_error']:.3e}")
        if "max_algebraic_error" in rec:
            line += f", max algebraic error {rec['max_algebraic_error']:.3e}"
        print(line)
    seq = summary.get("sequential")
    if seq and "final_errors" in seq:
        print(f"sequential final monitored errors: {seq['final_errors']}")


def _add_common(p: argparse.ArgumentParser, with_out: bool = True) -> None:
    p.add_argument("--preset", help="name of a shipped preset")
    p.add_argument("--config", help="path to a config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--acknowledge-resources", action="store_true",
                   help="opt in to resource-heavy profiles")
    if with_out:
        p.add_argument("--out", default="runs", help="root directory for run outputs")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="burstfit",
        description="Recover governing equations from short trajectory bursts.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-presets", help="list shipped presets and systems")

    p = sub.add_parser("synth", help="synthesize burst data and pairings")
    _add_common(p)

    p = sub.add_parser("fit", help="run the full pipeline (data, fit, validate)")
    _add_common(p)
    p.add_argument("--pairings", help="fit externally supplied pairings instead")

    p = sub.add_parser("sa-run", help="run the sequential (streaming) solver pipeline")
    _add_common(p)

    p = sub.add_parser("validate", help="validate saved coefficients against the truth")
    _add_common(p)
    p.add_argument("--coeffs", required=True, help="coefficient JSON file")
    p.add_argument("--constraint-coeffs", help="constraint-map coefficient JSON file")

    p = sub.add_parser("sweep", help="run one experiment per axis value")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=("noise", "degree", "M", "seed"))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("import", help="validate a pairing CSV")
    p.add_argument("path")
    p.add_argument("--dim", type=int, help="expected state dimension")
    p.add_argument("--out", help="re-emit a canonical copy here")

    p = sub.add_parser("export", help="write pairings for a config to CSV")
    _add_common(p, with_out=False)
    p.add_argument("--out", required=True, help="output pairing CSV path")

    args = parser.parse_args(argv)
    handlers = {
        "list-presets": _cmd_list_presets,
        "synth": _cmd_synth,
        "fit": _cmd_fit,
        "sa-run": _cmd_sa_run,
        "validate": _cmd_validate,
        "sweep": _cmd_sweep,
        "import": _cmd_import,
        "export": _cmd_export,
    }
    try:
        return handlers[args.command](args)
    except experiment.StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
