"""Config-driven experiment pipeline: synthesize, perturb, differentiate,
fit, validate, report.

A configuration is a plain nested dict (stored as JSON) with explicit keys
for every physical value. All randomness flows from the single mandatory
``seed`` through named per-stage sub-seeds (sampler, noise, corruption,
shuffle, monitor), each of which can be pinned individually, so changing one
stage's stream leaves the others untouched. Reports embed the fully resolved
configuration and contain no timestamps: rerunning a configuration
reproduces every output file byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import copy
import hashlib
import json
import math
import os
from typing import Optional, Sequence

import numpy as np

from .analysis import coefficient_error, trajectory_error
from .basis import BasisSpec
from .data import (CorruptionSpec, NoiseSpec, estimate_derivatives,
                   exact_pairings, filter_pairings, perturb, read_pairings,
                   synthesize_bursts, write_bursts, write_pairings)
from .domain import Domain
from .dynamics import DaeSystem, LearnedSystem, builtin_system
from .presets import preset
from .regression import (assemble, fit_constraint_map, fit_l1, fit_l2,
                         fit_lasso, save_coefficients)
from .sequential import Monitor, sa_run

__all__ = [
    "StageError",
    "resolve_config",
    "config_hash",
    "stage_seed",
    "build_pairings",
    "run_experiment",
    "run_sweep",
    "import_pairings",
]

_STAGE_KEYS = {"sampler": 0, "noise": 1, "corruption": 2, "shuffle": 3,
               "monitor": 4}

_SWEEP_AXES = ("noise", "degree", "M", "seed")


class StageError(RuntimeError):
    """An experiment stage failed; carries the stage tag."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(config: dict, stage: str) -> int:
    """Named sub-seed for one pipeline stage, derived from the config seed."""
    override = (config.get("seeds") or {}).get(stage)
    if override is not None:
        return int(override)
    ss = np.random.SeedSequence([int(config["seed"]), _STAGE_KEYS[stage]])
    return int(ss.generate_state(1)[0])


def _domain_from_config(entry, fallback: Domain) -> Domain:
    if entry is None:
        return fallback
    mask = entry.get("mask")
    if mask in (None, "none"):
        mask = None
    return Domain(bounds=tuple(tuple(b) for b in entry["bounds"]), mask=mask)


def resolve_config(config: dict) -> dict:
    """Validate a configuration and fill in system-derived defaults."""
    cfg = copy.deepcopy(config)
    if "seed" not in cfg:
        raise ValueError("config must carry a seed")
    cfg.setdefault("name", "experiment")
    cfg.setdefault("seeds", {})
    cfg.setdefault("resources_ack", False)
    system = builtin_system(cfg["system"]) if isinstance(cfg.get("system"), str) else None
    data = cfg.setdefault("data", {})
    data.setdefault("source", "synthetic")
    if data["source"] == "synthetic":
        if system is None:
            raise ValueError("synthetic data needs a builtin system name")
        data.setdefault("M", 10)
        data.setdefault("J", 2)
        data.setdefault("strategy", "uniform")
        data.setdefault("substeps", 10)
        if data.get("dt") is None:
            data["dt"] = system.dt
        data.setdefault("noise", {"kind": "none"})
        data.setdefault("corruption", {"count": 0, "mu": 0.0, "sigma": 1.0})
    elif data["source"] == "pairings-file":
        if not data.get("path"):
            raise ValueError("pairings-file source needs a path")
    else:
        raise ValueError(f"unknown data source {data['source']!r}")
    if system is not None:
        dom = _domain_from_config(cfg.get("domain"), system.domain)
        cfg["domain"] = dom.serializable()
    elif cfg.get("domain") is None:
        raise ValueError("external data needs an explicit domain")
    basis = cfg.setdefault("basis", {})
    basis.setdefault("kind", "monomial")
    if "degree" not in basis:
        raise ValueError("basis degree is required")
    cfg.setdefault("derivative", {"method": "central"})
    solver = cfg.setdefault("solver", {"method": "l2"})
    if solver.get("method") not in ("l2", "l1", "lasso", "sa"):
        raise ValueError(f"unknown solver {solver.get('method')!r}")
    if solver["method"] == "lasso":
        solver.setdefault("lambda", 0.0)
    if solver["method"] == "sa":
        solver.setdefault("gamma", "zero")
        solver.setdefault("steps", None)
        solver.setdefault("cadence", 100)
        solver.setdefault("monitor_samples", 20000)
        solver.setdefault("single_pass", False)
        solver.setdefault("include_algebraic", False)
    val = cfg.get("validation")
    if val is not None:
        if not val.get("initial_states"):
            raise ValueError("validation needs initial states")
        val.setdefault("horizon", 1.0)
        if val.get("dt") is None:
            val["dt"] = data.get("dt") if data.get("dt") else (
                system.dt if system is not None else 0.005)
        val.setdefault("substeps", 10)
    return cfg


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _noise_spec(entry: dict, n_components: int) -> NoiseSpec:
    if "per_component" in entry:
        laws = []
        for law in entry["per_component"]:
            kind = law["kind"]
            p = law.get("eta", law.get("sigma", 0.0))
            laws.append((kind, float(p)))
        return NoiseSpec(tuple(laws))
    kind = entry.get("kind", "none")
    if kind == "none":
        return NoiseSpec.none(n_components)
    if kind == "uniform":
        return NoiseSpec.uniform(entry["eta"], n_components)
    if kind == "gaussian":
        return NoiseSpec.gaussian(entry["sigma"], n_components)
    raise ValueError(f"unknown noise kind {kind!r}")


def _corruption_spec(entry: dict) -> CorruptionSpec:
    if "fraction" in entry and entry.get("count") is None:
        return CorruptionSpec(fraction=entry["fraction"], mu=entry.get("mu", 0.0),
                              sigma=entry.get("sigma", 1.0))
    return CorruptionSpec(count=int(entry.get("count", 0)), mu=entry.get("mu", 0.0),
                          sigma=entry.get("sigma", 1.0))


def build_pairings(cfg: dict, system, domain: Domain, out_dir: Optional[str] = None):
    """Run the data stages of a resolved config; returns the pairing list."""
    data = cfg["data"]
    if data["source"] == "pairings-file":
        pairings = read_pairings(data["path"])
        if pairings and len(pairings[0].x) != cfg["basis"].get("dim", len(pairings[0].x)):
            raise ValueError("pairing dimension does not match configured basis")
        return filter_pairings(pairings, domain)
    method = cfg["derivative"]["method"]
    if method == "exact":
        noise = _noise_spec(data["noise"], len(domain.bounds))
        if (not noise.is_identity
                or _corruption_spec(data["corruption"]).resolve_count(data["M"]) > 0):
            raise ValueError("exact derivative data cannot be noised or corrupted")
        return exact_pairings(system, domain, data["M"], data["strategy"],
                              stage_seed(cfg, "sampler"))
    bursts = synthesize_bursts(system, domain, data["M"], data["J"], data["dt"],
                               data["strategy"], stage_seed(cfg, "sampler"),
                               substeps=data["substeps"])
    d_alg = system.d_v if isinstance(system, DaeSystem) else 0
    noise = _noise_spec(data["noise"], bursts[0].d + d_alg)
    corr = _corruption_spec(data["corruption"])
    observed = perturb(bursts, noise, corr,
                       (stage_seed(cfg, "noise"), stage_seed(cfg, "corruption")))
    if out_dir is not None:
        write_bursts(os.path.join(out_dir, "bursts.csv"), observed)
    kw = {}
    if method == "lsq":
        kw = {"degree": cfg["derivative"].get("degree"),
              "window": cfg["derivative"].get("window")}
    pairings = [p for b in observed for p in estimate_derivatives(b, method, **kw)]
    return filter_pairings(pairings, domain)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_validation_csv(path, comparison) -> None:
    with open(path, "w") as fh:
        cols = "t,e_state"
        if comparison.algebraic_error is not None:
            cols += ",e_algebraic"
        fh.write(cols + "\n")
        for j in range(len(comparison.times)):
            row = f"{float(comparison.times[j])!r},{float(comparison.state_error[j])!r}"
            if comparison.algebraic_error is not None:
                row += f",{float(comparison.algebraic_error[j])!r}"
            fh.write(row + "\n")


def _write_history_csv(path, history) -> None:
    with open(path, "w") as fh:
        fh.write("step,component,relative_l2_error\n")
        for rec in history:
            fh.write(f"{rec['step']},{rec['component']},{float(rec['value'])!r}\n")


def run_experiment(config: dict, out_dir: Optional[str] = None):
    """Execute the full pipeline for one configuration.

    Returns (summary, learned system); with ``out_dir`` set, also writes the
    resolved config, coefficient JSON, per-initial-state validation CSVs,
    the sequential error history CSV when applicable, and the summary JSON.
    Outputs produced before a failing stage are retained.
    """
    cfg = resolve_config(config)
    if cfg["data"].get("M", 0) >= 200000 and not cfg.get("resources_ack"):
        raise StageError("resolve", ValueError(
            "this profile synthesizes a very large data set; set "
            "resources_ack=true (or pass --acknowledge-resources) to run it"))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "config.json"), cfg)
    system = builtin_system(cfg["system"]) if isinstance(cfg.get("system"), str) else None
    domain = _domain_from_config(cfg["domain"], system.domain if system else None)
    is_dae = isinstance(system, DaeSystem)
    d_state = system.d_u if is_dae else (system.d if system else len(domain.bounds))

    summary: dict = {"name": cfg["name"], "config": cfg,
                     "config_hash": config_hash(cfg)}

    try:
        pairings = build_pairings(cfg, system, domain, out_dir)
        if not pairings:
            raise ValueError("no usable pairings after filtering")
    except StageError:
        raise
    except Exception as exc:
        raise StageError("data", exc) from exc
    summary["n_pairings"] = len(pairings)

    spec = BasisSpec(cfg["basis"]["kind"], int(cfg["basis"]["degree"]),
                     d_state, domain)
    solver = cfg["solver"]
    history = None
    try:
        if solver["method"] == "sa":
            learned, history, sa_info = _fit_sequential(cfg, system, domain, spec,
                                                        pairings, is_dae)
            summary["sequential"] = sa_info
        else:
            learned = _fit_batch(cfg, spec, pairings, is_dae)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("fit", exc) from exc

    summary["fit_diagnostics"] = learned.coeffs.diagnostics
    if out_dir is not None:
        save_coefficients(learned.coeffs, os.path.join(out_dir, "coefficients.json"))
        if learned.constraint_coeffs is not None:
            save_coefficients(learned.constraint_coeffs,
                              os.path.join(out_dir, "constraint_coefficients.json"))
        if history is not None:
            _write_history_csv(os.path.join(out_dir, "history.csv"), history)

    if (system is not None and not is_dae and system.true_terms is not None
            and spec.kind == "monomial"):
        try:
            truth = system.true_coefficients
            if truth.basis.degree <= spec.degree:
                errs = coefficient_error(learned.coeffs, truth)
                summary["coefficient_errors"] = {
                    "max_termwise": errs.max_termwise,
                    "per_component_l2": [float(v) for v in errs.per_component_l2],
                }
        except Exception as exc:
            raise StageError("coefficient-comparison", exc) from exc

    val = cfg.get("validation")
    if val is not None and system is not None:
        try:
            records = []
            for i, u0 in enumerate(val["initial_states"]):
                steps = max(1, int(round(val["horizon"] / val["dt"])))
                cmpres = trajectory_error(system, learned, np.asarray(u0, dtype=float),
                                          val["dt"], steps, substeps=val["substeps"])
                rec = {"initial_state": list(map(float, u0)),
                       "max_state_error": float(np.max(cmpres.state_error))}
                if cmpres.algebraic_error is not None:
                    rec["max_algebraic_error"] = float(np.max(cmpres.algebraic_error))
                    rec["max_true_algebraic_norm"] = float(
                        np.max(np.linalg.norm(cmpres.true_algebraic, axis=-1)))
                rec["max_true_state_norm"] = float(
                    np.max(np.linalg.norm(cmpres.true_states, axis=-1)))
                records.append(rec)
                if out_dir is not None:
                    _write_validation_csv(
                        os.path.join(out_dir, f"validation_{i}.csv"), cmpres)
            summary["validation"] = records
        except StageError:
            raise
        except Exception as exc:
            raise StageError("validation", exc) from exc

    if out_dir is not None:
        _write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary, learned


def _fit_batch(cfg, spec, pairings, is_dae) -> LearnedSystem:
    mm = assemble(pairings, spec)
    method = cfg["solver"]["method"]
    if method == "l2":
        cs = fit_l2(mm)
    elif method == "l1":
        cs = fit_l1(mm)
    else:
        cs = fit_lasso(mm, float(cfg["solver"]["lambda"]))
    constraint_cs = None
    if is_dae:
        if pairings[0].algebraic is None:
            raise ValueError("DAE fit needs algebraic observations in the pairings")
        U = np.asarray([p.x for p in pairings])
        V = np.asarray([p.algebraic for p in pairings])
        constraint_cs = fit_constraint_map(
            U, V, spec, solver="l1" if method == "l1" else "l2")
    return LearnedSystem(basis=spec, coeffs=cs, constraint_coeffs=constraint_cs)


def _fit_sequential(cfg, system, domain, spec, pairings, is_dae):
    solver = cfg["solver"]
    include_alg = bool(solver.get("include_algebraic")) and is_dae
    ode = system.reduce() if is_dae else system
    monitor = None
    if system is not None:
        from .domain import sample_initial_states

        pts = sample_initial_states(domain, int(solver["monitor_samples"]),
                                    "uniform", stage_seed(cfg, "monitor"))
        truth = ode.rhs(pts)
        names = [f"f_{i+1}" for i in range(truth.shape[1])]
        if include_alg:
            valg = system.g(pts)
            truth = np.concatenate([truth, valg], axis=1)
            names += [f"g_{i+1}" for i in range(valg.shape[1])]
        monitor = Monitor(points=pts, truth=truth, cadence=int(solver["cadence"]),
                          component_names=names)
    state, history = sa_run(pairings, spec, gamma=solver["gamma"],
                            steps=solver["steps"], seed=stage_seed(cfg, "shuffle"),
                            monitor=monitor, include_algebraic=include_alg,
                            single_pass=bool(solver.get("single_pass")))
    d_state = system.d_u if is_dae else system.d
    from .regression import CoefficientSet

    cs = CoefficientSet(basis=spec, coeffs=state.coeffs[:, :d_state],
                        diagnostics={"solver": "sa", "steps": state.step})
    constraint_cs = None
    if include_alg:
        constraint_cs = CoefficientSet(basis=spec, coeffs=state.coeffs[:, d_state:],
                                       diagnostics={"solver": "sa", "steps": state.step})
    info = {"steps": state.step}
    if history:
        final = {r["component"]: r["value"] for r in history if r["step"] == state.step}
        first = {}
        first_step = history[0]["step"]
        for r in history:
            if r["step"] == first_step:
                first[r["component"]] = r["value"]
        info["first_errors"] = first
        info["final_errors"] = final
    learned = LearnedSystem(basis=spec, coeffs=cs, constraint_coeffs=constraint_cs)
    return learned, history, info


def _axis_value_config(base: dict, axis: str, value, index: int) -> dict:
    cfg = copy.deepcopy(base)
    if axis == "noise":
        cfg["data"]["noise"] = {"kind": "uniform", "eta": float(value)}
    elif axis == "degree":
        cfg["basis"]["degree"] = int(value)
    elif axis == "M":
        cfg["data"]["M"] = int(value)
    elif axis == "seed":
        cfg["seed"] = int(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r} (expected {_SWEEP_AXES})")
    if axis != "seed":
        derived = np.random.SeedSequence([int(base["seed"]), index])
        cfg["seed"] = int(derived.generate_state(1)[0])
    cfg["name"] = f"{base.get('name', 'experiment')}-{axis}-{index}"
    return cfg


def _sweep_worker(args):
    cfg, run_dir = args
    summary, _ = run_experiment(cfg, run_dir)
    return summary


def run_sweep(base_config: dict, axis: str, values: Sequence, out_dir: str,
              workers: int = 1):
    """One experiment per axis value, with derived seeds; returns tidy rows.

    Per-run failures are recorded in the table and the sweep continues.
    Writes ``sweep.csv`` plus one run directory per value under ``out_dir``.
    """
    if not len(values):
        raise ValueError("sweep needs at least one axis value")
    base = resolve_config(base_config)
    os.makedirs(out_dir, exist_ok=True)
    jobs = []
    for i, v in enumerate(values):
        cfg = _axis_value_config(base, axis, v, i)
        jobs.append((cfg, os.path.join(out_dir, f"run-{axis}-{i}")))
    results: list = [None] * len(jobs)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            futures = {ex.submit(_sweep_worker, job): i for i, job in enumerate(jobs)}
            for fut in concurrent.futures.as_completed(futures):
                i = futures[fut]
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    results[i] = exc
    else:
        for i, job in enumerate(jobs):
            try:
                results[i] = _sweep_worker(job)
            except Exception as exc:
                results[i] = exc

    rows = []
    for i, (v, res) in enumerate(zip(values, results)):
        row = {"axis": axis, "value": v, "status": "ok", "max_termwise": "",
               "coeff_l2": "", "max_trajectory_error": ""}
        if isinstance(res, Exception):
            row["status"] = f"error: {res}"
        else:
            ce = res.get("coefficient_errors")
            if ce:
                row["max_termwise"] = ce["max_termwise"]
                row["coeff_l2"] = ";".join(repr(float(x))
                                           for x in ce["per_component_l2"])
            val = res.get("validation")
            if val:
                row["max_trajectory_error"] = max(r["max_state_error"] for r in val)
        rows.append(row)
    with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
        fh.write("axis,value,status,max_termwise,coeff_l2,max_trajectory_error\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in
                              ("axis", "value", "status", "max_termwise",
                               "coeff_l2", "max_trajectory_error")) + "\n")
    return rows


def import_pairings(path, expected_dim: Optional[int] = None):
    """Read and validate a pairing CSV; optionally enforce the state dimension."""
    pairings = read_pairings(path)
    if expected_dim is not None and pairings and len(pairings[0].x) != expected_dim:
        raise ValueError(
            f"pairing dimension {len(pairings[0].x)} != expected {expected_dim}")
    return pairings
