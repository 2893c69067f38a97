"""Shipped experiment presets, one per benchmark scenario.

Each preset is a complete, self-describing configuration dict; the runner
fills in system-derived defaults (domain, time step) at resolution time.
"""

from __future__ import annotations

import copy

__all__ = ["PRESETS", "ALIASES", "list_presets", "preset"]


def _cfg(name, system, seed, *, M, J, basis_kind, degree, solver,
         noise=None, corruption=None, derivative=None, dt=None,
         strategy="uniform", validation=None, solver_opts=None,
         resources_ack=False):
    cfg = {
        "name": name,
        "seed": seed,
        "system": system,
        "domain": None,
        "data": {
            "source": "synthetic",
            "M": M,
            "J": J,
            "dt": dt,
            "strategy": strategy,
            "substeps": 10,
            "noise": noise or {"kind": "none"},
            "corruption": corruption or {"count": 0, "mu": 0.0, "sigma": 1.0},
        },
        "derivative": derivative or {"method": "central"},
        "basis": {"kind": basis_kind, "degree": degree},
        "solver": {"method": solver, **(solver_opts or {})},
        "validation": validation,
        "seeds": {},
        "resources_ack": resources_ack,
    }
    return cfg


PRESETS: dict[str, dict] = {}


def _register(cfg: dict) -> None:
    PRESETS[cfg["name"]] = cfg


_register(_cfg("table1-saddle", "saddle", 20240101, M=10, J=2,
               basis_kind="monomial", degree=1, solver="l2",
               validation={"initial_states": [[0.5, 1.5]], "horizon": 1.0}))

_register(_cfg("table1-node", "improper-node", 20240102, M=10, J=2,
               basis_kind="monomial", degree=1, solver="l1",
               validation={"initial_states": [[0.5, -0.5]], "horizon": 1.0}))

_register(_cfg("table1-star", "star", 20240103, M=10, J=19,
               basis_kind="monomial", degree=1, solver="l2",
               noise={"kind": "uniform", "eta": 0.01},
               derivative={"method": "lsq", "degree": 3},
               validation={"initial_states": [[0.8, 0.8]], "horizon": 2.0}))

_register(_cfg("table1-nodal-sink", "nodal-sink", 20240104, M=10, J=19,
               basis_kind="monomial", degree=1, solver="l2",
               noise={"kind": "uniform", "eta": 0.01},
               derivative={"method": "lsq", "degree": 3},
               validation={"initial_states": [[-1.5, -0.3]], "horizon": 2.0}))

_register(_cfg("table1-center", "center", 20240105, M=20, J=2,
               basis_kind="monomial", degree=1, solver="l1",
               corruption={"count": 2, "mu": 0.5, "sigma": 1.0},
               validation={"initial_states": [[0.5, 0.0]], "horizon": 3.0}))

_register(_cfg("table1-spiral", "spiral", 20240106, M=20, J=2,
               basis_kind="monomial", degree=1, solver="l1",
               corruption={"count": 2, "mu": 0.5, "sigma": 1.0},
               validation={"initial_states": [[-2.0, 1.5]], "horizon": 2.0}))

_register(_cfg("duffing", "duffing", 20240107, M=30, J=2,
               basis_kind="monomial", degree=3, solver="l2",
               validation={"initial_states": [[1.0, 0.5]], "horizon": 1.0}))

# Sliding local fits denoise both the states and the derivatives; a width-13
# window over the 31-point bursts yields 19 usable pairings per burst.
_register(_cfg("species-noisy", "competing-species", 20240108, M=30, J=30,
               basis_kind="monomial", degree=2, solver="l2",
               noise={"kind": "uniform", "eta": 0.01},
               derivative={"method": "lsq", "degree": 2, "window": 13},
               validation={"initial_states": [[1.25, 1.75]], "horizon": 10.0}))

_register(_cfg("cycle-corrupted", "limit-cycle", 20240109, M=40, J=2,
               basis_kind="monomial", degree=3, solver="l1",
               corruption={"fraction": 0.1, "mu": 0.5, "sigma": 1.0},
               validation={"initial_states": [[-1.325, 1.874]], "horizon": 10.0}))

_register(_cfg("cycle-noisy", "limit-cycle", 20240110, M=40, J=10,
               basis_kind="monomial", degree=3, solver="l2",
               noise={"kind": "uniform", "eta": 0.01},
               validation={"initial_states": [[-1.325, 1.874]], "horizon": 5.0}))

_register(_cfg("pendulum", "pendulum", 20240111, M=200, J=2,
               basis_kind="monomial", degree=6, solver="l2",
               validation={"initial_states": [[-1.193, -3.876]], "horizon": 10.0}))

_register(_cfg("network", "network", 20240112, M=200, J=19,
               basis_kind="legendre", degree=8, solver="l2",
               noise={"per_component": [
                   {"kind": "uniform", "eta": 1e-4},
                   {"kind": "uniform", "eta": 1e-4},
                   {"kind": "gaussian", "sigma": 1e-3},
                   {"kind": "gaussian", "sigma": 5e-3}]},
               validation={"initial_states": [[0.0, 0.1]], "horizon": 2.5e-7}))

_register(_cfg("toggle", "toggle", 20240113, M=500, J=2,
               basis_kind="legendre", degree=16, solver="l1",
               corruption={"count": 5, "mu": 1.0, "sigma": 1.0},
               validation={"initial_states": [[19.5, 16.5]], "horizon": 2.0}))

_register(_cfg("saddle-sa", "saddle", 20240114, M=2000, J=0,
               basis_kind="monomial", degree=1, solver="sa",
               derivative={"method": "exact"},
               solver_opts={"gamma": "zero", "steps": 10000, "cadence": 100,
                            "monitor_samples": 2000},
               validation={"initial_states": [[0.5, 1.5]], "horizon": 1.0}))

# Burst step 1e-6 keeps the fast relaxation modes from carrying burst points
# far outside the sampling box, where high-degree extrapolation would both
# inflate the differencing error and stall the streaming updates.
_register(_cfg("reactor-scaled", "reactor", 20240115, M=50000, J=2, dt=1e-6,
               strategy="chebyshev-tensor",
               basis_kind="legendre", degree=6, solver="sa",
               solver_opts={"gamma": "zero", "steps": 150000, "cadence": 1000,
                            "monitor_samples": 20000, "include_algebraic": True},
               validation={"initial_states": [[1.5776, 8.32, 0.0, 0.0, 0.0, 0.0142]],
                           "horizon": 2e-4}))

_register(_cfg("reactor-full", "reactor", 20240116, M=500000, J=2, dt=1e-6,
               strategy="chebyshev-tensor",
               basis_kind="legendre", degree=12, solver="sa",
               solver_opts={"gamma": "zero", "steps": 500000, "cadence": 2000,
                            "monitor_samples": 20000, "include_algebraic": True,
                            "single_pass": True},
               validation={"initial_states": [[1.5776, 8.32, 0.0, 0.0, 0.0, 0.0142]],
                           "horizon": 2e-4},
               resources_ack=False))

# Alternate historical names kept resolvable.
ALIASES = {
    "nonODE2-noisy": "species-noisy",
}


def list_presets() -> list[str]:
    return sorted(PRESETS)


def preset(name: str) -> dict:
    """A deep copy of the named preset (aliases resolve to their target)."""
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        known = ", ".join(list_presets())
        raise ValueError(f"unknown preset {name!r}; available: {known}")
    return copy.deepcopy(PRESETS[key])
