"""Matrix-free sequential coefficient updates, one data pairing per step.

Each incoming pairing (x, xdot) moves every coefficient column along the
dictionary vector at x:

    c <- c + (target - <c, phi(x)>) / (||phi(x)||^2 + gamma_k) * phi(x)

With gamma_k = 0 this is a Kaczmarz sweep and the post-step residual at the
used pairing vanishes; positive gamma damps the step for noisy data. The
solver stores nothing but the coefficient columns: per step it touches one
dictionary vector and never factorizes or solves a matrix system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .basis import BasisSpec, eval_basis
from .data import DataPairing

__all__ = [
    "SaState",
    "Monitor",
    "gamma_schedule",
    "sa_step",
    "sa_run",
]

# Pairings are processed in blocks of at most this many steps so the
# dictionary rows for a block can be evaluated in one vectorized call.
_MAX_BLOCK = 2048


def gamma_schedule(spec) -> Callable[[int], float]:
    """Build a damping schedule k -> gamma_k.

    Accepts a number (constant schedule; 0 suits noiseless data), the strings
    'zero' or 'constant:<value>', or any callable, which is passed through.
    """
    if callable(spec):
        return spec
    if isinstance(spec, str):
        if spec == "zero":
            value = 0.0
        elif spec.startswith("constant:"):
            value = float(spec.split(":", 1)[1])
        else:
            raise ValueError(f"unknown damping schedule {spec!r}")
    else:
        value = float(spec)
    if value < 0:
        raise ValueError("damping must be >= 0")
    return lambda k: value


@dataclass(frozen=True)
class SaState:
    """Running coefficients after ``step`` sequential updates."""

    coeffs: np.ndarray
    step: int = 0
    gamma: Callable[[int], float] = field(default=lambda k: 0.0, compare=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2:
            raise ValueError("coefficients must be 2-D (terms x targets)")
        if not np.isfinite(c).all():
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis: BasisSpec, n_targets: int, gamma="zero") -> "SaState":
        return cls(coeffs=np.zeros((basis.size, n_targets)),
                   gamma=gamma_schedule(gamma))


def _targets_of(pairing: DataPairing, n_targets: int) -> np.ndarray:
    if pairing.algebraic is not None and n_targets == len(pairing.xdot) + len(pairing.algebraic):
        return np.concatenate([pairing.xdot, pairing.algebraic])
    if n_targets != len(pairing.xdot):
        raise ValueError(
            f"pairing provides {len(pairing.xdot)} targets, state tracks {n_targets}")
    return pairing.xdot


def sa_step(state: SaState, pairing: DataPairing, basis: BasisSpec) -> SaState:
    """Apply one sequential update; pure, returns the successor state."""
    phi = eval_basis(basis, pairing.x)
    targets = _targets_of(pairing, state.coeffs.shape[1])
    k = state.step + 1
    g = float(state.gamma(k))
    if g < 0:
        raise ValueError("damping must be >= 0")
    nrm = float(phi @ phi)
    resid = targets - state.coeffs.T @ phi
    coeffs = state.coeffs + phi[:, np.newaxis] * (resid / (nrm + g))[np.newaxis, :]
    return replace(state, coeffs=coeffs, step=k)


@dataclass
class Monitor:
    """Periodic accuracy probe for a sequential run.

    Holds an independent sample set and the true target values there; every
    ``cadence`` steps the run records, per target component and stacked over
    all of them, the relative l2 error of the current expansion on the
    sample set.
    """

    points: np.ndarray
    truth: np.ndarray
    cadence: int
    component_names: Optional[list[str]] = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float)
        self.truth = np.asarray(self.truth, dtype=float)
        if self.truth.ndim == 1:
            self.truth = self.truth[:, np.newaxis]
        if self.points.shape[0] != self.truth.shape[0]:
            raise ValueError("monitor points and truth rows differ")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        self._col_norms = np.linalg.norm(self.truth, axis=0)
        self._all_norm = float(np.linalg.norm(self.truth))
        if self._all_norm == 0.0 or np.any(self._col_norms == 0.0):
            raise ValueError("monitor truth has a zero-norm component")
        if self.component_names is None:
            self.component_names = [f"c_{i+1}" for i in range(self.truth.shape[1])]
        self._phi: Optional[np.ndarray] = None

    def errors(self, basis: BasisSpec, coeffs: np.ndarray) -> dict[str, float]:
        if self._phi is None:
            self._phi = eval_basis(basis, self.points)
        diff = self._phi @ coeffs - self.truth
        out = {name: float(np.linalg.norm(diff[:, i]) / self._col_norms[i])
               for i, name in enumerate(self.component_names)}
        out["all"] = float(np.linalg.norm(diff) / self._all_norm)
        return out


def _stream_order(n_pairings: int, steps: int, seed, single_pass: bool) -> np.ndarray:
    """Seed-shuffled pairing indices, reshuffling each epoch when cycling."""
    rng = np.random.default_rng(seed)
    if single_pass:
        if steps > n_pairings:
            raise ValueError("single-pass stream shorter than requested steps")
        return rng.permutation(n_pairings)[:steps]
    chunks = []
    total = 0
    while total < steps:
        perm = rng.permutation(n_pairings)
        chunks.append(perm)
        total += n_pairings
    return np.concatenate(chunks)[:steps]


def sa_run(pairings: Sequence[DataPairing], basis: BasisSpec, gamma="zero",
           steps: Optional[int] = None, seed=0, monitor: Optional[Monitor] = None,
           include_algebraic: bool = False, single_pass: bool = False,
           state: Optional[SaState] = None,
           cadence: Optional[int] = None):
    """Run the sequential solver over a seed-shuffled pairing stream.

    Returns (final state, history), where history is a list of records
    ``{"step": k, "component": name, "value": v}``. With a monitor the
    recorded values are relative l2 errors against the supplied truth; without
    one the update magnitude over each cadence window is recorded instead
    (component 'update_norm'). Deterministic given (pairings, seed, schedule).
    """
    if not pairings:
        raise ValueError("no pairings supplied")
    d = len(pairings[0].x)
    d_alg = 0
    if include_algebraic:
        if pairings[0].algebraic is None:
            raise ValueError("pairings carry no algebraic observations")
        d_alg = len(pairings[0].algebraic)
    n_targets = len(pairings[0].xdot) + d_alg
    if steps is None:
        steps = len(pairings)
    schedule = gamma_schedule(gamma)
    if state is None:
        state = SaState.zeros(basis, n_targets, gamma=schedule)
    coeffs = state.coeffs.copy()

    X = np.asarray([p.x for p in pairings])
    T = np.asarray([p.xdot for p in pairings])
    if include_algebraic:
        T = np.concatenate([T, np.asarray([p.algebraic for p in pairings])], axis=1)
    if X.shape[1] != basis.dim:
        raise ValueError("pairing dimension does not match dictionary")

    order = _stream_order(len(pairings), steps, seed, single_pass)
    cadence = cadence if cadence is not None else (monitor.cadence if monitor else steps)

    history: list[dict] = []
    k = state.step
    done = 0
    while done < steps:
        upto = min(done + cadence, steps)
        window_start = coeffs.copy() if monitor is None else None
        pos = done
        while pos < upto:
            block = order[pos:min(pos + _MAX_BLOCK, upto)]
            phis = eval_basis(basis, np.ascontiguousarray(X[block]))
            gammas = np.array([schedule(k + i + 1) for i in range(len(block))])
            _kernels.sa_block(coeffs, phis,
                              np.ascontiguousarray(T[block]), gammas)
            k += len(block)
            pos += len(block)
        done = upto
        if not np.isfinite(coeffs).all():
            raise RuntimeError(f"non-finite coefficients at step {k}")
        if done % cadence == 0:
            if monitor is not None:
                for name, val in monitor.errors(basis, coeffs).items():
                    history.append({"step": k, "component": name, "value": val})
            else:
                delta = float(math.sqrt(float(np.sum((coeffs - window_start) ** 2))))
                history.append({"step": k, "component": "update_norm", "value": delta})

    final = replace(state, coeffs=coeffs, step=k)
    return final, history
