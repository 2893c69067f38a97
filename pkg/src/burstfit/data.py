"""Burst synthesis, perturbation, and derivative estimation.

A burst is a very short trajectory observed on a uniform time grid. Many
bursts from scattered initial states feed the regression as (state,
state-derivative) pairings; derivatives are either estimated from the burst
(central differences, or a local least-squares polynomial fit that also
denoises) or supplied directly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import Domain, contains, sample_initial_states
from .dynamics import DaeSystem, OdeSystem, integrate_rk4

__all__ = [
    "TrajectoryBurst",
    "NoiseSpec",
    "CorruptionSpec",
    "DataPairing",
    "synthesize_bursts",
    "exact_pairings",
    "perturb",
    "estimate_derivatives",
    "filter_pairings",
    "write_bursts",
    "read_bursts",
    "write_pairings",
    "read_pairings",
]

# Internal RK4 stages per observation interval when synthesizing data, so the
# integrator error is negligible against the recovery errors being measured.
DEFAULT_SUBSTEPS = 10

_RESAMPLE_CAP = 20


@dataclass
class TrajectoryBurst:
    """Observed states of one burst on a uniform time grid.

    ``algebraic`` carries companion algebraic-variable observations for
    semi-explicit DAE data, aligned with ``times``.
    """

    times: np.ndarray
    states: np.ndarray
    burst_id: int
    algebraic: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or self.states.ndim != 2:
            raise ValueError("times must be 1-D and states 2-D")
        if len(self.times) != len(self.states):
            raise ValueError("times and states length mismatch")
        if len(self.times) > 1:
            diffs = np.diff(self.times)
            if np.any(diffs <= 0):
                raise ValueError("times must be strictly increasing")
            dt = diffs[0]
            if np.any(np.abs(diffs - dt) > 1e-12 + 1e-9 * abs(dt)):
                raise ValueError("times must be uniformly spaced")
        if not np.isfinite(self.states).all():
            raise ValueError("non-finite states")
        if self.algebraic is not None:
            self.algebraic = np.asarray(self.algebraic, dtype=float)
            if self.algebraic.shape[0] != len(self.times):
                raise ValueError("algebraic rows must match times")

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def d(self) -> int:
        return self.states.shape[1]


_NOISE_KINDS = ("none", "uniform", "gaussian")


@dataclass(frozen=True)
class NoiseSpec:
    """Per-component observation-noise laws.

    ``laws`` holds one (kind, parameter) pair per observed component, state
    components first, then algebraic components. ``uniform`` draws from
    [-p, p]; ``gaussian`` from N(0, p^2).
    """

    laws: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for kind, p in self.laws:
            if kind not in _NOISE_KINDS:
                raise ValueError(f"unknown noise kind {kind!r}")
            if p < 0:
                raise ValueError("noise amplitude must be >= 0")

    @classmethod
    def none(cls, n_components: int) -> "NoiseSpec":
        return cls(tuple(("none", 0.0) for _ in range(n_components)))

    @classmethod
    def uniform(cls, eta: float, n_components: int) -> "NoiseSpec":
        return cls(tuple(("uniform", float(eta)) for _ in range(n_components)))

    @classmethod
    def gaussian(cls, sigma: float, n_components: int) -> "NoiseSpec":
        return cls(tuple(("gaussian", float(sigma)) for _ in range(n_components)))

    @property
    def is_identity(self) -> bool:
        return all(kind == "none" or p == 0.0 for kind, p in self.laws)


@dataclass(frozen=True)
class CorruptionSpec:
    """Sparse large corruption: a few seed-selected bursts get N(mu, sigma^2)
    added to every observed entry."""

    count: Optional[int] = None
    fraction: Optional[float] = None
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if (self.count is None) == (self.fraction is None):
            raise ValueError("specify exactly one of count or fraction")
        if self.count is not None and self.count < 0:
            raise ValueError("count must be >= 0")
        if self.fraction is not None and not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def resolve_count(self, n_bursts: int) -> int:
        if self.count is not None:
            if self.count > n_bursts:
                raise ValueError("cannot corrupt more bursts than exist")
        n = self.count if self.count is not None else round(self.fraction * n_bursts)
        return int(n)

    @classmethod
    def nothing(cls) -> "CorruptionSpec":
        return cls(count=0)


@dataclass
class DataPairing:
    """A matched (state, state-derivative) sample feeding the regression."""

    x: np.ndarray
    xdot: np.ndarray
    burst_id: int = -1
    t: float = 0.0
    weight: float = 1.0
    algebraic: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.xdot = np.asarray(self.xdot, dtype=float)
        if self.x.shape != self.xdot.shape or self.x.ndim != 1:
            raise ValueError("x and xdot must be 1-D of equal length")
        if not (np.isfinite(self.x).all() and np.isfinite(self.xdot).all()):
            raise ValueError("non-finite pairing")
        if self.algebraic is not None:
            self.algebraic = np.atleast_1d(np.asarray(self.algebraic, dtype=float))


def _seed_pair(seed):
    """Normalize a perturbation seed into (noise_seed, corruption_seed)."""
    if isinstance(seed, tuple):
        return seed
    children = np.random.SeedSequence(seed).spawn(2)
    return children[0], children[1]


def synthesize_bursts(system, domain: Optional[Domain], M: int, J: int,
                      dt: Optional[float] = None, strategy: str = "uniform",
                      seed=0, substeps: int = DEFAULT_SUBSTEPS) -> list[TrajectoryBurst]:
    """Integrate ``M`` noiseless bursts of ``J`` intervals from sampled starts.

    Initial states are drawn from the domain sampler; every burst starts
    inside the domain (later points may drift out and are kept). For DAE
    systems the companion algebraic variables are recorded alongside. Bursts
    that blow up are discarded and redrawn, up to a retry cap.
    """
    if M < 1 or J < 0:
        raise ValueError("need M >= 1 and J >= 0")
    is_dae = isinstance(system, DaeSystem)
    ode = system.reduce() if is_dae else system
    domain = domain if domain is not None else system.domain
    dt = float(dt if dt is not None else system.dt)

    bursts: list[TrajectoryBurst] = []
    times = np.arange(J + 1) * dt
    needed = M
    attempt = 0
    while needed > 0:
        if attempt >= _RESAMPLE_CAP:
            raise RuntimeError(
                f"still missing {needed} bursts after {attempt} resampling rounds "
                "(integration keeps blowing up)")
        draw_seed = np.random.SeedSequence([int(seed), attempt])
        u0 = sample_initial_states(domain, needed, strategy, draw_seed)
        traj = integrate_rk4(ode.rhs, u0, dt, J, substeps=substeps, check=False)
        ok = np.isfinite(traj).all(axis=(0, 2))
        for m in np.nonzero(ok)[0]:
            states = np.ascontiguousarray(traj[:, m, :])
            alg = np.ascontiguousarray(system.g(states)) if is_dae else None
            bursts.append(TrajectoryBurst(times=times.copy(), states=states,
                                          burst_id=len(bursts), algebraic=alg))
        needed = M - len(bursts)
        attempt += 1
    return bursts


def exact_pairings(system, domain: Optional[Domain] = None, M: int = 1,
                   strategy: str = "uniform", seed=0) -> list[DataPairing]:
    """Directly measured pairings: sampled states with exact derivatives.

    Models the case where derivative data come from the measurement process
    itself, so no burst integration or differencing is needed.
    """
    is_dae = isinstance(system, DaeSystem)
    ode = system.reduce() if is_dae else system
    domain = domain if domain is not None else system.domain
    X = sample_initial_states(domain, M, strategy, seed)
    Xdot = ode.rhs(X)
    V = system.g(X) if is_dae else None
    return [
        DataPairing(x=X[m], xdot=Xdot[m], burst_id=m, t=0.0,
                    algebraic=None if V is None else V[m])
        for m in range(M)
    ]


def _draw_noise(rng, laws, shape_rows, n_cols):
    out = np.zeros((shape_rows, n_cols))
    for c in range(n_cols):
        kind, p = laws[c]
        if kind == "uniform" and p > 0:
            out[:, c] = rng.uniform(-p, p, size=shape_rows)
        elif kind == "gaussian" and p > 0:
            out[:, c] = rng.normal(0.0, p, size=shape_rows)
    return out


def perturb(bursts: Sequence[TrajectoryBurst], noise: NoiseSpec,
            corruption: CorruptionSpec, seed=0) -> list[TrajectoryBurst]:
    """Apply observation noise and sparse burst corruption; returns new bursts.

    Noise is i.i.d. per entry under the per-component laws (state components
    first, then algebraic ones). Exactly ``corruption.resolve_count(M)``
    bursts, chosen by the corruption stream, additionally receive N(mu,
    sigma^2) draws on every entry. A 'none' noise with zero corrupted bursts
    is the identity. ``seed`` may be an int or an explicit pair of
    (noise_seed, corruption_seed) streams.
    """
    noise_seed, corr_seed = _seed_pair(seed)
    rng_noise = np.random.default_rng(noise_seed)
    rng_corr = np.random.default_rng(corr_seed)

    d = bursts[0].d if bursts else 0
    d_alg = 0 if not bursts or bursts[0].algebraic is None else bursts[0].algebraic.shape[1]
    if len(noise.laws) != d + d_alg:
        raise ValueError(
            f"noise spec has {len(noise.laws)} component laws, data has {d + d_alg}")

    n_corrupt = corruption.resolve_count(len(bursts))
    corrupted_ids = set()
    if n_corrupt > 0:
        corrupted_ids = set(
            int(i) for i in rng_corr.choice(len(bursts), size=n_corrupt, replace=False))

    out = []
    for idx, b in enumerate(bursts):
        rows = len(b.times)
        states = b.states.copy()
        alg = None if b.algebraic is None else b.algebraic.copy()
        if not noise.is_identity:
            eps = _draw_noise(rng_noise, noise.laws, rows, d + d_alg)
            states += eps[:, :d]
            if alg is not None:
                alg += eps[:, d:]
        if idx in corrupted_ids:
            states += rng_corr.normal(corruption.mu, corruption.sigma, size=states.shape)
            if alg is not None:
                alg += rng_corr.normal(corruption.mu, corruption.sigma, size=alg.shape)
        out.append(TrajectoryBurst(times=b.times.copy(), states=states,
                                   burst_id=b.burst_id, algebraic=alg))
    return out


def _central_pairings(burst: TrajectoryBurst) -> list[DataPairing]:
    if burst.n_intervals < 2:
        raise ValueError("central differences need at least 2 intervals")
    dt = burst.dt
    out = []
    for j in range(1, burst.n_intervals):
        xdot = (burst.states[j + 1] - burst.states[j - 1]) / (2.0 * dt)
        out.append(DataPairing(
            x=burst.states[j].copy(), xdot=xdot, burst_id=burst.burst_id,
            t=float(burst.times[j]),
            algebraic=None if burst.algebraic is None else burst.algebraic[j].copy()))
    return out


def _lsq_fit_window(times, values, center_t, degree):
    """Least-squares polynomial fit around center_t; returns (value, slope)."""
    T = times - center_t
    V = np.vander(T, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    return coef[0], coef[1]


def _lsq_pairings(burst: TrajectoryBurst, degree: int,
                  window: Optional[int]) -> list[DataPairing]:
    n_pts = burst.n_intervals + 1
    if not 1 <= degree <= burst.n_intervals:
        raise ValueError(
            f"fit degree must be in [1, {burst.n_intervals}] for this burst")
    if window is None:
        spans = [(0, n_pts)]
    else:
        if window < degree + 1 or window > n_pts:
            raise ValueError("window must be in [degree+1, burst length]")
        spans = [(s, s + window) for s in range(0, n_pts - window + 1)]
    out = []
    for lo, hi in spans:
        jc = lo + (hi - lo) // 2
        tc = burst.times[jc]
        x, xdot = _lsq_fit_window(burst.times[lo:hi], burst.states[lo:hi], tc, degree)
        alg = None
        if burst.algebraic is not None:
            alg, _ = _lsq_fit_window(burst.times[lo:hi], burst.algebraic[lo:hi],
                                     tc, degree)
        out.append(DataPairing(x=x, xdot=xdot, burst_id=burst.burst_id,
                               t=float(tc), algebraic=alg))
    return out


def estimate_derivatives(burst: TrajectoryBurst, method: str = "central",
                         degree: Optional[int] = None,
                         window: Optional[int] = None) -> list[DataPairing]:
    """Turn one burst into (state, derivative) pairings.

    ``central``: second-order central differences at the interior instants.
    ``lsq``: fit a degree-``degree`` polynomial in time to the whole burst by
    least squares and emit a single pairing at the middle instant, using the
    fitted value and slope there (this denoises both); with ``window`` set,
    the fit slides over windows of that many points, one pairing per window.
    """
    if method == "central":
        return _central_pairings(burst)
    if method == "lsq":
        if degree is None:
            raise ValueError("lsq differentiation needs a fit degree")
        return _lsq_pairings(burst, degree, window)
    raise ValueError(f"unknown derivative method {method!r}")


def filter_pairings(pairings: Sequence[DataPairing],
                    domain: Domain) -> list[DataPairing]:
    """Drop pairings whose state lies outside a masked domain.

    No-op for plain box domains: observed states may drift slightly out of
    the box and remain usable, but a mask marks genuinely inaccessible
    territory.
    """
    if not domain.masked:
        return list(pairings)
    return [p for p in pairings if contains(domain, p.x)]


# --------------------------------------------------------------------------
# File formats (versioned CSV)
# --------------------------------------------------------------------------

_BURST_HEADER = re.compile(r"# burstfit bursts v(\d+) d=(\d+) d_alg=(\d+)")
_PAIRING_HEADER = re.compile(r"# burstfit pairings v(\d+) d=(\d+) d_alg=(\d+)")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_bursts(path, bursts: Sequence[TrajectoryBurst]) -> None:
    d = bursts[0].d
    d_alg = 0 if bursts[0].algebraic is None else bursts[0].algebraic.shape[1]
    cols = (["burst_id", "t"] + [f"x_{i+1}" for i in range(d)]
            + [f"v_{i+1}" for i in range(d_alg)])
    with open(path, "w") as fh:
        fh.write(f"# burstfit bursts v1 d={d} d_alg={d_alg}\n")
        fh.write(",".join(cols) + "\n")
        for b in bursts:
            for j in range(len(b.times)):
                row = [str(b.burst_id), _fmt(b.times[j])]
                row += [_fmt(v) for v in b.states[j]]
                if d_alg:
                    row += [_fmt(v) for v in b.algebraic[j]]
                fh.write(",".join(row) + "\n")


def read_bursts(path) -> list[TrajectoryBurst]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty burst file")
    m = _BURST_HEADER.fullmatch(lines[0])
    if m is None:
        raise ValueError("missing burst header line")
    if int(m.group(1)) != 1:
        raise ValueError(f"unsupported burst format version {m.group(1)}")
    d, d_alg = int(m.group(2)), int(m.group(3))
    rows: dict[int, list[tuple[float, np.ndarray, np.ndarray]]] = {}
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 + d + d_alg:
            raise ValueError(f"line {i}: expected {2 + d + d_alg} fields, got {len(parts)}")
        try:
            bid = int(parts[0])
            vals = np.array([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise ValueError(f"line {i}: {exc}") from None
        rows.setdefault(bid, []).append((vals[0], vals[1:1 + d], vals[1 + d:]))
    bursts = []
    for bid in sorted(rows):
        entries = rows[bid]
        times = np.array([e[0] for e in entries])
        states = np.array([e[1] for e in entries])
        alg = np.array([e[2] for e in entries]) if d_alg else None
        bursts.append(TrajectoryBurst(times=times, states=states, burst_id=bid,
                                      algebraic=alg))
    return bursts


def write_pairings(path, pairings: Sequence[DataPairing]) -> None:
    if not pairings:
        raise ValueError("no pairings to write")
    d = len(pairings[0].x)
    d_alg = 0 if pairings[0].algebraic is None else len(pairings[0].algebraic)
    cols = ([f"x_{i+1}" for i in range(d)] + [f"xdot_{i+1}" for i in range(d)]
            + ["burst_id", "t"] + [f"v_{i+1}" for i in range(d_alg)])
    with open(path, "w") as fh:
        fh.write(f"# burstfit pairings v1 d={d} d_alg={d_alg}\n")
        fh.write(",".join(cols) + "\n")
        for p in pairings:
            row = [_fmt(v) for v in p.x] + [_fmt(v) for v in p.xdot]
            row += [str(p.burst_id), _fmt(p.t)]
            if d_alg:
                row += [_fmt(v) for v in p.algebraic]
            fh.write(",".join(row) + "\n")


def read_pairings(path) -> list[DataPairing]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty pairing file")
    m = _PAIRING_HEADER.fullmatch(lines[0])
    if m is None:
        raise ValueError("missing pairing header line")
    if int(m.group(1)) != 1:
        raise ValueError(f"unsupported pairing format version {m.group(1)}")
    d, d_alg = int(m.group(2)), int(m.group(3))
    out = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 * d + 2 + d_alg:
            raise ValueError(
                f"line {i}: expected {2 * d + 2 + d_alg} fields, got {len(parts)}")
        try:
            x = np.array([float(v) for v in parts[:d]])
            xdot = np.array([float(v) for v in parts[d:2 * d]])
            bid = int(parts[2 * d])
            t = float(parts[2 * d + 1])
            alg = (np.array([float(v) for v in parts[2 * d + 2:]])
                   if d_alg else None)
        except ValueError as exc:
            raise ValueError(f"line {i}: {exc}") from None
        if not (np.isfinite(x).all() and np.isfinite(xdot).all()):
            raise ValueError(f"line {i}: non-finite values")
        out.append(DataPairing(x=x, xdot=xdot, burst_id=bid, t=t, algebraic=alg))
    return out
