"""Axis-aligned box domains, masked subregions, and initial-state samplers.

A domain is a product of closed intervals (its bounding box) with an optional
membership mask for regions such as a box with a forbidden disk removed.
Probability statements (sampling, orthonormality of the Legendre dictionary)
always refer to the uniform measure on the bounding box.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Domain",
    "RejectionBudgetError",
    "contains",
    "mask_from_name",
    "sample_initial_states",
]

# Candidate points are drawn in fixed-size batches so that, for a given seed,
# the accepted sequence for a small request is a prefix of a larger one.
_BATCH = 4096

# Rejection attempts allowed per requested point before giving up.
_REJECTION_CAP = 10**6


class RejectionBudgetError(RuntimeError):
    """Mask acceptance too low: the rejection sampler ran out of attempts."""


def _annulus(center: np.ndarray, radius: float) -> Callable[[np.ndarray], np.ndarray]:
    def keep(pts: np.ndarray) -> np.ndarray:
        return np.sum((pts - center) ** 2, axis=-1) >= radius**2

    return keep


def _ball(center: np.ndarray, radius: float) -> Callable[[np.ndarray], np.ndarray]:
    def keep(pts: np.ndarray) -> np.ndarray:
        return np.sum((pts - center) ** 2, axis=-1) <= radius**2

    return keep


def _halfplane(coeffs: np.ndarray, offset: float) -> Callable[[np.ndarray], np.ndarray]:
    def keep(pts: np.ndarray) -> np.ndarray:
        return pts @ coeffs + offset > 0.0

    return keep


def mask_from_name(name: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Build a membership predicate from a named preset.

    Supported presets (all arguments numeric):

    - ``annulus(c_1, ..., c_d, r)`` -- keep points at distance >= r from c
      (a box with a forbidden ball removed)
    - ``ball(c_1, ..., c_d, r)`` -- keep points at distance <= r from c
    - ``halfplane(a_1, ..., a_d, b)`` -- keep points with a.x + b > 0
    """
    m = re.fullmatch(r"\s*([a-z]+)\s*\(([^)]*)\)\s*", name)
    if m is None:
        raise ValueError(f"cannot parse mask preset {name!r}")
    kind, argstr = m.group(1), m.group(2)
    args = [float(tok) for tok in argstr.split(",") if tok.strip()]
    if kind in ("annulus", "ball"):
        if len(args) != dim + 1:
            raise ValueError(f"{kind} mask needs {dim + 1} arguments, got {len(args)}")
        center = np.asarray(args[:-1], dtype=float)
        radius = args[-1]
        if radius <= 0:
            raise ValueError("mask radius must be positive")
        return _annulus(center, radius) if kind == "annulus" else _ball(center, radius)
    if kind == "halfplane":
        if len(args) != dim + 1:
            raise ValueError(f"halfplane mask needs {dim + 1} arguments, got {len(args)}")
        return _halfplane(np.asarray(args[:-1], dtype=float), args[-1])
    raise ValueError(f"unknown mask preset {kind!r}")


@dataclass(frozen=True)
class Domain:
    """Product of closed intervals with an optional membership mask.

    ``bounds`` is a sequence of (lo, hi) pairs. ``mask`` is either None or a
    named preset string (see :func:`mask_from_name`); a custom callable can be
    supplied through ``mask_fn`` instead, in which case ``mask`` should be
    left None (it is recorded as ``"custom"`` on serialization).
    """

    bounds: tuple[tuple[float, float], ...]
    mask: Optional[str] = None
    mask_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise ValueError("domain needs at least one interval")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if self.mask is not None and self.mask_fn is None:
            object.__setattr__(self, "mask_fn", mask_from_name(self.mask, self.dim))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def masked(self) -> bool:
        return self.mask_fn is not None

    def corners(self) -> np.ndarray:
        """All 2**d corners of the bounding box, shape (2**d, d)."""
        d = self.dim
        out = np.empty((2**d, d))
        for i in range(2**d):
            for ax in range(d):
                out[i, ax] = self.bounds[ax][(i >> ax) & 1]
        return out

    def serializable(self) -> dict:
        return {
            "bounds": [list(b) for b in self.bounds],
            "mask": self.mask if self.mask is not None
            else ("custom" if self.mask_fn is not None else None),
        }


def contains(domain: Domain, x) -> np.ndarray | bool:
    """Membership test; accepts a single point (d,) or a batch (m, d)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[np.newaxis, :]
    if pts.ndim != 2 or pts.shape[1] != domain.dim:
        raise ValueError(f"expected points of dimension {domain.dim}, got shape {np.shape(x)}")
    ok = np.all((pts >= domain.lo) & (pts <= domain.hi), axis=1)
    if domain.mask_fn is not None:
        ok &= np.asarray(domain.mask_fn(pts), dtype=bool)
    return bool(ok[0]) if single else ok


def _box_batches(domain: Domain, strategy: str, seed) -> "Callable[[], np.ndarray]":
    """Return a closure producing successive candidate batches inside the box."""
    lo, hi = domain.lo, domain.hi
    if strategy == "uniform":
        rng = np.random.default_rng(seed)

        def draw() -> np.ndarray:
            u = rng.random((_BATCH, domain.dim))
            return lo + u * (hi - lo)

    elif strategy == "halton":
        engine = qmc.Halton(d=domain.dim, scramble=True, seed=np.random.default_rng(seed))

        def draw() -> np.ndarray:
            u = engine.random(_BATCH)
            return lo + u * (hi - lo)

    elif strategy == "chebyshev-tensor":
        rng = np.random.default_rng(seed)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)

        def draw() -> np.ndarray:
            u = rng.random((_BATCH, domain.dim))
            # Inverse CDF of the arcsine density 1/(pi sqrt((x-a)(b-x))).
            return mid - half * np.cos(np.pi * u)

    else:
        raise ValueError(
            f"unknown sampling strategy {strategy!r} "
            "(expected 'uniform', 'halton' or 'chebyshev-tensor')"
        )
    return draw


def sample_initial_states(domain: Domain, count: int, strategy: str = "uniform",
                          seed=0) -> np.ndarray:
    """Draw ``count`` points from the domain, shape (count, d).

    Strategies: i.i.d. ``uniform`` on the box, scrambled ``halton``, and the
    per-axis ``chebyshev-tensor`` (arcsine) distribution. Masked domains are
    handled by rejection; every returned point satisfies :func:`contains`.
    Deterministic for a fixed seed, and for a fixed seed the points returned
    for a smaller ``count`` are a prefix of those for a larger one.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    draw = _box_batches(domain, strategy, seed)
    accepted: list[np.ndarray] = []
    total = 0
    attempts = 0
    budget = _REJECTION_CAP * count
    while total < count:
        batch = draw()
        attempts += len(batch)
        if domain.mask_fn is not None:
            batch = batch[np.asarray(domain.mask_fn(batch), dtype=bool)]
        if len(batch):
            accepted.append(batch)
            total += len(batch)
        if total < count and attempts >= budget:
            raise RejectionBudgetError(
                f"accepted {total}/{count} points after {attempts} attempts; "
                "mask acceptance fraction too low"
            )
    return np.concatenate(accepted, axis=0)[:count]
