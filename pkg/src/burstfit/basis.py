"""Multivariate polynomial dictionaries of bounded total degree.

Two kinds are provided: raw monomials ``x**i`` and tensorized Legendre
polynomials orthonormal with respect to the uniform probability measure on a
domain's bounding box. Basis functions are ordered by total degree, ties
broken by descending lexicographic comparison of the exponent tuples, e.g.
for d=2, n=2: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .domain import Domain, sample_initial_states

__all__ = [
    "MultiIndex",
    "BasisSpec",
    "BasisSizeError",
    "index_set",
    "basis_size",
    "eval_basis",
    "kernel_diag",
    "sup_sqrt_kernel",
]

MultiIndex = tuple[int, ...]

# Guard against astronomically large dictionaries before allocating anything.
MAX_BASIS_SIZE = 10**7

_KINDS = ("monomial", "legendre")


class BasisSizeError(ValueError):
    """The requested dictionary has too many terms to materialize."""


def basis_size(dim: int, degree: int) -> int:
    """Number of monomials of total degree <= ``degree`` in ``dim`` variables."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    return math.comb(degree + dim, dim)


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """Exponent tuples with the given total degree, descending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def index_set(dim: int, degree: int) -> list[MultiIndex]:
    """Ordered exponent tuples spanning total degree <= ``degree``.

    Graded ordering: degree blocks ascending, descending lexicographic within
    each block. Deterministic; raises :class:`BasisSizeError` when the count
    exceeds ``MAX_BASIS_SIZE``.
    """
    n_terms = basis_size(dim, degree)
    if n_terms > MAX_BASIS_SIZE:
        raise BasisSizeError(
            f"dictionary with dim={dim}, degree={degree} has {n_terms} terms "
            f"(limit {MAX_BASIS_SIZE})"
        )
    out = [mi for g in range(degree + 1) for mi in _compositions(g, dim)]
    assert len(out) == n_terms
    return out


@dataclass(frozen=True)
class BasisSpec:
    """A concrete polynomial dictionary.

    kind : 'monomial' or 'legendre'
    degree : total degree bound n >= 0
    dim : number of variables d >= 1
    domain : required for the Legendre kind (per-axis affine scaling to its
        bounding box); optional bookkeeping for the monomial kind.
    """

    kind: str
    degree: int
    dim: int
    domain: Optional[Domain] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r} (expected {_KINDS})")
        basis_size(self.dim, self.degree)  # validates dim/degree and the size cap
        if self.kind == "legendre":
            if self.domain is None:
                raise ValueError("legendre basis requires a domain")
            if self.domain.dim != self.dim:
                raise ValueError(
                    f"domain dimension {self.domain.dim} != basis dimension {self.dim}"
                )
        elif self.domain is not None and self.domain.dim != self.dim:
            raise ValueError(
                f"domain dimension {self.domain.dim} != basis dimension {self.dim}"
            )

    @cached_property
    def indices(self) -> list[MultiIndex]:
        return index_set(self.dim, self.degree)

    @cached_property
    def exponents(self) -> np.ndarray:
        """(N, d) int32 exponent array in dictionary order."""
        arr = np.asarray(self.indices, dtype=np.int32).reshape(len(self.indices), self.dim)
        arr.setflags(write=False)
        return arr

    @property
    def size(self) -> int:
        return len(self.indices)

    @cached_property
    def _normfac(self) -> np.ndarray:
        return np.sqrt(2.0 * np.arange(self.degree + 1) + 1.0)

    def serializable(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "dim": self.dim,
            "domain": self.domain.serializable() if self.domain is not None else None,
        }


def _as_points(spec: BasisSpec, x) -> tuple[np.ndarray, bool]:
    pts = np.ascontiguousarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[np.newaxis, :]
    if pts.ndim != 2 or pts.shape[1] != spec.dim:
        raise ValueError(f"expected points of dimension {spec.dim}, got shape {np.shape(x)}")
    return pts, single


def eval_basis(spec: BasisSpec, x) -> np.ndarray:
    """Evaluate all dictionary functions at ``x``.

    ``x`` may be a single point (d,) or a batch (m, d); the result has shape
    (N,) or (m, N) with columns in dictionary order. Points need not lie in
    the domain (polynomials extrapolate).
    """
    pts, single = _as_points(spec, x)
    exps = spec.exponents
    if spec.kind == "monomial":
        out = _kernels.monomial_matrix(pts, exps, spec.degree)
    else:
        lo = spec.domain.lo
        hi = spec.domain.hi
        t = np.ascontiguousarray((2.0 * pts - (lo + hi)) / (hi - lo))
        out = _kernels.legendre_matrix(t, exps, spec._normfac, spec.degree)
    return out[0] if single else out


def kernel_diag(spec: BasisSpec, x) -> np.ndarray | float:
    """Sum of squared orthonormal basis functions at ``x``.

    Defined for the Legendre kind only (it requires an orthonormal
    dictionary); always >= 1 on the domain because the constant function is a
    member. Accepts single points or batches.
    """
    if spec.kind != "legendre":
        raise ValueError("kernel diagonal requires the orthonormal legendre kind")
    phi = eval_basis(spec, x)
    k = np.sum(phi * phi, axis=-1)
    return float(k) if np.ndim(k) == 0 else k


def sup_sqrt_kernel(spec: BasisSpec, samples: int = 10000, seed=0) -> float:
    """Estimate the sup over the domain of sqrt(kernel_diag).

    Takes the max over ``samples`` domain points plus all bounding-box
    corners; for tensorized Legendre dictionaries on a box the maximum is
    attained at a corner, so the corner augmentation makes the estimate exact
    there, while the random samples cover masked domains. Non-decreasing in
    ``samples`` for a fixed seed.
    """
    if spec.kind != "legendre":
        raise ValueError("sup sqrt kernel requires the orthonormal legendre kind")
    pts = spec.domain.corners()
    if samples > 0:
        drawn = sample_initial_states(spec.domain, samples, "uniform", seed)
        pts = np.concatenate([pts, drawn], axis=0)
    return float(np.sqrt(np.max(kernel_diag(spec, pts))))
