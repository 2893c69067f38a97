"""Validation of learned systems and the a-priori trajectory error bound.

Besides direct trajectory and coefficient comparisons, this module computes
the orthogonal projection of a right-hand side onto the dictionary span and
evaluates the Gronwall-type bound

    |x(t) - u(t)| <= (e^{L (t-t0)} - 1) / L *
                     (sup-norm projection error
                      + l2 fit distance * sup sqrt(kernel diagonal)),

valid while both trajectories stay in the domain; L is a Lipschitz constant
of the true right-hand side there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSpec, eval_basis
from .domain import Domain, contains, sample_initial_states
from .dynamics import DaeSystem, LearnedSystem, OdeSystem, integrate_rk4
from .regression import CoefficientSet

__all__ = [
    "BoundInputs",
    "TrajectoryComparison",
    "CoefficientErrors",
    "trajectory_error",
    "coefficient_error",
    "rhs_error",
    "project",
    "gronwall_bound",
    "lipschitz_constant",
    "sup_norm_error",
    "l2_fit_distance",
    "first_domain_exit",
]


@dataclass(frozen=True)
class BoundInputs:
    """Ingredients of the a-priori trajectory error bound."""

    L_f: float
    proj_sup_err: float
    l2_err: float
    sup_sqrt_K: float
    horizon: float

    def __post_init__(self) -> None:
        for name in ("L_f", "proj_sup_err", "l2_err", "sup_sqrt_K", "horizon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def gronwall_bound(inputs: BoundInputs) -> float:
    """Evaluate the bound; the L -> 0 limit of the growth factor is the horizon."""
    if inputs.L_f == 0.0:
        factor = inputs.horizon
    else:
        factor = math.expm1(inputs.L_f * inputs.horizon) / inputs.L_f
    return factor * (inputs.proj_sup_err + inputs.l2_err * inputs.sup_sqrt_K)


@dataclass
class TrajectoryComparison:
    """Pointwise divergence between true and learned trajectories."""

    times: np.ndarray
    state_error: np.ndarray
    true_states: np.ndarray
    learned_states: np.ndarray
    algebraic_error: Optional[np.ndarray] = None
    true_algebraic: Optional[np.ndarray] = None
    learned_algebraic: Optional[np.ndarray] = None


def trajectory_error(truth, learned: LearnedSystem, u0, dt: float, steps: int,
                     substeps: int = 10) -> TrajectoryComparison:
    """Integrate both systems from the same start with identical settings.

    ``truth`` may be an ordinary or a semi-explicit DAE system; for the
    latter the algebraic tracks y(t) = learned constraint at the learned
    states versus v(t) = true constraint at the true states.
    """
    u0 = np.asarray(u0, dtype=float)
    is_dae = isinstance(truth, DaeSystem)
    ode = truth.reduce() if is_dae else truth
    true_traj = integrate_rk4(ode.rhs, u0, dt, steps, substeps=substeps)
    learned_traj = integrate_rk4(learned.rhs, u0, dt, steps, substeps=substeps)
    times = np.arange(steps + 1) * dt
    err = np.linalg.norm(learned_traj - true_traj, axis=-1)
    cmp = TrajectoryComparison(times=times, state_error=err,
                               true_states=true_traj, learned_states=learned_traj)
    if is_dae and learned.constraint_coeffs is not None:
        v = truth.g(true_traj)
        y = learned.algebraic(learned_traj)
        cmp.true_algebraic = v
        cmp.learned_algebraic = y
        cmp.algebraic_error = np.linalg.norm(y - v, axis=-1)
    return cmp


@dataclass
class CoefficientErrors:
    """Termwise coefficient discrepancies aligned on the learned dictionary."""

    exponents: list
    termwise: np.ndarray
    per_component_l2: np.ndarray

    @property
    def max_termwise(self) -> float:
        return float(np.max(self.termwise)) if self.termwise.size else 0.0


def coefficient_error(learned: CoefficientSet, truth: CoefficientSet) -> CoefficientErrors:
    """Absolute termwise errors |c - c*| aligned by exponent tuple.

    Both sets must share the dictionary kind and dimension (and domain for
    the scaled kind); the truth may have lower degree, in which case its
    missing terms count as zero.
    """
    lb, tb = learned.basis, truth.basis
    if lb.kind != tb.kind or lb.dim != tb.dim:
        raise ValueError("dictionary mismatch between learned and truth")
    if lb.kind == "legendre" and lb.domain != tb.domain:
        raise ValueError("domain mismatch between learned and truth")
    if learned.n_components != truth.n_components:
        raise ValueError("component count mismatch")
    truth_map = {mi: truth.coeffs[i] for i, mi in enumerate(tb.indices)}
    leftovers = set(truth_map) - set(lb.indices)
    if leftovers:
        raise ValueError("truth has terms outside the learned dictionary")
    termwise = np.empty_like(learned.coeffs)
    for j, mi in enumerate(lb.indices):
        ref = truth_map.get(mi, 0.0)
        termwise[j] = np.abs(learned.coeffs[j] - ref)
    return CoefficientErrors(
        exponents=list(lb.indices),
        termwise=termwise,
        per_component_l2=np.linalg.norm(termwise, axis=0),
    )


def rhs_error(learned, truth_rhs: Callable, sample_points) -> float:
    """Relative stacked l2 error of the learned right-hand side on samples."""
    pts = np.asarray(sample_points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("sample points must be a nonempty (m, d) array")
    pred = learned.rhs(pts) if hasattr(learned, "rhs") else learned.evaluate(pts)
    ref = truth_rhs(pts)
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("truth vanishes on every sample point")
    return float(np.linalg.norm(pred - ref) / denom)


def project(truth_fn: Callable, basis: BasisSpec, level: Optional[int] = None,
            mc_samples: int = 10**6, seed: int = 0,
            chunk: int = 20000) -> CoefficientSet:
    """Componentwise orthogonal projection of a function onto the dictionary.

    Inner products are taken against the uniform probability measure on the
    domain's bounding box. Dimensions up to 3 use a tensorized
    Gauss-Legendre rule with at least degree+1 nodes per axis (exact for
    polynomial integrands of the induced degree); higher dimensions fall
    back to seeded Monte Carlo with ``mc_samples`` points.
    """
    if basis.kind != "legendre":
        raise ValueError("projection requires the orthonormal legendre kind")
    dom = basis.domain
    lo, hi = dom.lo, dom.hi
    if basis.dim <= 3:
        level = level if level is not None else basis.degree + 1
        if level < basis.degree + 1:
            raise ValueError(
                f"quadrature level {level} too small for degree {basis.degree}")
        nodes, weights = np.polynomial.legendre.leggauss(level)
        axes_nodes = [0.5 * (lo[i] + hi[i]) + 0.5 * (hi[i] - lo[i]) * nodes
                      for i in range(basis.dim)]
        mesh = np.meshgrid(*axes_nodes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        w_axes = [0.5 * weights for _ in range(basis.dim)]
        wmesh = np.meshgrid(*w_axes, indexing="ij")
        w = np.ones(len(pts))
        for m in wmesh:
            w = w * m.ravel()
        phi = eval_basis(basis, pts)
        vals = np.atleast_2d(np.asarray(truth_fn(pts), dtype=float))
        if vals.shape[0] != len(pts):
            vals = vals.T
        coeffs = phi.T @ (w[:, np.newaxis] * vals)
        return CoefficientSet(basis=basis, coeffs=coeffs,
                              diagnostics={"method": "gauss", "level": level})
    rng_seed = seed
    acc = None
    done = 0
    idx = 0
    while done < mc_samples:
        take = min(chunk, mc_samples - done)
        pts = sample_initial_states(
            Domain(dom.bounds), take, "uniform",
            np.random.SeedSequence([rng_seed, idx]))
        phi = eval_basis(basis, pts)
        vals = np.asarray(truth_fn(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, np.newaxis]
        part = phi.T @ vals
        acc = part if acc is None else acc + part
        done += take
        idx += 1
    coeffs = acc / mc_samples
    return CoefficientSet(basis=basis, coeffs=coeffs,
                          diagnostics={"method": "monte-carlo", "samples": mc_samples})


def lipschitz_constant(system: OdeSystem, samples: int = 10**5, seed: int = 0,
                       domain: Optional[Domain] = None, fd_step: float = 1e-6) -> float:
    """Largest sampled spectral norm of the Jacobian over the domain.

    Uses the analytic Jacobian when the system carries one, otherwise central
    finite differences. For convex domains this estimates the best Lipschitz
    constant of the right-hand side in the Euclidean norm.
    """
    dom = domain if domain is not None else system.domain
    pts = sample_initial_states(dom, samples, "uniform", seed)
    pts = np.concatenate([pts, dom.corners()], axis=0)
    if system.jac is not None:
        J = system.jac(pts)
    else:
        d = system.d
        J = np.empty((len(pts), d, d))
        for k in range(d):
            h = np.zeros(d)
            h[k] = fd_step
            J[:, :, k] = (system.rhs(pts + h) - system.rhs(pts - h)) / (2 * fd_step)
    norms = np.linalg.svd(J, compute_uv=False)[..., 0]
    return float(np.max(norms))


def sup_norm_error(fn_a: Callable, fn_b: Callable, domain: Domain,
                   samples: int = 10**4, seed: int = 0) -> float:
    """Sampled sup over the domain of the pointwise l2 distance of two fields.

    Samples are augmented with the bounding-box corners, where polynomial
    discrepancies on a box tend to peak.
    """
    pts = sample_initial_states(domain, samples, "uniform", seed)
    pts = np.concatenate([pts, domain.corners()], axis=0)
    if domain.masked:
        pts = pts[np.asarray(contains(domain, pts), dtype=bool)]
    diff = np.asarray(fn_a(pts), dtype=float) - np.asarray(fn_b(pts), dtype=float)
    if diff.ndim == 1:
        diff = diff[:, np.newaxis]
    return float(np.max(np.linalg.norm(diff, axis=1)))


def l2_fit_distance(a: CoefficientSet, b: CoefficientSet) -> float:
    """Exact L2(omega) distance of two expansions on one orthonormal dictionary.

    By orthonormality this is just the Frobenius norm of the coefficient
    difference (all components stacked).
    """
    if a.basis != b.basis:
        raise ValueError("coefficient sets live on different dictionaries")
    if a.basis.kind != "legendre":
        raise ValueError("exact L2 distances need the orthonormal kind")
    return float(np.linalg.norm(a.coeffs - b.coeffs))


def first_domain_exit(trajectory: np.ndarray, domain: Domain) -> int:
    """Index of the first state outside the domain; len(trajectory) if none."""
    inside = np.asarray(contains(domain, trajectory), dtype=bool)
    bad = np.nonzero(~inside)[0]
    return int(bad[0]) if len(bad) else len(trajectory)
