"""True systems (ODE and reduced DAE), integration, and learned systems.

All right-hand sides are vectorized: they accept a state array of shape
(..., d) and return the same shape, so whole batches of trajectories can be
advanced together. Semi-explicit index-1 DAEs are carried as a differential
part F(u, v) plus an explicit constraint solve v = g(u); the reduced system
u' = F(u, g(u)) is an ordinary autonomous system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from .basis import BasisSpec
from .domain import Domain
from .regression import CoefficientSet, coefficients_from_terms

__all__ = [
    "OdeSystem",
    "DaeSystem",
    "LearnedSystem",
    "IntegrationBlowUpError",
    "integrate_rk4",
    "builtin_system",
    "catalog_names",
    "catalog_manifest",
    "eval_learned",
    "solve_scalar_constraint",
]


class IntegrationBlowUpError(RuntimeError):
    """A trajectory left the representable range (non-finite state)."""

    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class OdeSystem:
    """An autonomous system u' = f(u) with optional exact metadata."""

    name: str
    d: int
    rhs: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    dt: float = 0.005
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    true_terms: Optional[tuple] = None
    lipschitz_hint: Optional[float] = None
    params: dict = field(default_factory=dict)

    @property
    def true_coefficients(self) -> Optional[CoefficientSet]:
        """Exact expansion on the natural monomial dictionary, if polynomial."""
        if self.true_terms is None:
            return None
        degree = max(sum(exps) for exps, _ in self.true_terms)
        spec = BasisSpec("monomial", degree, self.d, self.domain)
        return coefficients_from_terms(self.true_terms, spec)


@dataclass(frozen=True)
class DaeSystem:
    """Semi-explicit index-1 DAE: u' = F(u, v), v = g(u)."""

    name: str
    d_u: int
    d_v: int
    F: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    constraint: Callable[[np.ndarray, np.ndarray], np.ndarray]
    domain: Domain
    dt: float = 0.005
    params: dict = field(default_factory=dict)

    def reduce(self) -> OdeSystem:
        """The equivalent ordinary system u' = F(u, g(u))."""
        def rhs(u: np.ndarray) -> np.ndarray:
            return self.F(u, self.g(u))

        return OdeSystem(name=self.name, d=self.d_u, rhs=rhs,
                         domain=self.domain, dt=self.dt, params=self.params)


@dataclass
class LearnedSystem:
    """A recovered system: dictionary expansion of the right-hand side,
    plus an optional expansion of the algebraic constraint map."""

    basis: BasisSpec
    coeffs: CoefficientSet
    constraint_coeffs: Optional[CoefficientSet] = None

    def __post_init__(self) -> None:
        if self.coeffs.basis.size != self.basis.size:
            raise ValueError("coefficient rows do not match dictionary size")
        if (self.constraint_coeffs is not None
                and self.constraint_coeffs.basis.size != self.basis.size):
            raise ValueError("constraint coefficient rows do not match dictionary size")

    @property
    def d(self) -> int:
        return self.basis.dim

    def rhs(self, x) -> np.ndarray:
        return self.coeffs.evaluate(x)

    def algebraic(self, x) -> np.ndarray:
        if self.constraint_coeffs is None:
            raise ValueError("this learned system has no constraint map")
        return self.constraint_coeffs.evaluate(x)


def eval_learned(learned: LearnedSystem, x):
    """Evaluate the learned right-hand side (and constraint map if present).

    Returns f(x), or a tuple (f(x), y(x)) when a constraint map exists.
    """
    f = learned.rhs(x)
    if learned.constraint_coeffs is None:
        return f
    return f, learned.algebraic(x)


def integrate_rk4(rhs, u0, dt: float, steps: int, substeps: int = 1,
                  check: bool = True) -> np.ndarray:
    """Fixed-step classical Runge-Kutta integration of u' = rhs(u).

    Produces ``steps + 1`` states at spacing ``dt``, each output interval
    advanced with ``substeps`` internal stages (local error per internal step
    is fifth order in dt/substeps). ``u0`` may be a single state (d,) or a
    batch (m, d); the trajectory gains a leading time axis. With ``check``
    a non-finite state raises :class:`IntegrationBlowUpError` with the output
    step index reached.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    u = np.array(u0, dtype=float)
    traj = np.empty((steps + 1,) + u.shape)
    traj[0] = u
    h = dt / substeps
    for j in range(1, steps + 1):
        for _ in range(substeps):
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * h * k1)
            k3 = rhs(u + 0.5 * h * k2)
            k4 = rhs(u + h * k3)
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if check and not np.isfinite(u).all():
            raise IntegrationBlowUpError(
                j, f"non-finite state at output step {j} of {steps}")
        traj[j] = u
    return traj


def solve_scalar_constraint(residual, lo, hi, tol: float = 1e-13,
                            max_iter: int = 200) -> np.ndarray:
    """Vectorized safeguarded Newton for a scalar constraint per sample.

    ``residual(v)`` returns (value, derivative) elementwise; ``lo``/``hi``
    must bracket a root of the (monotone) residual for every sample. Newton
    steps falling outside the current bracket are replaced by bisection.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo, _ = residual(lo)
    fhi, _ = residual(hi)
    if np.any(flo * fhi > 0):
        raise ValueError("constraint root not bracketed")
    v = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, fp = residual(v)
        done = np.abs(f) <= tol
        if done.all():
            break
        pos = f > 0
        hi = np.where(pos, v, hi)
        lo = np.where(pos, lo, v)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = v - f / fp
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        v = np.where(bad, 0.5 * (lo + hi), newton)
    else:
        f, _ = residual(v)
        if np.any(np.abs(f) > 1e3 * tol):
            raise RuntimeError("constraint solve did not converge")
    return v


# --------------------------------------------------------------------------
# Builtin catalog
# --------------------------------------------------------------------------

def _linear2d(name, a11, a12, b1, a21, a22, b2, domain, **kw):
    A = np.array([[a11, a12], [a21, a22]])
    b = np.array([b1, b2])

    def rhs(u):
        return u @ A.T + b

    def jac(u):
        shape = np.shape(u)[:-1]
        return np.broadcast_to(A, shape + (2, 2)).copy()

    terms = (
        ((0, 0), (b1, b2)),
        ((1, 0), (a11, a21)),
        ((0, 1), (a12, a22)),
    )
    return OdeSystem(name=name, d=2, rhs=rhs, jac=jac, domain=domain,
                     true_terms=terms,
                     lipschitz_hint=float(np.linalg.norm(A, 2)), **kw)


def _make_saddle():
    return _linear2d("saddle", 1, 1, -2, 1, -1, 0,
                     Domain(((0.0, 2.0), (0.0, 2.0))))


def _make_improper_node():
    return _linear2d("improper-node", 1, -4, 0, 4, -7, 0,
                     Domain(((-1.0, 1.0), (-1.0, 1.0))))


def _make_star():
    return _linear2d("star", -1, 0, 0, 0, -1, 0,
                     Domain(((-1.0, 1.0), (-1.0, 1.0))))


def _make_nodal_sink():
    return _linear2d("nodal-sink", -2, 1, -2, 1, -2, 1,
                     Domain(((-2.0, 0.0), (-1.0, 1.0)), mask="halfplane(-1,1,0)"))


def _make_center():
    return _linear2d("center", 1, 2, 0, -5, -1, 0,
                     Domain(((-1.0, 1.0), (-1.0, 1.0))))


def _make_spiral():
    return _linear2d("spiral", -1, -1, -1, 2, -1, 5,
                     Domain(((-3.0, -1.0), (0.0, 2.0)), mask="ball(-2,1,1)"))


def _make_duffing():
    eps = 1e-4

    def rhs(u):
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u2, -u1 - eps * u1**3], axis=-1)

    def jac(u):
        u1 = u[..., 0]
        z = np.zeros_like(u1)
        row1 = np.stack([z, np.ones_like(u1)], axis=-1)
        row2 = np.stack([-1.0 - 3.0 * eps * u1**2, z], axis=-1)
        return np.stack([row1, row2], axis=-2)

    terms = (
        ((1, 0), (0.0, -1.0)),
        ((0, 1), (1.0, 0.0)),
        ((3, 0), (0.0, -eps)),
    )
    return OdeSystem(name="duffing", d=2, rhs=rhs, jac=jac,
                     domain=Domain(((0.0, 2.0), (-1.0, 1.0))),
                     true_terms=terms, params={"epsilon": eps})


def _make_competing_species():
    def rhs(u):
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u1 * (1.0 - u1 - u2),
                         u2 * (0.5 - 0.25 * u2 - 0.75 * u1)], axis=-1)

    def jac(u):
        u1, u2 = u[..., 0], u[..., 1]
        row1 = np.stack([1.0 - 2.0 * u1 - u2, -u1], axis=-1)
        row2 = np.stack([-0.75 * u2, 0.5 - 0.5 * u2 - 0.75 * u1], axis=-1)
        return np.stack([row1, row2], axis=-2)

    terms = (
        ((1, 0), (1.0, 0.0)),
        ((0, 1), (0.0, 0.5)),
        ((2, 0), (-1.0, 0.0)),
        ((1, 1), (-1.0, -0.75)),
        ((0, 2), (0.0, -0.25)),
    )
    return OdeSystem(name="competing-species", d=2, rhs=rhs, jac=jac,
                     domain=Domain(((-1.0, 2.0), (-0.5, 3.0))),
                     true_terms=terms)


def _make_limit_cycle():
    def rhs(u):
        u1, u2 = u[..., 0], u[..., 1]
        r = u1 * u1 + u2 * u2 - 1.0
        return np.stack([u2 - u1 * r, -u1 - u2 * r], axis=-1)

    def jac(u):
        u1, u2 = u[..., 0], u[..., 1]
        r = u1 * u1 + u2 * u2 - 1.0
        row1 = np.stack([-r - 2.0 * u1 * u1, 1.0 - 2.0 * u1 * u2], axis=-1)
        row2 = np.stack([-1.0 - 2.0 * u1 * u2, -r - 2.0 * u2 * u2], axis=-1)
        return np.stack([row1, row2], axis=-2)

    terms = (
        ((1, 0), (1.0, -1.0)),
        ((0, 1), (1.0, 1.0)),
        ((3, 0), (-1.0, 0.0)),
        ((2, 1), (0.0, -1.0)),
        ((1, 2), (-1.0, 0.0)),
        ((0, 3), (0.0, -1.0)),
    )
    return OdeSystem(name="limit-cycle", d=2, rhs=rhs, jac=jac,
                     domain=Domain(((-2.0, 2.0), (-2.0, 2.0)), mask="annulus(0,0,1)"),
                     true_terms=terms)


def _make_pendulum():
    length = 1.1
    damping = 0.22
    gravity = 9.8

    def rhs(u):
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u2, -(gravity / length) * np.sin(u1)
                         - (damping / length) * u2], axis=-1)

    def jac(u):
        u1 = u[..., 0]
        z = np.zeros_like(u1)
        row1 = np.stack([z, np.ones_like(u1)], axis=-1)
        row2 = np.stack([-(gravity / length) * np.cos(u1),
                         np.full_like(u1, -damping / length)], axis=-1)
        return np.stack([row1, row2], axis=-2)

    return OdeSystem(name="pendulum", d=2, rhs=rhs, jac=jac,
                     domain=Domain(((-math.pi, math.pi),
                                    (-2.0 * math.pi, 2.0 * math.pi))),
                     params={"length": length, "damping": damping,
                             "gravity": gravity})


def _make_network():
    C = 1e-9
    L = 1e-6
    U0 = 1.0
    G0 = -0.1
    Ginf = 0.25

    def v1_of(u1):
        # v1 - (G0 - Ginf) U0 tanh(u1/U0) - Ginf u1 = 0, linear in v1:
        # one safeguarded Newton step lands on the root exactly.
        target = (G0 - Ginf) * U0 * np.tanh(u1 / U0) + Ginf * u1

        def residual(v):
            return v - target, np.ones_like(v)

        span = np.abs(target) + 1.0
        return solve_scalar_constraint(residual, target - span, target + span)

    def g(u):
        u1, u2 = u[..., 0], u[..., 1]
        v1 = v1_of(u1)
        v2 = -u2 - v1
        return np.stack([v1, v2], axis=-1)

    def F(u, v):
        u1 = u[..., 0]
        v2 = v[..., 1]
        return np.stack([v2 / C, u1 / L], axis=-1)

    def constraint(u, v):
        u1, u2 = u[..., 0], u[..., 1]
        v1, v2 = v[..., 0], v[..., 1]
        r1 = v1 - (G0 - Ginf) * U0 * np.tanh(u1 / U0) - Ginf * u1
        r2 = v2 + u2 + v1
        return np.stack([r1, r2], axis=-1)

    return DaeSystem(name="network", d_u=2, d_v=2, F=F, g=g,
                     constraint=constraint,
                     domain=Domain(((-2.0, 2.0), (-0.2, 0.2))), dt=1e-9,
                     params={"C": C, "L": L, "U0": U0, "G0": G0, "Ginf": Ginf})


def _make_toggle():
    alpha1 = 156.25
    alpha2 = 15.6
    beta = 2.5
    gamma = 1.0
    eta = 2.0015
    iptg = 1e-5
    K = 2.9618e-5
    eps = 0.01
    damp = (1.0 + iptg / K) ** eta

    def v1_of(u1):
        target = u1 / damp

        def residual(v):
            return v + eps * np.sin(v) - target, 1.0 + eps * np.cos(v)

        pad = eps + 1.0
        return solve_scalar_constraint(residual, target - pad, target + pad)

    def g(u):
        return v1_of(u[..., 0])[..., np.newaxis]

    def F(u, v):
        u1, u2 = u[..., 0], u[..., 1]
        v1 = v[..., 0]
        return np.stack([alpha1 / (1.0 + u2**beta) - u1,
                         alpha2 / (1.0 + v1**gamma) - u2], axis=-1)

    def constraint(u, v):
        u1 = u[..., 0]
        v1 = v[..., 0]
        return (v1 + eps * np.sin(v1) - u1 / damp)[..., np.newaxis]

    return DaeSystem(name="toggle", d_u=2, d_v=1, F=F, g=g,
                     constraint=constraint,
                     domain=Domain(((0.0, 20.0), (0.0, 20.0))), dt=0.005,
                     params={"alpha1": alpha1, "alpha2": alpha2, "beta": beta,
                             "gamma": gamma, "eta": eta, "IPTG": iptg,
                             "K": K, "epsilon": eps})


def _make_reactor():
    k1 = 25.1911
    k2 = 43.1042
    k3 = 30.0
    km1 = 1.1904e5
    km3 = 0.5 * km1
    K1 = 2.575e-2
    K2 = 4.876
    K3 = 1.7884e-2
    Q = 0.0131

    def v1_of(u):
        u1, u3, u5, u6 = u[..., 0], u[..., 2], u[..., 4], u[..., 5]

        def residual(v):
            f = (Q - u6 + v
                 - K2 * u1 / (K2 + v)
                 - K3 * u3 / (K3 + v)
                 - K1 * u5 / (K1 + v))
            fp = (1.0
                  + K2 * u1 / (K2 + v) ** 2
                  + K3 * u3 / (K3 + v) ** 2
                  + K1 * u5 / (K1 + v) ** 2)
            return f, fp

        lo = np.zeros_like(u1)
        flo, _ = residual(lo)
        # A negative root can only occur when the dissolved species are
        # nearly absent; back off toward the nearest pole in that case.
        lo = np.where(flo > 0, -0.99 * min(K1, K2, K3), lo)
        hi = u1 + u3 + u5 + u6 + Q + 1.0
        return solve_scalar_constraint(residual, lo, hi)

    def g(u):
        v1 = v1_of(u)
        v2 = K2 * u[..., 0] / (K2 + v1)
        v3 = K3 * u[..., 2] / (K3 + v1)
        v4 = K1 * u[..., 4] / (K1 + v1)
        return np.stack([v1, v2, v3, v4], axis=-1)

    def F(u, v):
        u2, u4, u6 = u[..., 1], u[..., 3], u[..., 5]
        v2, v3, v4 = v[..., 1], v[..., 2], v[..., 3]
        r1 = k1 * u2 * u6 - km1 * v4
        r2 = k2 * u2 * v2
        r3 = k3 * u4 * u6 - km3 * v3
        du1 = -r2
        du2 = -r1 - r2
        du3 = r2 + r3
        du4 = -r3
        du5 = r1
        du6 = -r1 - r3
        return np.stack([du1, du2, du3, du4, du5, du6], axis=-1)

    def constraint(u, v):
        u1, u3, u5, u6 = u[..., 0], u[..., 2], u[..., 4], u[..., 5]
        v1, v2, v3, v4 = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
        r1 = Q - u6 + v1 - v2 - v3 - v4
        r2 = v2 - K2 * u1 / (K2 + v1)
        r3 = v3 - K3 * u3 / (K3 + v1)
        r4 = v4 - K1 * u5 / (K1 + v1)
        return np.stack([r1, r2, r3, r4], axis=-1)

    return DaeSystem(
        name="reactor", d_u=6, d_v=4, F=F, g=g, constraint=constraint,
        domain=Domain(((0.6, 1.6), (6.5, 8.5), (0.0, 0.7), (0.0, 0.3),
                       (0.0, 0.3), (0.0, 0.02))),
        dt=1e-4,
        params={"k1": k1, "k2": k2, "k3": k3, "km1": km1, "km3": km3,
                "K1": K1, "K2": K2, "K3": K3, "Q": Q})


_CATALOG = {
    "saddle": _make_saddle,
    "improper-node": _make_improper_node,
    "star": _make_star,
    "nodal-sink": _make_nodal_sink,
    "center": _make_center,
    "spiral": _make_spiral,
    "duffing": _make_duffing,
    "competing-species": _make_competing_species,
    "limit-cycle": _make_limit_cycle,
    "pendulum": _make_pendulum,
    "network": _make_network,
    "toggle": _make_toggle,
    "reactor": _make_reactor,
}


def catalog_names() -> list[str]:
    return sorted(_CATALOG)


def builtin_system(name: str):
    """Look up a builtin system by name; lists the catalog on a miss."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown system {name!r}; available: {', '.join(catalog_names())}"
        ) from None
    return factory()


def catalog_manifest() -> dict:
    """The machine-readable catalog manifest shipped with the package."""
    with resources.files("burstfit").joinpath("catalog.json").open() as fh:
        return json.load(fh)
