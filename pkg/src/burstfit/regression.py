"""Dictionary regression: assemble the design matrix and fit coefficients.

The fitting problem is componentwise: for each target column, find
coefficients c minimizing ||A c - b|| in the chosen norm, where row i of A
holds the dictionary evaluated at the i-th sample state. Three solvers are
provided: plain least squares (rank-revealing, minimum-norm on rank
deficiency), least absolute deviation via iteratively reweighted least
squares, and an l1-penalized least squares solved by cyclic coordinate
descent. A linear-programming reference for the LAD problem is included for
test-scale cross-checks.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .basis import BasisSpec, eval_basis
from .domain import Domain

__all__ = [
    "ModelMatrix",
    "CoefficientSet",
    "assemble",
    "fit_l2",
    "fit_l1",
    "fit_lasso",
    "fit_constraint_map",
    "lad_linprog",
    "coefficients_from_terms",
    "save_coefficients",
    "load_coefficients",
]

# Relative singular-value cutoff for rank decisions.
RANK_CUTOFF = 1e-12

# Smoothing for the LAD objective sum(sqrt(r^2 + eps^2)).
LAD_SMOOTHING = 1e-8


@dataclass(frozen=True)
class ModelMatrix:
    """Design matrix A (rows = dictionary at sample states) and targets."""

    A: np.ndarray
    xdot: np.ndarray
    basis: BasisSpec

    def __post_init__(self) -> None:
        if self.A.ndim != 2 or self.xdot.ndim != 2:
            raise ValueError("A and xdot must be 2-D")
        if self.A.shape[0] != self.xdot.shape[0]:
            raise ValueError("A and xdot must have the same number of rows")
        if self.A.shape[1] != self.basis.size:
            raise ValueError("column count does not match dictionary size")
        if not (np.isfinite(self.A).all() and np.isfinite(self.xdot).all()):
            raise ValueError("non-finite entries in the regression data")


@dataclass
class CoefficientSet:
    """N x p coefficient matrix over a dictionary, plus fit diagnostics."""

    basis: BasisSpec
    coeffs: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim == 1:
            self.coeffs = self.coeffs[:, np.newaxis]
        if self.coeffs.shape[0] != self.basis.size:
            raise ValueError(
                f"coefficient rows {self.coeffs.shape[0]} != dictionary size {self.basis.size}"
            )
        if not np.isfinite(self.coeffs).all():
            raise ValueError("non-finite coefficients")

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the fitted expansion at a point (d,) or batch (m, d)."""
        phi = eval_basis(self.basis, x)
        return phi @ self.coeffs


def assemble(pairings: Sequence, basis: BasisSpec) -> ModelMatrix:
    """Build the design matrix and stacked derivative targets from pairings.

    Row order follows the input order. Each pairing must expose ``x`` and
    ``xdot`` attributes of dimension matching the dictionary.
    """
    if len(pairings) == 0:
        raise ValueError("no pairings supplied")
    X = np.asarray([p.x for p in pairings], dtype=float)
    Xdot = np.asarray([p.xdot for p in pairings], dtype=float)
    if X.shape[1] != basis.dim:
        raise ValueError(f"pairing dimension {X.shape[1]} != dictionary dimension {basis.dim}")
    A = eval_basis(basis, X)
    return ModelMatrix(A=A, xdot=Xdot, basis=basis)


def _svd_solve(A: np.ndarray, B: np.ndarray):
    """Minimum-norm least-squares solution of A C = B via SVD."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = s[0] if len(s) else 0.0
    keep = s > RANK_CUTOFF * smax
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    C = Vt.T @ (inv[:, np.newaxis] * (U.T @ B))
    return C, s, int(np.count_nonzero(keep))


def fit_l2(mm: ModelMatrix) -> CoefficientSet:
    """Least-squares fit of every target column.

    Uses a singular value decomposition with relative cutoff ``RANK_CUTOFF``;
    rank-deficient systems get the minimum-norm solution. Diagnostics record
    the singular-value range, the rank, and per-column residual norms.
    """
    C, s, rank = _svd_solve(mm.A, mm.xdot)
    resid = mm.A @ C - mm.xdot
    diags = {
        "solver": "l2",
        "rank": rank,
        "sigma_max": float(s[0]) if len(s) else 0.0,
        "sigma_min": float(s[-1]) if len(s) else 0.0,
        "residual_norms": [float(v) for v in np.linalg.norm(resid, axis=0)],
    }
    return CoefficientSet(basis=mm.basis, coeffs=C, diagnostics=diags)


def _lad_objective(r: np.ndarray, eps: float) -> float:
    return float(np.sum(np.sqrt(r * r + eps * eps)))


# Candidate active sets tried by the vertex polish are capped so the
# combinatorial search only runs on small dictionaries.
_POLISH_POOL_EXTRA = 4
_POLISH_SUBSET_CAP = 2048


def _polish_lad(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Refine an approximate LAD solution by solving candidate active sets.

    A LAD optimum generically interpolates as many rows as there are
    unknowns; the rows with the smallest residuals at the smoothed solution
    identify candidates. Each candidate square system is solved exactly and
    kept only if it lowers the true l1 objective, so this step never hurts.
    """
    m, n = A.shape
    if m <= n:
        return c
    best = c
    best_obj = float(np.sum(np.abs(A @ c - b)))
    pool_size = min(m, n + _POLISH_POOL_EXTRA)
    if math.comb(pool_size, n) <= _POLISH_SUBSET_CAP:
        def candidates(pool):
            return itertools.combinations(pool, n)
    else:
        def candidates(pool):
            return [tuple(pool[:n])]
    for _ in range(3):
        r = np.abs(A @ best - b)
        pool = list(np.argsort(r)[:pool_size])
        improved = False
        for subset in candidates(pool):
            rows = list(subset)
            cand, _, _ = _svd_solve(A[rows], b[rows][:, np.newaxis])
            cand = cand[:, 0]
            obj = float(np.sum(np.abs(A @ cand - b)))
            if obj < best_obj * (1.0 - 1e-15):
                best, best_obj = cand, obj
                improved = True
        if not improved:
            break
    return best


def fit_l1(mm: ModelMatrix, *, smoothing: float = LAD_SMOOTHING,
           max_iter: int = 200, tol: float = 1e-12,
           polish: bool = True) -> CoefficientSet:
    """Least-absolute-deviation fit by iteratively reweighted least squares.

    Minimizes the smoothed objective sum(sqrt(r^2 + smoothing^2)) per column;
    the reweighting is a majorize-minimize step so the smoothed objective
    never increases. Stops on objective stagnation below ``tol`` (relative)
    or ``max_iter``. A final vertex polish (see :func:`_polish_lad`) snaps
    small instances onto the exact l1 optimum.
    """
    A = mm.A
    n_cols = mm.xdot.shape[1]
    C = np.empty((A.shape[1], n_cols))
    iters, objectives, gaps, converged = [], [], [], []
    for l in range(n_cols):
        b = mm.xdot[:, l]
        c, _, _ = _svd_solve(A, b[:, np.newaxis])
        c = c[:, 0]
        obj = _lad_objective(A @ c - b, smoothing)
        it = 0
        delta = np.inf
        while it < max_iter:
            it += 1
            r = A @ c - b
            # square roots of the majorizer weights 1/sqrt(r^2 + eps^2)
            sw = (r * r + smoothing * smoothing) ** -0.25
            cw, _, _ = _svd_solve(A * sw[:, np.newaxis], (sw * b)[:, np.newaxis])
            c_new = cw[:, 0]
            obj_new = _lad_objective(A @ c_new - b, smoothing)
            delta = obj - obj_new
            c = c_new
            obj = obj_new
            if abs(delta) <= tol * max(1.0, obj):
                break
        if polish:
            c = _polish_lad(A, b, c)
        C[:, l] = c
        iters.append(it)
        objectives.append(float(np.sum(np.abs(A @ c - b))))
        gaps.append(float(delta))
        converged.append(bool(abs(delta) <= tol * max(1.0, obj)))
    diags = {
        "solver": "l1",
        "iterations": iters,
        "objectives": objectives,
        "last_objective_decrease": gaps,
        "converged": converged,
    }
    return CoefficientSet(basis=mm.basis, coeffs=C, diagnostics=diags)


def fit_lasso(mm: ModelMatrix, lam: float, *, tol: float = 1e-8,
              max_sweeps: int = 10000) -> CoefficientSet:
    """l1-penalized least squares: minimize 0.5 ||Ac - b||^2 + lam ||c||_1.

    Cyclic coordinate descent with soft thresholding; convergence is
    certified by the duality gap (scaled by max(1, ||b||^2)). With lam = 0
    the stopping rule falls back to the gradient norm.
    """
    if lam < 0:
        raise ValueError("penalty must be >= 0")
    A = mm.A
    col_sq = np.einsum("ij,ij->j", A, A)
    n_cols = mm.xdot.shape[1]
    C = np.zeros((A.shape[1], n_cols))
    sweeps_used, final_gaps = [], []
    for l in range(n_cols):
        b = mm.xdot[:, l]
        c = np.zeros(A.shape[1])
        r = b.copy()
        scale = max(1.0, float(b @ b))
        gap = np.inf
        sweeps = 0
        while sweeps < max_sweeps:
            sweeps += 1
            for j in range(A.shape[1]):
                if col_sq[j] == 0.0:
                    continue
                aj = A[:, j]
                cj_old = c[j]
                rho = aj @ r + col_sq[j] * cj_old
                if lam > 0:
                    c[j] = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
                else:
                    c[j] = rho / col_sq[j]
                if c[j] != cj_old:
                    r -= (c[j] - cj_old) * aj
            if lam > 0:
                corr = np.abs(A.T @ r).max() if A.size else 0.0
                const = min(1.0, lam / corr) if corr > lam else 1.0
                gap = (
                    0.5 * float(r @ r) * (1.0 + const * const)
                    + lam * float(np.sum(np.abs(c)))
                    - const * float(r @ b)
                )
                if gap <= tol * scale:
                    break
            else:
                gap = float(np.abs(A.T @ r).max())
                if gap <= tol * scale:
                    break
        C[:, l] = c
        sweeps_used.append(sweeps)
        final_gaps.append(float(gap))
    diags = {"solver": "lasso", "lambda": float(lam), "sweeps": sweeps_used,
             "duality_gaps": final_gaps}
    return CoefficientSet(basis=mm.basis, coeffs=C, diagnostics=diags)


def fit_constraint_map(u_samples, v_samples, basis: BasisSpec,
                       solver: str = "l2", **opts) -> CoefficientSet:
    """Regress algebraic components on the dictionary of the state samples.

    ``u_samples`` is (m, d), ``v_samples`` is (m,) or (m, d_v). The selected
    solver ('l2' or 'l1') is applied columnwise, producing the coefficient
    set of the learned constraint map.
    """
    U = np.asarray(u_samples, dtype=float)
    V = np.asarray(v_samples, dtype=float)
    if V.ndim == 1:
        V = V[:, np.newaxis]
    if U.shape[0] != V.shape[0]:
        raise ValueError("state and algebraic sample counts differ")
    mm = ModelMatrix(A=eval_basis(basis, U), xdot=V, basis=basis)
    if solver == "l2":
        return fit_l2(mm)
    if solver == "l1":
        return fit_l1(mm, **opts)
    raise ValueError(f"unsupported constraint solver {solver!r}")


def lad_linprog(A: np.ndarray, b: np.ndarray):
    """Exact least-absolute-deviation reference via linear programming.

    min 1's  s.t.  -s <= Ac - b <= s. Intended for small test instances;
    returns (coefficients, objective).
    """
    m, n = A.shape
    c_obj = np.concatenate([np.zeros(n), np.ones(m)])
    A_ub = np.block([[A, -np.eye(m)], [-A, -np.eye(m)]])
    b_ub = np.concatenate([b, -b])
    bounds = [(None, None)] * n + [(0, None)] * m
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"LP reference failed: {res.message}")
    return res.x[:n], float(res.fun)


def coefficients_from_terms(terms, spec: BasisSpec) -> CoefficientSet:
    """Materialize sparse (exponents, values) terms onto a monomial dictionary.

    ``terms`` is an iterable of (exponent_tuple, value_tuple) pairs. Raises
    if the dictionary kind is not monomial or a term does not fit.
    """
    if spec.kind != "monomial":
        raise ValueError("sparse terms expand onto the monomial kind only")
    lookup = {mi: i for i, mi in enumerate(spec.indices)}
    terms = list(terms)
    if not terms:
        raise ValueError("no terms given")
    p = len(terms[0][1])
    C = np.zeros((spec.size, p))
    for exps, values in terms:
        key = tuple(int(e) for e in exps)
        if key not in lookup:
            raise ValueError(f"term {key} outside dictionary of degree {spec.degree}")
        C[lookup[key], :] = values
    return CoefficientSet(basis=spec, coeffs=C)


_COEFF_FORMAT = "burstfit-coefficients v1"


def save_coefficients(cs: CoefficientSet, path) -> None:
    """Write a coefficient set as self-describing JSON (one term per entry)."""
    payload = {
        "format": _COEFF_FORMAT,
        "basis": cs.basis.serializable(),
        "terms": [
            {"exponents": [int(e) for e in cs.basis.indices[j]],
             "values": [float(v) for v in cs.coeffs[j]]}
            for j in range(cs.basis.size)
        ],
        "diagnostics": cs.diagnostics,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_coefficients(path) -> CoefficientSet:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != _COEFF_FORMAT:
        raise ValueError(f"unsupported coefficient file format {payload.get('format')!r}")
    meta = payload["basis"]
    dom = None
    if meta.get("domain") is not None:
        dmeta = meta["domain"]
        mask = dmeta.get("mask")
        if mask == "custom":
            raise ValueError("cannot reload a custom (non-preset) domain mask")
        dom = Domain(bounds=tuple(tuple(b) for b in dmeta["bounds"]), mask=mask)
    spec = BasisSpec(kind=meta["kind"], degree=meta["degree"], dim=meta["dim"], domain=dom)
    C = np.zeros((spec.size, len(payload["terms"][0]["values"])))
    lookup = {mi: i for i, mi in enumerate(spec.indices)}
    for term in payload["terms"]:
        key = tuple(int(e) for e in term["exponents"])
        C[lookup[key], :] = term["values"]
    return CoefficientSet(basis=spec, coeffs=C, diagnostics=payload.get("diagnostics", {}))
