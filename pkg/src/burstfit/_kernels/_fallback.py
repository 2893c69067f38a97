"""Pure-numpy backend for the hot kernels.

Mirrors the compiled extension operation for operation (same multiplication
order, same recurrences) so that both backends return bit-identical arrays.
"""

import numpy as np


def monomial_matrix(pts, exps, nmax):
    """Evaluate raw monomials ``x**e`` at many points.

    pts : (m, d) float64, C-contiguous
    exps : (N, d) int32 exponent rows
    nmax : largest single-axis exponent appearing in ``exps``

    Returns the (m, N) matrix with entry [i, j] = prod_k pts[i,k]**exps[j,k].
    """
    m, d = pts.shape
    tables = []
    for ax in range(d):
        tab = np.empty((m, nmax + 1))
        tab[:, 0] = 1.0
        x = pts[:, ax]
        for k in range(1, nmax + 1):
            tab[:, k] = tab[:, k - 1] * x
        tables.append(tab)
    out = tables[0][:, exps[:, 0]]
    for ax in range(1, d):
        out *= tables[ax][:, exps[:, ax]]
    return out


def legendre_matrix(t, exps, normfac, nmax):
    """Evaluate tensorized orthonormal Legendre polynomials.

    t : (m, d) coordinates already mapped affinely to [-1, 1] per axis
    exps : (N, d) int32 per-axis degrees
    normfac : (nmax+1,) normalization factors sqrt(2k+1)
    nmax : largest per-axis degree

    Per axis the classical three-term recurrence is used, then scaled by
    ``normfac`` so each factor has unit norm against the uniform probability
    measure on [-1, 1].
    """
    m, d = t.shape
    tables = []
    for ax in range(d):
        raw = np.empty((m, nmax + 1))
        raw[:, 0] = 1.0
        tt = t[:, ax]
        if nmax >= 1:
            raw[:, 1] = tt
        for k in range(2, nmax + 1):
            a = float(2 * k - 1)
            b = float(k - 1)
            raw[:, k] = ((a * tt) * raw[:, k - 1] - b * raw[:, k - 2]) / float(k)
        tables.append(raw * normfac[np.newaxis, :])
    out = tables[0][:, exps[:, 0]]
    for ax in range(1, d):
        out *= tables[ax][:, exps[:, ax]]
    return out


def sa_block(coeffs, phis, targets, gammas):
    """Run one damped Kaczmarz update per row of ``phis``, in place.

    coeffs : (N, p) running coefficient columns, updated in place
    phis : (m, N) dictionary rows, one per incoming sample
    targets : (m, p) per-sample target values
    gammas : (m,) damping added to the squared row norm
    """
    m = phis.shape[0]
    for s in range(m):
        phi = phis[s]
        nrm = float(phi @ phi)
        resid = targets[s] - coeffs.T @ phi
        coeffs += phi[:, np.newaxis] * (resid / (nrm + gammas[s]))[np.newaxis, :]
