"""Vectorized numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels_numba`` with an
identical signature; ``mifm.kernels`` picks one at import time.
"""
import numpy as np


def _step_probs(alpha, g1, g2, i):
    # inclusion/exclusion at process step i for m_prev = 0..i-1
    m = np.arange(i, dtype=np.float64)
    den = i - 1 + g1 + g2
    incl = (alpha * m + (1.0 - alpha) * (i - 1 - m) + g1) / den
    excl = ((1.0 - alpha) * m + alpha * (i - 1 - m) + g2) / den
    return incl, excl


def depth_dp_packed(alpha, g1, g2, D):
    """All rows of the depth pmf, packed row-major: row i starts at i*(i+1)/2."""
    out = np.zeros((D + 1) * (D + 2) // 2)
    out[0] = 1.0
    prev = np.ones(1)
    for i in range(1, D + 1):
        incl, excl = _step_probs(alpha, g1, g2, i)
        row = np.zeros(i + 1)
        row[:i] += prev * excl
        row[1:] += prev * incl
        start = i * (i + 1) // 2
        out[start:start + i + 1] = row
        prev = row
    return out


def depth_dp_last(alpha, g1, g2, D):
    """Rows D-1 and D in linear and log space, each padded to length D+1."""
    prev = np.ones(1)
    lprev = np.zeros(1)
    lin = np.zeros((2, D + 1))
    logs = np.full((2, D + 1), -np.inf)
    if D == 0:
        lin[1, 0] = 1.0
        logs[1, 0] = 0.0
        return lin, logs
    if D == 1:
        lin[0, 0] = 1.0
        logs[0, 0] = 0.0
    with np.errstate(divide="ignore"):
        for i in range(1, D + 1):
            incl, excl = _step_probs(alpha, g1, g2, i)
            row = np.zeros(i + 1)
            row[:i] += prev * excl
            row[1:] += prev * incl
            lrow = np.full(i + 1, -np.inf)
            lrow[:i] = lprev + np.log(excl)
            lrow[1:] = np.logaddexp(lrow[1:], lprev + np.log(incl))
            if i == D - 1:
                lin[0, :i + 1] = row
                logs[0, :i + 1] = lrow
            prev, lprev = row, lrow
    lin[1] = prev
    logs[1] = lprev
    return lin, logs


def column_product(F, members):
    """Product of factor values over the units in ``members``; shape (N, K)."""
    if len(members) == 0:
        return np.ones((F.shape[0], F.shape[2]))
    return np.prod(F[:, members, :], axis=1)


def interaction_sum(F, Z):
    """Sum over non-empty columns and factors of the column products; shape (N,)."""
    out = np.zeros(F.shape[0])
    for j in range(Z.shape[1]):
        members = np.flatnonzero(Z[:, j])
        if members.size:
            out += np.prod(F[:, members, :], axis=1).sum(axis=1)
    return out


def loo_products(F, Z, u, k):
    """Per-column product over members other than ``u`` at factor ``k``.

    Columns that do not contain ``u`` are left at zero; shape (N, J).
    """
    N = F.shape[0]
    out = np.zeros((N, Z.shape[1]))
    for j in np.flatnonzero(Z[u]):
        others = np.flatnonzero(Z[:, j])
        others = others[others != u]
        if others.size:
            out[:, j] = np.prod(F[:, others, k], axis=1)
        else:
            out[:, j] = 1.0
    return out


def flip_proposal(Pj, F, u, others, adding, old_nonempty, e):
    """Column products after flipping unit ``u`` of one column.

    Returns ``(Pn, c, cc, ec)``: the new (N, K) products, the per-row change
    in the mean response, ``c @ c`` and ``e @ c``.
    """
    if adding:
        Pn = Pj * F[:, u, :]
        new = Pn.sum(axis=1)
    else:
        Pn = column_product(F, others)
        new = Pn.sum(axis=1) if len(others) else np.zeros(F.shape[0])
    c = new - Pj.sum(axis=1) if old_nonempty else new
    return Pn, c, float(c @ c), float(e @ c)


def group_update(feat, e, theta_feat, m, n_feat):
    """Per-feature sufficient statistics ``sum (e + theta m) m`` and ``sum m^2``."""
    s1 = np.bincount(feat, weights=(e + theta_feat[feat] * m) * m, minlength=n_feat)
    s2 = np.bincount(feat, weights=m * m, minlength=n_feat)
    return s1, s2


def apply_group_delta(e, feat, diff, m):
    """Residual update after the features of one unit moved by ``diff``; in place."""
    e -= diff[feat] * m
