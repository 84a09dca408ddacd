"""Compiled kernels; mirror ``_kernels_numpy`` one-to-one."""
import numpy as np
from numba import njit


@njit(cache=True)
def depth_dp_packed(alpha, g1, g2, D):
    out = np.zeros((D + 1) * (D + 2) // 2)
    out[0] = 1.0
    for i in range(1, D + 1):
        den = i - 1 + g1 + g2
        ps = (i - 1) * i // 2
        start = i * (i + 1) // 2
        for m in range(i + 1):
            acc = 0.0
            if m < i:
                excl = ((1.0 - alpha) * m + alpha * (i - 1 - m) + g2) / den
                acc += out[ps + m] * excl
            if m > 0:
                mp = m - 1
                incl = (alpha * mp + (1.0 - alpha) * (i - 1 - mp) + g1) / den
                acc += out[ps + mp] * incl
            out[start + m] = acc
    return out


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def depth_dp_last(alpha, g1, g2, D):
    lin = np.zeros((2, D + 1))
    logs = np.full((2, D + 1), -np.inf)
    if D == 0:
        lin[1, 0] = 1.0
        logs[1, 0] = 0.0
        return lin, logs
    prev = np.zeros(D + 1)
    nxt = np.zeros(D + 1)
    lprev = np.full(D + 1, -np.inf)
    lnxt = np.full(D + 1, -np.inf)
    prev[0] = 1.0
    lprev[0] = 0.0
    if D == 1:
        lin[0, 0] = 1.0
        logs[0, 0] = 0.0
    for i in range(1, D + 1):
        den = i - 1 + g1 + g2
        for m in range(i + 1):
            acc = 0.0
            lacc = -np.inf
            if m < i:
                excl = ((1.0 - alpha) * m + alpha * (i - 1 - m) + g2) / den
                acc += prev[m] * excl
                lacc = lprev[m] + np.log(excl)
            if m > 0:
                mp = m - 1
                incl = (alpha * mp + (1.0 - alpha) * (i - 1 - mp) + g1) / den
                acc += prev[mp] * incl
                lacc = _logaddexp(lacc, lprev[mp] + np.log(incl))
            nxt[m] = acc
            lnxt[m] = lacc
        if i == D - 1:
            for m in range(i + 1):
                lin[0, m] = nxt[m]
                logs[0, m] = lnxt[m]
        prev, nxt = nxt, prev
        lprev, lnxt = lnxt, lprev
    for m in range(D + 1):
        lin[1, m] = prev[m]
        logs[1, m] = lprev[m]
    return lin, logs


@njit(cache=True)
def column_product(F, members):
    N, _, K = F.shape
    out = np.ones((N, K))
    for n in range(N):
        for t in range(members.shape[0]):
            u = members[t]
            for k in range(K):
                out[n, k] *= F[n, u, k]
    return out


@njit(cache=True)
def interaction_sum(F, Z):
    N, U, K = F.shape
    J = Z.shape[1]
    out = np.zeros(N)
    members = np.empty(U, dtype=np.int64)
    for j in range(J):
        cnt = 0
        for u in range(U):
            if Z[u, j]:
                members[cnt] = u
                cnt += 1
        if cnt == 0:
            continue
        for n in range(N):
            s = 0.0
            for k in range(K):
                p = 1.0
                for t in range(cnt):
                    p *= F[n, members[t], k]
                s += p
            out[n] += s
    return out


@njit(cache=True)
def loo_products(F, Z, u, k):
    N, U, _ = F.shape
    J = Z.shape[1]
    out = np.zeros((N, J))
    members = np.empty(U, dtype=np.int64)
    for j in range(J):
        if not Z[u, j]:
            continue
        cnt = 0
        for v in range(U):
            if Z[v, j] and v != u:
                members[cnt] = v
                cnt += 1
        for n in range(N):
            p = 1.0
            for t in range(cnt):
                p *= F[n, members[t], k]
            out[n, j] = p
    return out


@njit(cache=True)
def flip_proposal(Pj, F, u, others, adding, old_nonempty, e):
    N, _, K = F.shape
    Pn = np.empty((N, K))
    c = np.empty(N)
    cc = 0.0
    ec = 0.0
    n_others = others.shape[0]
    for n in range(N):
        new = 0.0
        old = 0.0
        for k in range(K):
            if adding:
                p = Pj[n, k] * F[n, u, k]
            else:
                p = 1.0
                for t in range(n_others):
                    p *= F[n, others[t], k]
            Pn[n, k] = p
            new += p
            old += Pj[n, k]
        if not adding and n_others == 0:
            new = 0.0
        if not old_nonempty:
            old = 0.0
        d = new - old
        c[n] = d
        cc += d * d
        ec += e[n] * d
    return Pn, c, cc, ec


@njit(cache=True)
def group_update(feat, e, theta_feat, m, n_feat):
    s1 = np.zeros(n_feat)
    s2 = np.zeros(n_feat)
    for n in range(feat.shape[0]):
        f = feat[n]
        mn = m[n]
        s1[f] += (e[n] + theta_feat[f] * mn) * mn
        s2[f] += mn * mn
    return s1, s2


@njit(cache=True)
def apply_group_delta(e, feat, diff, m):
    for n in range(feat.shape[0]):
        e[n] -= diff[feat[n]] * m[n]
