import os
import subprocess
import sys

import numpy as np
import pytest

from mifm import kernels

backends = [kernels.numpy_kernels] + ([kernels.numba_kernels] if kernels.numba_kernels is not None else [])
ids = [b.__name__.rsplit("_", 1)[-1] for b in backends]


def _state(seed, N=25, U=5, J=4, K=3):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(N, U, K))
    Z = rng.random((U, J)) < 0.5
    Z[:, 0] = False
    e = rng.normal(size=N)
    return rng, F, Z, e


def _naive_column(F, members):
    out = np.ones((F.shape[0], F.shape[2]))
    for u in members:
        out = out * F[:, u, :]
    return out


@pytest.mark.parametrize("impl", backends, ids=ids)
@pytest.mark.parametrize("alpha,D", [(0.0, 1), (0.7, 2), (1.0, 17), (0.3, 60)])
def test_depth_dp(impl, alpha, D):
    packed = impl.depth_dp_packed(alpha, 0.2, 1.0, D)
    last, logs = impl.depth_dp_last(alpha, 0.2, 1.0, D)
    ref_packed = kernels.numpy_kernels.depth_dp_packed(alpha, 0.2, 1.0, D)
    ref_last, ref_logs = kernels.numpy_kernels.depth_dp_last(alpha, 0.2, 1.0, D)
    np.testing.assert_allclose(packed, ref_packed, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(last, ref_last, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(logs, ref_logs, rtol=1e-12)
    np.testing.assert_allclose(last[1, : D + 1], packed[D * (D + 1) // 2:], rtol=1e-13)


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_products_and_sums(impl):
    _, F, Z, _ = _state(0)
    total = np.zeros(F.shape[0])
    for j in range(Z.shape[1]):
        members = np.flatnonzero(Z[:, j]).astype(np.int64)
        np.testing.assert_allclose(impl.column_product(F, members), _naive_column(F, members), rtol=1e-14)
        if members.size:
            total += _naive_column(F, members).sum(axis=1)
    np.testing.assert_allclose(impl.interaction_sum(F, Z), total, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_loo_products(impl):
    _, F, Z, _ = _state(1)
    for u in range(Z.shape[0]):
        for k in range(F.shape[2]):
            got = impl.loo_products(F, Z, u, k)
            for j in range(Z.shape[1]):
                if not Z[u, j]:
                    assert not got[:, j].any()
                else:
                    others = [i for i in np.flatnonzero(Z[:, j]) if i != u]
                    np.testing.assert_allclose(got[:, j], _naive_column(F, others)[:, k], rtol=1e-14)


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_flip_proposal(impl):
    _, F, Z, e = _state(2)
    for j in range(Z.shape[1]):
        members = np.flatnonzero(Z[:, j])
        Pj = _naive_column(F, members)
        old = Pj.sum(axis=1) if members.size else np.zeros(F.shape[0])
        for u in range(Z.shape[0]):
            adding = not Z[u, j]
            others = members if adding else members[members != u]
            new_members = sorted(set(members) | {u}) if adding else list(others)
            Pn, c, cc, ec = impl.flip_proposal(np.ascontiguousarray(Pj), F, u, others.astype(np.int64), adding,
                                               bool(members.size), e)
            ref = _naive_column(F, new_members)
            np.testing.assert_allclose(Pn, ref, rtol=1e-13)
            new = ref.sum(axis=1) if new_members else np.zeros(F.shape[0])
            np.testing.assert_allclose(c, new - old, rtol=1e-12, atol=1e-14)
            assert cc == pytest.approx(float(c @ c), rel=1e-12)
            assert ec == pytest.approx(float(e @ c), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("impl", backends, ids=ids)
def test_group_kernels(impl):
    rng = np.random.default_rng(3)
    N, nf = 30, 4
    feat = rng.integers(0, nf, size=N).astype(np.int64)
    e, m, theta = rng.normal(size=N), rng.normal(size=N), rng.normal(size=nf)
    s1, s2 = impl.group_update(feat, e, theta, m, nf)
    for f in range(nf):
        rows = feat == f
        assert s1[f] == pytest.approx(np.sum((e[rows] + theta[f] * m[rows]) * m[rows]), abs=1e-12)
        assert s2[f] == pytest.approx(np.sum(m[rows] ** 2), abs=1e-12)
    diff = rng.normal(size=nf)
    e2 = e.copy()
    impl.apply_group_delta(e2, feat, diff, m)
    np.testing.assert_allclose(e2, e - diff[feat] * m, rtol=1e-14)


def test_env_flag_selects_numpy_backend():
    code = "from mifm import kernels; print(kernels.backend_name())"
    env = dict(os.environ, MIFM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_backends_give_identical_chains():
    code = """
import numpy as np
from mifm.gibbs import ChainConfig, Hyperparams, run_chain
from mifm.model import Dataset
rng = np.random.default_rng(0)
X = rng.uniform(-1, 1, (50, 4))
d = Dataset.from_continuous(X, X[:, 0] * X[:, 1] + 0.1 * rng.normal(size=50))
s = run_chain(d, Hyperparams(K=2, J=3), ChainConfig(iterations=20, burn_in=10, seed=2))
print(repr([r.theta.w0 for r in s.records]), [r.theta.Z.sum() for r in s.records])
"""
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, MIFM_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout)
    a, b = (eval(o.split("] ")[0] + "]") for o in outs)
    np.testing.assert_allclose(a, b, rtol=1e-8)
    assert outs[0].split("] ")[1] == outs[1].split("] ")[1]
