"""Hot numeric kernels, dispatched to numba or numpy.

The backend is fixed at import time by ``MIFM_DISABLE_NUMBA`` (see
``mifm._backend``). Both implementations are importable directly for
benchmarking and cross-checking.
"""
import numpy as np

from . import _kernels_numpy as numpy_kernels
from ._backend import HAS_NUMBA, backend_name

if HAS_NUMBA:
    from . import _kernels_numba as numba_kernels

    _impl = numba_kernels
else:
    numba_kernels = None
    _impl = numpy_kernels

__all__ = [
    "backend_name",
    "depth_dp_packed",
    "depth_dp_last",
    "column_product",
    "interaction_sum",
    "loo_products",
    "flip_proposal",
    "group_update",
    "apply_group_delta",
    "numpy_kernels",
    "numba_kernels",
]


def depth_dp_packed(alpha, g1, g2, D):
    return _impl.depth_dp_packed(float(alpha), float(g1), float(g2), int(D))


def depth_dp_last(alpha, g1, g2, D):
    return _impl.depth_dp_last(float(alpha), float(g1), float(g2), int(D))


def column_product(F, members):
    return _impl.column_product(F, np.asarray(members, dtype=np.int64))


def interaction_sum(F, Z):
    return _impl.interaction_sum(F, np.ascontiguousarray(Z, dtype=np.bool_))


def loo_products(F, Z, u, k):
    return _impl.loo_products(F, np.ascontiguousarray(Z, dtype=np.bool_), int(u), int(k))


def flip_proposal(Pj, F, u, others, adding, old_nonempty, e):
    return _impl.flip_proposal(np.ascontiguousarray(Pj), F, int(u), np.asarray(others, dtype=np.int64),
                               bool(adding), bool(old_nonempty), e)


def group_update(feat, e, theta_feat, m, n_feat):
    return _impl.group_update(feat, e, theta_feat, np.ascontiguousarray(m), int(n_feat))


def apply_group_delta(e, feat, diff, m):
    _impl.apply_group_delta(e, feat, diff, np.ascontiguousarray(m))
