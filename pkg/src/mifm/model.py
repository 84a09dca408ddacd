"""Model types and pure functions of the multi-way factorization machine.

Data are held in a unit/feature layout that covers continuous and
categorical predictors uniformly.  Each observation has one entry per
*unit* (a continuous variable or a categorical variable); entry ``u`` points
at a *feature* row ``idx[n, u]`` of the weight vector ``w`` and factor matrix
``V`` and carries a value ``val[n, u]`` (the observed number for a continuous
unit, 1 for the active attribute of a categorical unit).  The interaction
matrix ``Z`` ranges over units, ``V`` over features.  The mean response is

    w0 + sum_u w[idx_u] val_u + sum_j sum_k prod_{u in Z_j} val_u V[idx_u, k]

which reduces to the continuous and categorical models when the data are
all of one kind.  Empty columns of ``Z`` contribute nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels


class IngestionError(ValueError):
    """Raised for malformed data rows; the message names the row and column."""


class RepresentabilityError(RuntimeError):
    pass


# -- canonical interaction encoding --------------------------------------------------

def encode_support(indices: Iterable[int]) -> str:
    """Canonical text form of a 0-based index set: 1-based, ascending, '+'-joined."""
    idx = sorted({int(i) for i in indices})
    if not idx:
        return ""
    return "+".join(str(i + 1) for i in idx)


def decode_support(code: str) -> tuple[int, ...]:
    code = code.strip()
    if not code:
        return ()
    return tuple(sorted(int(t) - 1 for t in code.split("+")))


def column_code(bits) -> str:
    return encode_support(np.flatnonzero(np.asarray(bits)))


def hypergraph_codes(Z: np.ndarray) -> list[str]:
    """Canonical codes of the columns of ``Z`` (units x J), empty columns included."""
    return [column_code(Z[:, j]) for j in range(Z.shape[1])]


def hypergraph_from_codes(codes: Sequence[str], n_units: int) -> np.ndarray:
    Z = np.zeros((n_units, len(codes)), dtype=bool)
    for j, c in enumerate(codes):
        for i in decode_support(c):
            if not 0 <= i < n_units:
                raise ValueError(f"interaction {c!r} refers to unit {i + 1} > {n_units}")
            Z[i, j] = True
    return Z


# -- schema and data ---------------------------------------------------------------

@dataclass(frozen=True)
class Schema:
    """Ordered predictor layout.

    ``units`` is a list of ``(name, attributes)`` where ``attributes`` is
    ``None`` for a continuous variable and a tuple of attribute labels for
    a categorical one.
    """

    units: tuple[tuple[str, tuple[str, ...] | None], ...]
    response: str = "y"

    def __post_init__(self):
        if not self.units:
            raise ValueError("schema needs at least one predictor")
        names = [n for n, _ in self.units]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        for name, attrs in self.units:
            if attrs is not None:
                if not attrs:
                    raise ValueError(f"categorical column {name!r} has no attributes")
                if len(set(attrs)) != len(attrs):
                    raise ValueError(f"duplicate attributes in categorical column {name!r}")

    @classmethod
    def continuous(cls, names: Sequence[str], response: str = "y") -> "Schema":
        return cls(tuple((n, None) for n in names), response)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "Schema":
        """Build from ``{"response": ..., "columns": {name: spec}}``.

        ``spec`` is ``"continuous"`` or ``{"categorical": [attr, ...]}``.
        """
        cols = mapping.get("columns", mapping)
        response = mapping.get("response", "y") if "columns" in mapping else "y"
        units = []
        for name, spec in cols.items():
            if spec == "continuous":
                units.append((str(name), None))
            elif isinstance(spec, dict) and "categorical" in spec:
                units.append((str(name), tuple(str(a) for a in spec["categorical"])))
            else:
                raise ValueError(f"column {name!r}: expected 'continuous' or {{categorical: [...]}}, got {spec!r}")
        return cls(tuple(units), response)

    def to_mapping(self) -> dict:
        cols = {}
        for name, attrs in self.units:
            cols[name] = "continuous" if attrs is None else {"categorical": list(attrs)}
        return {"response": self.response, "columns": cols}

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_categories(self) -> int:
        return sum(1 for _, a in self.units if a is not None)

    @property
    def offsets(self) -> np.ndarray:
        """Feature index of the first feature of every unit."""
        sizes = [1 if a is None else len(a) for _, a in self.units]
        return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    @property
    def n_features(self) -> int:
        return int(sum(1 if a is None else len(a) for _, a in self.units))

    @property
    def is_categorical(self) -> np.ndarray:
        return np.array([a is not None for _, a in self.units])

    @property
    def feature_unit(self) -> np.ndarray:
        """Unit owning each feature."""
        out = []
        for u, (_, a) in enumerate(self.units):
            out.extend([u] * (1 if a is None else len(a)))
        return np.array(out, dtype=np.int64)


@dataclass
class Dataset:
    idx: np.ndarray   # (N, U) int64 feature index per unit
    val: np.ndarray   # (N, U) float64 value per unit
    y: np.ndarray | None
    schema: Schema

    @property
    def N(self) -> int:
        return self.idx.shape[0]

    @property
    def n_units(self) -> int:
        return self.idx.shape[1]

    @property
    def n_features(self) -> int:
        return self.schema.n_features

    @classmethod
    def from_continuous(cls, X, y=None, names: Sequence[str] | None = None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        N, D = X.shape
        names = names or [f"x{i + 1}" for i in range(D)]
        idx = np.broadcast_to(np.arange(D, dtype=np.int64), (N, D)).copy()
        yy = None if y is None else np.asarray(y, dtype=np.float64)
        if yy is not None and yy.shape != (N,):
            raise ValueError(f"y must have shape ({N},), got {yy.shape}")
        return cls(idx, X.copy(), yy, Schema.continuous(names))

    def subset(self, rows) -> "Dataset":
        return Dataset(self.idx[rows], self.val[rows], None if self.y is None else self.y[rows], self.schema)

    def dense_continuous(self) -> np.ndarray:
        """Design matrix of the values; only meaningful for all-continuous data."""
        if self.schema.is_categorical.any():
            raise ValueError("dataset has categorical units")
        return self.val


def one_hot_encode(schema: Schema, rows: Sequence[dict], require_response: bool = False) -> Dataset:
    """Encode dict rows (e.g. from ``csv.DictReader``) against ``schema``.

    Row numbers in error messages are 1-based data rows (header excluded).
    """
    N, U = len(rows), schema.n_units
    idx = np.zeros((N, U), dtype=np.int64)
    val = np.zeros((N, U))
    offsets = schema.offsets
    lookup = [None if a is None else {s: t for t, s in enumerate(a)} for _, a in schema.units]
    ys = []
    for n, row in enumerate(rows):
        for u, (name, attrs) in enumerate(schema.units):
            cell = row.get(name)
            if cell is None or (isinstance(cell, str) and cell.strip() == ""):
                raise IngestionError(f"row {n + 1}, column {name!r}: missing value")
            if attrs is None:
                try:
                    x = float(cell)
                except (TypeError, ValueError):
                    raise IngestionError(f"row {n + 1}, column {name!r}: not a number: {cell!r}") from None
                if not math.isfinite(x):
                    raise IngestionError(f"row {n + 1}, column {name!r}: non-finite value {cell!r}")
                idx[n, u] = offsets[u]
                val[n, u] = x
            else:
                key = str(cell).strip()
                if key not in lookup[u]:
                    raise IngestionError(f"row {n + 1}, column {name!r}: unknown attribute {cell!r}")
                idx[n, u] = offsets[u] + lookup[u][key]
                val[n, u] = 1.0
        if schema.response in row and row[schema.response] not in (None, ""):
            try:
                ys.append(float(row[schema.response]))
            except ValueError:
                raise IngestionError(
                    f"row {n + 1}, column {schema.response!r}: not a number: {row[schema.response]!r}") from None
        elif require_response:
            raise IngestionError(f"row {n + 1}, column {schema.response!r}: missing response")
    y = np.array(ys) if ys and len(ys) == N else None
    return Dataset(idx, val, y, schema)


def one_hot_decode(data: Dataset) -> list[dict]:
    """Inverse of :func:`one_hot_encode` (values as floats / attribute labels)."""
    offsets = data.schema.offsets
    out = []
    for n in range(data.N):
        row = {}
        for u, (name, attrs) in enumerate(data.schema.units):
            if attrs is None:
                row[name] = float(data.val[n, u])
            else:
                row[name] = attrs[int(data.idx[n, u] - offsets[u])]
        if data.y is not None:
            row[data.schema.response] = float(data.y[n])
        out.append(row)
    return out


def one_hot_matrix(data: Dataset) -> np.ndarray:
    """Dense (N, n_features) expansion: values for continuous, indicators for attributes."""
    M = np.zeros((data.N, data.n_features))
    rows = np.arange(data.N)[:, None]
    M[rows, data.idx] = data.val
    return M


# -- parameters --------------------------------------------------------------------

@dataclass
class ModelParams:
    w0: float
    w: np.ndarray        # (n_features,)
    V: np.ndarray        # (n_features, K)
    Z: np.ndarray        # (n_units, J) bool
    sigma: float = 1.0   # noise precision

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.V = np.atleast_2d(np.asarray(self.V, dtype=np.float64))
        self.Z = np.asarray(self.Z, dtype=bool)
        if self.V.shape[0] != self.w.shape[0]:
            raise ValueError(f"V has {self.V.shape[0]} rows but w has {self.w.shape[0]} entries")
        if self.Z.ndim != 2 or self.Z.shape[1] < 1:
            raise ValueError("Z must be a (units, J) matrix with J >= 1")
        if self.V.shape[1] < 1:
            raise ValueError("K must be at least 1")
        if not self.sigma > 0:
            raise ValueError("noise precision sigma must be positive")

    @property
    def K(self) -> int:
        return self.V.shape[1]

    @property
    def J(self) -> int:
        return self.Z.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(float(self.w0), self.w.copy(), self.V.copy(), self.Z.copy(), float(self.sigma))


@dataclass
class SyntheticTruth:
    betas: np.ndarray
    supports: list[tuple[int, ...]]   # 0-based unit indices
    sigma_true: float | None = None   # noise precision; None means noiseless
    n_units: int | None = None

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        self.supports = [tuple(sorted(int(i) for i in s)) for s in self.supports]
        if len(self.betas) != len(self.supports):
            raise ValueError("betas and supports differ in length")
        if any(len(s) == 0 for s in self.supports):
            raise ValueError("supports must be non-empty")
        if len(set(self.supports)) != len(self.supports):
            raise ValueError("supports must be distinct")
        if np.any(self.betas == 0):
            raise ValueError("true coefficients must be nonzero")

    @property
    def codes(self) -> list[str]:
        return [encode_support(s) for s in self.supports]

    def mean(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for b, s in zip(self.betas, self.supports):
            out += b * np.prod(X[:, list(s)], axis=1)
        return out

    def to_mapping(self) -> dict:
        return {
            "supports": self.codes,
            "betas": [float(b) for b in self.betas],
            "sigma_true": self.sigma_true,
            "n_units": self.n_units,
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "SyntheticTruth":
        return cls(m["betas"], [decode_support(c) for c in m["supports"]], m.get("sigma_true"), m.get("n_units"))


# -- mean response ---------------------------------------------------------------

def factor_values(data: Dataset, V: np.ndarray) -> np.ndarray:
    """``F[n, u, k] = val[n, u] * V[idx[n, u], k]``."""
    return data.val[:, :, None] * V[data.idx]


def linear_part(data: Dataset, w0: float, w: np.ndarray) -> np.ndarray:
    return w0 + np.sum(w[data.idx] * data.val, axis=1)


def predict_mean(theta: ModelParams, data: Dataset) -> np.ndarray:
    """Mean response for every observation of ``data``."""
    if theta.Z.shape[0] != data.n_units:
        raise ValueError(f"Z covers {theta.Z.shape[0]} units but data has {data.n_units}")
    if theta.w.shape[0] != data.n_features:
        raise ValueError(f"model has {theta.w.shape[0]} features but data has {data.n_features}")
    F = factor_values(data, theta.V)
    return linear_part(data, theta.w0, theta.w) + kernels.interaction_sum(F, theta.Z)


def mean_response_continuous(theta: ModelParams, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    D = theta.w.shape[0]
    if x.shape != (D,) or theta.Z.shape[0] != D:
        raise ValueError(f"expected {D} continuous inputs matching Z, got shape {x.shape}")
    out = theta.w0 + float(theta.w @ x)
    for j in range(theta.J):
        members = np.flatnonzero(theta.Z[:, j])
        if members.size:
            out += float(np.sum(np.prod(x[members, None] * theta.V[members], axis=0)))
    return out


def mean_response_categorical(theta: ModelParams, x: Sequence[int], schema: Schema) -> float:
    """Mean response for one observation given as 0-based attribute indices per category."""
    if schema.n_categories != schema.n_units:
        raise ValueError("schema contains continuous columns")
    if len(x) != schema.n_units:
        raise ValueError(f"expected {schema.n_units} attribute indices, got {len(x)}")
    feats = []
    for u, ((name, attrs), a) in enumerate(zip(schema.units, x)):
        if not 0 <= int(a) < len(attrs):
            raise IngestionError(f"category {name!r}: attribute index {a} outside [0, {len(attrs)})")
        feats.append(int(schema.offsets[u] + int(a)))
    feats = np.array(feats)
    out = theta.w0 + float(theta.w[feats].sum())
    for j in range(theta.J):
        members = np.flatnonzero(theta.Z[:, j])
        if members.size:
            out += float(np.sum(np.prod(theta.V[feats[members]], axis=0)))
    return out


def effective_coefficient(V: np.ndarray, support: Iterable[int]) -> float:
    """Implied regression weight ``sum_k prod_{i in support} V[i, k]``."""
    s = sorted(set(int(i) for i in support))
    if not s:
        raise ValueError("support must be non-empty")
    return float(np.sum(np.prod(np.asarray(V)[s], axis=0)))


# -- rank bound ---------------------------------------------------------------------

def elimination_order(supports: Sequence[Iterable[int]]) -> list[tuple[int, list[int]]]:
    """Greedy elimination used to bound the factorization rank.

    Repeatedly picks the unit contained in the fewest remaining supports
    (ties to the smallest index) and removes every support containing it.
    Returns ``[(pivot, [support positions removed]), ...]``.
    """
    remaining = {j: frozenset(s) for j, s in enumerate(supports)}
    steps = []
    while remaining:
        counts: dict[int, int] = {}
        for s in remaining.values():
            for i in s:
                counts[i] = counts.get(i, 0) + 1
        pivot = min(counts, key=lambda i: (counts[i], i))
        removed = sorted(j for j, s in remaining.items() if pivot in s)
        steps.append((pivot, removed))
        for j in removed:
            del remaining[j]
    return steps


def compute_K0(supports: Sequence[Iterable[int]]) -> int:
    """Smallest rank for which the elimination argument guarantees exact representation."""
    supports = [frozenset(s) for s in supports]
    if not supports:
        return 0
    if any(not s for s in supports):
        raise ValueError("supports must be non-empty")
    if len(set(supports)) != len(supports):
        raise ValueError("supports must be distinct")
    return max(len(removed) for _, removed in elimination_order(supports))


def verify_representability(truth: SyntheticTruth, K: int, tolerance: float = 1e-8,
                            rng: np.random.Generator | None = None, n_units: int | None = None,
                            max_tries: int = 20) -> np.ndarray:
    """Construct ``V`` with ``sum_j (beta_j - effective_coefficient(V, Z_j))^2 < tolerance``.

    Equations are solved block by block in reverse elimination order: each
    block is linear in its pivot row of ``V`` with the remaining rows held at
    standard-normal draws or at earlier solutions.  The pivot row is moved
    from its own Gaussian draw to the closest point of the solution set, so
    components the block leaves free remain random.  Raises
    :class:`RepresentabilityError` if every attempt leaves a residual above
    ``tolerance``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    K0 = compute_K0(truth.supports)
    if K < K0:
        raise ValueError(f"K={K} is below the guaranteed rank K0={K0}")
    D = n_units or truth.n_units or (max(max(s) for s in truth.supports) + 1)
    steps = elimination_order(truth.supports)
    best = math.inf
    for _ in range(max_tries):
        V = rng.standard_normal((D, K))
        for pivot, block in reversed(steps):
            A = np.empty((len(block), K))
            for r, j in enumerate(block):
                others = [i for i in truth.supports[j] if i != pivot]
                A[r] = np.prod(V[others], axis=0) if others else 1.0
            # nearest solution to the Gaussian draw, so free directions stay generic
            step, *_ = np.linalg.lstsq(A, truth.betas[block] - A @ V[pivot], rcond=None)
            V[pivot] = V[pivot] + step
        resid = sum((b - effective_coefficient(V, s)) ** 2 for b, s in zip(truth.betas, truth.supports))
        if resid < tolerance:
            return V
        best = min(best, resid)
    raise RepresentabilityError(f"no witness found in {max_tries} attempts (best residual {best:.3e})")
