"""Synthetic regression problems with planted multi-way interactions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .model import Dataset, SyntheticTruth

# five linear, five 2-way, three 3-way, then one each of depths 4..8
REALISTIC_PLAN = ((1, 5), (2, 5), (3, 3), (4, 1), (5, 1), (6, 1), (7, 1), (8, 1))


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    D: int = 30
    n_train: int = 10_000
    n_test: int = 1_000
    plan: tuple[tuple[int, int], ...] = REALISTIC_PLAN
    beta_range: float = 5.0
    noise_precision: float | None = 25.0   # None: noiseless
    var_type: str = "continuous"           # continuous | binary | mixed
    continuous_ratio: float = 0.5          # share of continuous columns when mixed
    seed: int = 0
    truth: SyntheticTruth | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.D < 1 or self.n_train < 1 or self.n_test < 0:
            raise SpecError("D and n_train must be positive, n_test non-negative")
        for depth, count in self.plan:
            if not 1 <= depth <= self.D:
                raise SpecError(f"depth {depth} outside [1, {self.D}]")
            if count < 0:
                raise SpecError(f"negative count for depth {depth}")
            if count > math.comb(self.D, depth):
                raise SpecError(f"{count} interactions of depth {depth} requested but only "
                                f"{math.comb(self.D, depth)} exist for D={self.D}")
        if self.var_type not in ("continuous", "binary", "mixed"):
            raise SpecError(f"unknown var_type {self.var_type!r}")
        if not 0.0 <= self.continuous_ratio <= 1.0:
            raise SpecError("continuous_ratio must lie in [0, 1]")
        if not self.beta_range > 0.1:
            raise SpecError("beta_range must exceed the 0.1 magnitude floor")
        if self.noise_precision is not None and not self.noise_precision > 0:
            raise SpecError("noise_precision must be positive (or None for noiseless)")


def sample_supports(D: int, depth: int, count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """``count`` distinct subsets of ``range(D)`` of size ``depth``, uniformly without replacement."""
    total = math.comb(D, depth)
    if count > total:
        raise SpecError(f"only {total} subsets of size {depth} in {D} units")
    if total <= 20_000:
        pool = list(combinations(range(D), depth))
        pick = rng.choice(total, size=count, replace=False)
        return [pool[i] for i in sorted(pick)]
    out: list[tuple[int, ...]] = []
    seen = set()
    while len(out) < count:
        s = tuple(sorted(int(i) for i in rng.choice(D, size=depth, replace=False)))
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def sample_betas(n: int, beta_range: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform on ``[-r, -0.1] U [0.1, r]``."""
    mag = rng.uniform(0.1, beta_range, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return sign * mag


def sample_design(spec: ExperimentSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.var_type == "continuous":
        return rng.uniform(-1.0, 1.0, size=(n, spec.D))
    if spec.var_type == "binary":
        return (rng.random((n, spec.D)) < 0.5).astype(np.float64)
    n_cont = int(round(spec.continuous_ratio * spec.D))
    X = (rng.random((n, spec.D)) < 0.5).astype(np.float64)
    X[:, :n_cont] = rng.uniform(-1.0, 1.0, size=(n, n_cont))
    return X


def synth_generate(spec: ExperimentSpec) -> tuple[Dataset, Dataset, SyntheticTruth]:
    """Draw a planted truth and independent train/test sets from it."""
    rng = np.random.default_rng(spec.seed)
    if spec.truth is None:
        supports: list[tuple[int, ...]] = []
        for depth, count in spec.plan:
            supports.extend(sample_supports(spec.D, depth, count, rng))
        if not supports:
            raise SpecError("interaction plan is empty")
        truth = SyntheticTruth(sample_betas(len(supports), spec.beta_range, rng), supports,
                               spec.noise_precision, spec.D)
    else:
        truth = spec.truth
    sets = []
    for n in (spec.n_train, spec.n_test):
        X = sample_design(spec, n, rng)
        y = truth.mean(X)
        if spec.noise_precision is not None:
            y = y + rng.standard_normal(n) / math.sqrt(spec.noise_precision)
        sets.append(Dataset.from_continuous(X, y))
    return sets[0], sets[1], truth
