"""Posterior post-processing: interaction marginals, selection, prediction, refits."""
from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .gibbs import PosteriorSamples
from .model import Dataset, decode_support, hypergraph_codes, predict_mean


@dataclass
class MarginalReport:
    entries: dict[str, float]
    total_samples: int
    counts: dict[str, int] = field(default_factory=dict)

    def depth(self, code: str) -> int:
        return len(decode_support(code))

    def linear(self) -> list[str]:
        """Depth-one entries (reported, but not counted as non-linear interactions)."""
        return sorted(c for c in self.entries if self.depth(c) == 1)

    def nonlinear(self) -> list[str]:
        return sorted(c for c in self.entries if self.depth(c) > 1)

    def sorted_entries(self) -> list[tuple[str, float]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["encoding", "depth", "frequency"])
            for code, f in self.sorted_entries():
                w.writerow([code, self.depth(code), repr(float(f))])

    @classmethod
    def read_csv(cls, path) -> "MarginalReport":
        with open(path, newline="", encoding="utf-8") as fh:
            entries = {r["encoding"]: float(r["frequency"]) for r in csv.DictReader(fh)}
        return cls(entries, total_samples=0)


def marginals_from_codes(per_sample: Iterable[Sequence[str]]) -> MarginalReport:
    """Marginals from per-sample lists of column codes (empty codes ignored)."""
    counts: Counter[str] = Counter()
    total = 0
    for codes in per_sample:
        total += 1
        counts.update({c for c in codes if c})
    if total == 0:
        raise ValueError("no posterior samples")
    return MarginalReport({c: n / total for c, n in counts.items()}, total, dict(counts))


def interaction_marginals(samples: PosteriorSamples) -> MarginalReport:
    """Fraction of samples whose hypergraph contains each canonical interaction."""
    return marginals_from_codes(hypergraph_codes(r.theta.Z) for r in samples.records)


@dataclass(frozen=True)
class SelectionRule:
    threshold: float | None = None
    top: int | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.top is None):
            raise ValueError("give exactly one of threshold or top")
        if self.threshold is not None and not 0.0 <= self.threshold < 1.0:
            raise ValueError("threshold must lie in [0, 1)")
        if self.top is not None and self.top < 0:
            raise ValueError("top must be non-negative")


def select_interactions(report: MarginalReport, rule: SelectionRule) -> list[str]:
    """Selected codes ordered by (frequency desc, code asc)."""
    ranked = report.sorted_entries()
    if rule.top is not None:
        return [c for c, _ in ranked[: rule.top]]
    return [c for c, f in ranked if f > rule.threshold]


def posterior_predictive(samples: PosteriorSamples, data: Dataset) -> np.ndarray:
    """Average of the mean response over all posterior samples."""
    if not samples.records:
        raise ValueError("no posterior samples")
    acc = np.zeros(data.N)
    for r in samples.records:
        acc += predict_mean(r.theta, data)
    return acc / len(samples.records)


@dataclass
class RefitResult:
    intercept: float
    linear: np.ndarray
    coefficients: dict[str, float]
    fitted: np.ndarray
    rank: int


def refit_least_squares(selected: Sequence[str], data: Dataset) -> RefitResult:
    """OLS on intercept, linear terms and one product column per selected interaction.

    Continuous data only.  Depth-one selections map onto the linear weight of
    that variable; duplicates collapse to one column.
    """
    X = data.dense_continuous()
    if data.y is None:
        raise ValueError("refit needs a response")
    N, D = X.shape
    supports = []
    for code in dict.fromkeys(selected):
        s = decode_support(code)
        if not s:
            continue
        if max(s) >= D:
            raise ValueError(f"interaction {code!r} refers to a variable beyond {D}")
        if len(s) > 1:
            supports.append((code, s))
    cols = [np.ones(N), *X.T] + [np.prod(X[:, list(s)], axis=1) for _, s in supports]
    A = np.column_stack(cols)
    beta, _, rank, _ = np.linalg.lstsq(A, data.y, rcond=None)
    if rank < A.shape[1]:
        warnings.warn(f"design matrix is rank deficient ({rank} < {A.shape[1]}); using least-norm solution",
                      RuntimeWarning, stacklevel=2)
    coefs = {}
    for code in dict.fromkeys(selected):
        s = decode_support(code)
        if len(s) == 1:
            coefs[code] = float(beta[1 + s[0]])
    for t, (code, _) in enumerate(supports):
        coefs[code] = float(beta[1 + D + t])
    return RefitResult(float(beta[0]), beta[1:1 + D].copy(), coefs, A @ beta, int(rank))
