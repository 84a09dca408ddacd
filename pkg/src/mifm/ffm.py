"""The FFM_alpha prior over binary interaction columns.

A column ``z`` in ``{0, 1}^D`` marks which units take part in one interaction.
Units enter a sequential inclusion process in a uniformly random order; at
step ``i`` (1-based) with ``m`` units already included, the next unit joins
with probability

    (alpha*m + (1 - alpha)*(i - 1 - m) + gamma1) / (i - 1 + gamma1 + gamma2).

``alpha = 1`` gives the Beta-Bernoulli finite feature model (rich get richer),
``alpha = 0`` favours shallow interactions.  Because the order is uniformly
random, the column law is exchangeable and depends on the pattern only
through its depth ``m = sum(z)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import kernels


@dataclass(frozen=True)
class FfmParams:
    gamma1: float = 0.2
    gamma2: float = 1.0
    alpha: float = 0.7
    D: int = 1

    def __post_init__(self):
        if not self.gamma1 > 0 or not self.gamma2 > 0:
            raise ValueError(f"gamma1 and gamma2 must be positive, got {self.gamma1}, {self.gamma2}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"D must be a positive integer, got {self.D}")


def conditional_inclusion_prob(params: FfmParams, i: int, m_prev: int) -> float:
    """Probability that the unit entering at step ``i`` is included.

    ``m_prev`` is the number of units included among the first ``i - 1``.
    The exclusion probability is ``1 - conditional_inclusion_prob(...)``;
    use :func:`conditional_exclusion_prob` to avoid the cancellation.
    """
    _check_step(params, i, m_prev)
    a, g1, g2 = params.alpha, params.gamma1, params.gamma2
    return (a * m_prev + (1.0 - a) * (i - 1 - m_prev) + g1) / (i - 1 + g1 + g2)


def conditional_exclusion_prob(params: FfmParams, i: int, m_prev: int) -> float:
    _check_step(params, i, m_prev)
    a, g1, g2 = params.alpha, params.gamma1, params.gamma2
    return ((1.0 - a) * m_prev + a * (i - 1 - m_prev) + g2) / (i - 1 + g1 + g2)


def _check_step(params, i, m_prev):
    if not 1 <= i <= params.D:
        raise ValueError(f"step index i={i} outside [1, {params.D}]")
    if not 0 <= m_prev <= i - 1:
        raise ValueError(f"m_prev={m_prev} outside [0, {i - 1}]")


@dataclass(frozen=True)
class DepthTable:
    """Exact pmf ``P(M_i = m)`` of the running depth of the process.

    With ``full=True`` every row ``0 <= i <= D`` is kept (packed, O(D^2)
    memory).  Otherwise only rows ``D - 1`` and ``D`` are stored, which is
    all the Gibbs sampler needs and scales to D in the tens of thousands.
    Log-space copies of the last two rows are always kept so that pattern
    probabilities stay finite where the linear values underflow.
    """

    params: FfmParams
    packed: np.ndarray | None
    last: np.ndarray = field(repr=False)
    log_last: np.ndarray = field(repr=False)

    @property
    def D(self) -> int:
        return self.params.D

    def row(self, i: int) -> np.ndarray:
        """``P(M_i = m)`` for ``m = 0..i``."""
        if i == self.D:
            return self.last[1, : i + 1]
        if i == self.D - 1:
            return self.last[0, : i + 1]
        if not 0 <= i <= self.D:
            raise IndexError(f"row {i} outside [0, {self.D}]")
        if self.packed is None:
            raise ValueError("intermediate rows were not kept; build with full=True")
        start = i * (i + 1) // 2
        return self.packed[start:start + i + 1]

    def log_row(self, i: int) -> np.ndarray:
        if i == self.D:
            return self.log_last[1, : i + 1]
        if i == self.D - 1:
            return self.log_last[0, : i + 1]
        with np.errstate(divide="ignore"):
            return np.log(self.row(i))

    def __getitem__(self, im):
        i, m = im
        return float(self.row(i)[m])

    def to_csv(self, path) -> None:
        """Write ``i, m, prob`` rows (all kept rows) to ``path``."""
        rows = range(self.D + 1) if self.packed is not None else (self.D - 1, self.D)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "m", "prob"])
            for i in rows:
                if i < 0:
                    continue
                for m, p in enumerate(self.row(i)):
                    w.writerow([i, m, repr(float(p))])

    @staticmethod
    def read_csv(path) -> dict[tuple[int, int], float]:
        with open(path, newline="", encoding="utf-8") as fh:
            return {(int(r["i"]), int(r["m"])): float(r["prob"]) for r in csv.DictReader(fh)}


def build_depth_table(params: FfmParams, full: bool = True) -> DepthTable:
    D = params.D
    last, log_last = kernels.depth_dp_last(params.alpha, params.gamma1, params.gamma2, D)
    packed = None
    if full:
        packed = kernels.depth_dp_packed(params.alpha, params.gamma1, params.gamma2, D)
        # keep the two copies of the last rows bit-identical
        last = last.copy()
        last[1] = packed[D * (D + 1) // 2:]
        if D >= 1:
            last[0, :D] = packed[(D - 1) * D // 2: D * (D + 1) // 2]
    for arr in (last, log_last) + ((packed,) if packed is not None else ()):
        arr.setflags(write=False)
    return DepthTable(params, packed, last, log_last)


def depth_mean(table: DepthTable) -> float:
    """``E[M_D]`` by summing the last table row."""
    p = table.row(table.D)
    return float(np.dot(np.arange(p.size), p))


def depth_mean_recursion(params: FfmParams) -> float:
    """``E[M_D]`` from the one-step mean recursion, without the table."""
    a, g1, g2 = params.alpha, params.gamma1, params.gamma2
    mean = 0.0
    for d in range(1, params.D + 1):
        mean = (mean * (d + 2 * a + g1 + g2 - 2) + d * (1 - a) + a + g1 - 1) / (d - 1 + g1 + g2)
    return mean


def depth_mean_alpha0(D: int, gamma1: float, gamma2: float) -> float:
    """Closed form of ``E[M_D]`` at ``alpha = 0``."""
    return D * (D + 2 * gamma1 - 1) / (2 * (D - 1 + gamma1 + gamma2))


def sample_column(params: FfmParams, rng: np.random.Generator) -> np.ndarray:
    """Draw one column: random entry order, then the sequential process."""
    D = params.D
    order = rng.permutation(D)
    u = rng.random(D)
    z = np.zeros(D, dtype=bool)
    a, g1, g2 = params.alpha, params.gamma1, params.gamma2
    m = 0
    for step in range(D):
        p = (a * m + (1.0 - a) * (step - m) + g1) / (step + g1 + g2)
        if u[step] < p:
            z[order[step]] = True
            m += 1
    return z


def log_binom(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def pattern_log_prob(params: FfmParams, table: DepthTable, z) -> float:
    """Log-probability of the exact pattern ``z``.

    All ``C(D, m)`` patterns of depth ``m`` share the mass ``P(M_D = m)``.
    """
    z = np.asarray(z, dtype=bool)
    if z.shape != (params.D,):
        raise ValueError(f"column must have length {params.D}, got shape {z.shape}")
    m = int(z.sum())
    return float(table.log_row(params.D)[m]) - log_binom(params.D, m)


def last_unit_included_prob(table: DepthTable, m: int) -> float:
    """``P(Z_{sigma_D} = 1 | Z)`` for a column of depth ``m``."""
    D = table.D
    if m == 0:
        return 0.0
    if m == D:
        return 1.0
    params = table.params
    lp = table.log_row(D - 1)
    lnum = lp[m - 1] + math.log(conditional_inclusion_prob(params, D, m - 1))
    lalt = lp[m] + math.log(conditional_exclusion_prob(params, D, m))
    # normalise against the two-term recursion rather than the stored row D
    # so the pair of probabilities sums to one exactly
    return float(1.0 / (1.0 + math.exp(lalt - lnum)))


def sigma_d_posterior(params: FfmParams, table: DepthTable, z) -> np.ndarray:
    """``P(sigma_D = i | Z)``: which unit entered the process last."""
    z = np.asarray(z, dtype=bool)
    D = params.D
    if z.shape != (D,):
        raise ValueError(f"column must have length {D}, got shape {z.shape}")
    m = int(z.sum())
    p1 = last_unit_included_prob(table, m)
    out = np.empty(D)
    if m:
        out[z] = p1 / m
    if D - m:
        out[~z] = (1.0 - p1) / (D - m)
    return out


def add_depth_probability(params: FfmParams, table: DepthTable, m: int) -> float:
    """Probability that one Gibbs step adds a unit to a column of depth ``m``."""
    D = params.D
    if not 0 <= m <= D:
        raise ValueError(f"depth m={m} outside [0, {D}]")
    if m == D:
        return 0.0
    return (1.0 - last_unit_included_prob(table, m)) * conditional_inclusion_prob(params, D, m)


def add_depth_curve(params: FfmParams, table: DepthTable | None = None) -> np.ndarray:
    table = table if table is not None else build_depth_table(params, full=False)
    return np.array([add_depth_probability(params, table, m) for m in range(params.D + 1)])


class ColumnUpdater:
    """Precomputed per-depth quantities for repeated two-stage column updates."""

    def __init__(self, table: DepthTable):
        params = table.params
        D = params.D
        self.D = D
        self.last_one = np.array([last_unit_included_prob(table, m) for m in range(D + 1)])
        # prior log-odds of the last unit being included given m' others
        self.log_odds = np.array([
            math.log(conditional_inclusion_prob(params, D, mp))
            - math.log(conditional_exclusion_prob(params, D, mp))
            for mp in range(D)
        ])

    def step(self, z: np.ndarray, rng: np.random.Generator,
             log_lik_delta: Callable[[int, int], float] | None = None) -> tuple[int, int]:
        """One conditional update of ``z`` in place; returns ``(index, new_bit)``."""
        m = int(z.sum())
        b = 1 if rng.random() < self.last_one[m] else 0
        candidates = np.flatnonzero(z) if b else np.flatnonzero(~z)
        i = int(candidates[rng.integers(candidates.size)])
        prior = self.log_odds[m - b]
        # log-odds of Z_i = 1 vs 0 including the data term for the non-current value
        delta = 0.0 if log_lik_delta is None else float(log_lik_delta(i, 1 - b))
        if b:
            logit = prior - delta
        else:
            logit = prior + delta
        u = rng.random()
        if logit >= 0:
            new = 1 if u * (1.0 + math.exp(-logit)) < 1.0 else 0
        else:
            e = math.exp(logit)
            new = 1 if u * (1.0 + e) < e else 0
        z[i] = bool(new)
        return i, new


def gibbs_flip_column(params: FfmParams, table: DepthTable, z, rng: np.random.Generator,
                      log_lik_delta: Callable[[int, int], float] | None = None,
                      updater: ColumnUpdater | None = None) -> np.ndarray:
    """One two-stage Gibbs update of a column under FFM_alpha x likelihood.

    First the bit value of the last-entering unit is drawn from its
    conditional given ``z``, then a unit carrying that value is chosen
    uniformly, and finally that unit's bit is resampled from the process
    conditional (treating it as last) times ``exp(log_lik_delta(i, bit))``.
    ``log_lik_delta(i, bit)`` is the change in data log-likelihood when unit
    ``i`` is set to ``bit`` (only called for the value that differs from the
    current one).  Returns a new array; ``z`` is not modified.
    """
    z = np.array(z, dtype=bool)
    if z.shape != (params.D,):
        raise ValueError(f"column must have length {params.D}, got shape {z.shape}")
    updater = updater or ColumnUpdater(table)
    updater.step(z, rng, log_lik_delta)
    return z
