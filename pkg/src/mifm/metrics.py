import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass
class Metrics:
    rmse: float
    amape: float
    recovery_rate: float | None = None


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"prediction and truth shapes differ: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred, truth


def metric_rmse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return math.sqrt(float(np.mean((pred - truth) ** 2)))


def metric_amape(pred, truth) -> float:
    """Adjusted mean absolute percent error, ``100 * sum|pred - truth| / sum truth``."""
    pred, truth = _pair(pred, truth)
    denom = float(np.sum(truth))
    if denom == 0.0:
        raise ZeroDivisionError("sum of true responses is zero")
    return 100.0 * float(np.sum(np.abs(pred - truth))) / denom


def metric_recovery(selected: Iterable[str], truth) -> float:
    """Fraction of true interactions whose exact code appears in ``selected``.

    ``truth`` is a :class:`~mifm.model.SyntheticTruth` or an iterable of codes.
    """
    truth = set(getattr(truth, "codes", truth))
    if not truth:
        raise ValueError("no true interactions")
    return len(truth & set(selected)) / len(truth)
