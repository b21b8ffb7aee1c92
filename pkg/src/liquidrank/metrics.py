"""Market security and equity metrics.

Weighted Pearson between reputation and true quality (security when weighted
towards low reputations, equity when weighted towards high ones), a
quality-adjusted Gini ("inequity"), mean satisfaction ("utility"), money lost
to scammers, and a Welch test for comparing batches of runs.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .ledger import Ledger


class UndefinedCorrelation(ValueError):
    """Raised when a correlation has a zero-variance side."""


@dataclass(frozen=True)
class WeightedSample:
    x: Sequence[float]
    y: Sequence[float]
    w: Optional[Sequence[float]] = None

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        w = np.ones_like(x) if self.w is None else np.asarray(self.w, dtype=np.float64)
        return x, y, w


@dataclass(frozen=True)
class AgentEconomics:
    agent: int
    volume_received: float
    volume_spent: float
    quality: float
    reputation: float = 0.0

    @property
    def wealth(self) -> float:
        return (self.volume_received + self.volume_spent) / 2.0


@dataclass
class MetricsReport:
    utility: float
    inequity: float
    pccw_overall: float
    pccw_low_weighted: float
    pccw_high_weighted: float
    pearson_by_good: Dict[int, float] = field(default_factory=dict)
    pearson_by_good_avg: float = math.nan
    loss_to_scam: float = 0.0


def _check_weights(a, b, w):
    if not (a.shape == b.shape == w.shape) or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape}, {b.shape}, {w.shape}")
    if a.size < 1:
        raise ValueError("need at least one observation")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise ValueError("weights must have a positive sum")
    return total


def weighted_covariance(a, b, w) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    total = _check_weights(a, b, w)
    da = a - np.sum(w * a) / total
    db = b - np.sum(w * b) / total
    return float(np.sum(w * da * db) / total)


def weighted_pearson(sample: WeightedSample) -> float:
    """cov(x, y, w) / sqrt(cov(x, x, w) * cov(y, y, w)), clipped to [-1, 1]."""
    x, y, w = sample.arrays()
    vx = weighted_covariance(x, x, w)
    vy = weighted_covariance(y, y, w)
    # variances this small are rounding noise around a constant series
    scale_x = max(1.0, float(np.max(np.abs(x)))) ** 2
    scale_y = max(1.0, float(np.max(np.abs(y)))) ** 2
    if vx <= 1e-24 * scale_x or vy <= 1e-24 * scale_y:
        raise UndefinedCorrelation("zero variance")
    r = weighted_covariance(x, y, w) / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, r))


def equity_weights(reputations, direction: str) -> np.ndarray:
    r = np.asarray(reputations, dtype=np.float64)
    if direction == "low":
        return 1.0 - r
    if direction == "high":
        return r.copy()
    raise ValueError(f"direction must be 'low' or 'high', got {direction!r}")


def pearson_by_good(samples: Mapping[int, WeightedSample],
                    min_samples: int = 4) -> Tuple[Dict[int, float], float]:
    """Per-good unweighted Pearson, and their mean over goods with at least
    ``min_samples`` suppliers and a defined coefficient."""
    coefs = {}
    used = []
    for good in sorted(samples):
        s = samples[good]
        x, y, _ = s.arrays()
        if x.size < 2:
            continue
        try:
            r = weighted_pearson(WeightedSample(x, y))
        except UndefinedCorrelation:
            continue
        coefs[good] = r
        if x.size >= min_samples:
            used.append(r)
    avg = float(np.mean(used)) if used else math.nan
    return coefs, avg


def inequity(agents: Sequence[AgentEconomics], divisor: str = "quality") -> float:
    """Gini coefficient of equitable shares, wealth / quality.

    Zero when every agent trades exactly in proportion to its quality,
    ``1 - 1/N`` when a single agent holds everything.  ``divisor="reputation"``
    divides by the reputation score instead.
    """
    n = len(agents)
    if n < 2:
        raise ValueError("inequity needs at least two agents")
    if divisor not in ("quality", "reputation"):
        raise ValueError(f"divisor must be 'quality' or 'reputation', got {divisor!r}")
    denom = np.array([getattr(a, divisor) for a in agents], dtype=np.float64)
    if np.any(denom <= 0):
        raise ValueError(f"every agent needs {divisor} > 0")
    wealth = np.array([a.wealth for a in agents], dtype=np.float64)
    return gini_of_shares(wealth / denom)


def gini_of_shares(shares) -> float:
    w = np.sort(np.asarray(shares, dtype=np.float64), kind="stable")
    n = w.size
    if n < 2:
        raise ValueError("inequity needs at least two agents")
    total = w.sum()
    if total <= 0:
        return 0.0
    # Gini summed over the gaps between sorted shares; every term is
    # non-negative, so equal shares give exactly 0
    k = np.arange(1, n)
    return float(np.sum(k * (n - k) * np.diff(w)) / (n * total))


def utility(ratings) -> float:
    r = np.asarray(list(ratings) if not hasattr(ratings, "__len__") else ratings, dtype=np.float64)
    if r.size == 0:
        raise ValueError("utility of an empty rating list is undefined")
    return float(r.mean())


def loss_to_scam(ledger, scam_suppliers: Iterable[int], honest_consumers: Iterable[int]) -> float:
    led = Ledger.from_transactions(ledger)
    if not len(led):
        return 0.0
    mask = (np.isin(led.ratee, np.fromiter(scam_suppliers, dtype=np.int64))
            & np.isin(led.rater, np.fromiter(honest_consumers, dtype=np.int64)))
    return float(led.value[mask].sum())


def significance_test(sample_a, sample_b, alpha: float = 0.01) -> Tuple[float, bool]:
    """Two-sided Welch t-test; returns ``(p_value, p < alpha)``."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    if a.var() == 0 and b.var() == 0:
        raise ValueError("both samples are constant")
    p = float(stats.ttest_ind(a, b, equal_var=False).pvalue)
    return p, p < alpha


# --------------------------------------------------------------------------
# whole-market report


def _safe_pearson(x, y, w=None) -> float:
    if len(x) < 2:
        return math.nan
    try:
        return weighted_pearson(WeightedSample(x, y, w))
    except (UndefinedCorrelation, ValueError):
        return math.nan


def market_report(ledger: Ledger, agents, final_ranks: np.ndarray) -> MetricsReport:
    """Every metric for one finished run.

    ``agents`` are the run's agent specs indexed by id; ``final_ranks`` is the
    dense end-of-run rank vector (unranked agents already filled in).
    """
    honest = np.array([a.honest for a in agents], dtype=bool)
    consumer = np.array([a.is_consumer for a in agents], dtype=bool)
    supplier = np.array([a.is_supplier for a in agents], dtype=bool)

    by_good: Dict[int, Tuple[List[float], List[float]]] = {}
    xs, ys = [], []
    for a in agents:
        for good, q in sorted(a.quality.items()):
            gx, gy = by_good.setdefault(good, ([], []))
            gx.append(final_ranks[a.id])
            gy.append(q)
            xs.append(final_ranks[a.id])
            ys.append(q)
    per_good, per_good_avg = pearson_by_good(
        {g: WeightedSample(x, y) for g, (x, y) in by_good.items()})
    xs = np.asarray(xs)
    ys = np.asarray(ys)

    honest_rows = honest[ledger.rater] if len(ledger) else np.zeros(0, dtype=bool)
    util = utility(ledger.rating[honest_rows]) if honest_rows.any() else math.nan

    n = len(agents)
    received = np.bincount(ledger.ratee, weights=ledger.value, minlength=n)
    spent = np.bincount(ledger.rater, weights=ledger.value, minlength=n)
    econ = [AgentEconomics(a.id, float(received[a.id]), float(spent[a.id]),
                           float(np.mean(list(a.quality.values()))), float(final_ranks[a.id]))
            for a in agents if a.honest and a.is_supplier]
    ineq = inequity(econ) if len(econ) >= 2 else math.nan

    return MetricsReport(
        utility=util,
        inequity=ineq,
        pccw_overall=_safe_pearson(xs, ys),
        pccw_low_weighted=_safe_pearson(xs, ys, equity_weights(xs, "low")),
        pccw_high_weighted=_safe_pearson(xs, ys, equity_weights(xs, "high")),
        pearson_by_good=per_good,
        pearson_by_good_avg=per_good_avg,
        loss_to_scam=loss_to_scam(ledger, np.flatnonzero(supplier & ~honest),
                                  np.flatnonzero(consumer & honest)),
    )
