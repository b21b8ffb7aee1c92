"""Weighted liquid rank: one period of rated transactions plus the previous
period's ranks in, new ranks out.

The public functions work on ``{participant_id: rank}`` dictionaries.  They are
thin wrappers over dense-array versions (``*_dense``) that the simulator calls
directly, so both routes run the same arithmetic.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels

RankMap = Dict[int, float]

NORMALIZATIONS = ("max", "minmax")


@dataclass(frozen=True)
class RatedTransaction:
    day: int
    rater: int
    ratee: int
    good: int
    value: float
    rating: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"transaction value must be > 0, got {self.value}")
        if not 0.0 <= self.rating <= 1.0:
            raise ValueError(f"rating must lie in [0, 1], got {self.rating}")
        if self.rater == self.ratee:
            raise ValueError(f"participant {self.rater} cannot rate itself")
        if self.day < 0:
            raise ValueError(f"day must be >= 0, got {self.day}")


@dataclass(frozen=True)
class ReputationParams:
    """Knobs of the rank update.

    ``default_rank`` stands in for raters (and old ranks) unseen last period,
    ``decay_value`` is the differential given to participants nobody rated this
    period, ``conservatism`` is the weight kept on the old rank.
    """

    default_rank: float = 0.5
    conservatism: float = 0.5
    logarithmic_ratings: bool = True
    decay_value: float = 0.5
    normalization: str = "max"

    def __post_init__(self):
        for name in ("default_rank", "conservatism", "decay_value"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def rating_weight(value: float, params: ReputationParams) -> float:
    """Financial weight of one rating: the value itself, or log10(1 + value)."""
    if not value > 0:
        raise ValueError(f"transaction value must be > 0, got {value}")
    if params.logarithmic_ratings:
        return float(np.log10(1.0 + value))
    return float(value)


def rating_weights(values: np.ndarray, params: ReputationParams) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.size and not np.all(values > 0):
        raise ValueError("transaction values must be > 0")
    if params.logarithmic_ratings:
        return np.log10(1.0 + values)
    return values


def normalize(values: np.ndarray, method: str = "max") -> np.ndarray:
    """Map non-negative scores onto [0, 1].

    ``max`` divides by the largest entry; ``minmax`` also subtracts the
    smallest.  An all-zero input stays all zero.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values.copy()
    top = values.max()
    if method == "max":
        if top <= 0.0:
            return np.zeros_like(values)
        return values / top
    low = values.min()
    if top <= low:
        return np.where(values > 0.0, 1.0, 0.0)
    return (values - low) / (top - low)


# --------------------------------------------------------------------------
# dense path: participants are indices 0..n-1, ``known`` marks who has a rank


def differential_dense(rater, ratee, value, rating, prev, known, params):
    """Normalized per-ratee sums of rater_rank * rating * weight.

    Returns ``(differential, rated)`` where ``rated`` flags indices with at
    least one incoming transaction; ``differential`` is zero elsewhere.
    """
    n = prev.shape[0]
    rater = np.asarray(rater, dtype=np.int64)
    ratee = np.asarray(ratee, dtype=np.int64)
    rater_value = np.where(known[rater], prev[rater], params.default_rank)
    contrib = rater_value * np.asarray(rating, dtype=np.float64) * rating_weights(value, params)
    raw = _kernels.scatter_add(ratee, contrib, n)
    rated = np.zeros(n, dtype=bool)
    rated[ratee] = True
    diff = np.zeros(n, dtype=np.float64)
    diff[rated] = normalize(raw[rated], params.normalization)
    return diff, rated


def blend_dense(prev, known, diff, rated, params, members=None):
    """Convex blend of old and differential ranks, renormalized over ``members``.

    ``members`` defaults to the old known set plus every rated index.  Returns
    ``(ranks, members)``.
    """
    if members is None:
        members = known | rated
    old = np.where(known, prev, params.default_rank)
    d = np.where(rated, diff, params.decay_value)
    c = params.conservatism
    blended = c * old + (1.0 - c) * d
    out = np.zeros(prev.shape[0], dtype=np.float64)
    out[members] = normalize(blended[members], params.normalization)
    return out, members


def update_dense(rater, ratee, value, rating, prev, known, params):
    diff, rated = differential_dense(rater, ratee, value, rating, prev, known, params)
    return blend_dense(prev, known, diff, rated, params)


# --------------------------------------------------------------------------
# dictionary API


def _columns(transactions: Sequence[RatedTransaction]):
    rater = np.fromiter((t.rater for t in transactions), dtype=np.int64, count=len(transactions))
    ratee = np.fromiter((t.ratee for t in transactions), dtype=np.int64, count=len(transactions))
    value = np.fromiter((t.value for t in transactions), dtype=np.float64, count=len(transactions))
    rating = np.fromiter((t.rating for t in transactions), dtype=np.float64, count=len(transactions))
    return rater, ratee, value, rating


def _densify(ids: Iterable[int], *maps: RankMap) -> Tuple[List[int], Dict[int, int], List[np.ndarray]]:
    order = sorted(set(ids))
    index = {p: i for i, p in enumerate(order)}
    dense = []
    for m in maps:
        vals = np.zeros(len(order), dtype=np.float64)
        mask = np.zeros(len(order), dtype=bool)
        for p, r in m.items():
            vals[index[p]] = r
            mask[index[p]] = True
        dense.append((vals, mask))
    return order, index, dense


def compute_differential_ranks(transactions: Sequence[RatedTransaction], prev_ranks: RankMap,
                               params: ReputationParams) -> RankMap:
    """Differential ranks of every ratee that received at least one rating."""
    if not transactions:
        return {}
    rater, ratee, value, rating = _columns(transactions)
    order, index, [(prev, known)] = _densify(
        list(prev_ranks) + rater.tolist() + ratee.tolist(), prev_ranks)
    to_idx = np.vectorize(index.__getitem__, otypes=[np.int64])
    diff, rated = differential_dense(to_idx(rater), to_idx(ratee), value, rating, prev, known, params)
    return {order[i]: float(diff[i]) for i in np.flatnonzero(rated)}


def blend_ranks(prev_ranks: RankMap, differential: RankMap, params: ReputationParams,
                all_known: Optional[Iterable[int]] = None) -> RankMap:
    """Blend last period's ranks with this period's differential ranks.

    Participants in ``all_known`` missing from ``prev_ranks`` start from
    ``default_rank``; those missing from ``differential`` decay towards
    ``decay_value``.
    """
    if all_known is None:
        all_known = set(prev_ranks) | set(differential)
    all_known = set(all_known)
    missing = (set(prev_ranks) | set(differential)) - all_known
    if missing:
        raise ValueError(f"all_known lacks participants {sorted(missing)[:5]}")
    if not all_known:
        return {}
    order, _, [(prev, known), (diff, rated)] = _densify(all_known, prev_ranks, differential)
    ranks, _ = blend_dense(prev, known, diff, rated, params,
                           members=np.ones(len(order), dtype=bool))
    return {p: float(ranks[i]) for i, p in enumerate(order)}


def update_ranks(transactions: Sequence[RatedTransaction], prev_ranks: RankMap,
                 params: ReputationParams) -> RankMap:
    """One full period of the weighted liquid rank update."""
    diff = compute_differential_ranks(transactions, prev_ranks, params)
    all_known = set(prev_ranks) | {t.ratee for t in transactions}
    return blend_ranks(prev_ranks, diff, params, all_known)
