"""Columnar transaction store.

A six-month market run produces a few hundred thousand purchases; keeping
them as numpy columns rather than objects keeps runs fast and lets the rank
update slice one day at a time.
"""
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List

import numpy as np

from .reputation import RatedTransaction

COLUMNS = ("day", "rater", "ratee", "good", "value", "rating")
_DTYPES = {"day": np.int64, "rater": np.int64, "ratee": np.int64, "good": np.int64,
           "value": np.float64, "rating": np.float64}


def _empty(name):
    return np.empty(0, dtype=_DTYPES[name])


@dataclass
class Ledger:
    day: np.ndarray = field(default_factory=lambda: _empty("day"))
    rater: np.ndarray = field(default_factory=lambda: _empty("rater"))
    ratee: np.ndarray = field(default_factory=lambda: _empty("ratee"))
    good: np.ndarray = field(default_factory=lambda: _empty("good"))
    value: np.ndarray = field(default_factory=lambda: _empty("value"))
    rating: np.ndarray = field(default_factory=lambda: _empty("rating"))

    def __post_init__(self):
        for name in COLUMNS:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=_DTYPES[name]))
        n = {getattr(self, name).shape[0] for name in COLUMNS}
        if len(n) != 1:
            raise ValueError("ledger columns differ in length")

    def __len__(self) -> int:
        return self.day.shape[0]

    def __iter__(self) -> Iterator[RatedTransaction]:
        for d, a, b, g, v, r in zip(self.day.tolist(), self.rater.tolist(), self.ratee.tolist(),
                                    self.good.tolist(), self.value.tolist(), self.rating.tolist()):
            yield RatedTransaction(d, a, b, g, v, r)

    def __getitem__(self, key) -> "Ledger":
        return Ledger(**{name: getattr(self, name)[key] for name in COLUMNS})

    @classmethod
    def from_transactions(cls, transactions: Iterable[RatedTransaction]) -> "Ledger":
        if isinstance(transactions, Ledger):
            return transactions
        rows = list(transactions)
        return cls(**{name: np.array([getattr(t, name) for t in rows], dtype=_DTYPES[name])
                      for name in COLUMNS})

    @classmethod
    def concat(cls, parts: List["Ledger"]) -> "Ledger":
        if not parts:
            return cls()
        return cls(**{name: np.concatenate([getattr(p, name) for p in parts]) for name in COLUMNS})

    def day_bounds(self, n_days: int) -> np.ndarray:
        """Offsets such that day ``d`` occupies rows ``[b[d], b[d+1])``.

        Requires rows sorted by day, which every ledger built by the simulator
        or read back from disk satisfies.
        """
        if len(self) and np.any(np.diff(self.day) < 0):
            raise ValueError("ledger rows are not sorted by day")
        return np.searchsorted(self.day, np.arange(n_days + 1), side="left")
