"""Agent-based market with reputation-guided supplier choice.

Every day each honest consumer draws a shopping list, drops suppliers that
left it unsatisfied, picks new suppliers for the goods it has none for (by
reputation, or blindly in the baseline), buys and rates.  Colluding scam raters
then post fake maximal ratings for scam suppliers, throttled to a fixed share
of honest volume, and the day's ratings feed the rank update.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .ledger import Ledger
from .metrics import MetricsReport, market_report
from .reputation import RankMap, RatedTransaction, ReputationParams, update_dense

STRATEGIES = {
    "winner_take_all": _kernels.WTA,
    "roulette": _kernels.ROULETTE,
    "thresholded_random": _kernels.THRESHOLDED,
    "none": _kernels.RANDOM,
}

QUALITY_FLOOR = 0.01


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    id: int
    is_consumer: bool
    is_supplier: bool
    honest: bool = True
    quality: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class MarketConfig:
    """Complete description of one market run.

    ``supplier_share`` splits the agents that are not both consumer and
    supplier into pure suppliers (this fraction) and pure consumers.  ``price``
    is a single price for every good or one price per good.
    """

    n_agents: int = 1000
    n_goods: int = 10
    n_days: int = 183
    overlap_fraction: float = 0.0
    supplier_share: float = 0.1
    goods_per_supplier: int = 1
    scam_supplier_count: int = 5
    scam_rater_count: int = 50
    target_volume_ratio: float = 50.0
    strategy: str = "roulette"
    threshold: float = 0.5
    satisfaction_threshold: float = 0.5
    shopping_probability: float = 0.3
    price: Union[float, Tuple[float, ...]] = 10.0
    rating_noise_sd: float = 0.1
    quality_mean: float = 0.6
    quality_sd: float = 0.2
    scam_quality: float = 0.05
    reputation_params: ReputationParams = ReputationParams()
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.price, list):
            object.__setattr__(self, "price", tuple(self.price))
        if isinstance(self.reputation_params, dict):
            object.__setattr__(self, "reputation_params", ReputationParams(**self.reputation_params))
        self.validate()

    def validate(self):
        if self.n_agents < 2:
            raise ConfigError("n_agents must be >= 2")
        if self.n_goods < 1:
            raise ConfigError("n_goods must be >= 1")
        if self.n_days < 0:
            raise ConfigError("n_days must be >= 0")
        if not 1 <= self.goods_per_supplier <= self.n_goods:
            raise ConfigError("goods_per_supplier must lie in [1, n_goods]")
        if self.scam_supplier_count < 0 or self.scam_rater_count < 0:
            raise ConfigError("scam counts must be >= 0")
        if self.scam_supplier_count + self.scam_rater_count > self.n_agents - 2:
            raise ConfigError("scam cohorts leave fewer than two honest agents")
        if (self.scam_supplier_count == 0) != (self.scam_rater_count == 0) and not math.isinf(
                self.target_volume_ratio):
            raise ConfigError("scam activity needs both scam suppliers and scam raters")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {sorted(STRATEGIES)}")
        for name in ("overlap_fraction", "supplier_share", "threshold",
                     "satisfaction_threshold", "shopping_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not self.target_volume_ratio > 0:
            raise ConfigError("target_volume_ratio must be > 0")
        if self.rating_noise_sd < 0 or self.quality_sd < 0:
            raise ConfigError("standard deviations must be >= 0")
        if not 0.0 < self.scam_quality <= 1.0:
            raise ConfigError("scam_quality must lie in (0, 1]")
        prices = self.prices()
        if len(prices) != self.n_goods or np.any(prices <= 0):
            raise ConfigError("price must be positive, one value or one per good")

    def prices(self) -> np.ndarray:
        if isinstance(self.price, tuple):
            return np.asarray(self.price, dtype=np.float64)
        return np.full(self.n_goods, float(self.price))


@dataclass
class SimulationResult:
    config: MarketConfig
    agents: List[AgentSpec]
    ledger: Ledger
    rank_history: List[RankMap]
    final_ranks: np.ndarray
    metrics: MetricsReport


def make_rngs(seed: int):
    """Independent generators for population, trading and scam injection."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


# --------------------------------------------------------------------------
# population


def role_counts(config: MarketConfig) -> Dict[str, int]:
    honest = config.n_agents - config.scam_supplier_count - config.scam_rater_count
    both = min(honest, int(round(config.overlap_fraction * config.n_agents)))
    rest = honest - both
    pure_sup = int(round(config.supplier_share * rest))
    return {"both": both, "supplier": pure_sup, "consumer": rest - pure_sup,
            "scam_supplier": config.scam_supplier_count, "scam_rater": config.scam_rater_count}


def init_population(config: MarketConfig, rng: np.random.Generator) -> List[AgentSpec]:
    """Assign roles to shuffled ids and draw per-good qualities.

    Honest qualities are Normal(quality_mean, quality_sd) clipped into
    (0, 1]; scam suppliers get ``scam_quality``.  Goods are dealt round-robin
    so every good has about the same number of suppliers.
    """
    counts = role_counts(config)
    if counts["both"] + counts["supplier"] == 0 or counts["both"] + counts["consumer"] == 0:
        raise ConfigError("population needs at least one honest consumer and one honest supplier")
    roles = (["both"] * counts["both"] + ["supplier"] * counts["supplier"]
             + ["consumer"] * counts["consumer"] + ["scam_supplier"] * counts["scam_supplier"]
             + ["scam_rater"] * counts["scam_rater"])
    order = rng.permutation(config.n_agents)
    role_of = [None] * config.n_agents
    for agent_id, role in zip(order.tolist(), roles):
        role_of[agent_id] = role

    n_honest_sup = counts["both"] + counts["supplier"]
    draws = rng.normal(config.quality_mean, config.quality_sd,
                       size=(n_honest_sup, config.goods_per_supplier))
    draws = np.clip(draws, QUALITY_FLOOR, 1.0)

    agents = []
    k_honest = k_scam = 0
    for agent_id, role in enumerate(role_of):
        quality = {}
        if role in ("both", "supplier"):
            for j in range(config.goods_per_supplier):
                quality[(k_honest + j) % config.n_goods] = float(draws[k_honest, j])
            k_honest += 1
        elif role == "scam_supplier":
            quality[k_scam % config.n_goods] = float(config.scam_quality)
            k_scam += 1
        agents.append(AgentSpec(
            id=agent_id,
            is_consumer=role in ("both", "consumer", "scam_rater"),
            is_supplier=role in ("both", "supplier", "scam_supplier"),
            honest=not role.startswith("scam"),
            quality=quality,
        ))
    return agents


# --------------------------------------------------------------------------
# single-step operations


def shopping_list(consumer: AgentSpec, config: MarketConfig, rng: np.random.Generator) -> List[int]:
    if not consumer.is_consumer:
        raise ValueError(f"agent {consumer.id} is not a consumer")
    return np.flatnonzero(rng.random(config.n_goods) < config.shopping_probability).tolist()


def drop_unsatisfying_suppliers(memory: Dict[int, Tuple[int, float]],
                                config: MarketConfig) -> Dict[int, Tuple[int, float]]:
    """Keep only bindings whose last rating reached the satisfaction threshold."""
    return {g: (s, r) for g, (s, r) in memory.items() if r >= config.satisfaction_threshold}


def select_supplier(good: int, candidates: Sequence[int], ranks: RankMap, strategy: str,
                    rng: np.random.Generator, *, threshold: float = 0.5,
                    default_rank: float = 0.5, avoid=()) -> int:
    """Pick one supplier of ``good`` from ``candidates``.

    Unranked candidates count as ``default_rank``.  ``avoid`` lists suppliers
    the consumer already had a bad experience with; only the ``none`` strategy
    consults it.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    cands = sorted(set(int(c) for c in candidates))
    if not cands:
        raise ValueError(f"no candidate suppliers for good {good}")
    local = np.arange(len(cands), dtype=np.int64)
    code = STRATEGIES[strategy]
    if code == _kernels.RANDOM:
        r = np.zeros(len(cands))
    else:
        r = np.array([ranks.get(c, default_rank) for c in cands], dtype=np.float64)
    bad = set(avoid)
    avoid_row = np.array([[c in bad for c in cands]], dtype=bool)
    pick = _kernels.select_batch(
        code, np.array([0, len(cands)], dtype=np.int64), local, r,
        np.zeros(1, dtype=np.int64), np.full(1, -1, dtype=np.int64), np.zeros(1, dtype=np.int64),
        rng.random(1), float(threshold), avoid_row)
    return cands[int(pick[0])]


def _rate(quality, dishonest_pair, noise):
    return np.where(dishonest_pair, 1.0, np.clip(quality + noise, 0.0, 1.0))


def transact_and_rate(consumer: AgentSpec, supplier: AgentSpec, good: int, config: MarketConfig,
                      rng: np.random.Generator, day: int = 0) -> RatedTransaction:
    if good not in supplier.quality:
        raise ValueError(f"agent {supplier.id} does not supply good {good}")
    collusion = not consumer.honest and not supplier.honest
    noise = rng.normal(0.0, config.rating_noise_sd) if config.rating_noise_sd > 0 else 0.0
    rating = float(_rate(supplier.quality[good], collusion, noise))
    return RatedTransaction(day, consumer.id, supplier.id, good,
                            float(config.prices()[good]), rating)


def inject_scam_activity(day: int, config: MarketConfig, rng: np.random.Generator, *,
                         honest_volume: float, scam_volume: float,
                         scam_suppliers: Sequence[AgentSpec], scam_raters: Sequence[int]) -> Ledger:
    """Fake maximal ratings from scam raters to scam suppliers.

    Emits as many fake purchases as fit while cumulative honest volume stays at
    least ``target_volume_ratio`` times cumulative scam volume.
    ``honest_volume`` must already include today's honest trades.
    """
    if not scam_suppliers or not len(scam_raters) or math.isinf(config.target_volume_ratio):
        return Ledger()
    prices = config.prices()
    budget = honest_volume / config.target_volume_ratio * (1.0 - 1e-12) - scam_volume
    order = rng.permutation(len(scam_suppliers))
    ratees, goods, values = [], [], []
    spent = 0.0
    while True:
        added = False
        for k in order.tolist():
            s = scam_suppliers[k]
            g = min(s.quality)
            if spent + prices[g] > budget:
                continue
            ratees.append(s.id)
            goods.append(g)
            values.append(prices[g])
            spent += prices[g]
            added = True
        if not added:
            break
    n = len(ratees)
    raters = np.asarray(scam_raters, dtype=np.int64)[rng.integers(0, len(scam_raters), size=n)]
    return Ledger(day=np.full(n, day), rater=raters, ratee=ratees, good=goods,
                  value=values, rating=np.ones(n))


# --------------------------------------------------------------------------
# full run


def _candidate_table(agents, n_goods):
    per_good = [[] for _ in range(n_goods)]
    for a in agents:
        for g in a.quality:
            per_good[g].append(a.id)
    ptr = np.zeros(n_goods + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(p) for p in per_good])
    ids = np.array([i for p in per_good for i in sorted(p)], dtype=np.int64)
    return ptr, ids, per_good


def run_simulation(config: MarketConfig) -> SimulationResult:
    """Run the daily market loop for ``config.n_days`` days.

    Deterministic in ``config``: the seed drives three independent streams
    (population, trading, scam injection).
    """
    config.validate()
    rng_pop, rng, rng_scam = make_rngs(config.seed)
    agents = init_population(config, rng_pop)
    params = config.reputation_params
    code = STRATEGIES[config.strategy]
    n, n_goods = config.n_agents, config.n_goods
    prices = config.prices()

    quality = np.zeros((n, n_goods))
    for a in agents:
        for g, q in a.quality.items():
            quality[a.id, g] = q
    shoppers = np.array([a.id for a in agents if a.honest and a.is_consumer], dtype=np.int64)
    scam_suppliers = [a for a in agents if not a.honest and a.is_supplier]
    scam_raters = [a.id for a in agents if not a.honest and a.is_consumer]
    supplier_flag = np.zeros(n, dtype=bool)
    supplier_flag[[a.id for a in agents if a.is_supplier]] = True
    cand_ptr, cand_ids, per_good = _candidate_table(agents, n_goods)

    # a shopper can buy good g unless it is the only supplier of g
    can_buy = np.array([[len(per_good[g]) - (quality[c, g] > 0) > 0 for g in range(n_goods)]
                        for c in shoppers], dtype=bool).reshape(len(shoppers), n_goods)
    bound = np.full((len(shoppers), n_goods), -1, dtype=np.int64)
    last_rating = np.zeros((len(shoppers), n_goods))
    avoid = (np.zeros((len(shoppers), n), dtype=bool) if code == _kernels.RANDOM
             else np.zeros((1, 1), dtype=bool))
    blind = np.zeros(n)

    prev = np.zeros(n)
    known = np.zeros(n, dtype=bool)
    honest_volume = scam_volume = 0.0
    days: List[Ledger] = []
    history: List[RankMap] = []
    for day in range(config.n_days):
        held = bound >= 0
        dropped = held & (last_rating < config.satisfaction_threshold)
        if code == _kernels.RANDOM:
            rows, goods = np.nonzero(dropped)
            avoid[rows, bound[rows, goods]] = True
        bound[dropped] = -1

        shop = (rng.random(bound.shape) < config.shopping_probability) & can_buy
        rows, goods = np.nonzero(shop & (bound < 0))
        if rows.size:
            sel_ranks = blind if code == _kernels.RANDOM else np.where(known, prev, params.default_rank)
            u = rng.random(rows.size)
            bound[rows, goods] = _kernels.select_batch(
                code, cand_ptr, cand_ids, sel_ranks, goods.astype(np.int64), shoppers[rows],
                rows.astype(np.int64), u, float(config.threshold), avoid)

        rows, goods = np.nonzero(shop)
        sellers = bound[rows, goods]
        noise = (rng.normal(0.0, config.rating_noise_sd, rows.size) if config.rating_noise_sd > 0
                 else np.zeros(rows.size))
        rating = _rate(quality[sellers, goods], False, noise)
        last_rating[rows, goods] = rating
        honest = Ledger(day=np.full(rows.size, day), rater=shoppers[rows], ratee=sellers,
                        good=goods, value=prices[goods], rating=rating)
        honest_volume += float(honest.value.sum())
        scam = inject_scam_activity(day, config, rng_scam, honest_volume=honest_volume,
                                    scam_volume=scam_volume, scam_suppliers=scam_suppliers,
                                    scam_raters=scam_raters)
        scam_volume += float(scam.value.sum())
        today = Ledger.concat([honest, scam])
        days.append(today)

        prev, known = update_dense(today.rater, today.ratee, today.value, today.rating,
                                   prev, known, params)
        idx = np.flatnonzero(known)
        history.append(dict(zip(idx.tolist(), prev[idx].tolist())))

    ledger = Ledger.concat(days)
    final = np.where(known, prev, params.default_rank)
    return SimulationResult(config=config, agents=agents, ledger=ledger, rank_history=history,
                            final_ranks=final, metrics=market_report(ledger, agents, final))


def replay_ranks(ledger: Ledger, n_agents: int, n_days: int,
                 params: ReputationParams) -> Tuple[List[RankMap], np.ndarray, np.ndarray]:
    """Recompute the daily rank history from a stored ledger."""
    prev = np.zeros(n_agents)
    known = np.zeros(n_agents, dtype=bool)
    bounds = ledger.day_bounds(n_days)
    history = []
    for day in range(n_days):
        t = ledger[bounds[day]:bounds[day + 1]]
        prev, known = update_dense(t.rater, t.ratee, t.value, t.rating, prev, known, params)
        idx = np.flatnonzero(known)
        history.append(dict(zip(idx.tolist(), prev[idx].tolist())))
    return history, prev, known
