"""Ready-made market configurations for the two reference experiments.

experiment1
    Consumer marketplace: nobody both buys and sells, five scam suppliers
    backed by fifty fake raters, consumers pick uniformly among suppliers
    whose reputation clears 0.3 and re-shop after every purchase that was
    not perfect.
experiment2-wta / experiment2-roulette
    B2B-style market where 90% of agents both buy and sell and consumers
    stay with any supplier rated at least 0.6.  The two presets differ only in
    how new suppliers are chosen.
"""
import dataclasses

from .reputation import ReputationParams
from .simulator import MarketConfig

REPUTATION = ReputationParams(
    default_rank=0.5,
    conservatism=0.9,
    logarithmic_ratings=True,
    decay_value=0.3,
)

_COMMON = dict(
    n_agents=1000,
    n_goods=10,
    n_days=183,
    supplier_share=0.1,
    scam_supplier_count=5,
    scam_rater_count=50,
    target_volume_ratio=50.0,
    threshold=0.3,
    shopping_probability=0.3,
    price=10.0,
    rating_noise_sd=0.15,
    quality_mean=0.6,
    quality_sd=0.2,
    reputation_params=REPUTATION,
)

PRESETS = {
    "experiment1": MarketConfig(
        overlap_fraction=0.0, strategy="thresholded_random", satisfaction_threshold=1.0, **_COMMON),
    "experiment2-wta": MarketConfig(
        overlap_fraction=0.9, strategy="winner_take_all", satisfaction_threshold=0.6, **_COMMON),
    "experiment2-roulette": MarketConfig(
        overlap_fraction=0.9, strategy="roulette", satisfaction_threshold=0.6, **_COMMON),
}


def preset(name: str, **overrides) -> MarketConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return dataclasses.replace(base, **overrides) if overrides else base
