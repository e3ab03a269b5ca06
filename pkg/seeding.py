"""Per-stage random generators derived from one global seed.

Stage `k` of a run seeded with `s` draws from Philox keyed by
SeedSequence([s, k]); the stage ids are fixed in config.SEED_STAGES.
"""
import numpy as np

from config import SEED_STAGES


def make_rng(seed: int, stage: str = 'synth', *extra: int) -> np.random.Generator:
    if stage not in SEED_STAGES:
        raise KeyError(f"unknown seed stage '{stage}'")
    entropy = [int(seed), SEED_STAGES[stage], *[int(e) for e in extra]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
