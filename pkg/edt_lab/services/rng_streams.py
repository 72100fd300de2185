"""Counter-based random streams.

Every random table is drawn from its own Philox stream keyed by
(seed, purpose, index...). A table depends only on its key, never on how many
other tables were drawn before it or on which thread drew it, so results are
bit-identical for any worker count and any strategy/sensing mode shares the same
PU path for the same seed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    INITIAL_STATE = 1
    PU_PERIODS = 2
    MISSED_DETECTION = 3
    ARRIVALS = 4
    QUEUE_INITIAL_STATE = 5
    QUEUE_PU_PERIODS = 6
    QUEUE_MISSED_DETECTION = 7
    RESAMPLE = 8


def stream(seed: int, purpose: Purpose, *index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), *(int(i) for i in index)))
    return np.random.Generator(np.random.Philox(seq))


def exponentials(gen: np.random.Generator, shape) -> np.ndarray:
    """Unit-mean exponentials by inverse CDF."""
    return -np.log1p(-gen.random(shape))
