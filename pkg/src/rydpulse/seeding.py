"""Counter-based random streams.

Every random draw in the package comes from a Philox stream whose key is
derived from ``(master_seed, domain)`` and whose counter encodes the
position of the consumer (generation, candidate, realization). Streams are
therefore independent of evaluation order and thread scheduling, and a run
can be resumed from any generation without saving generator state.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Stream domains. Keeps noise draws, re-evaluations and optimizer
# operators from ever sharing a key.
NOISE = 0
REEVALUATION = 1
VALIDATION = 2
NSGA3 = 16
CMAES = 17
NOISE_DUMP = 32

_MASK64 = (1 << 64) - 1


@lru_cache(maxsize=64)
def _key(master_seed: int, domain: int) -> tuple[int, int]:
    if master_seed < 0:
        raise ValueError(f"master_seed must be non-negative, got {master_seed}")
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(domain),))
    return tuple(int(k) for k in seq.generate_state(2, dtype=np.uint64))


def stream(master_seed: int, domain: int, *words: int) -> np.random.Generator:
    """Return a generator positioned at counter ``(0, *words)``.

    At most three counter words are accepted; the lowest word is left at
    zero so that the stream has 2**64 blocks of room before colliding with
    a neighbour.
    """
    if len(words) > 3:
        raise ValueError("at most three counter words")
    counter = np.array([0] + [int(w) & _MASK64 for w in words] + [0] * (3 - len(words)), dtype=np.uint64)
    bitgen = np.random.Philox(
        key=np.array(_key(int(master_seed), int(domain)), dtype=np.uint64), counter=counter
    )
    return np.random.Generator(bitgen)
