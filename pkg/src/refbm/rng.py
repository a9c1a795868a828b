"""Deterministic stream derivation for parallel Monte Carlo.

Every stochastic routine derives its generator from (master seed, domain
tag, *indices) through a counter-based Philox bit generator, so replicate
fan-out is reproducible regardless of scheduling and chunk results can be
reduced in index order.
"""

import numpy as np

# Domain tags keep unrelated experiments on disjoint streams even when they
# share a master seed.
DOMAIN_FBM = 1
DOMAIN_PASSAGE = 2
DOMAIN_RUIN = 3
DOMAIN_CONSTANTS = 4
DOMAIN_FIELD = 5

# Paths per work chunk. Fixed (not machine-dependent) so that outputs are a
# pure function of (seed, config).
CHUNK = 1024


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the given (seed, index...) coordinates."""
    if master_seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(entropy=(int(master_seed),) + tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    """Split `total` replicates into fixed-size chunks (last may be short)."""
    if total <= 0:
        return []
    full, rem = divmod(total, chunk)
    return [chunk] * full + ([rem] if rem else [])
