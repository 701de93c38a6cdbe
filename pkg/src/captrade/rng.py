"""Seeded, counter-based random streams.

Every stochastic routine draws from ``make_rng(seed, *stream)``: a Philox
generator keyed by a ``SeedSequence`` whose spawn key is the stream path.
Distinct paths give statistically independent streams and the same path
always reproduces the same draws, independent of call order elsewhere.

Stream roots in use:

=========  ==========================================
``0, t``   SCST sampling at policy step ``t``
``1, t``   SCST snapshot caption sampling at step ``t``
``2``      Monte-Carlo KL sampling
``3``      AGMM kernel selection
``4, i``   ``kl-check`` random GMM pair ``i``
=========  ==========================================
"""

import numpy as np

SCST_STEP = 0
SCST_SNAPSHOT = 1
MC_KL = 2
AGMM_SELECT = 3
KL_CHECK_CASE = 4


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
