"""Deterministic derivation of child seeds from a base seed.

Every stochastic stage (mask streams per pass, per-rate re-sampling, repeat
splits) keys its stream off the stage's integer coordinates, so results do not
depend on evaluation order or thread scheduling.
"""

from __future__ import annotations

import numpy as np


def derive_seed(*components: int) -> int:
    """Hash integer coordinates into one well-mixed unsigned seed."""
    seq = np.random.SeedSequence([int(c) for c in components])
    return int(seq.generate_state(1, np.uint64)[0])


def pass_streams(base_seed: int, n_passes: int) -> list[np.random.SeedSequence]:
    """Independent child streams keyed by (base_seed, pass index)."""
    return np.random.SeedSequence(int(base_seed)).spawn(n_passes)
