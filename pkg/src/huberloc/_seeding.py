"""Seed derivation helpers.

Every random stream in the package is keyed by integers, so results never
depend on the order in which streams are consumed.
"""

import numpy as np


def root_seed(seed) -> int:
    """Collapse ``seed`` (int, int sequence, None, SeedSequence) into a 63-bit integer."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if seed is None or isinstance(seed, (list, tuple)):
        seed = np.random.SeedSequence(seed)
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(2, np.uint64)[0] >> np.uint64(1))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def stream(seed, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng([root_seed(seed), *(int(k) for k in keys)])


def derive(seed, *keys) -> int:
    """Integer seed for the sub-stream ``(seed, *keys)``; keep the last key nonzero."""
    return root_seed(np.random.SeedSequence([root_seed(seed), *(int(k) for k in keys)]))
