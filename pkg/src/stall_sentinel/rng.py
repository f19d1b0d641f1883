"""Keyed deterministic random streams.

All randomness in the package flows through Philox, a counter-based
generator whose streams are fully determined by a 128-bit key. Keys are
assembled as (seed << 64) | (domain << 32) | index, so distinct domains and
per-item indices give independent, non-overlapping streams and any single
item's stream can be reproduced without replaying the others.
"""

from __future__ import annotations

import numpy as np

DOMAIN_STATIC = 1
DOMAIN_FRAME_NOISE = 2
DOMAIN_DETECTOR = 3
DOMAIN_KMEANS = 4

_KEY_MASK = (1 << 128) - 1


def keyed_rng(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Return a Generator on the Philox stream keyed by (seed, domain, index)."""
    if index < 0 or domain < 0:
        raise ValueError("domain and index must be nonnegative")
    key = ((int(seed) << 64) | (int(domain) << 32) | int(index)) & _KEY_MASK
    return np.random.Generator(np.random.Philox(key=key))
