"""Deterministic random-stream derivation.

Every random draw in the package comes from a PCG64 generator keyed by the
run seed plus a structured key, so identical configurations replay identical
streams no matter how work is scheduled or how clients are ordered.  String
keys (household ids) are hashed to 128-bit integers; the small integer tags
below can therefore never collide with them.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Stream namespaces.
INIT = 1        # model initialisation
TRAIN = 2       # epoch shuffling inside a training session
SELECT = 3      # per-round client selection
FINE_TUNE = 4   # per-client fine-tuning sessions
SYNTH = 5       # synthetic load profiles
WEATHER = 6     # synthetic weather
ROUND = 7       # separates per-round training bursts
CLUSTERING = 8  # the full-participation burst that feeds clustering


def key_int(text: str) -> int:
    """Stable 128-bit integer for a string key."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:16], "big")


def stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Generator for (seed, *keys); strings are hashed, ints used as-is."""
    entropy = [int(seed)]
    for key in keys:
        entropy.append(key_int(key) if isinstance(key, str) else int(key))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
