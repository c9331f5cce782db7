"""Labeled random sub-streams.

Every consumer (scene, init, acquisition, surrogate, ...) gets its own stream
derived from one master seed, so adding a consumer never perturbs the others.
"""
import zlib

import numpy as np


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _label_key(label)]))


def child_seed(seed: int, label: str) -> int:
    """Deterministic 32-bit integer seed for ``label`` under ``seed``."""
    ss = np.random.SeedSequence([int(seed), _label_key(label)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
