"""Training data for the surrogates and input embeddings."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config_space import SpaceSpec


@dataclass
class TrainingSet:
    """Encoded inputs, slot indices and target vectors, with optional FIFO capacity.

    ``capacity = 0`` keeps everything; otherwise only the most recent
    ``capacity`` samples survive each append.
    """

    dim: int
    n_outputs: int
    capacity: int = 0
    inputs: np.ndarray = field(init=False)
    times: np.ndarray = field(init=False)
    targets: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.inputs = np.zeros((0, self.dim), dtype=np.int64)
        self.times = np.zeros(0, dtype=np.int64)
        self.targets = np.zeros((0, self.n_outputs))

    def __len__(self) -> int:
        return len(self.targets)

    def append(self, x, y, t: int = 0) -> None:
        x = np.asarray(x, dtype=np.int64).reshape(-1, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1, self.n_outputs)
        if len(x) != len(y):
            raise ValueError("inputs and targets differ in length")
        self.inputs = np.concatenate([self.inputs, x])
        self.times = np.concatenate([self.times, np.full(len(x), t, dtype=np.int64)])
        self.targets = np.concatenate([self.targets, y])
        if self.capacity and len(self.targets) > self.capacity:
            keep = slice(len(self.targets) - self.capacity, None)
            self.inputs = self.inputs[keep]
            self.times = self.times[keep]
            self.targets = self.targets[keep]


def one_hot(coords: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Concatenated one-hot blocks, one block per encoded coordinate."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    sizes = space.upper - space.lower + 1
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    out = np.zeros((len(coords), int(sizes.sum())))
    rows = np.repeat(np.arange(len(coords)), coords.shape[1])
    out[rows, (coords - space.lower + offsets).ravel()] = 1.0
    return out


def embed(coords: np.ndarray, space: SpaceSpec, kind: str = "ordinal") -> np.ndarray:
    if kind == "ordinal":
        return np.atleast_2d(np.asarray(coords, dtype=float))
    if kind == "one-hot":
        return one_hot(coords, space)
    raise ValueError(f"unknown embedding {kind!r}")


def embedding_ranges(space: SpaceSpec, kind: str = "ordinal") -> np.ndarray:
    if kind == "ordinal":
        return np.maximum(space.upper - space.lower, 1).astype(float)
    if kind == "one-hot":
        return np.ones(int((space.upper - space.lower + 1).sum()))
    raise ValueError(f"unknown embedding {kind!r}")


def standardize(y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise (y - mean) / std; constant columns get std 1."""
    mean = y.mean(axis=0)
    std = y.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (y - mean) / std, mean, std
