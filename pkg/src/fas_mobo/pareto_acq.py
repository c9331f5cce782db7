"""Pareto archive, exact 2-D hypervolume and Monte-Carlo EHVI through the known map."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Protocol

import numpy as np

from . import _hv
from .config_space import Configuration, SpaceSpec, is_feasible
from .isac_physics import ObjectiveVector

DEFAULT_REF = (0.0, 0.0)


def dominates(a, b) -> bool:
    """a >= b componentwise with at least one strict inequality."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a >= b) and np.any(a > b))


@dataclass(frozen=True)
class ArchiveEntry:
    f: ObjectiveVector
    config: Configuration | None
    eval_idx: int

    @property
    def config_id(self) -> str:
        return "" if self.config is None else self.config.key


class InsertResult(NamedTuple):
    archive: "ParetoArchive"
    inserted: bool
    hvi: float


@dataclass(frozen=True)
class ParetoArchive:
    """Mutually non-dominated entries in insertion order, bounded below by ``ref``."""

    entries: tuple[ArchiveEntry, ...] = ()
    ref: tuple[float, float] = DEFAULT_REF

    def __len__(self) -> int:
        return len(self.entries)

    def points(self) -> np.ndarray:
        return np.array([[e.f.r_c, e.f.r_s] for e in self.entries], dtype=float).reshape(-1, 2)

    def hypervolume(self) -> float:
        return _hv.hypervolume_2d(self.points(), self.ref)

    def configs(self) -> list[Configuration]:
        return [e.config for e in self.entries]

    def insert(self, f, config: Configuration | None, eval_idx: int) -> InsertResult:
        return archive_insert(self, f, config, eval_idx)


def archive_insert(archive: ParetoArchive, f, config: Configuration | None, eval_idx: int) -> InsertResult:
    """Add ``f`` unless an incumbent weakly dominates it (duplicates are rejected too).

    Points that the reference point weakly dominates never enter the archive.
    """
    f = ObjectiveVector(float(f[0]), float(f[1]))
    if not (np.isfinite(f.r_c) and np.isfinite(f.r_s)):
        raise ValueError(f"objective vector must be finite, got {tuple(f)}")
    ref = np.asarray(archive.ref, dtype=float)
    if np.all(np.asarray(f) <= ref):
        return InsertResult(archive, False, 0.0)
    pts = archive.points()
    if len(pts) and np.any(np.all(pts >= np.asarray(f), axis=1)):
        return InsertResult(archive, False, 0.0)
    hvi = float(_hv.hvi_batch(np.asarray(f), pts, ref))
    survivors = tuple(e for e in archive.entries if not dominates(f, e.f))
    new = ParetoArchive(survivors + (ArchiveEntry(f, config, int(eval_idx)),), archive.ref)
    return InsertResult(new, True, hvi)


def archive_from_points(points, ref=DEFAULT_REF, configs=None) -> ParetoArchive:
    archive = ParetoArchive(ref=tuple(ref))
    for i, p in enumerate(np.asarray(points, dtype=float).reshape(-1, 2)):
        archive = archive_insert(archive, p, None if configs is None else configs[i], i).archive
    return archive


def hypervolume_2d(archive_or_points, ref=None) -> float:
    """Exact dominated area; accepts an archive or an (n, 2) array plus ``ref``."""
    if isinstance(archive_or_points, ParetoArchive):
        return archive_or_points.hypervolume()
    return _hv.hypervolume_2d(archive_or_points, DEFAULT_REF if ref is None else ref)


def exclusive_contributions(archive: ParetoArchive) -> np.ndarray:
    return _hv.exclusive_contributions(archive.points(), archive.ref)


def write_archive_csv(archive: ParetoArchive, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eval_idx", "config_id", "r_c", "r_s"])
        for e in archive.entries:
            writer.writerow([e.eval_idx, e.config_id, repr(e.f.r_c), repr(e.f.r_s)])


# -- acquisition --------------------------------------------------------------


class PosteriorSampler(Protocol):
    def draw_eps(self, n_mc: int, rng: np.random.Generator) -> np.ndarray: ...

    def sample(self, x: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Posterior draws of shape (n_mc, n_points, n_outputs)."""
        ...


def identity_map(y: np.ndarray) -> np.ndarray:
    return y


def ehvi_batch(
    model: PosteriorSampler,
    x: np.ndarray,
    archive: ParetoArchive,
    eps: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray] = identity_map,
) -> np.ndarray:
    """Sample-average EHVI for each row of ``x`` under shared draws ``eps``."""
    draws = model.sample(np.atleast_2d(x), eps)
    objectives = g(draws)
    hvi = _hv.hvi_batch(objectives, archive.points(), archive.ref)
    return hvi.mean(axis=0)


def ehvi_mc(
    model: PosteriorSampler,
    x: np.ndarray,
    archive: ParetoArchive,
    n_mc: int,
    rng: np.random.Generator,
    g: Callable[[np.ndarray], np.ndarray] = identity_map,
) -> float:
    """EHVI of a single encoded point with ``n_mc`` fresh posterior draws."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    eps = model.draw_eps(n_mc, rng)
    return float(ehvi_batch(model, np.asarray(x).reshape(1, -1), archive, eps, g)[0])


def constrained_acq(cfg: Configuration, space: SpaceSpec, raw_ehvi: float) -> float:
    """Zero for physically unrealizable configurations, the raw value otherwise."""
    return float(raw_ehvi) if is_feasible(cfg, space) else 0.0
