"""Combinatorial decision space: port selection, orientation and beam indices.

A configuration is stored in canonical form (ports sorted row-major) and maps
to an integer coordinate vector::

    [tx_r0, tx_c0, ..., rx_r0, rx_c0, ..., orientation, beam_0, ..., beam_{K-1}]

The array-level helpers (``*_coords``) operate on stacks of such vectors and
are what the optimizer uses in its inner loop; the object-level functions wrap
them for single configurations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np

from ._hv import exclusive_contributions
from .errors import EmptyArchiveError, EmptyTrustRegionError, InfeasibleConfigError, SpaceTooLargeError

Cell = tuple[int, int]

DEFAULT_REPAIR_RETRIES = 32
DEFAULT_ENUM_CAP = 1_000_000


@dataclass(frozen=True)
class SpaceSpec:
    grid_rows: int = 9
    grid_cols: int = 9
    n_tx: int = 4
    n_rx: int = 4
    n_users: int = 2
    n_orientations: int = 8
    n_beams: int = 8
    port_spacing: float = 0.5  # in wavelengths

    def __post_init__(self):
        for name in ("grid_rows", "grid_cols", "n_tx", "n_rx", "n_users", "n_orientations", "n_beams"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.n_tx + self.n_rx > self.grid_rows * self.grid_cols:
            raise ValueError("n_tx + n_rx exceeds the number of candidate ports")
        if self.n_tx < self.n_users:
            raise ValueError("n_tx must be at least n_users")
        if not self.port_spacing > 0:
            raise ValueError("port_spacing must be positive")

    @property
    def n_ports(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def n_active(self) -> int:
        return self.n_tx + self.n_rx

    @property
    def dim(self) -> int:
        return 2 * self.n_active + 1 + self.n_users

    @property
    def orientation_slot(self) -> int:
        return 2 * self.n_active

    @property
    def lower(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=np.int64)

    @property
    def upper(self) -> np.ndarray:
        hi = np.empty(self.dim, dtype=np.int64)
        hi[0 : 2 * self.n_active : 2] = self.grid_rows - 1
        hi[1 : 2 * self.n_active : 2] = self.grid_cols - 1
        hi[self.orientation_slot] = self.n_orientations - 1
        hi[self.orientation_slot + 1 :] = self.n_beams - 1
        return hi

    def orientations(self) -> list[tuple[float, float]]:
        return orientation_angles(self.n_orientations)

    def to_dict(self) -> dict:
        return {
            "grid_rows": self.grid_rows,
            "grid_cols": self.grid_cols,
            "n_tx": self.n_tx,
            "n_rx": self.n_rx,
            "n_users": self.n_users,
            "n_orientations": self.n_orientations,
            "n_beams": self.n_beams,
            "port_spacing": self.port_spacing,
        }


def orientation_angles(n: int) -> list[tuple[float, float]]:
    """(elevation, azimuth) pairs for ``n`` mechanical orientation steps.

    Even counts split over two tilts {0, pi/4}; azimuths are uniform in each.
    ``n = 8`` gives {0, pi/4} x {0, pi/2, pi, 3pi/2}.
    """
    n_el = 2 if n % 2 == 0 else 1
    n_az = n // n_el
    tilts = (0.0, math.pi / 4)[:n_el]
    return [(el, 2 * math.pi * a / n_az) for el in tilts for a in range(n_az)]


def _sorted_cells(cells) -> tuple[Cell, ...]:
    return tuple(sorted((int(r), int(c)) for r, c in cells))


@dataclass(frozen=True)
class Configuration:
    """One point of the decision space. Port lists are kept sorted row-major."""

    tx_ports: tuple[Cell, ...]
    rx_ports: tuple[Cell, ...]
    orientation_idx: int
    beam_idx: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tx_ports", _sorted_cells(self.tx_ports))
        object.__setattr__(self, "rx_ports", _sorted_cells(self.rx_ports))
        object.__setattr__(self, "orientation_idx", int(self.orientation_idx))
        object.__setattr__(self, "beam_idx", tuple(int(b) for b in self.beam_idx))

    @property
    def key(self) -> str:
        tx = "-".join(f"{r}.{c}" for r, c in self.tx_ports)
        rx = "-".join(f"{r}.{c}" for r, c in self.rx_ports)
        beams = "-".join(str(b) for b in self.beam_idx)
        return f"T{tx}_R{rx}_O{self.orientation_idx}_B{beams}"


class Verdict(NamedTuple):
    feasible: bool
    violation: str | None = None


def validate(cfg: Configuration, space: SpaceSpec) -> Verdict:
    """Check a configuration against the space; the first violated rule is reported."""
    if len(cfg.tx_ports) != space.n_tx:
        return Verdict(False, "tx-cardinality")
    if len(cfg.rx_ports) != space.n_rx:
        return Verdict(False, "rx-cardinality")
    for r, c in cfg.tx_ports + cfg.rx_ports:
        if not (0 <= r < space.grid_rows and 0 <= c < space.grid_cols):
            return Verdict(False, "port-out-of-grid")
    if len(set(cfg.tx_ports)) != len(cfg.tx_ports):
        return Verdict(False, "duplicate-tx-port")
    if len(set(cfg.rx_ports)) != len(cfg.rx_ports):
        return Verdict(False, "duplicate-rx-port")
    if set(cfg.tx_ports) & set(cfg.rx_ports):
        return Verdict(False, "tx-rx-overlap")
    if not 0 <= cfg.orientation_idx < space.n_orientations:
        return Verdict(False, "orientation-out-of-range")
    if len(cfg.beam_idx) != space.n_users:
        return Verdict(False, "beam-cardinality")
    if any(not 0 <= b < space.n_beams for b in cfg.beam_idx):
        return Verdict(False, "beam-out-of-range")
    return Verdict(True)


def is_feasible(cfg: Configuration, space: SpaceSpec) -> bool:
    return validate(cfg, space).feasible


# -- encoding ---------------------------------------------------------------


def encode(cfg: Configuration, space: SpaceSpec) -> np.ndarray:
    verdict = validate(cfg, space)
    if not verdict.feasible:
        raise InfeasibleConfigError(f"cannot encode infeasible configuration ({verdict.violation})")
    coords = [v for cell in cfg.tx_ports + cfg.rx_ports for v in cell]
    coords.append(cfg.orientation_idx)
    coords.extend(cfg.beam_idx)
    return np.asarray(coords, dtype=np.int64)


def decode(coords, space: SpaceSpec) -> Configuration:
    coords = np.asarray(coords, dtype=np.int64)
    cells = [(int(coords[2 * i]), int(coords[2 * i + 1])) for i in range(space.n_active)]
    return Configuration(
        tx_ports=tuple(cells[: space.n_tx]),
        rx_ports=tuple(cells[space.n_tx :]),
        orientation_idx=int(coords[space.orientation_slot]),
        beam_idx=tuple(int(b) for b in coords[space.orientation_slot + 1 :]),
    )


def port_cells(coords: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Flat cell ids (row * cols + col) of every active port, shape (n, N_t + N_r)."""
    coords = np.atleast_2d(coords)
    k = 2 * space.n_active
    return coords[:, 0:k:2] * space.grid_cols + coords[:, 1:k:2]


def _set_cells(coords: np.ndarray, cells: np.ndarray, space: SpaceSpec) -> None:
    k = 2 * space.n_active
    coords[:, 0:k:2] = cells // space.grid_cols
    coords[:, 1:k:2] = cells % space.grid_cols


def canonicalize_coords(coords: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Sort tx and rx port slots row-major within each row of ``coords``."""
    out = np.array(coords, dtype=np.int64, copy=True, ndmin=2)
    cells = port_cells(out, space)
    cells = np.concatenate(
        [np.sort(cells[:, : space.n_tx], axis=1), np.sort(cells[:, space.n_tx :], axis=1)], axis=1
    )
    _set_cells(out, cells, space)
    return out


def feasible_mask(coords: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Vectorized feasibility of encoded rows (bounds, distinct ports, no overlap)."""
    coords = np.atleast_2d(np.asarray(coords))
    in_bounds = np.all((coords >= space.lower) & (coords <= space.upper), axis=1)
    cells = np.sort(port_cells(coords, space), axis=1)
    distinct = np.all(np.diff(cells, axis=1) != 0, axis=1) if cells.shape[1] > 1 else np.ones(len(coords), bool)
    return in_bounds & distinct


# -- sampling ----------------------------------------------------------------


def sample_uniform_coords(space: SpaceSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((n, space.dim), dtype=np.int64)
    if n == 0:
        return out
    # Distinct cells without replacement: argsort of iid keys is a uniform permutation.
    cells = np.argsort(rng.random((n, space.n_ports)), axis=1)[:, : space.n_active]
    _set_cells(out, cells, space)
    out[:, space.orientation_slot] = rng.integers(0, space.n_orientations, size=n)
    out[:, space.orientation_slot + 1 :] = rng.integers(0, space.n_beams, size=(n, space.n_users))
    return canonicalize_coords(out, space)


def sample_uniform(space: SpaceSpec, rng: np.random.Generator) -> Configuration:
    return decode(sample_uniform_coords(space, 1, rng)[0], space)


@dataclass(frozen=True)
class TRParams:
    gamma_inc: float = 1.5
    gamma_dec: float = 0.5
    tau_s: int = 1
    tau_f: int = 3
    L_min: float = 1 / 16
    L_max: float = 1.0

    def __post_init__(self):
        if not self.gamma_inc > 1:
            raise ValueError("gamma_inc must exceed 1")
        if not 0 < self.gamma_dec < 1:
            raise ValueError("gamma_dec must lie in (0, 1)")
        if not 0 < self.L_min < self.L_max <= 1:
            raise ValueError("need 0 < L_min < L_max <= 1")
        if self.tau_s < 1 or self.tau_f < 1:
            raise ValueError("tolerances must be >= 1")


@dataclass(frozen=True)
class TrustRegion:
    center: Configuration
    side_len: float
    success_count: int = 0
    failure_count: int = 0


def tr_update(tr: TrustRegion, hvi_positive: bool, params: TRParams) -> TrustRegion:
    """Counter bookkeeping followed by expansion / contraction of the side length."""
    if hvi_positive:
        succ, fail = tr.success_count + 1, 0
    else:
        succ, fail = 0, tr.failure_count + 1
    side = tr.side_len
    if succ >= params.tau_s:
        side = min(side * params.gamma_inc, params.L_max)
        succ = 0
    elif fail >= params.tau_f:
        side = max(side * params.gamma_dec, params.L_min)
        fail = 0
    return replace(tr, side_len=side, success_count=succ, failure_count=fail)


def tr_exhausted(tr: TrustRegion, hvi_positive: bool, params: TRParams) -> bool:
    """True when this update would shrink the region below ``L_min``.

    ``tr_update`` clips at ``L_min``, so the restart condition is read off the
    unclipped contraction instead.
    """
    if hvi_positive or tr.failure_count + 1 < params.tau_f:
        return False
    return tr.side_len * params.gamma_dec < params.L_min * (1 - 1e-12)


def tr_restart(archive, L_max: float, rng: np.random.Generator) -> TrustRegion:
    """Fresh region at the archive member with the largest exclusive HV contribution.

    Ties go to the most recent evaluation, then to a seeded random pick.
    """
    entries = list(archive.entries)
    if not entries:
        raise EmptyArchiveError("cannot restart a trust region from an empty archive")
    points = np.array([[e.f.r_c, e.f.r_s] for e in entries])
    contrib = exclusive_contributions(points, archive.ref)
    best = np.flatnonzero(np.isclose(contrib, contrib.max(), rtol=1e-12, atol=1e-15))
    recency = np.array([entries[i].eval_idx for i in best])
    best = best[recency == recency.max()]
    pick = int(best[0]) if len(best) == 1 else int(rng.choice(best))
    return TrustRegion(center=entries[pick].config, side_len=L_max)


def region_box(space: SpaceSpec, tr: TrustRegion) -> tuple[np.ndarray, np.ndarray]:
    """Integer box around the encoded center.

    Half-width per dimension is ``max(1, round(L * range_j))`` so that L = 1
    covers the full bounds from any center.
    """
    center = encode(tr.center, space)
    lo, hi = space.lower, space.upper
    half = np.maximum(1, np.floor(tr.side_len * (hi - lo) + 0.5)).astype(np.int64)
    return np.maximum(lo, center - half), np.minimum(hi, center + half)


def _repair_ports(coords, space, box_lo, box_hi, rng, retries) -> np.ndarray:
    """Redraw ports that collide with earlier ports; returns a mask of unrepairable rows."""
    n = len(coords)
    cells = port_cells(coords, space)
    broken = np.zeros(n, dtype=bool)
    for p in range(1, space.n_active):
        rlo, rhi = box_lo[2 * p], box_hi[2 * p]
        clo, chi = box_lo[2 * p + 1], box_hi[2 * p + 1]
        clash = np.any(cells[:, :p] == cells[:, [p]], axis=1) & ~broken
        for _ in range(retries):
            idx = np.flatnonzero(clash)
            if idx.size == 0:
                break
            r = rng.integers(rlo, rhi + 1, size=idx.size)
            c = rng.integers(clo, chi + 1, size=idx.size)
            cells[idx, p] = r * space.grid_cols + c
            clash[idx] = np.any(cells[idx, :p] == cells[idx, p : p + 1], axis=1)
        for i in np.flatnonzero(clash):
            # Nearest free cell inside this port's box, ties row-major.
            r0, c0 = divmod(int(cells[i, p]), space.grid_cols)
            used = set(cells[i, :p].tolist())
            options = [
                ((r - r0) ** 2 + (c - c0) ** 2, r, c)
                for r in range(rlo, rhi + 1)
                for c in range(clo, chi + 1)
                if r * space.grid_cols + c not in used
            ]
            if options:
                _, r, c = min(options)
                cells[i, p] = r * space.grid_cols + c
            else:
                broken[i] = True
    _set_cells(coords, cells, space)
    return broken


def sample_in_region_coords(
    space: SpaceSpec,
    tr: TrustRegion,
    n: int,
    rng: np.random.Generator,
    retries: int = DEFAULT_REPAIR_RETRIES,
) -> np.ndarray:
    if not is_feasible(tr.center, space):
        raise EmptyTrustRegionError("trust-region center is infeasible; restart the region")
    box_lo, box_hi = region_box(space, tr)
    center = encode(tr.center, space)
    out = np.empty((n, space.dim), dtype=np.int64)
    todo = np.arange(n)
    for attempt in range(retries + 1):
        if todo.size == 0:
            break
        draw = rng.integers(box_lo, box_hi + 1, size=(todo.size, space.dim))
        broken = _repair_ports(draw, space, box_lo, box_hi, rng, retries)
        if attempt == retries:
            broken[:] = True
        # Canonical sorting can move a port into a slot whose box it misses.
        canon = canonicalize_coords(draw, space)
        inside = np.all((canon >= box_lo) & (canon <= box_hi), axis=1) & ~broken
        out[todo[inside]] = canon[inside]
        todo = todo[~inside]
    if todo.size:
        fallback = rng.integers(box_lo, box_hi + 1, size=(todo.size, space.dim))
        fallback[:, : 2 * space.n_active] = center[: 2 * space.n_active]
        out[todo] = fallback
    return out


def coordinate_blocks(space: SpaceSpec) -> list[np.ndarray]:
    """Coordinate groups that move together: one per port, the orientation, one per beam."""
    blocks = [np.array([2 * p, 2 * p + 1]) for p in range(space.n_active)]
    blocks.append(np.array([space.orientation_slot]))
    blocks.extend(np.array([space.orientation_slot + 1 + k]) for k in range(space.n_users))
    return blocks


def perturb_in_region_coords(
    space: SpaceSpec,
    tr: TrustRegion,
    n: int,
    rng: np.random.Generator,
    max_blocks: int = 2,
    retries: int = DEFAULT_REPAIR_RETRIES,
) -> np.ndarray:
    """Copies of the center with 1..max_blocks coordinate blocks redrawn inside the box.

    Rows that stay infeasible or leave the box after canonical sorting are
    dropped, so fewer than ``n`` rows may come back.
    """
    if not is_feasible(tr.center, space):
        raise EmptyTrustRegionError("trust-region center is infeasible; restart the region")
    box_lo, box_hi = region_box(space, tr)
    center = encode(tr.center, space)
    blocks = coordinate_blocks(space)
    out = np.repeat(center[None, :], n, axis=0)
    n_blocks = rng.integers(1, min(max_blocks, len(blocks)) + 1, size=n)
    keys = rng.random((n, len(blocks)))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    moved = ranks < n_blocks[:, None]
    mask = np.zeros((n, space.dim), dtype=bool)
    for b, cols in enumerate(blocks):
        mask[:, cols] = moved[:, [b]]
    for _ in range(retries + 1):
        draw = rng.integers(box_lo, box_hi + 1, size=(n, space.dim))
        out = np.where(mask, draw, out)
        bad = ~feasible_mask(out, space)
        if not bad.any():
            break
        # Only rows that still collide get fresh draws next round.
        mask &= bad[:, None]
    canon = canonicalize_coords(out, space)
    keep = feasible_mask(canon, space) & np.all((canon >= box_lo) & (canon <= box_hi), axis=1)
    return canon[keep]


def sample_in_region(space: SpaceSpec, tr: TrustRegion, n: int, rng: np.random.Generator) -> list[Configuration]:
    return [decode(row, space) for row in sample_in_region_coords(space, tr, n, rng)]


# -- enumeration --------------------------------------------------------------


def count_feasible(space: SpaceSpec) -> int:
    return (
        math.comb(space.n_ports, space.n_tx)
        * math.comb(space.n_ports - space.n_tx, space.n_rx)
        * space.n_orientations
        * space.n_beams**space.n_users
    )


def enumerate_coords(space: SpaceSpec, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """Every feasible configuration, encoded, in lexicographic (tx, rx, orientation, beams) order."""
    total = count_feasible(space)
    if total > cap:
        raise SpaceTooLargeError(total, cap)
    P = space.n_ports
    tx = np.array(list(itertools.combinations(range(P), space.n_tx)), dtype=np.int64)
    rx_idx = np.array(list(itertools.combinations(range(P - space.n_tx), space.n_rx)), dtype=np.int64)
    free = np.array([[c for c in range(P) if c not in set(row)] for row in tx], dtype=np.int64)
    rx = free[:, rx_idx]  # (A, B, N_r)
    A, B = len(tx), len(rx_idx)
    ports = np.concatenate([np.repeat(tx[:, None, :], B, axis=1), rx], axis=2).reshape(A * B, space.n_active)
    tail = np.array(
        list(itertools.product(range(space.n_orientations), *[range(space.n_beams)] * space.n_users)),
        dtype=np.int64,
    )
    out = np.empty((A * B * len(tail), space.dim), dtype=np.int64)
    cells = np.repeat(ports, len(tail), axis=0)
    _set_cells(out, cells, space)
    out[:, space.orientation_slot :] = np.tile(tail, (A * B, 1))
    return out


def enumerate_all(space: SpaceSpec, cap: int = DEFAULT_ENUM_CAP) -> Iterator[Configuration]:
    for row in enumerate_coords(space, cap):
        yield decode(row, space)
