"""Grey-box multi-objective BO loops: static search and slot-by-slot tracking."""
from __future__ import annotations

import os
import pickle
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import _hv
from .config_space import (
    Configuration,
    SpaceSpec,
    TRParams,
    TrustRegion,
    decode,
    encode,
    feasible_mask,
    perturb_in_region_coords,
    sample_in_region_coords,
    sample_uniform_coords,
    tr_exhausted,
    tr_restart,
    tr_update,
)
from .dynamics import DynamicScene, advance_scene
from .isac_physics import ObjectiveVector, Scene, evaluate, g_batch, latent_dim
from .pareto_acq import ParetoArchive, archive_insert, ehvi_batch, identity_map
from .rng import child_seed, substream
from .surrogate.data import TrainingSet
from .surrogate.forest import RfParams, RfSurrogate
from .surrogate.gp import GpSurrogate


class Evaluator:
    """Counts every true evaluation against the current scene."""

    def __init__(self, scene: Scene, space: SpaceSpec, obs_noise_std: float = 0.0, seed: int = 0):
        self.scene = scene
        self.space = space
        self.obs_noise_std = obs_noise_std
        self.rng = substream(seed, "observation-noise")
        self.count = 0

    def __call__(self, cfg: Configuration):
        self.count += 1
        return evaluate(cfg, self.scene, self.space, self.obs_noise_std, self.rng)

    def coords(self, coords: np.ndarray):
        return self(decode(coords, self.space))


@dataclass(frozen=True)
class OptimizerParams:
    budget: int = 300
    n_init: int = 64
    n_mc: int = 128
    n_cand: int = 512
    tr: TRParams = TRParams()
    surrogate: str = "rf"  # "rf" | "gp"
    mode: str = "grey"  # "grey" | "black"
    trust_region: bool = True
    embedding: str = "ordinal"
    gp_family: str = "rbf"
    rf: RfParams = RfParams()
    obs_noise_std: float = 0.0
    seed: int = 0
    # Dynamic tracking only.
    tau: float = 3.0  # GP temporal timescale in slots
    warm_start: int = 16  # previous-slot Pareto members re-evaluated first
    local_fraction: float = 0.5  # share of the candidate pool built by block perturbation
    max_blocks: int = 3

    def __post_init__(self):
        if self.n_init < 1 or self.n_init >= self.budget:
            raise ValueError("need 1 <= n_init < budget")
        if self.n_cand < 1 or self.n_mc < 1:
            raise ValueError("n_cand and n_mc must be >= 1")
        if self.surrogate not in ("rf", "gp"):
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if self.mode not in ("grey", "black"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.embedding not in ("ordinal", "one-hot"):
            raise ValueError(f"unknown embedding {self.embedding!r}")
        if self.warm_start < 0:
            raise ValueError("warm_start must be >= 0")


@dataclass(frozen=True)
class EvalRecord:
    eval_idx: int
    config_id: str
    r_c: float
    r_s: float
    hvi: float
    hv: float
    tr_side: float
    restarts: int
    slot: int = 0


@dataclass
class RunTrace:
    method: str
    records: list[EvalRecord] = field(default_factory=list)
    archive: ParetoArchive = field(default_factory=ParetoArchive)

    @property
    def hv(self) -> np.ndarray:
        return np.array([r.hv for r in self.records])

    @property
    def final_hv(self) -> float:
        return self.archive.hypervolume()

    def __len__(self) -> int:
        return len(self.records)


class TraceBuilder:
    """Archive plus per-evaluation bookkeeping shared by every method."""

    def __init__(self, method: str, evaluator: Evaluator, slot: int = 0, ref=(0.0, 0.0)):
        self.trace = RunTrace(method, archive=ParetoArchive(ref=tuple(ref)))
        self.evaluator = evaluator
        self.slot = slot
        self.tr_side = 1.0
        self.restarts = 0

    def evaluate(self, cfg: Configuration):
        """True evaluation, archive insertion and a trace row. Returns (f, h_obs, hvi)."""
        f, h_obs = self.evaluator(cfg)
        idx = len(self.trace.records)
        res = archive_insert(self.trace.archive, f, cfg, idx)
        self.trace.archive = res.archive
        self.trace.records.append(
            EvalRecord(idx, cfg.key, f.r_c, f.r_s, res.hvi, res.archive.hypervolume(), self.tr_side, self.restarts, self.slot)
        )
        return f, h_obs, res.hvi


def _make_surrogate(space: SpaceSpec, params: OptimizerParams, temporal: bool):
    if params.surrogate == "rf":
        return RfSurrogate(space, params.rf, temporal=temporal, seed=child_seed(params.seed, "surrogate"))
    return GpSurrogate(space, params.embedding, params.gp_family, tau=params.tau if temporal else None)


def _latent_scale(space: SpaceSpec, noise_comm: float) -> np.ndarray:
    # Pair powers relative to the receiver noise; whitened eigenvalues are already SNRs.
    k2 = space.n_users**2
    return np.concatenate([np.full(k2, noise_comm), np.ones(latent_dim(space) - k2)])


def warp_latent(h: np.ndarray, space: SpaceSpec, noise_comm: float) -> np.ndarray:
    """Compress latent constituents with log1p(h / scale); maps [0, inf) onto itself."""
    return np.log1p(np.asarray(h, dtype=float) / _latent_scale(space, noise_comm))


def unwarp_latent(y: np.ndarray, space: SpaceSpec, noise_comm: float) -> np.ndarray:
    """Inverse of ``warp_latent``."""
    return np.expm1(np.asarray(y, dtype=float)) * _latent_scale(space, noise_comm)


def _known_map(space: SpaceSpec, scene: Scene, mode: str) -> Callable[[np.ndarray], np.ndarray]:
    """Surrogate outputs to objectives; grey mode undoes the target warp first."""
    if mode == "black":
        return identity_map
    return lambda y: g_batch(unwarp_latent(y, space, scene.noise_comm), space.n_users, scene.noise_comm)


def _target(f: ObjectiveVector, h_obs, evaluator: Evaluator, mode: str) -> np.ndarray:
    if mode == "black":
        return np.asarray(f, dtype=float)
    return warp_latent(h_obs.as_vector(), evaluator.space, evaluator.scene.noise_comm)


def _best_center(archive: ParetoArchive, tr: TrustRegion, rng) -> TrustRegion:
    """Move the region to the member with the largest exclusive contribution, keeping L."""
    if len(archive) == 0:
        return tr
    fresh = tr_restart(archive, tr.side_len, rng)
    return replace(tr, center=fresh.center)


def select_candidate(
    model,
    archive: ParetoArchive,
    tr: TrustRegion,
    space: SpaceSpec,
    params: OptimizerParams,
    rng: np.random.Generator,
    g: Callable[[np.ndarray], np.ndarray],
    exclude: set[bytes] | None = None,
) -> np.ndarray:
    """Argmax of constrained EHVI over candidates drawn in the trust region."""
    if params.trust_region:
        n_local = int(round(params.local_fraction * params.n_cand))
        cand = np.concatenate(
            [
                sample_in_region_coords(space, tr, params.n_cand - n_local, rng),
                perturb_in_region_coords(space, tr, n_local, rng, params.max_blocks),
            ]
        )
        if len(cand) == 0:
            cand = sample_in_region_coords(space, tr, 1, rng)
    else:
        cand = sample_uniform_coords(space, params.n_cand, rng)
    _, first = np.unique(cand, axis=0, return_index=True)
    cand = cand[np.sort(first)]
    if exclude:
        fresh = np.array([row.tobytes() not in exclude for row in cand])
        if fresh.any():
            cand = cand[fresh]
    eps = model.draw_eps(params.n_mc, rng)
    scores = ehvi_batch(model, cand, archive, eps, g)
    scores = np.where(feasible_mask(cand, space), scores, 0.0)
    top = scores.max()
    if top <= 0.0:
        # No candidate promises improvement: explore with a uniform draw from the pool.
        return cand[rng.integers(len(cand))]
    best = np.flatnonzero(scores == top)
    return cand[best[0] if len(best) == 1 else rng.choice(best)]


def _bo_iterations(
    builder: TraceBuilder,
    data: TrainingSet,
    model,
    tr: TrustRegion,
    space: SpaceSpec,
    params: OptimizerParams,
    g,
    n_iter: int,
    rng_acq: np.random.Generator,
    rng_tr: np.random.Generator,
    seen: set[bytes],
    slot: int = 0,
) -> TrustRegion:
    for _ in range(n_iter):
        if len(builder.trace.archive) == 0:
            # Nothing to improve on yet: keep sampling uniformly.
            x = sample_uniform_coords(space, 1, rng_acq)[0]
        else:
            model.fit(data.inputs, data.targets, times=data.times, query_time=slot)
            x = select_candidate(model, builder.trace.archive, tr, space, params, rng_acq, g, seen)
        cfg = decode(x, space)
        f, h_obs, hvi = builder.evaluate(cfg)
        seen.add(encode(cfg, space).tobytes())
        data.append(encode(cfg, space), _target(f, h_obs, builder.evaluator, params.mode), slot)
        success = hvi > 0.0
        if params.trust_region:
            if tr_exhausted(tr, success, params.tr):
                tr = tr_restart(builder.trace.archive, params.tr.L_max, rng_tr)
                builder.restarts += 1
            else:
                tr = _best_center(builder.trace.archive, tr_update(tr, success, params.tr), rng_tr)
            builder.tr_side = tr.side_len
    return tr


def run_static(scene: Scene, space: SpaceSpec, params: OptimizerParams, evaluator: Evaluator | None = None, method: str = "g-mobo") -> RunTrace:
    """Initial uniform design, then one EHVI-selected evaluation per iteration until the budget."""
    evaluator = evaluator or Evaluator(scene, space, params.obs_noise_std, params.seed)
    n_out = 2 if params.mode == "black" else latent_dim(space)
    data = TrainingSet(space.dim, n_out)
    model = _make_surrogate(space, params, temporal=False)
    return _static_phase(scene, space, params, evaluator, data, model, method)


def _static_phase(scene, space, params, evaluator, data, model, method) -> RunTrace:
    builder = TraceBuilder(method, evaluator, slot=0)
    rng_init = substream(params.seed, "init")
    rng_acq = substream(params.seed, "acquisition")
    rng_tr = substream(params.seed, "trust-region")
    seen: set[bytes] = set()
    init = sample_uniform_coords(space, params.n_init, rng_init)
    for x in init:
        f, h_obs, _ = builder.evaluate(decode(x, space))
        seen.add(x.tobytes())
        data.append(x, _target(f, h_obs, builder.evaluator, params.mode), 0)
    tr = TrustRegion(center=decode(init[0], space), side_len=params.tr.L_max)
    if len(builder.trace.archive):
        tr = tr_restart(builder.trace.archive, params.tr.L_max, rng_tr)
    builder.tr_side = tr.side_len
    g = _known_map(space, scene, params.mode)
    _bo_iterations(builder, data, model, tr, space, params, g, params.budget - params.n_init, rng_acq, rng_tr, seen)
    return builder.trace


# -- dynamic -------------------------------------------------------------------------


@dataclass
class DynamicResult:
    slots: list[RunTrace]
    scenes: list[Scene]

    @property
    def archives(self) -> list[ParetoArchive]:
        return [s.archive for s in self.slots]


def scene_trajectory(ds: DynamicScene, n_slots: int, seed: int) -> list[Scene]:
    """Scenes for slots 0..n_slots, advanced with the seed's dynamics stream."""
    rng = substream(seed, "dynamics")
    scenes = [ds.scene]
    for _ in range(n_slots):
        ds = advance_scene(ds, rng)
        scenes.append(ds.scene)
    return scenes


def _ordered_by_contribution(archive: ParetoArchive) -> list[Configuration]:
    contrib = _hv.exclusive_contributions(archive.points(), archive.ref)
    order = sorted(range(len(archive)), key=lambda i: (-contrib[i], -archive.entries[i].eval_idx))
    return [archive.entries[i].config for i in order]


def run_dynamic(
    scenes: list[Scene],
    space: SpaceSpec,
    params: OptimizerParams,
    per_slot_budget: int,
    window: int = 0,
    method: str = "g-mobo-adaptive",
    checkpoint: str | Path | None = None,
) -> DynamicResult:
    """Slot 0 is a full static run; each later slot warm-starts from the previous front.

    Per slot: evaluate the previous slot's Pareto configurations (best contributors
    first, at most ``params.warm_start``), refit the spatio-temporal surrogate on the
    sliding window, re-center the region at the previous slot's top contributor
    with L = L_max, and spend the remaining budget on EHVI iterations.
    Objectives always come from the current slot's scene.

    With ``checkpoint`` set, the full loop state is pickled after every slot and
    a rerun resumes from the last completed slot with identical results.
    """
    if per_slot_budget < 1:
        raise ValueError("per-slot budget must be >= 1")
    rng_acq = substream(params.seed, "acquisition-tracking")
    rng_tr = substream(params.seed, "trust-region-tracking")
    n_out = 2 if params.mode == "black" else latent_dim(space)
    data = TrainingSet(space.dim, n_out, capacity=window)
    model = _make_surrogate(space, params, temporal=True)

    state = _load_checkpoint(checkpoint)
    if state is not None:
        data, model, slot_traces, rng_acq, rng_tr = state
    else:
        first = Evaluator(scenes[0], space, params.obs_noise_std, params.seed)
        slot_traces = [_static_phase(scenes[0], space, params, first, data, model, method)]
        _save_checkpoint(checkpoint, (data, model, slot_traces, rng_acq, rng_tr))

    prev = next((tr.archive for tr in reversed(slot_traces) if len(tr.archive)), slot_traces[-1].archive)
    for t in range(len(slot_traces), len(scenes)):
        evaluator = Evaluator(scenes[t], space, params.obs_noise_std, child_seed(params.seed, f"slot-{t}"))
        builder = TraceBuilder(method, evaluator, slot=t)
        g = _known_map(space, scenes[t], params.mode)
        seen: set[bytes] = set()
        carried = _ordered_by_contribution(prev)[: min(params.warm_start, per_slot_budget)]
        for cfg in carried:
            f, h_obs, _ = builder.evaluate(cfg)
            x = encode(cfg, space)
            seen.add(x.tobytes())
            data.append(x, _target(f, h_obs, evaluator, params.mode), t)
        if carried:
            tr = TrustRegion(center=carried[0], side_len=params.tr.L_max)
        else:
            tr = TrustRegion(center=decode(sample_uniform_coords(space, 1, rng_tr)[0], space), side_len=params.tr.L_max)
        builder.tr_side = tr.side_len
        _bo_iterations(builder, data, model, tr, space, params, g, per_slot_budget - len(carried), rng_acq, rng_tr, seen, slot=t)
        slot_traces.append(builder.trace)
        prev = builder.trace.archive if len(builder.trace.archive) else prev
        _save_checkpoint(checkpoint, (data, model, slot_traces, rng_acq, rng_tr))
    return DynamicResult(slot_traces, list(scenes))


def _save_checkpoint(path, state) -> None:
    if path is None:
        return
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        pickle.dump(state, fh)
    os.replace(tmp, path)


def _load_checkpoint(path):
    if path is None or not Path(path).is_file():
        return None
    with Path(path).open("rb") as fh:
        return pickle.load(fh)
