"""Comparison methods sharing the optimizer's evaluation accounting and trace format."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config_space import (
    DEFAULT_ENUM_CAP,
    Configuration,
    SpaceSpec,
    canonicalize_coords,
    coordinate_blocks,
    decode,
    enumerate_coords,
    port_cells,
    sample_uniform_coords,
    _set_cells,
)
from .dynamics import los_update
from .isac_physics import Scene, Target, User, PathSet, objectives_batch
from .optimizer import Evaluator, OptimizerParams, RunTrace, TraceBuilder, run_static
from .pareto_acq import ParetoArchive, archive_insert
from .rng import substream
from ._hv import nondominated_mask


def scalarize(f, w: float) -> float:
    return w * f[0] + (1.0 - w) * f[1]


def _evaluator(scene_or_eval, space: SpaceSpec, seed: int) -> Evaluator:
    if isinstance(scene_or_eval, Evaluator):
        return scene_or_eval
    return Evaluator(scene_or_eval, space, 0.0, seed)


# -- exhaustive -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    archive: ParetoArchive
    hv: float
    coords: np.ndarray
    objectives: np.ndarray
    space: SpaceSpec

    def scalarized_optimum(self, w: float) -> tuple[Configuration, float]:
        values = w * self.objectives[:, 0] + (1 - w) * self.objectives[:, 1]
        i = int(np.argmax(values))
        return decode(self.coords[i], self.space), float(values[i])


def exhaustive(scene: Scene, space: SpaceSpec, cap: int = DEFAULT_ENUM_CAP, ref=(0.0, 0.0)) -> ExhaustiveResult:
    """True Pareto archive over every feasible configuration (vectorized evaluation)."""
    coords = enumerate_coords(space, cap)
    objectives, _ = objectives_batch(coords, scene, space)
    archive = ParetoArchive(ref=tuple(ref))
    for i in np.flatnonzero(nondominated_mask(objectives)):
        archive = archive_insert(archive, objectives[i], decode(coords[i], space), int(i)).archive
    return ExhaustiveResult(archive, archive.hypervolume(), coords, objectives, space)


# -- static baselines ----------------------------------------------------------------


def random_search(scene_or_eval, space: SpaceSpec, budget: int, seed: int = 0) -> RunTrace:
    builder = TraceBuilder("random", _evaluator(scene_or_eval, space, seed))
    for x in sample_uniform_coords(space, budget, substream(seed, "random-search")):
        builder.evaluate(decode(x, space))
    return builder.trace


def _block_values(x: np.ndarray, block: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Every feasible replacement of one block with the rest of ``x`` fixed."""
    if len(block) == 2:
        p = block[0] // 2
        cells = port_cells(x, space)[0]
        taken = set(np.delete(cells, p).tolist())
        options = [c for c in range(space.n_ports) if c not in taken and c != cells[p]]
        out = np.repeat(x[None, :], len(options), axis=0)
        out[:, block[0]] = np.array(options, dtype=np.int64) // space.grid_cols
        out[:, block[1]] = np.array(options, dtype=np.int64) % space.grid_cols
        return out
    j = block[0]
    options = [v for v in range(space.lower[j], space.upper[j] + 1) if v != x[j]]
    out = np.repeat(x[None, :], len(options), axis=0)
    out[:, j] = options
    return out


def greedy_alternating(scene_or_eval, space: SpaceSpec, budget: int, w: float = 0.5, seed: int = 0) -> RunTrace:
    """Block coordinate ascent on the scalarized objective with random restarts.

    Each block (one port, the orientation, one beam) is swept over all feasible
    values with the others fixed; the best strict improvement is kept. A full
    pass without improvement triggers a restart from a fresh uniform point.
    """
    builder = TraceBuilder("greedy", _evaluator(scene_or_eval, space, seed))
    rng = substream(seed, "greedy")
    blocks = coordinate_blocks(space)
    n = 0
    while n < budget:
        x = sample_uniform_coords(space, 1, rng)[0]
        f, _, _ = builder.evaluate(decode(x, space))
        n += 1
        best = scalarize(f, w)
        improved = True
        while improved and n < budget:
            improved = False
            for block in blocks:
                trial_best, trial_x = best, None
                for y in _block_values(x, block, space):
                    if n >= budget:
                        break
                    f, _, _ = builder.evaluate(decode(y, space))
                    n += 1
                    if scalarize(f, w) > trial_best:
                        trial_best, trial_x = scalarize(f, w), y
                if trial_x is not None:
                    x, best, improved = trial_x, trial_best, True
                if n >= budget:
                    break
    return builder.trace


def mab_ucb(
    scene_or_eval,
    space: SpaceSpec,
    budget: int,
    w: float = 0.5,
    arm_pool: int = 1000,
    c_ucb: float = 1.0,
    seed: int = 0,
    arms: np.ndarray | None = None,
) -> RunTrace:
    """UCB1 over a pool of pre-sampled configurations; unvisited arms are played first."""
    if arms is None:
        if arm_pool < 1:
            raise ValueError("arm_pool must be >= 1")
        arms = sample_uniform_coords(space, arm_pool, substream(seed, "mab-arms"))
    arms = np.atleast_2d(arms)
    builder = TraceBuilder("mab", _evaluator(scene_or_eval, space, seed))
    counts = np.zeros(len(arms))
    sums = np.zeros(len(arms))
    for n in range(1, budget + 1):
        unvisited = np.flatnonzero(counts == 0)
        if unvisited.size:
            a = int(unvisited[0])
        else:
            ucb = sums / counts + c_ucb * np.sqrt(math.log(n) / counts)
            a = int(np.argmax(ucb))
        f, _, _ = builder.evaluate(decode(arms[a], space))
        counts[a] += 1
        sums[a] += scalarize(f, w)
    return builder.trace


def project_to_feasible(x: np.ndarray, space: SpaceSpec) -> np.ndarray:
    """Round, clip to bounds and move colliding ports to the nearest free cell."""
    y = np.clip(np.rint(x), space.lower, space.upper).astype(np.int64)[None, :]
    cells = port_cells(y, space)[0]
    rows, cols = np.divmod(np.arange(space.n_ports), space.grid_cols)
    used: set[int] = set()
    for p, c in enumerate(cells):
        if c in used:
            free = np.array([q for q in range(space.n_ports) if q not in used])
            r0, c0 = divmod(int(c), space.grid_cols)
            d2 = (rows[free] - r0) ** 2 + (cols[free] - c0) ** 2
            cells[p] = free[np.argmin(d2)]
        used.add(int(cells[p]))
    _set_cells(y, cells[None, :], space)
    return canonicalize_coords(y, space)[0]


def zo_search(
    scene_or_eval,
    space: SpaceSpec,
    budget: int,
    w: float = 0.5,
    step: float = 1.0,
    smoothing: float = 1.0,
    seed: int = 0,
    objective=None,
) -> RunTrace:
    """Two-point zeroth-order ascent on the real relaxation of the encoding.

    ``objective`` overrides the scalarized physics value (used for synthetic checks);
    it receives the projected integer point and must return a float.
    """
    evaluator = _evaluator(scene_or_eval, space, seed)
    builder = TraceBuilder("zo", evaluator)
    rng = substream(seed, "zo")
    lo, hi = space.lower.astype(float), space.upper.astype(float)

    def value(x_real):
        z = project_to_feasible(x_real, space)
        f, _, _ = builder.evaluate(decode(z, space))
        return scalarize(f, w) if objective is None else float(objective(z))

    x = sample_uniform_coords(space, 1, rng)[0].astype(float)
    value(x)
    for _ in range((budget - 1) // 2):
        u = rng.standard_normal(space.dim)
        u /= np.linalg.norm(u)
        f_plus = value(x + smoothing * u)
        f_minus = value(x - smoothing * u)
        grad = (f_plus - f_minus) / (2 * smoothing) * u
        x = np.clip(x + step * grad, lo, hi)
    if (budget - 1) % 2:
        value(x)
    return builder.trace


def blackbox_gpbo(scene_or_eval, space: SpaceSpec, budget: int, params: OptimizerParams | None = None, seed: int = 0) -> RunTrace:
    """Global-search GP BO on the objectives directly (no trust region, no known map)."""
    params = params or OptimizerParams(budget=budget, n_init=min(64, budget // 2), seed=seed)
    params = replace(params, budget=budget, seed=seed, surrogate="gp", mode="black", trust_region=False)
    evaluator = scene_or_eval if isinstance(scene_or_eval, Evaluator) else None
    scene = evaluator.scene if evaluator else scene_or_eval
    return run_static(scene, space, params, evaluator, method="gp-bo")


# -- dynamic baselines ----------------------------------------------------------------


def static_frozen(configs: list[Configuration], scenes: list[Scene], space: SpaceSpec, first_slot: int = 0) -> list[RunTrace]:
    """Re-evaluate a fixed set of configurations in every slot."""
    traces = []
    for t, scene in enumerate(scenes, start=first_slot):
        builder = TraceBuilder("static", Evaluator(scene, space), slot=t)
        for cfg in configs:
            builder.evaluate(cfg)
        traces.append(builder.trace)
    return traces


@dataclass
class ConstantVelocityKF:
    """Kalman filter on [position, velocity] with white-acceleration process noise."""

    mean: np.ndarray
    cov: np.ndarray
    slot_s: float
    accel_std: float
    obs_std: float

    @classmethod
    def start(cls, first_obs, slot_s: float, accel_std: float, obs_std: float, vel_std: float = 10.0):
        mean = np.concatenate([np.asarray(first_obs, dtype=float), np.zeros(3)])
        cov = np.diag([max(obs_std, 1e-9) ** 2] * 3 + [vel_std**2] * 3)
        return cls(mean, cov, slot_s, accel_std, obs_std)

    def _transition(self):
        f = np.eye(6)
        f[:3, 3:] = self.slot_s * np.eye(3)
        dt = self.slot_s
        q1 = np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]]) * self.accel_std**2
        q = np.kron(q1, np.eye(3))
        return f, q

    def predict(self) -> "ConstantVelocityKF":
        f, q = self._transition()
        return replace(self, mean=f @ self.mean, cov=f @ self.cov @ f.T + q)

    def update(self, obs) -> "ConstantVelocityKF":
        h = np.hstack([np.eye(3), np.zeros((3, 3))])
        s = h @ self.cov @ h.T + self.obs_std**2 * np.eye(3)
        if self.obs_std == 0:
            s = s + 1e-12 * np.eye(3)
        gain = np.linalg.solve(s, h @ self.cov).T
        mean = self.mean + gain @ (np.asarray(obs, dtype=float) - h @ self.mean)
        cov = (np.eye(6) - gain @ h) @ self.cov
        return replace(self, mean=mean, cov=0.5 * (cov + cov.T))

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]


def predicted_scene(reference: Scene, user_pos, target_pos) -> Scene:
    """LoS-only model of the scene at predicted positions: no clutter, no leakage."""
    lam = reference.wavelength
    users = []
    for p in user_pos:
        los = los_update(p, reference.bs_position, lam)
        users.append(User(np.asarray(p), PathSet([los.gain], [los.elevation], [los.azimuth])))
    targets = []
    for p, old in zip(target_pos, reference.targets):
        los = los_update(p, reference.bs_position, lam)
        alpha = abs(old.alpha) * complex(np.exp(-4j * math.pi * los.distance / lam))
        targets.append(Target(np.asarray(p), alpha, los.elevation, los.azimuth))
    return replace(reference, users=tuple(users), targets=tuple(targets), clutter=(), si_atten=0.0)


def kalman_predict_then_optimize(
    scenes: list[Scene],
    space: SpaceSpec,
    per_slot_budget: int,
    w: float = 0.5,
    seed: int = 0,
    slot_s: float = 0.5,
    obs_std: float = 1.0,
    accel_std: float = 2.0,
) -> list[RunTrace]:
    """Track entity positions, optimize against the predicted LoS model, verify the top picks.

    Per slot: predict positions, score ``4 * M`` uniform candidates under the
    predicted model (no true evaluations), then spend the ``M`` true evaluations
    on the best predicted candidates. Noisy positions of the current slot are
    observed afterwards.
    """
    rng_obs = substream(seed, "kf-observations")
    rng_cand = substream(seed, "kf-candidates")
    filters = None
    traces = []
    for t, scene in enumerate(scenes):
        truth = [u.position for u in scene.users] + [q.position for q in scene.targets]
        obs = [p + obs_std * rng_obs.standard_normal(3) for p in truth]
        if filters is None:
            positions = obs
        else:
            filters = [kf.predict() for kf in filters]
            positions = [kf.position for kf in filters]
        n_users = len(scene.users)
        model = predicted_scene(scene, positions[:n_users], positions[n_users:])
        cand = sample_uniform_coords(space, 4 * per_slot_budget, rng_cand)
        _, first = np.unique(cand, axis=0, return_index=True)
        cand = cand[np.sort(first)]
        pred, _ = objectives_batch(cand, model, space)
        order = np.argsort(-(w * pred[:, 0] + (1 - w) * pred[:, 1]), kind="stable")
        builder = TraceBuilder("kalman", Evaluator(scene, space), slot=t)
        for i in order[:per_slot_budget]:
            builder.evaluate(decode(cand[i], space))
        traces.append(builder.trace)
        if filters is None:
            filters = [ConstantVelocityKF.start(o, slot_s, accel_std, obs_std) for o in obs]
        else:
            filters = [kf.update(o) for kf, o in zip(filters, obs)]
    return traces
