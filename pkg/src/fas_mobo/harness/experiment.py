"""Experiment specs, seeded run grids, oracle files and tidy plot-data emission.

An experiment is a JSON file. Everything it omits comes from a named profile
("full-scale" for the 9x9-grid defaults, "bench-small" for the desk-scale
benchmark). Cells are (variant, method, seed) triples; a variant is one point
of an optional transmit-power or port-spacing sweep.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .. import baselines
from ..config_space import DEFAULT_ENUM_CAP, SpaceSpec, TRParams, enumerate_coords
from ..errors import SpecValidationError
from ..isac_physics import Scene, dbm_to_watt, objectives_batch
from ..optimizer import OptimizerParams, RunTrace, run_dynamic, run_static, scene_trajectory
from ..rng import child_seed, substream
from ..scenario import ScenarioParams, random_dynamic_scene
from ..surrogate.forest import RfParams
from .._hv import hypervolume_2d, nondominated_mask

STATIC_METHODS = ("g-mobo", "rf-black", "gp-grey", "gp-black", "gp-bo", "random", "greedy", "mab", "zo")
DYNAMIC_METHODS = ("g-mobo-adaptive", "static", "kalman")
SWEEP_KINDS = ("tx_power_dbm", "port_spacing")

PROFILES: dict[str, dict[str, Any]] = {
    "full-scale": {
        "space": SpaceSpec().to_dict(),
        "scenario_params": {},
        "optimizer": {"budget": 300, "n_init": 64, "n_mc": 128},
        "n_slots": 20,
        "per_slot_budget": 30,
        "window": 0,
    },
    "bench-small": {
        "space": SpaceSpec(4, 4, 2, 2, 1, 4, 8, 0.5).to_dict(),
        "scenario_params": {"n_targets": 1},
        "optimizer": {"budget": 150, "n_init": 32, "n_mc": 128},
        "n_slots": 20,
        "per_slot_budget": 30,
        "window": 0,
    },
}

TRACE_COLUMNS = [
    "variant", "method", "seed", "slot", "eval_idx", "config_id",
    "r_c", "r_s", "hvi", "hv", "hv_regret", "tr_side", "restarts",
]
PARETO_COLUMNS = ["variant", "slot", "eval_idx", "config_id", "r_c", "r_s"]
# Method parameters consumed by the baselines themselves rather than OptimizerParams.
BASELINE_KEYS = {"arm_pool", "c_ucb", "step", "smoothing", "obs_std", "accel_std"}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    space: SpaceSpec
    scenario: ScenarioParams
    methods: tuple[MethodSpec, ...]
    seeds: tuple[int, ...]
    mode: str = "static"
    out: str = "results"
    profile: str = "full-scale"
    scenario_file: str | None = None
    optimizer: dict = field(default_factory=dict)
    master_seed: int = 0
    weight: float = 0.5
    n_slots: int = 20
    per_slot_budget: int = 30
    window: int = 0
    sweep: dict | None = None
    oracle_cap: int = int(DEFAULT_ENUM_CAP)

    def variants(self) -> list[tuple[str, Any]]:
        """(label, value) per sweep point; a single ("base", None) without a sweep."""
        if not self.sweep:
            return [("base", None)]
        kind = self.sweep["kind"]
        return [(f"{kind}={v:g}", v) for v in self.sweep["values"]]

    def optimizer_params(self, method: MethodSpec, seed: int) -> OptimizerParams:
        own = {k: v for k, v in method.params.items() if k not in BASELINE_KEYS}
        return _optimizer_params({**self.optimizer, **own}, seed)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "scenario": self.scenario_file,
            "scenario_params": self.scenario.to_dict(),
            "space": self.space.to_dict(),
            "methods": [{"name": m.name, "params": m.params} for m in self.methods],
            "seeds": list(self.seeds),
            "master_seed": self.master_seed,
            "mode": self.mode,
            "out": self.out,
            "optimizer": self.optimizer,
            "weight": self.weight,
            "n_slots": self.n_slots,
            "per_slot_budget": self.per_slot_budget,
            "window": self.window,
            "sweep": self.sweep,
            "oracle_cap": self.oracle_cap,
        }


def _optimizer_params(values: dict, seed: int) -> OptimizerParams:
    values = dict(values)
    known = {f.name for f in fields(OptimizerParams)}
    for key in values:
        if key not in known:
            raise SpecValidationError(f"optimizer.{key}", "unknown optimizer parameter")
    if "tr" in values and isinstance(values["tr"], dict):
        values["tr"] = TRParams(**values["tr"])
    if "rf" in values and isinstance(values["rf"], dict):
        values["rf"] = RfParams(**values["rf"])
    values["seed"] = seed
    return OptimizerParams(**values)


_TOP_LEVEL = {
    "profile", "scenario", "scenario_params", "space", "methods", "seeds", "master_seed", "mode",
    "out", "optimizer", "weight", "n_slots", "per_slot_budget", "window", "sweep", "oracle_cap",
}


def spec_from_dict(data: dict, base_dir: str | Path = ".") -> ExperimentSpec:
    """Fill defaults from the profile, then validate every field."""
    if not isinstance(data, dict):
        raise SpecValidationError("<root>", "experiment spec must be a JSON object")
    for key in data:
        if key not in _TOP_LEVEL:
            raise SpecValidationError(key, "unknown field")
    profile_name = data.get("profile", "full-scale")
    if profile_name not in PROFILES:
        raise SpecValidationError("profile", f"unknown profile {profile_name!r}; choose from {sorted(PROFILES)}")
    profile = PROFILES[profile_name]

    def check(name, cond, message):
        if not cond:
            raise SpecValidationError(name, message)

    space_values = {**profile["space"], **data.get("space", {})}
    try:
        space = SpaceSpec(**space_values)
    except TypeError as exc:
        raise SpecValidationError("space", str(exc)) from None
    except ValueError as exc:
        raise SpecValidationError("space", str(exc)) from None

    scenario_values = dict(profile["scenario_params"])
    scenario_file = data.get("scenario")
    if scenario_file is not None:
        path = Path(base_dir) / scenario_file
        check("scenario", path.is_file(), f"file not found: {path}")
        scenario_values.update(_read_json(path))
    scenario_values.update(data.get("scenario_params", {}))
    try:
        scenario = ScenarioParams.from_dict(scenario_values)
    except KeyError as exc:
        raise SpecValidationError(f"scenario_params.{exc.args[0]}", "unknown field") from None
    except (TypeError, ValueError) as exc:
        raise SpecValidationError("scenario_params", str(exc)) from None

    mode = data.get("mode", "static")
    check("mode", mode in ("static", "dynamic"), "must be 'static' or 'dynamic'")
    allowed = STATIC_METHODS if mode == "static" else DYNAMIC_METHODS
    raw_methods = data.get("methods", ["g-mobo"] if mode == "static" else ["g-mobo-adaptive"])
    check("methods", isinstance(raw_methods, list) and len(raw_methods) >= 1, "need at least one method")
    methods = []
    for i, m in enumerate(raw_methods):
        m = {"name": m} if isinstance(m, str) else m
        check(f"methods[{i}]", isinstance(m, dict) and "name" in m, "each method needs a name")
        check(f"methods[{i}].name", m["name"] in allowed, f"unknown {mode} method {m['name']!r}; choose from {list(allowed)}")
        methods.append(MethodSpec(m["name"], dict(m.get("params", {}))))
    names = [m.name for m in methods]
    check("methods", len(set(names)) == len(names), "method names must be unique")

    seeds = data.get("seeds", [0])
    check("seeds", isinstance(seeds, list) and len(seeds) >= 1, "need at least one seed")
    check("seeds", all(isinstance(s, int) and s >= 0 for s in seeds), "seeds are nonnegative integers")
    check("seeds", len(set(seeds)) == len(seeds), "seeds must be unique")

    master_seed = data.get("master_seed", 0)
    env = os.environ.get("FAS_MOBO_SEED")
    if env is not None:
        check("FAS_MOBO_SEED", env.strip().isdigit(), "must be a nonnegative integer")
        master_seed = int(env)

    weight = data.get("weight", 0.5)
    check("weight", isinstance(weight, (int, float)) and 0.0 <= weight <= 1.0, "must lie in [0, 1]")
    optimizer = {**profile["optimizer"], **data.get("optimizer", {})}
    n_slots = data.get("n_slots", profile["n_slots"])
    per_slot = data.get("per_slot_budget", profile["per_slot_budget"])
    window = data.get("window", profile["window"])
    check("n_slots", isinstance(n_slots, int) and n_slots >= 1, "must be a positive integer")
    check("per_slot_budget", isinstance(per_slot, int) and per_slot >= 1, "must be a positive integer")
    check("window", isinstance(window, int) and window >= 0, "must be a nonnegative integer (0 = unbounded)")
    cap = data.get("oracle_cap", profile.get("oracle_cap", int(DEFAULT_ENUM_CAP)))
    check("oracle_cap", isinstance(cap, (int, float)) and cap >= 1, "must be positive")

    sweep = data.get("sweep")
    if sweep is not None:
        check("sweep", isinstance(sweep, dict) and set(sweep) == {"kind", "values"}, "needs exactly 'kind' and 'values'")
        check("sweep.kind", sweep["kind"] in SWEEP_KINDS, f"choose from {list(SWEEP_KINDS)}")
        check("sweep.values", isinstance(sweep["values"], list) and len(sweep["values"]) >= 1, "need at least one value")
        check("sweep.values", all(isinstance(v, (int, float)) for v in sweep["values"]), "values must be numbers")
        if sweep["kind"] == "port_spacing":
            check("sweep.values", all(v > 0 for v in sweep["values"]), "spacing must be positive")

    spec = ExperimentSpec(
        space=space,
        scenario=scenario,
        methods=tuple(methods),
        seeds=tuple(seeds),
        mode=mode,
        out=str(data.get("out", "results")),
        profile=profile_name,
        scenario_file=scenario_file,
        optimizer=optimizer,
        master_seed=int(master_seed),
        weight=float(weight),
        n_slots=n_slots,
        per_slot_budget=per_slot,
        window=window,
        sweep=sweep,
        oracle_cap=int(cap),
    )
    # Surface optimizer parameter errors at load time rather than inside a cell.
    for m in methods:
        try:
            spec.optimizer_params(m, 0)
        except SpecValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecValidationError(f"methods.{m.name}.params", str(exc)) from None
    return spec


def _read_json(path: Path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"{path}:{exc.lineno}:{exc.colno}", f"malformed JSON ({exc.msg})") from None


def load_experiment(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecValidationError("path", f"file not found: {path}")
    return spec_from_dict(_read_json(path), base_dir=path.parent)


def save_experiment(spec: ExperimentSpec, path: str | Path) -> None:
    data = spec.to_dict()
    if data["scenario"] is None:
        del data["scenario"]
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- scenes --------------------------------------------------------------------------


def cell_seed(spec: ExperimentSpec, seed: int) -> int:
    """Master seed for one grid seed; every random consumer of a cell derives from it."""
    return child_seed(spec.master_seed, f"seed-{seed}")


def variant_space(spec: ExperimentSpec, value) -> SpaceSpec:
    if spec.sweep is not None and spec.sweep["kind"] == "port_spacing":
        return replace(spec.space, port_spacing=float(value))
    return spec.space


def cell_scenes(spec: ExperimentSpec, seed: int, value=None) -> list[Scene]:
    """Scene (static) or slot-by-slot scenes (dynamic) for one grid seed.

    Every sweep point of a seed shares the same scene draw; a power sweep only
    rescales the transmit power.
    """
    space = variant_space(spec, value)
    s = cell_seed(spec, seed)
    ds = random_dynamic_scene(space, spec.scenario, substream(s, "scene"))
    scenes = [ds.scene] if spec.mode == "static" else scene_trajectory(ds, spec.n_slots - 1, s)
    if spec.sweep is not None and spec.sweep["kind"] == "tx_power_dbm":
        scenes = [sc.with_tx_power(dbm_to_watt(float(value))) for sc in scenes]
    return scenes


# -- running cells -------------------------------------------------------------------


def _run_static_method(spec: ExperimentSpec, method: MethodSpec, scene: Scene, space: SpaceSpec, seed: int) -> RunTrace:
    params = spec.optimizer_params(method, seed)
    extra = dict(method.params)
    if method.name in ("g-mobo", "rf-black", "gp-grey", "gp-black"):
        surrogate, mode = {
            "g-mobo": ("rf", "grey"),
            "rf-black": ("rf", "black"),
            "gp-grey": ("gp", "grey"),
            "gp-black": ("gp", "black"),
        }[method.name]
        return run_static(scene, space, replace(params, surrogate=surrogate, mode=mode), method=method.name)
    if method.name == "gp-bo":
        return baselines.blackbox_gpbo(scene, space, params.budget, params, seed)
    budget = params.budget
    w = spec.weight
    if method.name == "random":
        return baselines.random_search(scene, space, budget, seed)
    if method.name == "greedy":
        return baselines.greedy_alternating(scene, space, budget, w, seed)
    if method.name == "mab":
        return baselines.mab_ucb(
            scene, space, budget, w, arm_pool=extra.get("arm_pool", 1000), c_ucb=extra.get("c_ucb", 1.0), seed=seed
        )
    if method.name == "zo":
        return baselines.zo_search(scene, space, budget, w, step=extra.get("step", 1.0), smoothing=extra.get("smoothing", 1.0), seed=seed)
    raise ValueError(f"unknown static method {method.name!r}")


def _run_dynamic_method(spec: ExperimentSpec, method: MethodSpec, scenes: list[Scene], space: SpaceSpec, seed: int) -> list[RunTrace]:
    params = spec.optimizer_params(method, seed)
    if method.name == "g-mobo-adaptive":
        return run_dynamic(scenes, space, params, spec.per_slot_budget, spec.window, method=method.name).slots
    if method.name == "static":
        # The slot-0 search is exactly the adaptive method's, then its archive is frozen.
        first = run_dynamic(scenes[:1], space, params, spec.per_slot_budget, spec.window, method="static").slots[0]
        return [first] + baselines.static_frozen(first.archive.configs(), scenes[1:], space, first_slot=1)
    if method.name == "kalman":
        return baselines.kalman_predict_then_optimize(
            scenes,
            space,
            spec.per_slot_budget,
            spec.weight,
            seed,
            slot_s=spec.scenario.slot_s,
            obs_std=method.params.get("obs_std", 1.0),
            accel_std=method.params.get("accel_std", spec.scenario.accel_bound),
        )
    raise ValueError(f"unknown dynamic method {method.name!r}")


def run_cell(spec: ExperimentSpec, variant: str, value, method: MethodSpec, seed: int) -> dict:
    """One (variant, method, seed) cell. Returns rows, Pareto rows, timing and an error (if any)."""
    space = variant_space(spec, value)
    s = cell_seed(spec, seed)
    t0 = time.perf_counter()
    try:
        scenes = cell_scenes(spec, seed, value)
        if spec.mode == "static":
            traces = [_run_static_method(spec, method, scenes[0], space, s)]
        else:
            traces = _run_dynamic_method(spec, method, scenes, space, s)
    except Exception as exc:  # recorded per cell; the grid keeps going
        return {"variant": variant, "method": method.name, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    elapsed_ms = (time.perf_counter() - t0) * 1e3
    rows, pareto = [], []
    for slot, tr in enumerate(traces):
        for r in tr.records:
            rows.append([variant, method.name, seed, slot, r.eval_idx, r.config_id, repr(r.r_c), repr(r.r_s), repr(r.hvi), repr(r.hv), "", repr(r.tr_side), r.restarts])
        for e in tr.archive.entries:
            pareto.append([variant, slot, e.eval_idx, e.config_id, repr(e.f.r_c), repr(e.f.r_s)])
    return {
        "variant": variant,
        "method": method.name,
        "seed": seed,
        "rows": rows,
        "pareto": pareto,
        "evals": len(rows),
        "wall_ms": elapsed_ms,
        "error": None,
    }


def _run_cell_args(args):
    return run_cell(*args)


def expected_evaluations(spec: ExperimentSpec, method: MethodSpec) -> int | None:
    """Trace rows a cell must produce; None when the count depends on the run (frozen archive size)."""
    params = spec.optimizer_params(method, 0)
    if spec.mode == "static":
        return params.budget
    if method.name == "g-mobo-adaptive":
        return params.budget + (spec.n_slots - 1) * spec.per_slot_budget
    if method.name == "kalman":
        return spec.n_slots * spec.per_slot_budget
    return None


def run_experiment(spec: ExperimentSpec, out: str | Path | None = None, jobs: int | None = None) -> int:
    """Run the grid and write trace.csv, pareto_<method>_<seed>.csv, timings.csv and summary.json.

    Returns the process exit code: 0 when every cell succeeded, 3 otherwise.
    """
    out = Path(out or spec.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(spec, label, value, m, seed) for label, value in spec.variants() for m in spec.methods for seed in spec.seeds]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [_run_cell_args(c) for c in cells]

    oracle = load_oracle(out)
    with (out / "trace.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for res in results:
            if res["error"]:
                continue
            for row in res["rows"]:
                star = oracle.get((row[0], str(row[2]), str(row[3])))
                if star is not None:
                    row = list(row)
                    row[10] = repr(star - float(row[9]))
                writer.writerow(row)
    by_file: dict[str, list] = {}
    for res in results:
        if not res["error"]:
            by_file.setdefault(f"pareto_{res['method']}_{res['seed']}.csv", []).extend(res["pareto"])
    for name, rows in by_file.items():
        with (out / name).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(PARETO_COLUMNS)
            writer.writerows(rows)
    with (out / "timings.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "method", "seed", "evaluations", "wall_ms"])
        for res in results:
            if not res["error"]:
                writer.writerow([res["variant"], res["method"], res["seed"], res["evals"], f"{res['wall_ms']:.3f}"])

    summary = summarize(out / "trace.csv", spec.mode)
    summary["spec"] = spec.to_dict()
    summary["failures"] = [
        {"variant": r["variant"], "method": r["method"], "seed": r["seed"], "error": r["error"]} for r in results if r["error"]
    ]
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 3 if summary["failures"] else 0


# -- summaries -----------------------------------------------------------------------


def read_trace(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _quartiles(values) -> dict:
    v = np.asarray(values, dtype=float)
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    return {"median": float(q50), "q25": float(q25), "q75": float(q75), "n": int(v.size)}


def _final_per_slot(rows: list[dict]) -> dict:
    """(variant, method, seed, slot) -> (final HV, final regret or None, best r_c, best r_s per weight 0.5)."""
    out: dict = {}
    for r in rows:
        key = (r["variant"], r["method"], int(r["seed"]), int(r["slot"]))
        out[key] = r  # rows are in eval order per slot, so the last one wins
    return out


def summarize(trace_path: str | Path, mode: str) -> dict:
    """Per (variant, method): median/IQR of final HV and cumulative HV regret (and per-slot ratios when dynamic)."""
    rows = read_trace(trace_path)
    last = _final_per_slot(rows)
    regret_sum: dict = {}
    for r in rows:
        if r["hv_regret"] != "":
            key = (r["variant"], r["method"], int(r["seed"]))
            regret_sum[key] = regret_sum.get(key, 0.0) + float(r["hv_regret"])
    groups: dict = {}
    for (variant, method, seed, slot), r in last.items():
        groups.setdefault((variant, method), {}).setdefault(seed, {})[slot] = r
    methods = {}
    for (variant, method), per_seed in sorted(groups.items()):
        entry: dict = {}
        if mode == "static":
            finals = [float(slots[0]["hv"]) for _, slots in sorted(per_seed.items())]
            entry["final_hv"] = _quartiles(finals)
        else:
            means = [float(np.mean([float(r["hv"]) for r in slots.values()])) for _, slots in sorted(per_seed.items())]
            entry["mean_slot_hv"] = _quartiles(means)
            ratios = {}
            for seed, slots in per_seed.items():
                for slot, r in slots.items():
                    if r["hv_regret"] != "":
                        star = float(r["hv"]) + float(r["hv_regret"])
                        ratios.setdefault(slot, []).append(float(r["hv"]) / star if star > 0 else 1.0)
            if ratios:
                entry["slot_hv_ratio"] = {str(t): _quartiles(v) for t, v in sorted(ratios.items())}
        cum = [regret_sum[(variant, method, s)] for s in sorted(per_seed) if (variant, method, s) in regret_sum]
        if cum:
            entry["cumulative_hv_regret"] = _quartiles(cum)
        methods.setdefault(variant, {})[method] = entry
    return {"mode": mode, "variants": methods}


# -- oracle --------------------------------------------------------------------------


def oracle(spec: ExperimentSpec, out: str | Path | None = None, cap: int | None = None) -> Path:
    """Exhaustive Pareto front and HV* per (variant, seed, slot), written to oracle.json."""
    out = Path(out or spec.out)
    out.mkdir(parents=True, exist_ok=True)
    cap = int(cap or spec.oracle_cap)
    cells = []
    for label, value in spec.variants():
        space = variant_space(spec, value)
        coords = enumerate_coords(space, cap)
        for seed in spec.seeds:
            for slot, scene in enumerate(cell_scenes(spec, seed, value)):
                objectives, _ = objectives_batch(coords, scene, space)
                front = objectives[nondominated_mask(objectives)]
                front = front[np.lexsort((-front[:, 1], -front[:, 0]))]
                cells.append(
                    {
                        "variant": label,
                        "seed": seed,
                        "slot": slot,
                        "hv_star": hypervolume_2d(front, (0.0, 0.0)),
                        "front": [[float(a), float(b)] for a, b in front],
                    }
                )
    path = out / "oracle.json"
    path.write_text(json.dumps({"space_size": int(len(coords)), "cells": cells}, indent=1, sort_keys=True) + "\n")
    return path


def load_oracle(out: str | Path) -> dict:
    """(variant, seed string, slot string) -> HV*; empty when no oracle file exists."""
    path = Path(out) / "oracle.json"
    if not path.is_file():
        return {}
    data = json.loads(path.read_text())
    return {(c["variant"], str(c["seed"]), str(c["slot"])): float(c["hv_star"]) for c in data["cells"]}


# -- report --------------------------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def report(result_dir: str | Path) -> list[Path]:
    """Tidy long-format plot-data CSVs derived from trace.csv, pareto files and summary.json."""
    result_dir = Path(result_dir)
    missing = [name for name in ("trace.csv", "summary.json") if not (result_dir / name).is_file()]
    if missing:
        raise FileNotFoundError(f"missing inputs in {result_dir}: {', '.join(missing)}")
    summary = json.loads((result_dir / "summary.json").read_text())
    spec = summary.get("spec", {})
    mode = summary["mode"]
    weight = float(spec.get("weight", 0.5))
    rows = read_trace(result_dir / "trace.csv")
    written = []

    # hv_convergence.csv: running HV per evaluation, aggregated over seeds.
    curves: dict = {}
    for r in rows:
        curves.setdefault((r["variant"], r["method"], int(r["slot"]), int(r["eval_idx"])), []).append(float(r["hv"]))
    conv = []
    for (variant, method, slot, idx), vals in sorted(curves.items()):
        q = _quartiles(vals)
        conv.append([variant, method, slot, idx, _fmt(q["median"]), _fmt(q["q25"]), _fmt(q["q75"]), q["n"]])
    path = result_dir / "hv_convergence.csv"
    _write_csv(path, ["variant", "method", "slot", "eval_idx", "median_hv", "q25_hv", "q75_hv", "n_seeds"], conv)
    written.append(path)

    # pareto_front.csv: every method's final archive(s) in one long table.
    front_rows = []
    for p in sorted(result_dir.glob("pareto_*_*.csv")):
        method, seed = p.stem[len("pareto_"):].rsplit("_", 1)
        with p.open(newline="") as fh:
            for r in csv.DictReader(fh):
                front_rows.append([r["variant"], method, seed, r["slot"], r["eval_idx"], r["config_id"], r["r_c"], r["r_s"]])
    path = result_dir / "pareto_front.csv"
    _write_csv(path, ["variant", "method", "seed", "slot", "eval_idx", "config_id", "r_c", "r_s"], front_rows)
    written.append(path)

    # Sweeps: final HV and best scalarized utility per sweep value.
    sweep = spec.get("sweep")
    if sweep:
        best: dict = {}
        for r in rows:
            key = (r["variant"], r["method"], r["seed"])
            u = weight * float(r["r_c"]) + (1 - weight) * float(r["r_s"])
            hv = float(r["hv"])
            old = best.get(key, (-math.inf, 0.0))
            best[key] = (max(old[0], u), max(old[1], hv))
        agg: dict = {}
        for (variant, method, _), (u, hv) in best.items():
            agg.setdefault((variant, method), ([], []))
            agg[(variant, method)][0].append(u)
            agg[(variant, method)][1].append(hv)
        name = "power_sweep.csv" if sweep["kind"] == "tx_power_dbm" else "spacing_sweep.csv"
        value_col = "tx_power_dbm" if sweep["kind"] == "tx_power_dbm" else "port_spacing"
        out_rows = []
        for (variant, method), (us, hvs) in sorted(agg.items(), key=lambda kv: (float(kv[0][0].split("=")[1]), kv[0][1])):
            qu, qh = _quartiles(us), _quartiles(hvs)
            out_rows.append(
                [variant.split("=")[1], method, _fmt(qu["median"]), _fmt(qu["q25"]), _fmt(qu["q75"]), _fmt(qh["median"]), _fmt(qh["q25"]), _fmt(qh["q75"]), qu["n"]]
            )
        path = result_dir / name
        _write_csv(
            path,
            [value_col, "method", "median_utility", "q25_utility", "q75_utility", "median_hv", "q25_hv", "q75_hv", "n_seeds"],
            out_rows,
        )
        written.append(path)

    if mode == "dynamic":
        last: dict = {}
        util: dict = {}
        for r in rows:
            key = (r["variant"], r["method"], r["seed"], int(r["slot"]))
            last[key] = r
            u = weight * float(r["r_c"]) + (1 - weight) * float(r["r_s"])
            util[key] = max(util.get(key, -math.inf), u)
        per: dict = {}
        for key, r in last.items():
            variant, method, _, slot = key
            ratio = math.nan
            if r["hv_regret"] != "":
                star = float(r["hv"]) + float(r["hv_regret"])
                ratio = float(r["hv"]) / star if star > 0 else 1.0
            per.setdefault((variant, method, slot), []).append((ratio, float(r["hv"]), util[key]))
        out_rows = []
        for (variant, method, slot), vals in sorted(per.items()):
            arr = np.array(vals)
            n = len(arr)
            ratios = arr[:, 0]
            have_ratio = not np.isnan(ratios).any()
            mean = float(ratios.mean()) if have_ratio else math.nan
            half = 1.96 * float(ratios.std(ddof=1)) / math.sqrt(n) if have_ratio and n > 1 else 0.0
            cells = [
                variant, method, slot,
                _fmt(np.median(ratios)) if have_ratio else "",
                _fmt(mean) if have_ratio else "",
                _fmt(mean - half) if have_ratio else "",
                _fmt(mean + half) if have_ratio else "",
                _fmt(np.median(arr[:, 1])),
                _fmt(np.median(arr[:, 2])),
                n,
            ]
            out_rows.append(cells)
        path = result_dir / "dynamic_tracking.csv"
        _write_csv(
            path,
            ["variant", "method", "slot", "median_hv_ratio", "mean_hv_ratio", "ci95_low", "ci95_high", "median_hv", "median_utility", "n_seeds"],
            out_rows,
        )
        written.append(path)
    return written
