import csv
import json
import statistics

import numpy as np
import pytest

from fas_mobo.config_space import SpaceSpec
from fas_mobo.errors import SpecValidationError
from fas_mobo.harness.cli import main
from fas_mobo.harness.experiment import (
    ExperimentSpec,
    cell_scenes,
    expected_evaluations,
    load_experiment,
    oracle,
    report,
    run_experiment,
    save_experiment,
    spec_from_dict,
)
from fas_mobo.optimizer import OptimizerParams

SMALL = {
    "space": {"grid_rows": 3, "grid_cols": 3, "n_tx": 1, "n_rx": 1, "n_users": 1, "n_orientations": 2, "n_beams": 2},
    "scenario_params": {"n_targets": 1},
    "optimizer": {"budget": 12, "n_init": 4, "n_mc": 8, "n_cand": 32},
}


def small_spec(**overrides) -> dict:
    data = json.loads(json.dumps(SMALL))
    data.update(overrides)
    return data


def write_spec(path, data):
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch):
    monkeypatch.delenv("FAS_MOBO_SEED", raising=False)


# -- loading ---------------------------------------------------------------------------------------


def test_empty_spec_is_full_scale_profile():
    spec = spec_from_dict({})
    assert spec.space == SpaceSpec(9, 9, 4, 4, 2, 8, 8, 0.5)
    sc = spec.scenario
    assert sc.carrier_hz == 28e9 and sc.bs_position == (0.0, 0.0, 30.0)
    assert (sc.n_targets, sc.n_clutter, sc.n_paths, sc.phase_bits, sc.si_atten_db) == (2, 3, 4, 3, -100.0)
    params = spec.optimizer_params(spec.methods[0], 0)
    assert (params.budget, params.n_init, params.n_mc) == (300, 64, 128)
    tr = params.tr
    assert (tr.gamma_inc, tr.gamma_dec, tr.tau_s, tr.tau_f) == (1.5, 0.5, 1, 3)
    assert [m.name for m in spec.methods] == ["g-mobo"] and spec.seeds == (0,)


def test_bench_profile():
    spec = spec_from_dict({"profile": "bench-small"})
    assert spec.space == SpaceSpec(4, 4, 2, 2, 1, 4, 8, 0.5)
    assert spec.scenario.n_targets == 1
    assert spec.optimizer_params(spec.methods[0], 0).budget == 150


@pytest.mark.parametrize(
    "data,field",
    [
        ({"colour": 1}, "colour"),
        ({"profile": "huge"}, "profile"),
        ({"mode": "live"}, "mode"),
        ({"methods": []}, "methods"),
        ({"methods": ["g-mobo", "g-mobo"]}, "methods"),
        ({"methods": ["kalman"]}, "methods[0].name"),
        ({"seeds": []}, "seeds"),
        ({"seeds": [-1]}, "seeds"),
        ({"weight": 2}, "weight"),
        ({"space": {"n_tx": 0}}, "space"),
        ({"scenario_params": {"warp": 9}}, "scenario_params.warp"),
        ({"optimizer": {"budgett": 9}}, "optimizer.budgett"),
        ({"optimizer": {"budget": 10, "n_init": 10}}, "methods.g-mobo.params"),
        ({"sweep": {"kind": "bandwidth", "values": [1]}}, "sweep.kind"),
        ({"window": -1}, "window"),
        ({"scenario": "nowhere.json"}, "scenario"),
    ],
)
def test_validation_names_the_field(data, field):
    with pytest.raises(SpecValidationError) as exc:
        spec_from_dict(data)
    assert exc.value.field == field


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "seeds": [1,\n}')
    with pytest.raises(SpecValidationError) as exc:
        load_experiment(path)
    assert ":3:" in exc.value.field


def test_round_trip(tmp_path):
    spec = spec_from_dict(small_spec(methods=["g-mobo", {"name": "mab", "params": {"arm_pool": 5}}], seeds=[1, 4]))
    save_experiment(spec, tmp_path / "s.json")
    assert load_experiment(tmp_path / "s.json") == spec


def test_scenario_file_is_merged(tmp_path):
    (tmp_path / "scene.json").write_text(json.dumps({"n_clutter": 1, "tx_power_dbm": 20.0}))
    spec = load_experiment(write_spec(tmp_path / "s.json", small_spec(scenario="scene.json")))
    assert spec.scenario.n_clutter == 1 and spec.scenario.tx_power_dbm == 20.0 and spec.scenario.n_targets == 1


def test_env_overrides_master_seed(monkeypatch):
    monkeypatch.setenv("FAS_MOBO_SEED", "77")
    assert spec_from_dict({"master_seed": 3}).master_seed == 77


def test_seed_streams_are_independent_per_grid_seed():
    spec = spec_from_dict(small_spec(seeds=[0, 1]))
    a, b = cell_scenes(spec, 0)[0], cell_scenes(spec, 1)[0]
    assert not np.allclose(a.users[0].position, b.users[0].position)
    assert np.array_equal(cell_scenes(spec, 0)[0].users[0].position, a.users[0].position)


# -- running ---------------------------------------------------------------------------------------


def test_single_cell_writes_exactly_budget_rows(tmp_path):
    spec = spec_from_dict(small_spec())
    assert run_experiment(spec, tmp_path, jobs=1) == 0
    rows = read_csv(tmp_path / "trace.csv")
    assert len(rows) == 12
    assert [int(r["eval_idx"]) for r in rows] == list(range(12))
    hv = [float(r["hv"]) for r in rows]
    assert all(b >= a for a, b in zip(hv, hv[1:]))
    assert (tmp_path / "pareto_g-mobo_0.csv").is_file()
    assert (tmp_path / "timings.csv").is_file()


ALL_STATIC = ["g-mobo", "rf-black", "gp-grey", "gp-black", "gp-bo", "random", "greedy", {"name": "mab", "params": {"arm_pool": 6}}, "zo"]


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("static")
    spec = spec_from_dict(small_spec(methods=ALL_STATIC, seeds=[0, 1, 2]))
    oracle(spec, out)
    code = run_experiment(spec, out, jobs=1)
    report(out)
    return spec, out, code


def test_full_static_grid(static_run):
    spec, out, code = static_run
    assert code == 0
    rows = read_csv(out / "trace.csv")
    for m in spec.methods:
        for s in spec.seeds:
            n = sum(1 for r in rows if r["method"] == m.name and r["seed"] == str(s))
            assert n == expected_evaluations(spec, m) == 12


def test_regret_joined_and_nonnegative(static_run):
    _, out, _ = static_run
    stars = {(c["seed"], c["slot"]): c["hv_star"] for c in json.loads((out / "oracle.json").read_text())["cells"]}
    for r in read_csv(out / "trace.csv"):
        star = stars[(int(r["seed"]), int(r["slot"]))]
        assert float(r["hv_regret"]) >= 0
        assert float(r["hv_regret"]) == pytest.approx(star - float(r["hv"]), abs=1e-15)


def test_summary_recomputed_independently(static_run):
    _, out, _ = static_run
    summary = json.loads((out / "summary.json").read_text())
    finals, regret = {}, {}
    for r in read_csv(out / "trace.csv"):
        finals[(r["method"], r["seed"])] = float(r["hv"])
        regret[(r["method"], r["seed"])] = regret.get((r["method"], r["seed"]), 0.0) + float(r["hv_regret"])
    for method, entry in summary["variants"]["base"].items():
        seeds = [v for (m, _), v in sorted(finals.items()) if m == method]
        assert entry["final_hv"]["median"] == pytest.approx(statistics.median(seeds), rel=1e-12)
        cum = [v for (m, _), v in sorted(regret.items()) if m == method]
        assert entry["cumulative_hv_regret"]["median"] == pytest.approx(statistics.median(cum), rel=1e-9)


def test_report_ranks_match_summary(static_run):
    _, out, _ = static_run
    summary = json.loads((out / "summary.json").read_text())["variants"]["base"]
    conv = read_csv(out / "hv_convergence.csv")
    last = {r["method"]: float(r["median_hv"]) for r in conv if r["eval_idx"] == "11"}
    rank_report = sorted(last, key=lambda m: (-last[m], m))
    rank_summary = sorted(summary, key=lambda m: (-summary[m]["final_hv"]["median"], m))
    assert rank_report == rank_summary
    front = read_csv(out / "pareto_front.csv")
    assert {r["method"] for r in front} == set(summary)


def test_single_seed_iqr_collapses(tmp_path):
    spec = spec_from_dict(small_spec())
    run_experiment(spec, tmp_path, jobs=1)
    report(tmp_path)
    for r in read_csv(tmp_path / "hv_convergence.csv"):
        assert r["median_hv"] == r["q25_hv"] == r["q75_hv"]


def test_rerun_is_byte_identical_and_parallel_matches(tmp_path):
    spec = spec_from_dict(small_spec(methods=["g-mobo", "random"], seeds=[0, 1]))
    run_experiment(spec, tmp_path / "a", jobs=1)
    run_experiment(spec, tmp_path / "b", jobs=1)
    run_experiment(spec, tmp_path / "c", jobs=2)
    for name in ("trace.csv", "pareto_g-mobo_0.csv", "pareto_random_1.csv", "summary.json"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_dynamic_grid_and_tracking_report(tmp_path):
    spec = spec_from_dict(
        small_spec(mode="dynamic", methods=["g-mobo-adaptive", "static", "kalman"], seeds=[0, 1], n_slots=3, per_slot_budget=4)
    )
    cap = oracle(spec, tmp_path)
    cells = json.loads(cap.read_text())["cells"]
    assert sorted((c["seed"], c["slot"]) for c in cells) == [(s, t) for s in (0, 1) for t in range(3)]
    assert run_experiment(spec, tmp_path, jobs=1) == 0
    rows = read_csv(tmp_path / "trace.csv")
    adaptive = [r for r in rows if r["method"] == "g-mobo-adaptive" and r["seed"] == "0"]
    assert len(adaptive) == expected_evaluations(spec, spec.methods[0]) == 12 + 2 * 4
    assert all(float(r["hv_regret"]) >= 0 for r in rows)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["variants"]["base"]["kalman"]["slot_hv_ratio"]) == {"0", "1", "2"}
    paths = report(tmp_path)
    track = read_csv(tmp_path / "dynamic_tracking.csv")
    assert tmp_path / "dynamic_tracking.csv" in paths
    for r in track:
        assert 0 <= float(r["median_hv_ratio"]) <= 1
        assert float(r["ci95_low"]) <= float(r["mean_hv_ratio"]) <= float(r["ci95_high"])


@pytest.mark.parametrize("kind,values,name", [("tx_power_dbm", [20, 30], "power_sweep.csv"), ("port_spacing", [0.25, 0.5], "spacing_sweep.csv")])
def test_sweeps(tmp_path, kind, values, name):
    spec = spec_from_dict(small_spec(sweep={"kind": kind, "values": values}, methods=["random"], seeds=[0, 1]))
    assert [v for _, v in spec.variants()] == values
    run_experiment(spec, tmp_path, jobs=1)
    report(tmp_path)
    rows = read_csv(tmp_path / name)
    assert [float(r[kind]) for r in rows] == [float(v) for v in values]


def test_power_sweep_raises_utility(tmp_path):
    spec = spec_from_dict(small_spec(sweep={"kind": "tx_power_dbm", "values": [10, 40]}, methods=["random"], seeds=[0, 1, 2]))
    run_experiment(spec, tmp_path, jobs=1)
    report(tmp_path)
    low, high = read_csv(tmp_path / "power_sweep.csv")
    assert float(high["median_utility"]) > float(low["median_utility"])


def test_cell_failure_recorded(tmp_path):
    spec = spec_from_dict(small_spec(methods=["random", {"name": "mab", "params": {"arm_pool": 0}}]))
    assert run_experiment(spec, tmp_path, jobs=1) == 3
    failures = json.loads((tmp_path / "summary.json").read_text())["failures"]
    assert [f["method"] for f in failures] == ["mab"] and "arm_pool" in failures[0]["error"]
    assert len(read_csv(tmp_path / "trace.csv")) == 12


def test_spec_dataclass_defaults():
    spec = ExperimentSpec(SpaceSpec(), spec_from_dict({}).scenario, (), (0,))
    assert spec.variants() == [("base", None)]
    assert isinstance(spec.optimizer_params(spec_from_dict({}).methods[0], 3), OptimizerParams)


# -- CLI ---------------------------------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, capsys):
    spec_path = write_spec(tmp_path / "s.json", small_spec(out=str(tmp_path / "res")))
    assert main(["validate", str(spec_path)]) == 0
    assert main(["oracle", str(spec_path)]) == 0
    assert main(["run", str(spec_path), "--jobs", "1"]) == 0
    assert main(["report", str(tmp_path / "res")]) == 0
    out = capsys.readouterr().out
    assert "hv_convergence.csv" in out


def test_cli_exit_codes(tmp_path, capsys):
    bad = write_spec(tmp_path / "bad.json", {"mode": "sideways"})
    assert main(["validate", str(bad)]) == 2
    assert "mode" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    assert main(["report", str(tmp_path)]) == 2
    assert "trace.csv" in capsys.readouterr().err
    big = write_spec(tmp_path / "big.json", {"out": str(tmp_path / "o")})
    assert main(["oracle", str(big), "--cap", "1000"]) == 2
    err = capsys.readouterr().err
    assert "1152766847232000" in err and "smaller" in err
    failing = write_spec(tmp_path / "f.json", small_spec(methods=[{"name": "mab", "params": {"arm_pool": 0}}], out=str(tmp_path / "f")))
    assert main(["run", str(failing), "--jobs", "1"]) == 3
