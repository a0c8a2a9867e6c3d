import json
import math

import numpy as np
import pytest

from msched.harness.cli import main
from msched.harness.config import (
    ConfigError,
    ExperimentConfig,
    RLSettings,
    SchedulerSpec,
    config_from_dict,
    load_config,
    parse_scheduler,
)
from msched.harness.ecd import EcdFitError, fit_ecd
from msched.harness.experiments import (
    CSV_COLUMNS,
    ResultRow,
    beta_diagnostics,
    compare,
    crossovers,
    derived_seed,
    ratio_entry,
    read_rows,
    rows_to_csv,
    run_memory,
    sweep,
)
from msched.noise import ProfileTransform
from msched.sim.estimate import ErrorEstimate

FAST = dict(distances=(3,), rounds=2, shots=2000, seed=4)

# a d=5 profile whose cheapest readout is deep, so m=1 with one step cannot be met
HARSH = {"name": "harsh", "ger": 0.00333625, "mean_mer": 0.1, "std_mer": 0.15, "pin_mean": True, "seed": 2}


def fast_cfg(**kw):
    return ExperimentConfig(**{**FAST, **kw})


# rows and CSV


def test_csv_round_trip():
    rows = [ResultRow("alpha", 3, "original", 1.0, 0.01, 0.008, 0.012), ResultRow("depth_m", 5, "oracle", 2.0, 0.3)]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    again = read_rows(text)
    assert again == rows


def test_read_rows_rejects_bad_header():
    with pytest.raises(ValueError, match="columns"):
        read_rows("d,scheduler,rate\n3,original,0.1\n")


def test_derived_seed_stable_and_distinct():
    assert derived_seed(1, 3) == derived_seed(1, 3)
    assert len({derived_seed(1, 3), derived_seed(1, 5), derived_seed(2, 3), derived_seed(1, 3, 2)}) == 4


# effective distance fit


@pytest.mark.parametrize("shift", [0.0, 1.0, 2.0, -0.5])
def test_fit_ecd_synthetic_oracle(shift):
    base = {d: 0.1 * 0.5 ** (d / 2) for d in (3, 5, 7, 9)}
    cand = {d: 0.1 * 0.5 ** ((d + shift) / 2) for d in (3, 5, 7, 9)}
    fit = fit_ecd(base, cand)
    assert fit.a == pytest.approx(0.1, rel=1e-9)
    assert fit.p_ratio == pytest.approx(0.5, rel=1e-9)
    for d, e in fit.ecd.items():
        assert e == pytest.approx(d + shift, abs=1e-9)
    assert fit.mean_gain == pytest.approx(shift, abs=1e-9)
    assert max(abs(r) for r in fit.residuals) < 1e-12


def test_fit_ecd_baseline_recovers_own_distance():
    base = {3: 0.02, 5: 0.0075, 7: 0.003}
    fit = fit_ecd(base, base)
    for d, e in fit.ecd.items():
        assert abs(e - d) < 0.3


def test_fit_ecd_accepts_rows():
    rows = [ResultRow("alpha", d, "x", 1.0, 0.1 * 0.3 ** (d / 2)) for d in (3, 5, 7)]
    assert fit_ecd(rows, rows).ecd[5] == pytest.approx(5.0)
    assert json.loads(json.dumps(fit_ecd(rows, rows).to_json()))["ecd"]["7"] == pytest.approx(7.0)


@pytest.mark.parametrize(
    "base, match",
    [
        ({3: 0.1, 5: 0.05}, "three"),
        ({3: 0.1, 5: 0.0, 7: 0.01}, "positive"),
        ({3: 0.1, 5: 0.2, 7: 0.3}, "decrease"),
        ({3: 0.1, 5: 0.1, 7: 0.05}, "decrease"),
    ],
)
def test_fit_ecd_errors(base, match):
    with pytest.raises(EcdFitError, match=match):
        fit_ecd(base, {3: 0.01})


# experiments


def test_run_memory_rows_and_reproducibility():
    cfg = fast_cfg()
    a = run_memory(cfg)
    assert [(r.d, r.scheduler) for r in a] == [(3, "ms_local"), (3, "original")]
    assert all(r.sweep_key == "alpha" and r.ci_lo <= r.rate <= r.ci_hi for r in a)
    assert rows_to_csv(a) == rows_to_csv(run_memory(cfg))


def test_singleton_sweep_equals_run_memory():
    cfg = fast_cfg(transform=ProfileTransform(alpha=1.5))
    assert rows_to_csv(sweep("alpha", [1.5], cfg)) == rows_to_csv(run_memory(cfg))


def test_beta_sweep_shares_seed_across_values():
    cfg = fast_cfg(schedulers=(SchedulerSpec("original"),), profile="toy-d3")
    rows = sweep("beta", [1.0, 1.0], cfg)
    assert rows[0].rate == rows[1].rate


def test_sweep_rejects_bad_input():
    with pytest.raises(ValueError, match="empty"):
        sweep("alpha", [], fast_cfg())
    with pytest.raises(ValueError, match="unknown"):
        sweep("gamma", [1.0], fast_cfg())


def test_depth_sweep_rows():
    cfg = fast_cfg(profile="toy-d3", rl=RLSettings(epochs=40))
    rows = sweep("depth_m", [1, 2, 4], cfg)
    oracle = {r.value: r.rate for r in rows if r.scheduler == "oracle"}
    rl = {r.value: r.rate for r in rows if r.scheduler == "ms_rl"}
    assert list(oracle) == [1.0, 2.0, 4.0]
    assert all(rl[m] >= oracle[m] - 1e-12 for m in oracle)
    assert oracle[1.0] >= oracle[2.0] >= oracle[4.0]


def test_compare_identical_schedulers_gives_unit_ratio():
    out = compare(fast_cfg(), "original", "original")
    for entry in out["per_distance"] + [out["pooled"]]:
        if entry["ratio"] is not None:
            assert entry["ratio"] == pytest.approx(1.0)
            assert entry["ci95"][0] <= 1.0 <= entry["ci95"][1]
    assert out["gate_over_measure"] * out["measure_over_gate"] == pytest.approx(1.0)


def test_ratio_lower_bound_when_denominator_clean():
    num = ErrorEstimate.from_counts(20, 2000, [20], [2000])
    den = ErrorEstimate.from_counts(0, 2000, [0], [2000])
    e = ratio_entry(num, den, seed=0)
    assert e["ratio"] is None and e["ci95"] is None
    assert e["ratio_lower_bound"] == pytest.approx(20.0)


def test_pooled_bootstrap_contains_point_ratio():
    rng = np.random.default_rng(0)
    def est(rate, n_blocks=8, size=4096):
        f = rng.binomial(size, rate, n_blocks)
        return ErrorEstimate.from_counts(int(f.sum()), size * n_blocks, f, [size] * n_blocks)
    num = [est(0.02), est(0.008)]
    den = [est(0.01), est(0.004)]
    e = ratio_entry(num, den, seed=1)
    assert e["ci95"][0] <= e["ratio"] <= e["ci95"][1]
    assert 1.5 < e["ratio"] < 2.6


def _rows(name, d, rates, values=(1, 4, 8, 16)):
    return [ResultRow("beta", d, name, float(v), r) for v, r in zip(values, rates)]


def test_crossover_detection():
    rows = _rows("a", 5, [0.01, 0.02, 0.03, 0.04]) + _rows("b", 5, [0.015, 0.018, 0.02, 0.022])
    found = crossovers(rows, "a", "b")
    assert [c["between"] for c in found] == [[1.0, 4.0]]
    diag = beta_diagnostics(rows)
    assert diag["monotone"] == {"a@d=5": True, "b@d=5": True}
    assert len(diag["crossovers"]) == 1
    flat = _rows("a", 5, [0.01, 0.02, 0.03, 0.04]) + _rows("b", 5, [0.02, 0.03, 0.04, 0.05])
    assert crossovers(flat, "a", "b") == []
    bumpy = _rows("c", 3, [0.02, 0.01, 0.03, 0.04])
    assert beta_diagnostics(bumpy)["monotone"]["c@d=3"] is False


# config


@pytest.mark.parametrize(
    "raw",
    [
        {"distances": [4]},
        {"distances": []},
        {"shots": 10},
        {"rounds": 0},
        {"schedulers": ["magic"]},
        {"schedulers": ["ms_rl(m=0)"]},
        {"bogus": 1},
        {"alpha": 0},
        {"rl": {"nope": 1}},
    ],
)
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"distances": [3, 5], "schedulers": ["original", "ms_rl:2"], "beta": 4}))
    cfg = load_config(path)
    assert cfg.distances == (3, 5)
    assert cfg.schedulers[1] == SchedulerSpec("ms_rl", 2)
    assert cfg.transform.beta == 4.0
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(tmp_path / "bad.json")


@pytest.mark.parametrize("text, label", [("original", "original"), ("ms_rl(m=3)", "ms_rl(m=3)"), ("ms_rl:2", "ms_rl(m=2)")])
def test_parse_scheduler_labels(text, label):
    assert parse_scheduler(text).label == label


# command line


def test_cli_run_memory_and_fit(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    assert main(["run-memory", "--distances", "3", "--shots", "1000", "--rounds", "1", "--out", str(out)]) == 0
    rows = read_rows(out.read_text())
    assert {r.scheduler for r in rows} == {"original", "ms_local"}
    # one distance is not enough for a fit
    assert main(["fit-ecd", "--csv", str(out)]) == 2
    assert "three" in capsys.readouterr().err


def test_cli_fit_ecd_from_csv(tmp_path, capsys):
    rows = [ResultRow("alpha", d, s, 1.0, 0.1 * 0.4 ** ((d + k) / 2))
            for d in (3, 5, 7) for s, k in (("original", 0), ("ms_local", 1))]
    path = tmp_path / "rows.csv"
    path.write_text(rows_to_csv(rows))
    assert main(["fit-ecd", "--csv", str(path)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["mean_gain"] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "argv",
    [
        ["run-memory", "--distances", "4"],
        ["run-memory", "--shots", "5"],
        ["run-memory", "--schedulers", "nonsense"],
        ["run-memory", "--profile", "no-such-profile.json"],
    ],
)
def test_cli_config_errors_exit_2(argv):
    assert main(argv) == 2


def test_cli_infeasible_exits_3(tmp_path, capsys):
    prof = tmp_path / "harsh.json"
    prof.write_text(json.dumps(HARSH))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"distances": [5], "rl": {"epochs": 1, "steps_per_episode": 1}}))
    code = main(["train-rl", "--config", str(cfg), "--profile", str(prof), "--m", "1"])
    assert code == 3
    assert "infeasible" in capsys.readouterr().err


def test_cli_train_rl(capsys):
    assert main(["train-rl", "--distances", "3", "--profile", "toy-d3", "--m", "3", "--epochs", "30"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["tau"] <= 3 and len(res["curve"]) == 30
    assert res["best_cost"] >= res["ms_local_cost"] - 1e-12


def test_cli_sweep_beta_report(tmp_path):
    report = tmp_path / "diag.json"
    out = tmp_path / "beta.csv"
    argv = ["sweep-beta", "--distances", "3", "--shots", "1000", "--rounds", "1", "--grid", "1", "8",
            "--schedulers", "original", "--out", str(out), "--report", str(report)]
    assert main(argv) == 0
    diag = json.loads(report.read_text())
    assert set(diag) == {"monotone", "crossovers"}
    assert len(read_rows(out.read_text())) == 2


def test_cli_dumps(capsys):
    assert main(["dump-lattice", "--distances", "3"]) == 0
    lat = json.loads(capsys.readouterr().out)
    assert len(lat["data"]) == 9
    assert main(["dump-circuit", "--distances", "3", "--rounds", "1", "--schedulers", "ms_local"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# qubits 17") and "FLIP_MEASURE" in text


def test_cli_compare(capsys):
    assert main(["compare", "--distances", "3", "--shots", "1000", "--rounds", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["baseline"] == "original" and out["candidate"] == "ms_local"
    assert len(out["per_distance"]) == 1
    assert math.isfinite(out["gate_over_measure"])
