from __future__ import annotations

import csv

import numpy as np
import pytest
from click.testing import CliRunner

from dsgd.harness.cli import main
from dsgd.harness.config import ExperimentSpec, TaskSpec, dump_spec, load_spec, parse_spec
from dsgd.harness.ensemble import (build_task, compare_measurement_frontiers, read_summary, reference_cost,
                                   run_ensemble, summarize)
from dsgd.estimators import EstimatorConfig
from dsgd.optimizers import OptimizerConfig
from dsgd.rng import RngStream, as_stream

TFIM_SPEC = """
[task]
kind = tfim
num_qubits = 2
num_blocks = 1

[estimator]
shots = 1

[optimizer]
strategy = adam
alpha0 = 0.05
max_steps = 12

[experiment]
name = tiny
repeats = 2
seed = 4
trace_every = 3
"""


# -- spec files -------------------------------------------------------------------------


def test_parse_spec_values():
    spec = parse_spec(TFIM_SPEC)
    assert spec.task == TaskSpec("tfim", 2, 1)
    assert spec.estimator == EstimatorConfig(1)
    assert spec.optimizer.max_steps == 12 and spec.optimizer.strategy == "adam"
    assert (spec.name, spec.repeats, spec.seed, spec.trace_every) == ("tiny", 2, 4, 3)


def test_spec_dump_round_trip():
    spec = ExperimentSpec(TaskSpec("maxcut", edges=((0, 1), (1, 2)), depth=4),
                          EstimatorConfig(None, "uniform-term", "uniform"),
                          OptimizerConfig("plateau-decay", 0.02, target_loss=-1.5), l2=0.01, repeats=3, seed=9)
    assert parse_spec(dump_spec(spec)) == spec
    clf = ExperimentSpec(TaskSpec("classifier", 2, 1, epochs=3), EstimatorConfig(1, batch_size=4, batch_mode="shuffle"))
    assert parse_spec(dump_spec(clf)) == clf


@pytest.mark.parametrize("text, match", [
    (TFIM_SPEC + "\n[extra]\nx = 1\n", "unknown sections"),
    (TFIM_SPEC.replace("num_blocks = 1", "num_blockz = 1"), "unknown key"),
    (TFIM_SPEC.replace("shots = 1", "shots = many"), "estimator.shots"),
    (TFIM_SPEC.replace("[optimizer]", "[optimiser]"), "optimiser"),
    (TFIM_SPEC.replace("kind = tfim", "kind = ising"), "task kind"),
    (TFIM_SPEC.replace("shots = 1", "shots = 1\nbatch_size = 2"), "batch_size"),
])
def test_spec_errors(text, match):
    with pytest.raises(ValueError, match=match):
        parse_spec(text)


def test_load_spec_names_after_file(tmp_path):
    path = tmp_path / "my_run.ini"
    path.write_text(TFIM_SPEC.replace("name = tiny\n", ""))
    assert load_spec(path).name == "my_run"


def test_maxcut_task_from_random_graph_is_reproducible():
    t = TaskSpec("maxcut", num_vertices=5, num_edges=6, graph_seed=3, depth=2)
    assert build_task(t).edges == build_task(t).edges
    with pytest.raises(ValueError):
        TaskSpec("maxcut")


# -- ensembles --------------------------------------------------------------------------


def test_run_ensemble_writes_traces_and_summary(tmp_path):
    spec = parse_spec(TFIM_SPEC)
    ens = run_ensemble(spec, tmp_path)
    assert [r.seed for r in ens.runs] == [4, 5]
    task = build_task(spec.task)
    assert ens.mc1 == reference_cost(task) == 2 * 2 * 3
    with open(tmp_path / "trace_000.csv") as fh:
        rows = list(csv.reader(fh))
    assert [int(r[0]) for r in rows[1:]] == [0, 3, 6, 9, 12]
    cols, meta = read_summary(tmp_path / "summary.csv")
    assert int(meta["mc1"]) == ens.mc1
    assert float(meta["ground_energy"]) == pytest.approx(-np.sqrt(5))
    np.testing.assert_array_equal(cols["step"], [0, 3, 6, 9, 12])
    np.testing.assert_array_equal(cols["meas_cum"], 12 * cols["step"])
    np.testing.assert_allclose(cols["loss_mean"][-1], ens.final_losses().mean())
    assert np.all(cols["loss_min"] <= cols["loss_max"])


def test_ensemble_is_reproducible_and_parallel_safe():
    spec = parse_spec(TFIM_SPEC)
    a = run_ensemble(spec)
    b = run_ensemble(spec, jobs=2)
    np.testing.assert_array_equal(a.final_losses(), b.final_losses())


def test_summarize_carries_short_runs_forward():
    spec = parse_spec(TFIM_SPEC.replace("max_steps = 12", "max_steps = 50\ntarget_loss = -1.0"))
    traces = [r.trace for r in run_ensemble(spec).runs]
    s = summarize(traces)
    assert s["step"][-1] == max(len(t) for t in traces) - 1
    assert s["loss_max"][-1] == pytest.approx(max(t.final_loss for t in traces))


def test_classifier_ensemble_records_validation_accuracy():
    spec = ExperimentSpec(TaskSpec("classifier", 2, 1, num_train=6, num_validation=8, epochs=2),
                          EstimatorConfig(1, batch_size=3, batch_mode="shuffle"), OptimizerConfig("constant", 0.05))
    ens = run_ensemble(spec)
    run = ens.runs[0]
    assert len(run.trace) == 2 * 2 + 1
    assert len(run.extras["val_accuracy"]) == 2
    # batch 3, two slots, K=2 shifted circuits plus the unshifted one, one shot
    assert ens.mc1 == 3 * 2 * 3


def test_measurement_frontiers():
    few = run_ensemble(parse_spec(TFIM_SPEC))
    many = run_ensemble(parse_spec(TFIM_SPEC.replace("shots = 1", "shots = 4").replace("name = tiny", "name = four")))
    result = compare_measurement_frontiers([few, many], threshold=10.0)
    grid = result["columns"]["meas_over_mc1"]
    assert grid[-1] == 48
    assert np.all(np.diff(grid) > 0)
    assert result["reached"] == {"tiny": 0.0, "four": 0.0}
    col = result["columns"]["tiny"]
    assert np.isnan(col).sum() == 0 and col[grid > 12].tolist() == [few.summary["loss_mean"][-1]] * int((grid > 12).sum())
    other = run_ensemble(parse_spec(TFIM_SPEC.replace("num_blocks = 1", "num_blocks = 2")))
    with pytest.raises(ValueError):
        compare_measurement_frontiers([few, other])
    with pytest.raises(ValueError):
        compare_measurement_frontiers([])


# -- command line -----------------------------------------------------------------------


def test_cli_run(tmp_path):
    spec = tmp_path / "tiny.ini"
    spec.write_text(TFIM_SPEC)
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", str(spec), "--out", str(out), "--seed", "1"])
    assert res.exit_code == 0, res.output
    assert "MC_1=12" in res.output
    assert (out / "summary.csv").exists() and (out / "trace_001.csv").exists()


def test_cli_dump_circuit(tmp_path):
    spec = tmp_path / "tiny.ini"
    spec.write_text(TFIM_SPEC)
    res = CliRunner().invoke(main, ["run", str(spec), "--out", str(tmp_path), "--dump-circuit"])
    assert res.exit_code == 0
    assert (tmp_path / "circuit.txt").read_text() == build_task(parse_spec(TFIM_SPEC).task).circuit.to_text()


def test_cli_rejects_bad_spec(tmp_path):
    spec = tmp_path / "bad.ini"
    spec.write_text("[task]\nkind = nope\n")
    res = CliRunner().invoke(main, ["run", str(spec)])
    assert res.exit_code != 0
    assert "invalid spec" in res.output


def test_cli_compare(tmp_path):
    a, b = tmp_path / "a.ini", tmp_path / "b.ini"
    a.write_text(TFIM_SPEC)
    b.write_text(TFIM_SPEC.replace("shots = 1", "shots = 3").replace("name = tiny", "name = three"))
    out = tmp_path / "f.csv"
    res = CliRunner().invoke(main, ["compare", str(a), str(b), "--threshold", "5", "--out", str(out)])
    assert res.exit_code == 0, res.output
    with open(out) as fh:
        assert next(csv.reader(fh)) == ["meas_over_mc1", "tiny", "three"]


def test_cli_data_prepare(tmp_path):
    res = CliRunner().invoke(main, ["data", "prepare", "--source", "synthetic", "--out", str(tmp_path),
                                    "--num-train", "10", "--num-validation", "4"])
    assert res.exit_code == 0, res.output
    assert len((tmp_path / "train.csv").read_text().strip().splitlines()) >= 10
    res = CliRunner().invoke(main, ["data", "prepare", "--source", "mnist", "--out", str(tmp_path),
                                    "--raw", str(tmp_path / "nothing")])
    assert res.exit_code != 0


# -- random streams ---------------------------------------------------------------------


def test_rng_streams():
    a = RngStream(1, ("run",)).child(3, "shots").generator().random(4)
    b = RngStream(1, ("run",)).child(3, "shots").generator().random(4)
    c = RngStream(1, ("run",)).child(4, "shots").generator().random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert as_stream(5).identifier == (5, ())
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(TypeError):
        RngStream(0).child(True)
    with pytest.raises(TypeError):
        as_stream("seed")
