"""Command-line harness and experiment plumbing."""

import json

import numpy as np
import pytest

from permgamp import (
    ExperimentConfig,
    Link,
    Material,
    Scenario,
    Surface,
    UnusableLinkError,
    bundled_scenario_path,
    load_scenario,
    prepare_problem,
    run_sweep,
    save_scenario,
    synthesize_dataset,
    write_sweep_outputs,
)
from permgamp.cli import main
from permgamp.experiment import RUN_FIELDS, SUMMARY_FIELDS


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def test_generate_default_reproduces_bundled_fixture(tmp_path, capsys):
    out = tmp_path / "canyon.json"
    code, _, _ = _run(capsys, "generate", "--out", str(out))
    assert code == 0
    with open(bundled_scenario_path("canyon"), "rb") as fh:
        assert out.read_bytes() == fh.read()


def test_generate_minimal_single_link(tmp_path, capsys):
    out = tmp_path / "one.json"
    code, _, _ = _run(capsys, "generate", "--links", "1", "--out", str(out))
    assert code == 0
    sc = load_scenario(out)
    assert sc.n_links == 1 and sc.n_materials == 2


def test_generate_rejects_zero_materials(tmp_path, capsys):
    code, _, err = _run(capsys, "generate", "--materials", "0", "--out", str(tmp_path / "x.json"))
    assert code == 2
    assert "n_materials" in err


def test_generate_free_space(tmp_path, capsys):
    out = tmp_path / "fs.json"
    code, _, _ = _run(capsys, "generate", "--template", "free-space", "--links", "5", "--out", str(out))
    assert code == 0
    assert load_scenario(out).surfaces == ()


def test_generate_with_dataset(tmp_path, capsys):
    out = tmp_path / "sc.json"
    ds_out = tmp_path / "ds.json"
    code, _, _ = _run(
        capsys, "generate", "--out", str(out), "--sigma", "0.5",
        "--dataset-out", str(ds_out),
    )
    assert code == 0
    raw = json.loads(ds_out.read_text())
    assert raw["noise_var"] == 0.25
    assert len(raw["measured_db"]) == 100


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def test_estimate_noiseless_recovers_truth(capsys):
    code, out, err = _run(
        capsys, "estimate", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0", "--seed", "1",
    )
    assert code == 0
    payload = json.loads(out)
    truth = [3.0, 6.0]
    assert max(abs(e - t) for e, t in zip(payload["eps_hat"], truth)) <= 0.05
    assert payload["n_links_used"] == 100
    assert payload["dropped_links"] == []
    assert payload["wall_ms"] == 0.0


def test_estimate_oracle_flag_appends_comparison(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = _run(
        capsys, "estimate", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0.5", "--seed", "3", "--oracle", "--grid-step", "0.1",
        "--out", str(out),
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert "oracle" in payload
    assert payload["oracle"]["grid_step"] == 0.1
    assert len(payload["oracle"]["eps_map"]) == 2
    assert payload["oracle"]["max_abs_diff"] < 0.2


def test_estimate_missing_file_exits_2(capsys):
    code, _, err = _run(capsys, "estimate", "--scenario", "no-such-file.json", "--sigma", "0")
    assert code == 2
    assert "error" in err


def test_estimate_needs_sigma_or_dataset(capsys):
    code, _, err = _run(capsys, "estimate", "--scenario", bundled_scenario_path("canyon"))
    assert code == 2
    assert "--dataset or --sigma" in err


def test_estimate_dataset_length_mismatch_exits_2(tmp_path, capsys):
    ds = tmp_path / "short.json"
    ds.write_text(json.dumps({"noise_var": 0.25, "measured_db": [-60.0, -55.0]}))
    code, _, err = _run(
        capsys, "estimate", "--scenario", bundled_scenario_path("canyon"),
        "--dataset", str(ds),
    )
    assert code == 2
    assert "links" in err


def test_oracle_missing_file_exits_2(capsys):
    code, _, err = _run(capsys, "oracle", "--scenario", "no-such.json", "--sigma", "0")
    assert code == 2
    assert "error" in err


def test_oracle_bad_grid_step_exits_2(capsys):
    code, _, err = _run(
        capsys, "oracle", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0", "--grid-step", "-0.1",
    )
    assert code == 2
    assert "grid step" in err


def test_estimate_reports_are_byte_identical(tmp_path, capsys):
    args = [
        "estimate", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0.5", "--seed", "3",
    ]
    c1, out1, _ = _run(capsys, *args)
    c2, out2, _ = _run(capsys, *args)
    assert c1 == c2 == 0
    assert out1 == out2


def test_estimate_solver_flags_reach_config(capsys):
    code, out, _ = _run(
        capsys, "estimate", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0", "--k-iter", "3", "--k-gamp", "2", "--delta-tr", "0.9",
        "--damping", "0.8",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["config"]["k_iter"] == 3
    assert payload["config"]["k_gamp"] == 2
    assert payload["config"]["delta_tr"] == [0.9, 0.9]
    assert payload["config"]["damping"] == 0.8
    assert payload["iterations_run"] == 6


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_rows_schema_and_determinism(tmp_path, capsys):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    args = [
        "sweep", "--scenario", bundled_scenario_path("canyon"),
        "--sigmas", "0.2,0.8", "--seeds", "2", "--workers", "2",
        "--k-iter", "5",
    ]
    assert _run(capsys, *args, "--out-dir", str(out1))[0] == 0
    assert _run(capsys, *args, "--out-dir", str(out2))[0] == 0
    runs1 = (out1 / "runs.csv").read_bytes()
    assert runs1 == (out2 / "runs.csv").read_bytes()
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()

    lines = runs1.decode().strip().split("\n")
    assert lines[0] == ",".join(RUN_FIELDS)
    assert len(lines) == 1 + 2 * 2 * 2  # sigmas * seeds * materials
    summary = (out1 / "summary.csv").read_text().strip().split("\n")
    assert summary[0] == ",".join(SUMMARY_FIELDS)
    assert len(summary) == 1 + 2 * 2  # sigmas * materials


def test_sweep_config_file(tmp_path, capsys):
    cfg = {
        "scenario_path": bundled_scenario_path("canyon"),
        "sigmas": [0.3],
        "n_seeds": 2,
        "overrides": {"k_iter": 4},
        "out_dir": str(tmp_path / "out"),
    }
    cfg_path = tmp_path / "sweep.json"
    cfg_path.write_text(json.dumps(cfg))
    code, _, err = _run(capsys, "sweep", "--config", str(cfg_path), "--workers", "1")
    assert code == 0
    rows = (tmp_path / "out" / "runs.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 1 * 2 * 2


def test_sweep_requires_sigmas(capsys):
    code, _, err = _run(
        capsys, "sweep", "--scenario", bundled_scenario_path("canyon"),
        "--out-dir", "/tmp/nope",
    )
    assert code == 2
    assert "--sigmas" in err


def test_sweep_rejects_zero_seeds(tmp_path, capsys):
    code, _, err = _run(
        capsys, "sweep", "--scenario", bundled_scenario_path("canyon"),
        "--sigmas", "0.5", "--seeds", "0", "--out-dir", str(tmp_path),
    )
    assert code == 2
    assert "n_seeds" in err


def test_sweep_failure_rows_keep_schema(tmp_path):
    # A link sealed inside a box is unusable; with every link sealed the
    # solve fails and the sweep must still emit status rows.
    box = [
        Surface((-1.0, -1.0), (1.0, -1.0), 1),
        Surface((1.0, -1.0), (1.0, 1.0), 1),
        Surface((1.0, 1.0), (-1.0, 1.0), 1),
        Surface((-1.0, 1.0), (-1.0, -1.0), 1),
    ]
    sc = Scenario(
        surfaces=tuple(box),
        materials=(Material(1, 1.5, 10.0, 4.0),),
        links=(Link((0.0, 0.0), (5.0, 5.0), 30, 2, 2),),
        wavelength_m=0.1,
        max_reflections=2,
    )
    path = tmp_path / "sealed.json"
    save_scenario(sc, path)
    config = ExperimentConfig(
        scenario_path=str(path), sigmas=[0.5], n_seeds=2, out_dir=str(tmp_path / "o")
    )
    rows, summary = run_sweep(config, workers=1)
    assert len(rows) == 2
    assert all(r["status"] == "error:UnusableLinkError" for r in rows)
    assert all(r["eps_hat"] == "" for r in rows)
    write_sweep_outputs(rows, summary, tmp_path / "o")
    lines = (tmp_path / "o" / "runs.csv").read_text().strip().split("\n")
    assert len(lines) == 3
    assert summary[0]["n_ok"] == 0


def test_sweep_without_truths_exits_2(tmp_path, capsys):
    sc = Scenario(
        surfaces=(),
        materials=(Material(1, 1.5, 10.0),),  # no true_eps
        links=(Link((0.0, 0.0), (5.0, 0.0), 30, 2, 2),),
        wavelength_m=0.1,
    )
    path = tmp_path / "no-truth.json"
    save_scenario(sc, path)
    code, _, err = _run(
        capsys, "sweep", "--scenario", str(path), "--sigmas", "0.5",
        "--seeds", "1", "--out-dir", str(tmp_path / "o"), "--workers", "1",
    )
    assert code == 2
    assert "true_eps" in err


def test_sweep_zero_noise_recovers_truth(tmp_path):
    config = ExperimentConfig(
        scenario_path=bundled_scenario_path("canyon"),
        sigmas=[0.0],
        n_seeds=2,
    )
    rows, summary = run_sweep(config, workers=1)
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["abs_err"] <= 0.05 for r in rows)


# ---------------------------------------------------------------------------
# oracle subcommand
# ---------------------------------------------------------------------------

def test_oracle_subcommand(capsys):
    code, out, _ = _run(
        capsys, "oracle", "--scenario", bundled_scenario_path("canyon"),
        "--sigma", "0", "--seed", "1", "--grid-step", "0.5",
    )
    assert code == 0
    payload = json.loads(out)
    assert len(payload["eps_map"]) == 2
    assert abs(payload["eps_map"][0] - 3.0) <= 0.5
    assert abs(payload["eps_map"][1] - 6.0) <= 0.5
    assert payload["log_posterior"] <= 0.0


# ---------------------------------------------------------------------------
# prepare_problem
# ---------------------------------------------------------------------------

def test_prepare_problem_drops_unusable_links(canyon):
    # canyon variant with one extra link sealed inside a small box
    box = [
        Surface((-0.5, -0.5), (0.5, -0.5), 1),
        Surface((0.5, -0.5), (0.5, 0.5), 1),
        Surface((0.5, 0.5), (-0.5, 0.5), 1),
        Surface((-0.5, 0.5), (-0.5, -0.5), 1),
    ]
    sc = Scenario(
        surfaces=canyon.surfaces + tuple(box),
        materials=canyon.materials,
        links=canyon.links + (Link((0.0, 0.0), (30.0, 0.0), 30, 2, 2),),
        wavelength_m=canyon.wavelength_m,
        max_reflections=canyon.max_reflections,
    )
    from permgamp import Dataset

    base = synthesize_dataset(canyon, 0.0, seed=0)  # data for the sane links
    measured = np.concatenate([base.measured_db, [-120.0]])
    prob = prepare_problem(sc, Dataset(measured_db=measured, noise_var=0.0))
    assert prob.dropped == [100]
    assert len(prob.kept) == 100
    assert len(prob.y) == 100


def test_prepare_problem_all_unusable_raises(tmp_path):
    box = [
        Surface((-1.0, -1.0), (1.0, -1.0), 1),
        Surface((1.0, -1.0), (1.0, 1.0), 1),
        Surface((1.0, 1.0), (-1.0, 1.0), 1),
        Surface((-1.0, 1.0), (-1.0, -1.0), 1),
    ]
    sc = Scenario(
        surfaces=tuple(box),
        materials=(Material(1, 1.5, 10.0, 4.0),),
        links=(Link((0.0, 0.0), (5.0, 5.0), 30, 2, 2),),
        wavelength_m=0.1,
    )
    from permgamp import Dataset

    with pytest.raises(UnusableLinkError):
        prepare_problem(sc, Dataset(measured_db=np.zeros(1), noise_var=0.25))
