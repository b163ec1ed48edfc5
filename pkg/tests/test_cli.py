"""End-to-end CLI workflows on a small synthetic dataset."""

import os

import numpy as np
import pytest

from stickmix import io
from stickmix.cli import main


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    rc = main(["generate", "--dataset", "toy", "--seed", "3",
               "--out-dir", str(d), "--n", "40"])
    assert rc == 0
    return d


def _run_flags(data_path, out_dir, seed="11", **extra):
    flags = ["run", "--data", str(data_path), "--seed", str(seed),
             "--out-dir", str(out_dir), "--K", "2,2",
             "--sweeps", "60", "--burnin", "30", "--thin", "2",
             "--mpp-every", "10", "--init-clusters", "3"]
    for key, val in extra.items():
        flags += [f"--{key.replace('_', '-')}", str(val)]
    return flags


def test_generate_writes_dataset(toy_dir):
    data = io.read_dataset(str(toy_dir / "data.csv"), [2, 2])
    assert data.n == 40
    truth = io.read_truth(str(toy_dir / "truth.csv"))
    assert truth.shape == (40,)


def test_run_produces_outputs(toy_dir, tmp_path):
    out = tmp_path / "chain"
    rc = main(_run_flags(toy_dir / "data.csv", out))
    assert rc == 0
    for name in ("trace.csv", "zsamples.csv", "params.jsonl", "state.json"):
        assert (out / name).is_file(), name
    trace = io.read_trace(str(out / "trace.csv"))
    assert trace["sweep"][-1] == 60
    meta = io.read_json(str(out / "state.json"))
    assert meta["config"]["sweeps"] == 60
    assert meta["data_digest"] == io.dataset_digest(str(toy_dir / "data.csv"))


def test_run_same_seed_is_byte_identical(toy_dir, tmp_path):
    out1, out2 = tmp_path / "c1", tmp_path / "c2"
    assert main(_run_flags(toy_dir / "data.csv", out1)) == 0
    assert main(_run_flags(toy_dir / "data.csv", out2)) == 0
    for name in ("trace.csv", "zsamples.csv", "params.jsonl"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_config_file_with_overrides(toy_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("sweeps = 60\nburnin = 30\nthin = 2\nmpp_every = 10\n"
                   "init_clusters = 3\nK = 2,2\n")
    out = tmp_path / "chain"
    rc = main(["run", "--data", str(toy_dir / "data.csv"), "--seed", "11",
               "--out-dir", str(out), "--config", str(cfg), "--sweeps", "40"])
    assert rc == 0
    meta = io.read_json(str(out / "state.json"))
    assert meta["config"]["sweeps"] == 40  # flag beats file


def test_run_unknown_config_key_exits_2(toy_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("sweepz = 10\n")
    rc = main(["run", "--data", str(toy_dir / "data.csv"), "--seed", "1",
               "--out-dir", str(tmp_path / "out"), "--config", str(cfg)])
    assert rc == 2
    assert "sweepz" in capsys.readouterr().err


def test_run_missing_k_exits_2(toy_dir, tmp_path):
    rc = main(["run", "--data", str(toy_dir / "data.csv"), "--seed", "1",
               "--out-dir", str(tmp_path / "out"), "--init-clusters", "3"])
    assert rc == 2


@pytest.fixture(scope="module")
def multi_dir(toy_dir, tmp_path_factory):
    d = tmp_path_factory.mktemp("multi")
    rc = main(["multirun", "--data", str(toy_dir / "data.csv"), "--seed", "5",
               "--out-dir", str(d), "--inits", "2,4", "--reps", "1",
               "--K", "2,2", "--sweeps", "60", "--burnin", "30",
               "--thin", "2", "--mpp-every", "10", "--init-clusters", "2"])
    assert rc == 0
    return d


def test_multirun_layout(multi_dir):
    assert sorted(os.listdir(multi_dir)) == ["init2_rep0", "init4_rep0"]


def test_compare_writes_report_and_figures(multi_dir, tmp_path):
    out = tmp_path / "report"
    rc = main(["compare", "--runs", str(multi_dir), "--out-dir", str(out)])
    assert rc == 0
    assert (out / "mpp_summary.csv").is_file()
    for fig in ("mpp_traces.png", "alpha_quantiles.png", "cstar_first_sweeps.png"):
        assert (out / fig).is_file(), fig


def test_compare_no_figures(multi_dir, tmp_path):
    out = tmp_path / "report"
    rc = main(["compare", "--runs", str(multi_dir), "--out-dir", str(out),
               "--no-figures"])
    assert rc == 0
    assert not list(out.glob("*.png"))


def test_postprocess_outputs(multi_dir, toy_dir, tmp_path):
    pred = tmp_path / "profiles.csv"
    pred.write_text("x1,x2\n0,0\n1,1\n")
    out = tmp_path / "post"
    rc = main(["postprocess", "--runs", str(multi_dir), "--out-dir", str(out),
               "--k-min", "2", "--k-max", "4", "--predict", str(pred)])
    assert rc == 0
    assert (out / "similarity.csv").is_file()
    assert (out / "similarity.png").is_file()
    labels = np.array(
        [int(r.split(",")[1]) for r in
         (out / "optimal_partition.csv").read_text().splitlines()[1:]])
    assert labels.shape == (40,)
    pred_lines = (out / "predictions.csv").read_text().splitlines()
    assert pred_lines[0] == "x1,x2,p_y1"
    probs = [float(r.split(",")[-1]) for r in pred_lines[1:]]
    assert all(0.0 < p < 1.0 for p in probs)


def test_postprocess_no_figures(multi_dir, tmp_path):
    out = tmp_path / "post"
    rc = main(["postprocess", "--runs", str(multi_dir), "--out-dir", str(out),
               "--k-min", "2", "--k-max", "3", "--no-figures"])
    assert rc == 0
    assert not list(out.glob("*.png"))


def test_experiment_move3_smoke(toy_dir, tmp_path):
    out = tmp_path / "exp"
    rc = main(["experiment-move3", "--data", str(toy_dir / "data.csv"),
               "--seed", "9", "--out-dir", str(out), "--runs-per-arm", "1",
               "--K", "2,2", "--sweeps", "60", "--burnin", "30",
               "--thin", "2", "--mpp-every", "0", "--init-clusters", "3"])
    assert rc == 0
    assert (out / "acceptance_blocks.csv").is_file()
    assert (out / "alpha_by_arm.csv").is_file()
    assert (out / "acceptance_blocks.png").is_file()
    assert (out / "alpha_densities.png").is_file()
