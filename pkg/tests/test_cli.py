import subprocess
import sys

import numpy as np
import pytest

from votefuse.cli import main

MODEL = """\
tasks 1
sources 4
assign 1 1
assign 2 1
assign 3 1
assign 4 1
theta task 1 0.2
theta acc 1 0.6
theta acc 2 0.5
theta acc 3 0.8
theta acc 4 0.7
theta abstain 1 0.1
theta abstain 2 -0.2
theta abstain 3 0.3
"""


@pytest.fixture()
def workdir(tmp_path):
    model = tmp_path / "model.txt"
    model.write_text(MODEL)
    rc = main(["simulate", "--model", str(model), "--n", "5000", "--seed", "7",
               "--out", str(tmp_path / "votes.csv"),
               "--truth-out", str(tmp_path / "truth.csv")])
    assert rc == 0
    return tmp_path


def test_fit_then_predict_equals_fit_predict(workdir, capsys):
    common = ["--labels", str(workdir / "votes.csv"),
              "--graph", str(workdir / "model.txt"), "--balance", "0.55"]
    assert main(["fit", *common, "--out", str(workdir / "params.json")]) == 0
    assert main(["predict", "--labels", str(workdir / "votes.csv"),
                 "--params", str(workdir / "params.json"), "--balance", "0.55",
                 "--out", str(workdir / "post1.csv")]) == 0
    assert main(["fit-predict", *common, "--out", str(workdir / "post2.csv"),
                 "--params-out", str(workdir / "params2.json")]) == 0
    assert (workdir / "post1.csv").read_bytes() == (workdir / "post2.csv").read_bytes()
    assert (workdir / "params.json").read_bytes() == (workdir / "params2.json").read_bytes()


def test_repeat_runs_are_byte_identical(workdir):
    common = ["--labels", str(workdir / "votes.csv"),
              "--graph", str(workdir / "model.txt"), "--balance", "0.55"]
    main(["fit-predict", *common, "--out", str(workdir / "a.csv")])
    main(["fit-predict", *common, "--out", str(workdir / "b.csv")])
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()


def test_usage_error_exit_code():
    assert main(["fit", "--labels", "x.csv"]) == 1


def test_malformed_csv_exit_code(workdir, capsys):
    bad = workdir / "bad.csv"
    bad.write_text("1,0,1,1\n0,2,0,0\n")
    rc = main(["fit", "--labels", str(bad), "--graph", str(workdir / "model.txt"),
               "--balance", "0.55", "--out", str(workdir / "p.json")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "row 2" in err and "column 2" in err


def test_numerical_failure_exit_code(workdir, tmp_path, capsys):
    # fully dependent sources leave no valid triplet
    model = tmp_path / "dep.txt"
    model.write_text("tasks 1\nsources 3\nassign 1 1\nassign 2 1\nassign 3 1\n"
                     "sedge 1 2\nsedge 1 3\nsedge 2 3\n")
    rc = main(["fit", "--labels", str(workdir / "votes.csv")[:-9] + "votes.csv",
               "--graph", str(model), "--balance", "0.55",
               "--out", str(tmp_path / "p.json")])
    assert rc == 2  # the three-source clique is structurally rejected

    model2 = tmp_path / "dep2.txt"
    model2.write_text("tasks 1\nsources 4\nassign 1 1\nassign 2 1\nassign 3 1\n"
                      "assign 4 1\nsedge 1 2\nsedge 3 4\n")
    votes = workdir / "votes.csv"
    rc = main(["fit", "--labels", str(votes), "--graph", str(model2),
               "--balance", "0.55", "--out", str(tmp_path / "p.json")])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_stream_mode(workdir):
    rows = "1,0,-1,1\n0,0,0,0\n-1,1,1,0\n"
    proc = subprocess.run(
        [sys.executable, "-m", "votefuse.cli", "stream",
         "--graph", str(workdir / "model.txt"), "--balance", "0.55",
         "--window", "50", "--warmup", "2"],
        input=rows, capture_output=True, text=True,
    )
    assert proc.returncode == 0
    out = proc.stdout.strip().splitlines()
    assert len(out) == 3
    assert out[0] == "0.55"  # warmup row carries the prior
    for line in out:
        p = float(line)
        assert 0.0 <= p <= 1.0


def test_sweep_mode(workdir, capsys):
    rc = main(["sweep", "--model", str(workdir / "model.txt"),
               "--flip-period", "200", "--steps", "600",
               "--windows", "60,400", "--seed", "3", "--balance", "0.55",
               "--warmup", "40", "--out", str(workdir / "curve.csv")])
    assert rc == 0
    lines = (workdir / "curve.csv").read_text().splitlines()
    assert lines[0] == "window,mean_parameter_error"
    assert len(lines) == 3
    assert "best window" in capsys.readouterr().out


def test_simulate_fit_reproduces_recovery_bound(tmp_path):
    # the CLI pipeline on a simulated independent-source model recovers the
    # generating tables to the same bound the library-level criterion uses
    from votefuse import fileio
    from votefuse.oracle import enumerate_joint

    model = tmp_path / "star.txt"
    lines = ["tasks 1", "sources 5"]
    lines += [f"assign {i} 1" for i in range(1, 6)]
    accs = [0.6, 0.675, 0.75, 0.825, 0.9]
    lines += [f"theta acc {i + 1} {np.arctanh(a):.12f}" for i, a in enumerate(accs)]
    lines.append("theta noabstain")
    model.write_text("\n".join(lines) + "\n")

    assert main(["simulate", "--model", str(model), "--n", "100000", "--seed", "1",
                 "--out", str(tmp_path / "v.csv"),
                 "--truth-out", str(tmp_path / "t.csv")]) == 0
    assert main(["fit", "--labels", str(tmp_path / "v.csv"), "--graph", str(model),
                 "--balance", "0.5", "--out", str(tmp_path / "p.json")]) == 0

    fitted = fileio.load_parameters(tmp_path / "p.json")
    truth = enumerate_joint(fileio.parse_model_spec(model)).true_parameters()
    worst = max(float(np.max(np.abs(fitted.cliques[vs] - truth.cliques[vs])))
                for vs in truth.cliques)
    assert worst <= 0.02


def test_simulate_truth_stays_separate(workdir):
    votes = np.loadtxt(workdir / "votes.csv", delimiter=",", dtype=int)
    truth = np.loadtxt(workdir / "truth.csv", delimiter=",", dtype=int)
    assert votes.shape == (5000, 4)
    assert truth.shape == (5000,) or truth.shape == (5000, 1)
    assert set(np.unique(truth)) <= {-1, 1}
