import subprocess
import sys

import pytest

from skmfix.cli import main
from skmfix.harness import read_csv


def run_cli(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_bound_fixed_horizon(capsys):
    rc, out, _ = run_cli(capsys, "bound", "--family", "constant", "--alpha", "auto", "--n-list", "1000000")
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,bound"
    n, v = lines[1].split(",")
    assert n == "1000000" and float(v) == pytest.approx(0.4, rel=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ("bound", "--family", "power", "--a", "2/3", "--n-list", "10,1e4"),
        ("bound", "--family", "general", "--alpha", "0.1", "--n-list", "5,50"),
        ("bound", "--family", "asymptote", "--a", "0.8", "--n-list", "100"),
        ("bound", "--family", "euclidean", "--alpha", "auto", "--radius", "2", "--n-list", "100"),
        ("bound", "--family", "euclidean", "--a", "1", "--n-list", "100"),
    ],
)
def test_bound_families(capsys, argv):
    rc, out, _ = run_cli(capsys, *argv)
    assert rc == 0
    assert len(out.strip().splitlines()) == 1 + len(argv[-1].split(","))


def test_bound_sigma_zero_is_kappa_sigma_tau(capsys):
    from skmfix.sequences import StepsizeSchedule, sigma_fn

    rc, out, _ = run_cli(capsys, "bound", "--family", "general", "--a", "1", "--kappa", "3", "--sigma", "0", "--n-list", "1,100")
    assert rc == 0
    taus = StepsizeSchedule.power(1.0).tau_array(100)
    vals = [float(r.split(",")[1]) for r in out.strip().splitlines()[1:]]
    assert vals == pytest.approx([3 * sigma_fn(taus[1]), 3 * sigma_fn(taus[100])], rel=1e-14)


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate", "--a", "1.5", "--n", "10", "--reps", "2"),
        ("simulate", "--n", "10"),
        ("bound", "--family", "power", "--alpha", "0.1", "--n-list", "10"),
        ("bound", "--family", "power", "--a", "0.4", "--n-list", "10"),
        ("bound", "--family", "power", "--a", "1", "--mu", "0.5", "--n-list", "10"),
        ("qlearn", "--a", "0.4", "--n", "10"),
        ("qlearn", "--f", "median", "--n", "10"),
        ("frobnicate",),
        ("simulate", "--a", "1", "--alpha", "0.1"),
    ],
)
def test_usage_and_domain_errors_exit_2(capsys, argv):
    rc, _, _ = run_cli(capsys, *argv)
    assert rc == 2


def test_simulate_stdout_and_file(capsys, tmp_path):
    rc, out, _ = run_cli(capsys, "simulate", "--a", "2/3", "--n", "200", "--reps", "5", "--stride", "100", "--seed", "4")
    assert rc == 0
    assert out.startswith("scenario,a_or_alpha,n,replications,mean_residual")
    f = tmp_path / "s.csv"
    rc, out2, _ = run_cli(capsys, "simulate", "--a", "2/3", "--n", "200", "--reps", "5", "--stride", "100", "--seed", "4", "--out", str(f))
    assert rc == 0 and out2 == ""
    assert f.read_text() == out
    s = read_csv(f)
    assert list(s.n) == [100, 200] and "power" in s.bounds


def test_simulate_constant_auto(capsys):
    rc, out, _ = run_cli(capsys, "simulate", "--alpha", "auto", "--n", "100", "--reps", "3", "--operator", "box-affine")
    assert rc == 0
    assert "bound_fixed_horizon" in out.splitlines()[0]


def test_qlearn_malformed_mdp(capsys, tmp_path):
    bad = tmp_path / "bad.mdp"
    bad.write_text("states=2 actions=1\np 0 0 0 0.5\np 0 0 1 0.4\np 1 0 1 1\n")
    rc, _, err = run_cli(capsys, "qlearn", "--mdp", str(bad), "--n", "10")
    assert rc == 2
    assert "(i=0, u=0)" in err


def test_qlearn_component_and_note(capsys):
    rc, out, err = run_cli(capsys, "qlearn", "--a", "0.7", "--f", "component:1,0", "--n", "200", "--reps", "3")
    assert rc == 0
    assert "outside" in err
    assert "stat_f_mean" in out.splitlines()[0]


def test_verify_fast(capsys):
    rc, out, _ = run_cli(capsys, "verify", "--suite", "specfun", "--suite", "coupling", "--fast")
    assert rc == 0
    assert "FAIL" not in out and out.count("PASS") >= 7


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "skmfix", "bound", "--family", "power", "--a", "1", "--n-list", "10"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("n,bound")
