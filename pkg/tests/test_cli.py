"""End-to-end tests of the command-line interface."""
import subprocess
import sys

import pytest

from genhydro import cli
from genhydro.solver_ghe import read_snapshot_csv

SMALL = "n_cells = 32\nt_end = 0.01\nsnapshot_times = 0.005\nepsilon = 0.1\n"


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_check_passes(tmp_path):
    out = tmp_path / "check"
    cfg = _write(tmp_path, "samples = 10\n")
    assert cli.main(["check", "--config", cfg, "--out", str(out)]) == cli.EXIT_PASS
    assert (out / "structure.csv").read_text().startswith("check,name,samples")
    assert (out / "config.txt").read_text() == "samples = 10\n"
    assert "samples = 10" in (out / "config_resolved.txt").read_text()


def test_check_reproducible_and_seeded(tmp_path):
    cfg = _write(tmp_path, "samples = 5\ndims = 1\n")
    texts = []
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        assert cli.main(["check", "--config", cfg, "--out", str(tmp_path / name),
                         "--seed", seed]) == cli.EXIT_PASS
        texts.append((tmp_path / name / "structure.csv").read_bytes())
    assert texts[0] == texts[1]
    assert texts[0] != texts[2]


def test_threads_do_not_change_results(tmp_path):
    cfg = _write(tmp_path, SMALL)
    for n in ("1", "4"):
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / n),
                         "--threads", n]) == cli.EXIT_PASS
    a = (tmp_path / "1" / "snapshot_t0.010000.csv").read_bytes()
    assert a == (tmp_path / "4" / "snapshot_t0.010000.csv").read_bytes()


@pytest.mark.parametrize("model", ["ghe", "nsf"])
def test_simulate_writes_snapshots(tmp_path, model):
    out = tmp_path / "deep" / "missing" / "dir"
    cfg = _write(tmp_path, SMALL + f"model = {model}\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_PASS
    snaps = sorted(p.name for p in out.glob("snapshot_*.csv"))
    assert snaps == ["snapshot_t0.000000.csv", "snapshot_t0.005000.csv", "snapshot_t0.010000.csv"]
    cols = read_snapshot_csv(out / snaps[-1])
    assert len(cols["x"]) == 32
    assert (out / "steps.csv").read_text().startswith("step,t,dt,max_speed\n")
    assert "steps to t=0.01" in (out / "summary.txt").read_text()


def test_simulate_uniform_stays_uniform(tmp_path):
    cfg = _write(tmp_path, SMALL + "ic = uniform\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_PASS
    cols = read_snapshot_csv(tmp_path / "snapshot_t0.010000.csv")
    assert set(cols["rho"]) == {1.0}
    assert set(cols["q"]) == {0.0}


@pytest.mark.parametrize("text", ["alpha1 = -1\n", "bogus = 3\n", "lam = abc\n",
                                  "lam = 1\nlam = 2\n", "no equals sign\n", "model = dsmc\n",
                                  "dims = 4\n", "threads = 0\n", "n_cells = 15\n"])
def test_bad_config_is_usage_error(tmp_path, text):
    cfg = _write(tmp_path, text)
    assert cli.main(["check", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert cli.main(["check", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_USAGE


def test_unknown_command():
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE


def test_single_epsilon_is_usage_error(tmp_path):
    cfg = _write(tmp_path, "n_cells = 16\n")
    code = cli.main(["converge", "--config", cfg, "--out", str(tmp_path), "--epsilon", "0.05"])
    assert code == cli.EXIT_USAGE


def test_inadmissible_initial_data_aborts(tmp_path):
    cfg = _write(tmp_path, SMALL + "amplitude = 1.5\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_ABORT


def test_under_resolved_converge_fails(tmp_path):
    cfg = _write(tmp_path, "n_cells = 16\n")
    code = cli.main(["converge", "--config", cfg, "--out", str(tmp_path),
                     "--epsilon", "0.04,0.02,0.01"])
    assert code == cli.EXIT_FAIL
    assert "under-resolved" in (tmp_path / "summary.txt").read_text()
    assert (tmp_path / "report.csv").read_text().startswith("experiment,epsilon,quantity")


def test_epsilon_flag_overrides(tmp_path):
    args = cli.build_parser().parse_args(["check", "--epsilon", "0.3,0.2,0.1"])
    cfg = cli.load_config(args)
    assert cfg["epsilons"] == (0.3, 0.2, 0.1)
    assert cfg.params().epsilon == 0.3


def test_parse_config_comments():
    vals = cli.parse_config("# header\nlam = 0.2  # inline\n\nlimiter = yes\n")
    assert vals == {"lam": 0.2, "limiter": True}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "genhydro", "--help"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0
    assert "converge" in proc.stdout
