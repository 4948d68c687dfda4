import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from condlab.cli import EXIT_OK, EXIT_VALIDATION, main
from condlab.experiments import (REGISTRY, ConfigError, ExperimentConfig, ell_threshold, fit_exponent,
                                 run, run_to_file, worker_count)
from condlab.seeding import hash64

NAMES = {"annealed-decay", "t1-scaling", "t2-scaling", "bound-audit", "localization",
         "comparison-lemma", "min-omega", "ell-epsilon"}


def data_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_fit_exact_power():
    fit = fit_exponent([(1, 1), (2, 4), (4, 16)])
    assert fit.slope == pytest.approx(2.0) and fit.r2 == pytest.approx(1.0) and fit.count == 3


def test_fit_constant():
    fit = fit_exponent([(1, 3), (2, 3), (5, 3)])
    assert fit.slope == pytest.approx(0.0, abs=1e-14) and fit.r2 == 1.0


def test_fit_noisy_square():
    rng = np.random.default_rng(20)
    x = np.linspace(1, 50, 20)
    y = x ** 2 * (1 + 0.01 * rng.standard_normal(20))
    fit = fit_exponent(list(zip(x, y)))
    assert 1.9 <= fit.slope <= 2.1 and fit.stderr > 0


@pytest.mark.parametrize("points", [[(1, 1), (2, 4)], [(1, 1), (2, 0), (3, 9)], [(1, 1), (-2, 4), (3, 9)]])
def test_fit_rejects_bad_input(points):
    with pytest.raises(ValueError):
        fit_exponent(points)


def test_registry_is_complete():
    assert set(REGISTRY) == NAMES


def test_config_text_and_overrides():
    text = "experiment=t1-scaling  # sweep\nN_grid=8,12\n\nseeds=2\n"
    cfg = ExperimentConfig.from_text(text, {"gamma": "1.0"})
    assert cfg["N_grid"] == [8, 12] and cfg["seeds"] == 2 and cfg["gamma"] == 1.0
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again.params == cfg.params


@pytest.mark.parametrize("text", [
    "N_grid=8\n",
    "experiment=nope\n",
    "experiment=t1-scaling\nbogus=1\n",
    "experiment=t1-scaling\nN_grid=\n",
    "experiment=t1-scaling\nseeds=0\n",
    "experiment=t1-scaling\ngamma=-1\n",
    "experiment=t1-scaling\neps=1.5\n",
    "experiment=t1-scaling\nN_grid=8,x\n",
    "experiment=t1-scaling\njust words\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_row_seed_schedule():
    cfg = ExperimentConfig.build("min-omega", {"seed": "7"})
    assert cfg.row_seed(2, 3) == hash64(7, "min-omega", 2, 3)


def test_two_sizes_three_seeds_gives_six_rows():
    cfg = ExperimentConfig.build("t1-scaling", {"N_grid": "6,8", "seeds": "3"})
    res = run(cfg, workers=1)
    assert len(res.rows) == 6
    rows = data_rows(res.to_csv())
    assert len(rows) == 7 and rows[-1]["row"] == "summary"
    assert [r["grid_index"] for r in rows[:6]] == ["0", "0", "0", "1", "1", "1"]


def test_header_comment_documents_columns():
    res = run(ExperimentConfig.build("min-omega", {"N_grid": "16,32,64", "seeds": "2"}), workers=1)
    head, cols = res.to_csv().splitlines()[:2]
    assert head.startswith("# condlab experiment=min-omega columns=" + cols)


def test_reruns_are_byte_identical():
    cfg = ExperimentConfig.build("t2-scaling", {"N_grid": "4,6,8", "seeds": "2"})
    assert run(cfg, workers=1).to_csv() == run(cfg, workers=1).to_csv()


def test_worker_count_does_not_change_output():
    cfg = ExperimentConfig.build("min-omega", {"N_grid": "16,32,64", "seeds": "4"})
    assert run(cfg, workers=1).to_csv() == run(cfg, workers=3).to_csv()


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("CONDLAB_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("CONDLAB_THREADS")
    assert worker_count(3) == 3


def test_run_to_file(tmp_path):
    out = tmp_path / "res.csv"
    cfg = ExperimentConfig.build("min-omega", {"N_grid": "16,32,64", "seeds": "2", "output": str(out)})
    res = run_to_file(cfg, workers=1)
    assert out.read_text() == res.to_csv()


def test_ell_threshold():
    assert ell_threshold(2, 0.5, 1.0) == 24


def test_cli_list(capsys):
    assert main(["list"]) == EXIT_OK
    names = {line.split(":")[0] for line in capsys.readouterr().out.splitlines()}
    assert names == NAMES


def test_cli_run_with_overrides(capsys):
    assert main(["run", "min-omega", "--N_grid", "16,32,64", "--seeds=2", "--workers", "1"]) == EXIT_OK
    rows = data_rows(capsys.readouterr().out)
    assert len(rows) == 7


def test_cli_run_config_file(tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text("experiment=ell-epsilon\nN=10\nseeds=2\n")
    out = tmp_path / "out.csv"
    assert main(["run", str(conf), "--output", str(out), "--workers", "1"]) == EXIT_OK
    assert len(data_rows(out.read_text())) == 3


@pytest.mark.parametrize("argv", [["run", "nope"], ["run", "min-omega", "--bogus", "1"],
                                  ["run", "min-omega", "--seeds"], ["run", "t1-scaling", "--eps", "2"]])
def test_cli_validation_exit_code(argv, capsys):
    assert main(argv) == EXIT_VALIDATION
    assert "invalid configuration" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "condlab", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "t1-scaling" in proc.stdout
