import csv
import subprocess
import sys

import numpy as np
import pytest

from survbench.cli import main
from survbench.core import read_dataset_csv


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert main(["simulate", "--n", "120", "--seed", "3", "--out", str(path)]) == 0
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate(data_csv, tmp_path):
    ds = read_dataset_csv(data_csv)
    assert ds.n == 120 and ds.d == 5 and ds.groups is not None
    again = tmp_path / "again.csv"
    main(["simulate", "--n", "120", "--seed", "3", "--out", str(again)])
    assert data_csv.read_bytes() == again.read_bytes()


def test_simulate_with_config(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 40\ncorr_c = 0.3\n")
    out = tmp_path / "d.csv"
    main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(out)])
    assert read_dataset_csv(out).n == 40


def test_ampute_and_impute(data_csv, tmp_path):
    amputed = tmp_path / "m.csv"
    main(["ampute", "--mechanism", "mcar", "--p", "0.4", "--seed", "2", "--in", str(data_csv),
          "--out", str(amputed)])
    ds = read_dataset_csv(amputed)
    assert 0.3 < ds.mask.mean() < 0.5
    train_rows = tmp_path / "rows.txt"
    np.savetxt(train_rows, np.arange(80), fmt="%d")
    filled = tmp_path / "f.csv"
    main(["impute", "--strategy", "knn", "--k", "5", "--in", str(amputed),
          "--train-rows", str(train_rows), "--out", str(filled)])
    out = read_dataset_csv(filled)
    assert not out.mask.any()
    assert np.array_equal(out.x[~ds.mask], ds.x[~ds.mask])


def test_ampute_selfmask(data_csv, tmp_path):
    out = tmp_path / "s.csv"
    main(["ampute", "--mechanism", "selfmask", "--tau", "1.03", "--in", str(data_csv), "--out", str(out)])
    assert read_dataset_csv(out).mask.any()
    with pytest.raises(SystemExit):
        main(["ampute", "--mechanism", "selfmask", "--in", str(data_csv), "--out", str(out)])


def test_run_and_report(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("sim.n = 100\nmcar_p = 0.4\nselfmask_tau =\nimputers = median\n"
                   "models = cox\nfolds = 3\n")
    results = tmp_path / "results.csv"
    assert main(["run", "--config", str(cfg), "--out", str(results), "--seed", "4"]) == 0
    got = rows(results)
    assert len(got) == 2 * 3
    assert {r["imputer"] for r in got} == {"none", "median"}
    summary, plot = tmp_path / "summary.csv", tmp_path / "fig2.csv"
    assert main(["report", "--in", str(results), "--out", str(summary), "--plot-data", str(plot)]) == 0
    assert len(rows(summary)) == 2 and len(rows(plot)) == 2
    assert "c_harrell_median" in rows(plot)[0]


def test_report_exit_code_on_empty_cell(tmp_path):
    results = tmp_path / "r.csv"
    results.write_text("mechanism,rate_param,imputer,model,fold,c_harrell,c_uno,fit_seconds,"
                       "achieved_missing_fraction,error\n"
                       "mcar,0.4,median,cox,0,,,,0.4,LinAlgError: singular\n")
    assert main(["report", "--in", str(results), "--out", str(tmp_path / "s.csv")]) == 1


def test_report_km_by_group(data_csv, tmp_path):
    out = tmp_path / "km.csv"
    main(["report", "--km", "--by-group", "--in", str(data_csv), "--out", str(out)])
    got = rows(out)
    assert {r["group"] for r in got} == {"0", "1"}
    for g in ("0", "1"):
        surv = [float(r["survival"]) for r in got if r["group"] == g]
        assert surv[0] == 1.0 and all(a >= b for a, b in zip(surv, surv[1:]))


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.csv"
    proc = subprocess.run([sys.executable, "-m", "survbench.cli", "simulate", "--n", "10", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_dataset_csv(out).n == 10
