import numpy as np

from robin_fsi import mms
from robin_fsi.cli import main
from robin_fsi.coupling import run_transient
from robin_fsi.reports import write_energy_series, write_rate_table


def read_csv(path):
    lines = path.read_text().splitlines()
    data = [ln for ln in lines if not ln.startswith("#")]
    header = data[0].split(",")
    rows = [ln.split(",") for ln in data[1:]]
    return header, rows


def test_mms_convergence_two_levels(tmp_path):
    rc = main([
        "mms-convergence", "--levels", "2", "--T", "0.06",
        "--outdir", str(tmp_path),
    ])
    assert rc == 0
    header, rows = read_csv(tmp_path / "rates.csv")
    assert header[:4] == ["level", "tau", "h", "eps"]
    assert len(rows) == 2
    assert rows[0][7] == ""  # no rate on the first level
    assert float(rows[1][7]) > 0  # errors shrink under refinement
    cfg = (tmp_path / "config.ini").read_text()
    assert "[scheme]" in cfg and "theta = 0.5" in cfg


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[scheme]\ntheta = 0.75\nalpha = 50\n\n"
        "[mesh]\nlevels = 2\n\n[run]\nt_final = 0.06\n"
    )
    out = tmp_path / "out"
    rc = main([
        "mms-convergence", "--config", str(cfg), "--theta", "0.5",
        "--outdir", str(out),
    ])
    assert rc == 0
    echo = (out / "config.ini").read_text()
    assert "theta = 0.5" in echo   # flag wins over file
    assert "alpha = 50.0" in echo  # file value survives
    assert "levels = 2" in echo


def test_missing_config_file_exits_2(tmp_path):
    rc = main(["mms-convergence", "--config", str(tmp_path / "nope.ini")])
    assert rc == 2


def test_malformed_config_value_exits_2(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[mesh]\nlevels = many\n")
    rc = main(["mms-convergence", "--config", str(cfg),
               "--outdir", str(tmp_path)])
    assert rc == 2


def test_bad_alpha_exits_2(tmp_path):
    rc = main(["mms-convergence", "--alpha", "fast",
               "--outdir", str(tmp_path)])
    assert rc == 2


def test_stability_check_passes(tmp_path):
    rc = main(["stability-check", "--steps", "20", "--outdir", str(tmp_path)])
    assert rc == 0
    header, rows = read_csv(tmp_path / "energy.csv")
    assert header == ["level", "energy", "dissipation", "numerical"]
    assert len(rows) == 21
    first = (tmp_path / "energy.csv").read_text().splitlines()[0]
    assert first.startswith("# slack:")


def test_iteration_count_smoke(tmp_path, capsys):
    rc = main(["iteration-count", "--schemes", "alg1,rr", "--T", "0.05",
               "--outdir", str(tmp_path)])
    assert rc == 0
    header, rows = read_csv(tmp_path / "iterations.csv")
    assert header == ["scheme", "avg_subiters", "converged"]
    assert {r[0] for r in rows} == {"alg1", "rr"}
    out = capsys.readouterr().out
    assert "average sub-iterations" in out


def test_benchmark_channel_smoke(tmp_path):
    rc = main(["benchmark-channel", "--schemes", "monolithic",
               "--T", "0.0005", "--outdir", str(tmp_path)])
    assert rc == 0
    header, rows = read_csv(tmp_path / "qoi_monolithic.csv")
    assert header == ["t", "x", "flowrate", "pressure_centerline",
                      "disp_mag", "scheme"]
    assert len(rows) == 3 * 19  # three sample times, nineteen stations


def test_reports_are_deterministic(tmp_path):
    table = mms.convergence_study(mms.default_ladder(1), T=0.04)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_rate_table(table, a)
    write_rate_table(table, b)
    assert a.read_bytes() == b.read_bytes()

    result, _ = mms.stability_run(nsteps=6)
    e1, e2 = tmp_path / "e1.csv", tmp_path / "e2.csv"
    write_energy_series(result.energy, e1)
    write_energy_series(result.energy, e2)
    assert e1.read_bytes() == e2.read_bytes()
