import csv
import subprocess
import sys

import numpy as np
import pytest

from stencilflow.bench import BenchReport, BenchRow, bench, field_checksum
from stencilflow.cli import run_cli
from stencilflow.config import parse_config
from stencilflow.grid import read_sfg1

from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CFD_CCL = ROOT / "src" / "stencilflow" / "kernels" / "cfd.ccl"
GHIA = ROOT / "src" / "stencilflow" / "data" / "ghia_re100.csv"


def test_gen_writes_headers(tmp_path, capsys):
    assert run_cli(["gen", str(CFD_CCL), "-o", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["DIVERGENCE.h.generated", "PRESSURE_SWEEP.h.generated", "UPDATE_VELOCITY.h.generated", "plans.txt"]
    plans = (tmp_path / "plans.txt").read_text().splitlines()
    assert [l.split()[0] for l in plans] == ["UPDATE_VELOCITY", "PRESSURE_SWEEP", "DIVERGENCE"]


def test_gen_velocity_fixture(tmp_path):
    from fixtures import VELOCITY_CCL

    ccl = tmp_path / "cacuda.ccl"
    ccl.write_text(VELOCITY_CCL)
    assert run_cli(["gen", str(ccl), "-o", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "UPDATE_VELOCITY.h.generated").exists()


def test_gen_bad_descriptor(tmp_path, capsys):
    ccl = tmp_path / "bad.ccl"
    ccl.write_text('CCTK_CUDA_KERNEL K TYPE=3DBLOCK TILE="0,1,1" { }')
    assert run_cli(["gen", str(ccl), "-o", str(tmp_path)]) == 1
    assert "bad-tile" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert run_cli([]) == 2
    assert run_cli(["frobnicate"]) == 2
    assert run_cli(["validate", "--profiles", "x"]) == 2
    assert run_cli(["bench", "--config", "x", "--modes", "fast"]) == 2
    assert run_cli(["cavity", "--config", "x", "--tile", "4,4"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err


def test_bad_config_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("omega = 2.5\n")
    assert run_cli(["cavity", "--config", str(cfg)]) == 2
    assert "bad.cfg:1:" in capsys.readouterr().err


def test_validate_reference_against_itself(capsys):
    assert run_cli(["validate", "--profiles", str(GHIA), "--reference", str(GHIA), "--tol", "0"]) == 0
    out = capsys.readouterr().out
    assert "u(y) max deviation: 0.000000" in out


def test_validate_failure_and_purity(tmp_path, capsys):
    shifted = tmp_path / "shifted.csv"
    rows = GHIA.read_text().splitlines()
    out_rows = []
    section = None
    for line in rows:
        if line in ("y,u", "x,v"):
            section = line
        elif section == "y,u" and not line.startswith("#"):
            a, b = line.split(",")
            line = f"{a},{float(b) + 0.05!r}"
        out_rows.append(line)
    shifted.write_text("\n".join(out_rows) + "\n")
    args = ["validate", "--profiles", str(shifted), "--reference", str(GHIA), "--tol", "0.03"]
    assert run_cli(args) == 1
    first = capsys.readouterr().out
    assert run_cli(args) == 1
    assert capsys.readouterr().out == first
    assert "FAIL" in first
    assert run_cli(args[:-1] + ["0.06"]) == 0


def test_validate_missing_file(tmp_path):
    assert run_cli(["validate", "--profiles", str(tmp_path / "no.csv"), "--reference", str(GHIA), "--tol", "1"]) == 2


def test_cavity_small_run(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(f"grid = 12, 12, 3\nmax_steps = 6\noutput_every = 2\noutput_dir = {tmp_path}\n")
    assert run_cli(["cavity", "--config", str(cfg), "--workers", "2", "--mode", "overlap", "--tile", "4,4,4"]) == 0
    out = capsys.readouterr().out
    assert "step       2" in out
    with open(tmp_path / "residuals.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["step", "time", "dt", "max_div", "sweeps", "converged", "change"]
    assert [int(r["step"]) for r in rows] == list(range(1, 7))
    assert all(float(r["max_div"]) <= 1e-6 for r in rows)
    vx = read_sfg1(tmp_path / "vx.sfg")
    assert vx.shape == (12, 12, 3)
    prof = (tmp_path / "profiles.csv").read_text()
    assert "y,u" in prof and "x,v" in prof
    # the same run on one worker in plain mode gives the same fields
    other = tmp_path / "one"
    assert run_cli(["cavity", "--config", str(cfg), "--output-dir", str(other), "--quiet"]) == 0
    assert np.array_equal(read_sfg1(other / "vx.sfg"), vx)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stencilflow", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "gen" in res.stdout and "bench" in res.stdout


# -- bench --------------------------------------------------------------------


def test_bench_single_baseline():
    cfg = parse_config("grid = 8, 8, 8\nsteps = 2\nmax_sweeps = 5\n")
    report = bench(cfg, [1], ["plain"])
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.speedup == 1.0
    assert row.grid == (8, 8, 8)
    assert row.wall_s > 0 and row.cell_updates_per_s > 0 and row.bytes_staged > 0


def test_bench_modes_checksums_match(tmp_path, capsys):
    cfgfile = tmp_path / "b.cfg"
    cfgfile.write_text(f"grid = 12, 12, 12\nsteps = 2\nmax_sweeps = 4\noutput_dir = {tmp_path}\n")
    code = run_cli(["bench", "--config", str(cfgfile), "--workers", "1,2,4", "--modes", "plain,overlap"])
    assert code == 0
    with open(tmp_path / "bench.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["workers"], r["mode"]) for r in rows] == [
        (w, m) for w in ("1", "2", "4") for m in ("plain", "overlap")]
    assert rows[0]["speedup"] == "1.000000"
    assert len({r["checksum"] for r in rows}) == 1
    assert all(r["grid"] == "12x12x12" for r in rows)
    table = capsys.readouterr().out
    assert table.splitlines()[0].split() == ["workers", "mode", "grid", "wall_s", "cell_updates_per_s",
                                            "speedup", "bytes_staged", "checksum"]


def test_report_formats():
    rows = [BenchRow(1, "plain", (4, 4, 4), 2.0, 64.0, 1.0, 100, "ab"),
            BenchRow(2, "plain", (4, 4, 4), 1.0, 128.0, 2.0, 100, "ab")]
    report = BenchReport(rows, 2)
    lines = report.to_csv().splitlines()
    assert lines[0] == "workers,mode,grid,wall_s,cell_updates_per_s,speedup,bytes_staged,checksum"
    assert lines[2].startswith("2,plain,4x4x4,1.000000,128,2.000000,100,ab")
    table = report.to_table().splitlines()
    assert len({len(l) for l in table}) == 1
    assert report.checksums() == {(1, "plain"): "ab", (2, "plain"): "ab"}


def test_field_checksum_sensitive():
    from stencilflow.cfd import SolverConfig, advance, init_cavity

    state = init_cavity(SolverConfig(extents=(6, 6, 3)))
    try:
        a = field_checksum(state)
        advance(state, 1)
        assert field_checksum(state) != a
    finally:
        state.close()
