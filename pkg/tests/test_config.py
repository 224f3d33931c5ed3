import math

import pytest

from stencilflow.config import DEFAULTS, ConfigError, load_config, parse_config


def test_empty_file_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = load_config(path)
    assert cfg.solver.extents == DEFAULTS["grid"]
    assert cfg.solver.omega == 1.7 and cfg.solver.sigma == 0.5 and cfg.solver.eps == 1e-6
    assert cfg.solver.max_sweeps == 500
    assert cfg.fluid.alpha == 0.0
    assert cfg.workers == 1 and cfg.mode == "plain" and cfg.tile is None


def test_re_sets_viscosity():
    cfg = parse_config("re = 100\n")
    assert cfg.fluid.nu == pytest.approx(0.01)
    assert cfg.solver.re == 100


def test_values_and_comments():
    cfg = parse_config("""
        # a comment line
        grid = 16, 8, 4   # trailing comment
        workers = 4
        mode = overlap
        tile = 8,8,8
        max_time = 3.5
        dump_fields = no
    """)
    assert cfg.solver.extents == (16, 8, 4)
    assert (cfg.workers, cfg.mode, cfg.tile) == (4, "overlap", (8, 8, 8))
    assert cfg.solver.max_time == 3.5
    assert not cfg.dump_fields
    assert parse_config("").solver.max_time == math.inf


def test_omega_out_of_range_has_line():
    with pytest.raises(ConfigError) as err:
        parse_config("re = 100\nomega = 2.5\n", "x.cfg")
    assert err.value.line == 2
    assert "x.cfg:2:" in str(err.value)


@pytest.mark.parametrize("text,line", [
    ("colour = red\n", 1),
    ("re = 100\nre = 200\n", 2),
    ("grid = 4,4\n", 1),
    ("workers = two\n", 1),
    ("mode = async\n", 1),
    ("\n\njust text\n", 3),
    ("sigma = 1.5\n", 1),
    ("eps = 0\n", 1),
    ("workers = 0\n", 1),
    ("alpha = 2\n", 1),
])
def test_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_output_paths(tmp_path):
    cfg = parse_config(f"output_dir = {tmp_path}\nprofiles = prof.csv\n")
    assert cfg.output(cfg.profiles) == tmp_path / "prof.csv"
    assert cfg.output("/abs/file.csv").as_posix() == "/abs/file.csv"


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "runs"
    for path in sorted(root.glob("*.cfg")):
        load_config(path)
    re100 = load_config(root / "re100.cfg")
    assert re100.solver.extents == (129, 129, 3)
    assert re100.fluid.nu == pytest.approx(0.01)
