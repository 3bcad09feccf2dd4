import csv
import math
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hrvem.study as study
from hrvem.cli import main
from hrvem.mesh import read_mesh
from hrvem.study import (ConfigError, StudyConfig, config_from_dict, load_config, parse_config_text,
                         run_study)

BASIC = """
# small study
test = a
families = [QuadS, PolyU]
k = 1
levels = [3, 4]
out_dir = out
"""


def write_cfg(tmp_path, text=BASIC, name="study.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_config_values():
    d = parse_config_text('a = 1\nb = 2.5 # note\nc = [x, "y z", 3]\nd = true\ne = QuadS\n')
    assert d == {"a": 1, "b": 2.5, "c": ["x", "y z", 3], "d": True, "e": "QuadS"}


@pytest.mark.parametrize("text,msg", [
    ("test a", "key = value"),
    ("k = 1\nk = 2", "duplicate"),
    ("x = [1, 2", "unterminated"),
    ("= 3", "empty key"),
])
def test_parse_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config_text(text)


@pytest.mark.parametrize("override,msg", [
    ({"families": []}, "families"),
    ({"families": ["Nope"]}, "unknown families"),
    ({"k": 0}, "k must"),
    ({"k": 1.5}, "k must"),
    ({"levels": []}, "levels"),
    ({"levels": [1, 2]}, "levels"),
    ({"levels": [4, 4]}, "repeat"),
    ({"test": "z"}, "test"),
    ({"tol": -1.0}, "positive"),
    ({"tol": "x"}, "number"),
    ({"seed": 1.5}, "seed"),
    ({"timing": 1}, "timing"),
    ({"colour": "red"}, "unknown keys"),
    ({"expect_exact": ["E_x"]}, "expect_exact"),
])
def test_config_validation(override, msg):
    d = {"test": "a", "families": ["QuadS"], "k": 1, "levels": [4, 8]}
    d.update(override)
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(d)


def test_missing_keys():
    with pytest.raises(ConfigError, match="missing"):
        config_from_dict({"test": "a"})


def test_scalar_lists_are_promoted(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "test = b\nfamilies = TriS\nk = 2\nlevels = 4\n"))
    assert cfg.families == ("TriS",) and cfg.levels == (4,)


def test_relative_out_dir_resolves_against_config(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    assert cfg.out_dir == tmp_path / "out"


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(2, 64), min_size=1, max_size=5, unique=True), st.integers(1, 5),
       st.sampled_from("abc"))
def test_config_text_round_trip(levels, k, test):
    text = f"test = {test}\nfamilies = [HexS]\nk = {k}\nlevels = [{', '.join(map(str, levels))}]\n"
    cfg = config_from_dict(parse_config_text(text))
    assert cfg.levels == tuple(levels) and cfg.k == k and cfg.test == test


def test_run_writes_outputs(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    report = run_study(cfg)
    assert report.ok
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(["testa_k1_QuadS.csv", "testa_k1_PolyU.csv", "testa_k1_summary.md",
                            "testa_k1_E_sigma.svg", "testa_k1_E_sigma_div.svg", "testa_k1_E_u.svg"])
    rows = list(csv.reader((out / "testa_k1_QuadS.csv").open(newline="")))
    assert rows[0] == ["n", "h_bar_e", "E_sigma", "E_sigma_div", "E_u", "N_dofs", "seconds", "error"]
    assert [r[0] for r in rows[1:]] == ["3", "4"]
    assert float(rows[1][1]) == pytest.approx(1 / 3)
    assert rows[1][6] == "" and rows[1][7] == ""
    md = (out / "testa_k1_summary.md").read_text()
    assert "| QuadS |" in md and "exact" in md


def test_plot_points_equal_csv_values(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    run_study(cfg)
    out = tmp_path / "out"
    svg = (out / "testa_k1_E_u.svg").read_text()
    assert svg.startswith("<?xml") and 'version="1.1"' in svg and 'class="slope"' in svg
    pts = re.findall(r'data-family="(\w+)" data-h="([^"]+)" data-e="([^"]+)"', svg)
    for fam in ("QuadS", "PolyU"):
        rows = study.read_family_csv(out / f"testa_k1_{fam}.csv")
        want = [(fam, r["h_bar_e"], r["E_u"]) for r in rows]
        assert [p for p in pts if p[0] == fam] == want


def test_determinism_and_timing_flag(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    run_study(cfg)
    first = (tmp_path / "out" / "testa_k1_PolyU.csv").read_bytes()
    run_study(cfg)
    assert (tmp_path / "out" / "testa_k1_PolyU.csv").read_bytes() == first
    timed = StudyConfig(**{**cfg.__dict__, "timing": True, "out_dir": tmp_path / "t"})
    run_study(timed)
    rows = study.read_family_csv(tmp_path / "t" / "testa_k1_PolyU.csv")
    assert all(float(r["seconds"]) > 0 for r in rows)


def test_failed_level_records_error_row(tmp_path, monkeypatch):
    real = study.generate_mesh

    def flaky(family, n, seed=0):
        if n == 4:
            raise RuntimeError("boom")
        return real(family, n, seed=seed)

    monkeypatch.setattr(study, "generate_mesh", flaky)
    cfg = load_config(write_cfg(tmp_path))
    report = run_study(cfg)
    assert not report.ok
    rows = study.read_family_csv(tmp_path / "out" / "testa_k1_QuadS.csv")
    assert rows[-1]["n"] == "4" and "boom" in rows[-1]["error"] and rows[-1]["E_u"] == ""
    assert "aborted" in (tmp_path / "out" / "testa_k1_summary.md").read_text()


def test_norm_rate_exact_and_nan():
    from hrvem.analysis import LevelResult
    lv = [LevelResult(n, 1 / n, 1e-3 / n ** 2, 1e-16, 1e-2 / n ** 2, 1, 1, 0.0, 1.0, 1.0) for n in (4, 8, 16)]
    assert study.norm_rate(lv, "E_sigma_div", 1e-10) == "exact"
    assert study.norm_rate(lv, "E_u", 1e-10) == pytest.approx(2.0)
    assert math.isnan(study.norm_rate(lv[:1], "E_u", 1e-10))


def test_cli_run_exit_codes(tmp_path, capsys):
    p = write_cfg(tmp_path, BASIC + "expect_exact = [E_sigma_div]\nexpect_min_rate = 1.0\n")
    assert main(["run", str(p)]) == 0
    p = write_cfg(tmp_path, BASIC + "expect_min_rate = 50\n", "strict.cfg")
    assert main(["run", str(p)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_overrides(tmp_path):
    p = write_cfg(tmp_path)
    out = tmp_path / "over"
    assert main(["run", str(p), "--k", "2", "--test", "b", "--levels", "2,3", "--out-dir", str(out),
                 "--seed", "3", "--tol", "1e-9"]) == 0
    rows = study.read_family_csv(out / "testb_k2_PolyU.csv")
    assert [r["n"] for r in rows] == ["2", "3"]


@pytest.mark.parametrize("argv", [[], ["bogus"], ["run"], ["mesh", "QuadS"], ["mesh", "Hexagon", "4"],
                                  ["run", "x.cfg", "--levels", "a,b"], ["check", "--frobnicate"]])
def test_cli_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    p = write_cfg(tmp_path, "families = []\n")
    assert main(["run", str(p)]) == 2
    p = write_cfg(tmp_path, BASIC, "k.cfg")
    assert main(["run", str(p), "--k", "0"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_mesh(tmp_path, capsys):
    out = tmp_path / "m.json"
    assert main(["mesh", "HexS", "8", "--out", str(out)]) == 0
    m = read_mesh(out)
    assert m.n_cells > 0
    assert main(["mesh", "QuadS", "1"]) == 2
    assert main(["mesh", "PolyU", "4", "--seed", "2"]) == 0


def test_cli_check(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_shipped_configs_load():
    from pathlib import Path
    cfgs = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))
    assert len(cfgs) == 6
    for p in cfgs:
        cfg = load_config(p)
        assert len(cfg.families) == 8 and cfg.seed == 0
