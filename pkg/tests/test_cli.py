import csv
import filecmp

import numpy as np
import pytest

from tdglfem.cli import (EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, ConfigError, RunConfig, main,
                         parse_config, run_study, serialize_config)


def test_minimal_config_defaults():
    cfg = parse_config("[study]\nscheme = mixed\n")
    assert cfg.tau_factor == 2 and cfg.T == 1 and cfg.eta == 1 and cfg.kappa == 1
    assert cfg.levels == (1 / 16, 1 / 32, 1 / 64)
    assert parse_config("") == RunConfig()


def test_fractions_and_lists():
    cfg = parse_config("[study]\nlevels = 1/8, 1/16\ntau_factor = 1/2\n")
    assert cfg.levels == (0.125, 0.0625) and cfg.tau_factor == 0.5


def test_tau_not_below_eta_rejected():
    with pytest.raises(ConfigError, match="tau"):
        parse_config("[study]\nlevels = 1/8\ntau_factor = 8\n")
    with pytest.raises(ConfigError, match="tau"):
        parse_config("[study]\ntau = 0.5\n[model]\neta = 0.5\n")


@pytest.mark.parametrize("text,where", [
    ("[study]\nscheme = mixed\nbogus = 1\n", "line 3"),
    ("[study]\n\n[solver]\nnewton_tol = abc\n", "line 4"),
    ("[study]\nthis line is broken\n", "line 2"),
    ("scheme = mixed\n", "line 1"),
])
def test_errors_carry_line_numbers(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config(text)


@pytest.mark.parametrize("text,field", [
    ("[study]\nlevels = 1/16 1/8\n", "study.levels"),
    ("[study]\nscheme = fdtd\n", "study.scheme"),
    ("[solver]\nnewton_tol = 1e-3\n", "solver.newton_tol"),
    ("[domain]\nhole = -0.3 -0.3 -0.1 -0.1\n", "domain.hole"),
    ("[study]\nscheme = galerkin\nscenario = physical\n", "study.scenario"),
])
def test_validation_names_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[extras]\nx = 1\n")


def test_round_trip():
    text = ("[domain]\nkind = l_shape_with_hole\n[study]\nscenario = physical\nlevels = 1/8 1/16 1/32\n"
            "tau = 0.01\nT = 0.3\n[model]\nkappa = 2.5\napplied_field = 0.75\n[output]\nvtk = yes\n")
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def config_text(out, **study):
    body = {"scenario": "mms", "levels": "1/8 1/16 1/32"}
    body.update(study)
    lines = "\n".join(f"{k} = {v}" for k, v in body.items())
    return f"[study]\n{lines}\n[output]\ndir = {out}\n"


def test_mms_study_end_to_end(tmp_path):
    cfg = parse_config(config_text(tmp_path / "run"))
    results = run_study(cfg)
    assert len(results) == 3
    rows = list(csv.reader(open(tmp_path / "run" / "errors_mixed.csv")))
    assert len(rows) == 1 + 3 + 1 and rows[-1][1] == "rate"
    assert all(np.isfinite(float(v)) for v in rows[-1][4:])
    diag = list(csv.reader(open(tmp_path / "run" / "diagnostics_mixed.csv")))
    assert len(diag) == 4
    assert (tmp_path / "run" / "energy_mixed_level2.csv").exists()


def test_physical_energy_csv(tmp_path):
    out = tmp_path / "phys"
    text = config_text(out, scenario="physical", levels="1/8", tau="0.05", T="0.5")
    cfg = parse_config(text)
    (res,) = run_study(cfg)
    assert res.energy_margin >= 0
    rows = list(csv.DictReader(open(out / "energy_mixed_level0.csv")))
    G = np.array([float(r["G"]) for r in rows])
    assert len(G) == 11
    assert np.all(np.diff(G) <= 0.05 * G[:-1] + 1e-8 * (1 + G[:-1]))


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(config_text(tmp_path / "o", scenario="homogeneous", levels="1/8", tau="0.1", T="0.2"))
    assert main(["--config", str(good), "--deterministic"]) == EXIT_OK
    bad = tmp_path / "bad.ini"
    bad.write_text("[study]\nlevels = one\n")
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    fail = tmp_path / "fail.ini"
    fail.write_text(config_text(tmp_path / "f", scenario="physical", levels="1/8", tau="0.1", T="0.2")
                    + "[solver]\nnewton_maxit = 1\nnewton_tol = 1e-14\n")
    assert main(["--config", str(fail)]) == EXIT_SOLVER


def test_overrides(tmp_path):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(config_text(tmp_path / "ignored", levels="1/8 1/16 1/32"))
    out = tmp_path / "over"
    assert main(["--config", str(cfgfile), "--out", str(out), "--levels", "1",
                 "--scheme", "galerkin", "--deterministic"]) == EXIT_OK
    rows = list(csv.reader(open(out / "errors_galerkin.csv")))
    assert len(rows) == 2 and rows[1][0] == "galerkin"
    assert not (tmp_path / "ignored").exists()


def test_deterministic_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        cfgfile = tmp_path / f"{name}.ini"
        cfgfile.write_text(config_text(tmp_path / name, levels="1/8 1/16"))
        assert main(["--config", str(cfgfile), "--deterministic"]) == EXIT_OK
    for f in ("errors_mixed.csv", "energy_mixed_level0.csv", "energy_mixed_level1.csv",
              "diagnostics_mixed.csv"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False), f


def test_parallel_levels_match_sequential(tmp_path):
    seq = parse_config(config_text(tmp_path / "seq", levels="1/8 1/16"))
    par = parse_config(config_text(tmp_path / "par", levels="1/8 1/16") + "deterministic = false\n")
    run_study(seq)
    run_study(par)
    assert filecmp.cmp(tmp_path / "seq" / "errors_mixed.csv", tmp_path / "par" / "errors_mixed.csv",
                       shallow=False)


def test_vtk_snapshots(tmp_path):
    text = config_text(tmp_path / "v", scenario="physical", levels="1/8", tau="0.1", T="0.4")
    text += "vtk = true\nvtk_stride = 2\n"
    run_study(parse_config(text))
    names = sorted(p.name for p in (tmp_path / "v").glob("*.vtk"))
    assert names == ["mixed_level0_final.vtk", "mixed_level0_step00002.vtk", "mixed_level0_step00004.vtk"]
