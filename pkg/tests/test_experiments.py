import json
import math

import numpy as np
import pytest

from sincfem.cli import run_cli
from sincfem.experiments import (CSV_HEADER, DegenerateDataError, ErrorRecord, ExperimentConfig,
                                 cov_check, fit_rate, parse_config_file, quad_check, read_csv,
                                 strong_study, weak_study, write_csv)
from sincfem.sampler import read_field_sample
from sincfem.spectral import analytic_solution_sqnorm


def test_fit_rate_exact_lines():
    hs = [0.5, 0.25, 0.125, 0.0625]
    fit = fit_rate([(h, h ** 2) for h in hs])
    assert fit.rate == pytest.approx(2.0, abs=1e-12)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    fit = fit_rate([(h, 3 * h ** 0.75) for h in hs])
    assert fit.rate == pytest.approx(0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)


def test_fit_rate_inverse_abscissa():
    ks = [0.5, 0.4, 0.3]
    fit = fit_rate([(k, 2 * math.exp(-4.9 / k)) for k in ks], against="inverse")
    assert fit.rate == pytest.approx(-4.9, abs=1e-10)


def test_fit_rate_accepts_records():
    recs = [ErrorRecord(h, 1, 0.1, 3, h, "strong", 0.0) for h in (0.1, 0.05)]
    assert fit_rate(recs).rate == pytest.approx(1.0)


@pytest.mark.parametrize("points", [[], [(0.1, 1.0)], [(0.1, 0.0), (0.05, 1.0)],
                                    [(0.1, -1.0), (0.05, 1.0)], [(0.1, 1.0), (0.1, 2.0)],
                                    [(0.1, float("nan")), (0.05, 1.0)]])
def test_fit_rate_degenerate(points):
    with pytest.raises(DegenerateDataError, match="degenerate data"):
        fit_rate(points)


def _small_strong(**kw):
    base = dict(study="strong", dim=1, beta=0.75, mesh_ns=(8, 16, 32), n_samples=5, n_ok=257)
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_noise_strong_study_is_degenerate():
    res = strong_study(_small_strong(), zero_noise=True)
    assert all(r.error == 0 for r in res.records)
    with pytest.raises(DegenerateDataError, match="degenerate data"):
        res.fit


def test_strong_study_records_consistent():
    cfg = _small_strong(n_samples=8, mesh_ns=(16, 32, 64, 128), n_ok=2049)
    res = strong_study(cfg)
    from sincfem.quadrature import build_grid, calibrate_k
    for r, n in zip(res.records, cfg.mesh_ns):
        assert r.N_h == n - 1 and r.h == pytest.approx(1 / n)
        assert r.k == calibrate_k(r.h, cfg.beta, 1)
        assert r.node_count == build_grid(cfg.beta, r.k).node_count
        assert r.error > 0 and r.wall_time >= 0
    errs = [r.error for r in res.records]
    assert all(b <= 1.2 * a for a, b in zip(errs, errs[1:]))
    # theoretical rate 2 beta - d/2 = 1
    assert abs(res.fit.rate - 1.0) <= 0.1
    assert res.diagnostics["truncation_tail"] > 0


def test_regime_rejected_before_work():
    for cfg in (_small_strong(dim=2, beta=0.5), _small_strong(beta=0.25),
                ExperimentConfig(study="weak", dim=3, beta=0.75, mesh_ns=(4, 6))):
        with pytest.raises(ValueError, match="4\\*beta > dim"):
            cfg.validate()


@pytest.mark.parametrize("kw", [dict(mesh_ns=(16, 8)), dict(mesh_ns=(8, 8)), dict(mesh_ns=(1, 4)),
                                dict(beta=1.0), dict(dim=4), dict(calibration="fast"),
                                dict(study="nope"), dict(n_samples=0), dict(strategy="lu")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _small_strong(**kw).validate()


def test_config_defaults():
    cfg = ExperimentConfig(study="strong", dim=2, beta=0.75)
    assert cfg.mesh_ns == (8, 16, 32, 64) and cfg.n_ok == 513 and cfg.n_samples == 50
    assert ExperimentConfig(study="weak", dim=1, beta=0.375).n_mc == 1000


def test_weak_study_single_draw_is_flagged():
    cfg = ExperimentConfig(study="weak", dim=1, beta=0.375, mesh_ns=(8, 16, 32), n_mc=1)
    res = weak_study(cfg)
    assert len(res.records) == 3
    assert res.fit.high_variance


def test_weak_study_estimate_bounded_by_reference():
    cfg = ExperimentConfig(study="weak", dim=1, beta=0.625, mesh_ns=(16, 32, 64), n_mc=500, seed=2)
    res = weak_study(cfg)
    ref = analytic_solution_sqnorm(1, 0.5, 0.625, 1e-6)
    assert res.diagnostics["reference"] == pytest.approx(ref, abs=1e-12)
    finest = res.records[-1]
    estimate = res.diagnostics["estimates"][-1]
    assert finest.error == pytest.approx(abs(ref - estimate), abs=1e-15)
    # the discrete second moment sits below the exact one up to Monte Carlo noise
    assert estimate <= ref + 3 * finest.stderr


def test_quad_check_slope():
    cfg = ExperimentConfig(study="quad-check", dim=1, beta=0.5, mesh_ns=(32,))
    res = quad_check(cfg)
    assert [r.k for r in res.records] == [0.5, 0.4, 0.3, 0.25]
    assert abs(res.fit.rate / (-math.pi ** 2 / 2) - 1) <= 0.1


def test_cov_check_rows():
    rows = cov_check(ExperimentConfig(study="cov-check", dim=1, beta=0.5, mesh_ns=(8,), n_mc=5000))
    assert [r["strategy"] for r in rows] == ["global-cholesky", "per-element"]
    assert rows[0]["identity_residual"] <= 1e-10 and rows[1]["identity_residual"] <= 1e-12
    assert all(r["max_zscore"] <= 5 for r in rows)


def test_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# strong smoke run\ndim = 1\nbeta = 0.75\nmesh_ns = 8, 16\n"
                    "n_samples = 3\nn_ok = 65   # small\nseed = 5\n")
    parsed = parse_config_file(conf)
    assert parsed == {"dim": 1, "beta": 0.75, "mesh_ns": (8, 16), "n_samples": 3, "n_ok": 65, "seed": 5}
    out = tmp_path / "s.csv"
    assert run_cli(["strong", "--config", str(conf), "--seed", "9", "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert manifest["config"]["seed"] == 9 and manifest["config"]["n_ok"] == 65
    assert manifest["config"]["mesh_ns"] == [8, 16]


def test_config_file_rejects_unknown_keys(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("dims = 2\n")
    with pytest.raises(ValueError, match="unknown"):
        parse_config_file(conf)


def _strip_wall(path):
    rows, footer = read_csv(path)
    return [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows], footer


def test_csv_deterministic_except_wall_time(tmp_path):
    paths = [tmp_path / f"{i}.csv" for i in range(2)]
    for p in paths:
        write_csv(strong_study(_small_strong()), p)
    assert paths[0].read_text().splitlines()[0] == CSV_HEADER
    assert CSV_HEADER.endswith("wall_ms")
    assert _strip_wall(paths[0]) == _strip_wall(paths[1])
    rows, footer = read_csv(paths[0])
    assert len(rows) == 3 and {"rate", "intercept", "residual"} <= set(footer)


def test_cli_sample(tmp_path):
    out = tmp_path / "field.txt"
    argv = ["sample", "--dim", "2", "--n", "16", "--beta", "0.75", "--kappa", "0.5", "--seed", "42",
            "--out", str(out)]
    assert run_cli(argv) == 0
    s = read_field_sample(out)
    assert s.mesh.N_h == 225 and s.seed == 42 and s.beta == 0.75
    first = out.read_bytes()
    assert run_cli(argv) == 0
    assert out.read_bytes() == first
    assert (tmp_path / "field.txt.manifest.json").exists()


def test_cli_strong_and_weak(tmp_path):
    out = tmp_path / "strong.csv"
    assert run_cli(["strong", "--dim", "1", "--beta", "0.5", "--meshes", "8,16,32", "--samples", "4",
                    "--overkill", "257", "--seed", "1", "--out", str(out)]) == 0
    rows, footer = read_csv(out)
    assert len(rows) == 3 and "rate" in footer
    out = tmp_path / "weak.csv"
    assert run_cli(["weak", "--dim", "1", "--beta", "0.375", "--meshes", "8,16", "--mc", "20",
                    "--out", str(out)]) == 0
    assert len(read_csv(out)[0]) == 2


def test_cli_quad_and_cov(tmp_path):
    out = tmp_path / "quad.csv"
    assert run_cli(["quad-check", "--dim", "1", "--n", "32", "--beta", "0.5",
                    "--ks", "0.5,0.4,0.3,0.25", "--out", str(out)]) == 0
    rows, footer = read_csv(out)
    errs = [float(r["error"]) for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert abs(float(footer["rate"]) / (-math.pi ** 2 / 2) - 1) <= 0.1
    out = tmp_path / "cov.csv"
    assert run_cli(["cov-check", "--dim", "1", "--n", "8", "--mc", "2000", "--out", str(out)]) == 0
    assert out.read_text().startswith("strategy,identity_residual,max_zscore,n_draws")


def test_cli_failures(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run_cli(["strong", "--bogus"])
    assert info.value.code != 0
    assert run_cli(["strong", "--dim", "2", "--beta", "0.5", "--out", str(tmp_path / "x.csv")]) == 1
    assert "4*beta > dim" in capsys.readouterr().err
    assert run_cli(["weak", "--config", str(tmp_path / "missing.conf")]) == 1
    assert not (tmp_path / "x.csv").exists()
