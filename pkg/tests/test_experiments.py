import csv
import json
import math

import numpy as np
import pytest

from aci_lab.cli import main
from aci_lab.config import OUT_DIR_ENV, load_config, resolve
from aci_lab.experiments import FIGURE3_COLUMNS, fmt, run, screening_strengths
from aci_lab.models import auc

SMALL_FIG3 = """
kind = "figure3"
seed = 5
replications = 20

[model]
p = 0.01
epsilon = 0.1
target_auc = [0.7]

[budgets]
K = 1000
B = [10, 50]

[benchmark]
replications = 40
"""


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults(self, tmp_path):
        cfg = resolve("figure3", {"output": {"dir": str(tmp_path)}})
        assert cfg.K == 10_000 and cfg.B_grid == [10, 20, 50, 100, 200, 500, 1000]
        assert cfg.section("model")["target_auc"] == [0.55, 0.70, 0.79, 0.90]
        assert cfg.section("channel")["rho"] == 0.1

    def test_alpha_grid(self):
        cfg = resolve("simulate", {"budgets": {"K": 1000, "alpha": [0.001, 0.0155]}})
        assert cfg.B_grid == [1, 15]

    @pytest.mark.parametrize("override", [
        {"replications": 1}, {"threads": 0}, {"seed": -1},
        {"budgets": {"B": [0]}}, {"budgets": {"K": 10, "B": [11]}},
        {"output": {"formats": ["xlsx"]}},
    ])
    def test_validation(self, override):
        with pytest.raises(ValueError):
            resolve("simulate", override)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            resolve("plot")

    def test_hash_ignores_threads_and_out_dir(self, tmp_path):
        a = resolve("bounds", {"threads": 1, "output": {"dir": str(tmp_path / "a")}})
        b = resolve("bounds", {"threads": 4, "output": {"dir": str(tmp_path / "b")}})
        c = resolve("bounds", {"seed": 7})
        assert a.config_hash() == b.config_hash() != c.config_hash()

    def test_toml(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL_FIG3))
        assert cfg.kind == "figure3" and cfg.K == 1000 and cfg.seed == 5
        assert cfg.section("benchmark")["replications"] == 40
        with pytest.raises(ValueError, match="does not match"):
            load_config(write(tmp_path, SMALL_FIG3), "bounds")

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
        assert resolve("tails").out_dir == tmp_path / "env"

    def test_strengths(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL_FIG3))
        s = screening_strengths(cfg)
        assert [x["label"] for x in s] == ["eps0.1", "auc0.7"]
        assert auc(s[1]["model"]) == pytest.approx(0.7, abs=1e-9)
        with pytest.raises(ValueError):
            screening_strengths(resolve("simulate", {"model": {"epsilon": None}}))


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(np.int64(4)) == "4" and fmt(True) == "true"
    assert fmt(float("nan")) == "nan" and fmt(-math.inf) == "-inf"


class TestRunners:
    def test_figure3_schema_and_manifest(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL_FIG3))
        cfg.data["output"]["dir"] = str(tmp_path / "out")
        result = run(cfg)
        assert result.ok
        names = sorted(p.name for p in result.files)
        assert "figure3_eps0.1.csv" in names and "figure3_auc0.7.csv" in names
        header, rows = read_csv(tmp_path / "out" / "figure3_eps0.1.csv")
        assert header == [c[0] for c in FIGURE3_COLUMNS]
        assert [int(r[0]) for r in rows] == [10, 50]
        for r in rows:
            v = dict(zip(header, map(float, r)))
            assert v["converse_capped"] <= v["converse_gain"] and v["converse_capped"] <= 0.531005 * v["B"]
            assert v["converse_oracle_capped"] <= v["oracle_gain"]
        man = json.loads((tmp_path / "out" / "figure3_eps0.1.manifest.json").read_text())
        for key in ("config_hash", "config", "seed", "library_version", "numpy_version", "scipy_version", "columns"):
            assert key in man
        assert man["config_hash"] == cfg.config_hash()
        assert set(man["columns"]) == set(header)
        assert man["columns"]["empirical_gain"] == "empirical"

    def test_bounds_curve(self, tmp_path):
        run(resolve("bounds", {"output": {"dir": str(tmp_path)}}))
        header, rows = read_csv(tmp_path / "bounds_curve.csv")
        assert header[:3] == ["B", "random", "oracle"] and len(rows) == 200
        for r in rows:
            B, random, oracle, *curves = map(float, r)
            assert random == pytest.approx(0.05 * B)
            assert all(random <= c <= oracle + 1e-12 for c in curves)
        _, brk = read_csv(tmp_path / "bounds_breakpoints.csv")
        assert float(brk[0][1]) == pytest.approx((0.45 * math.sqrt(10) / 0.95) ** 2, rel=1e-10)

    def test_tails_curve(self, tmp_path):
        res = run(resolve("tails", {"output": {"dir": str(tmp_path)}}))
        header, rows = read_csv(tmp_path / "tails_curve.csv")
        assert "pareto_exact_nu3.01" in header and "pareto_exact_nu4" in header
        for r in rows:
            v = dict(zip(header, map(float, r)))
            assert v["gaussian_asymptotic"] == pytest.approx(math.sqrt(2 * math.log(v["K_over_B"])), rel=1e-10)
            assert v["pareto_exact_nu4"] <= v["pareto_asymptotic_nu4"]
        top = [dict(zip(header, map(float, r))) for r in rows if float(r[0]) >= 1e4 * (1 - 1e-9)]
        dlog = math.log(top[-1]["K_over_B"] / top[0]["K_over_B"])
        for nu in (4, 5):
            col = f"pareto_asymptotic_nu{nu}"
            slope = math.log(top[-1][col] / top[0][col]) / dlog
            assert slope == pytest.approx(1 / nu, rel=0.02)
        man = json.loads((tmp_path / "tails_curve.manifest.json").read_text())
        assert man["notes"]
        assert res.ok

    def test_benchmark_and_json(self, tmp_path):
        cfg = resolve("benchmark", {"replications": 50, "budgets": {"K": 1000, "B": [10, 100]},
                                    "output": {"dir": str(tmp_path), "formats": ["csv", "json"]}})
        run(cfg)
        header, rows = read_csv(tmp_path / "benchmark_eps0.1.csv")
        records = json.loads((tmp_path / "benchmark_eps0.1.json").read_text())
        assert [list(r.values()) for r in records] == rows
        for r in rows:
            v = dict(zip(header, map(float, r)))
            assert v["gain_bits"] >= v["random_gain"] - 3 * v["gain_se"]

    def test_simulate_rerun_is_byte_identical(self, tmp_path):
        over = {"replications": 10, "budgets": {"K": 500, "B": [5, 50]}}
        run(resolve("simulate", {**over, "output": {"dir": str(tmp_path / "a")}}))
        run(resolve("simulate", {**over, "threads": 2, "output": {"dir": str(tmp_path / "b")}}))
        a = (tmp_path / "a" / "simulate_eps0.1.csv").read_bytes()
        assert a == (tmp_path / "b" / "simulate_eps0.1.csv").read_bytes()
        header, rows = read_csv(tmp_path / "a" / "simulate_eps0.1.csv")
        assert {r[0] for r in rows} == {"top", "random", "oracle"}


class TestCLI:
    def test_bounds(self, tmp_path, capsys):
        assert main(["bounds", "--out", str(tmp_path)]) == 0
        assert "bounds_curve.csv" in capsys.readouterr().out

    def test_config_and_overrides(self, tmp_path):
        cfg = write(tmp_path, SMALL_FIG3)
        assert main(["figure3", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--seed", "9", "--threads", "2"]) == 0
        man = json.loads((tmp_path / "o" / "figure3_auc0.7.manifest.json").read_text())
        assert man["seed"] == 9 and man["config"]["budgets"]["K"] == 1000

    def test_config_error(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
        assert main(["simulate", "--replications", "1", "--out", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_check_passes(self, tmp_path):
        assert main(["check", "--replications", "100", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "check_report.json").read_text())
        assert report["passed"] and len(report["checks"]) == 10

    def test_check_negative_control(self, tmp_path):
        cfg = write(tmp_path, "[check]\ntolerance_scale = 0.0\n")
        assert main(["check", "--config", str(cfg), "--replications", "100", "--out", str(tmp_path)]) == 1
        assert not json.loads((tmp_path / "check_report.json").read_text())["passed"]
