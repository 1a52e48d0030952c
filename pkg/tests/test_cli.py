"""Configuration parsing and the task runner's exit discipline."""
import json

import pytest

from gexpect.cli import ConfigError, main, parse_config

BASE = {
    "tree": {"horizon": 1.0, "steps": 64, "layout": "recombining"},
    "measure": {"kind": "entropic", "nu": 0.5},
    "claim": {"kind": "call", "strike": 0.0},
    "task": "solve",
}


def write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = json.loads(json.dumps(BASE))
    for key, val in overrides.items():
        if val is None:
            cfg.pop(key, None)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestParseConfig:
    def test_round_trip(self):
        cfg = parse_config(json.dumps(BASE))
        assert cfg.task == "solve"
        assert cfg.steps == 64
        assert cfg.layout == "recombining"
        assert cfg.measure["kind"] == "entropic"

    def test_defaults_applied(self):
        minimal = {
            "tree": {"steps": 8},
            "measure": {"kind": "entropic", "nu": 1.0},
            "claim": {"kind": "linear", "coef": 1.0},
            "task": "solve",
        }
        cfg = parse_config(json.dumps(minimal))
        assert cfg.horizon == 1.0
        assert cfg.layout == "auto"
        assert cfg.seed == 0

    def test_unknown_top_level_key(self):
        bad = dict(BASE, colour="red")
        with pytest.raises(ConfigError, match="colour"):
            parse_config(json.dumps(bad))

    def test_unknown_measure_param(self):
        bad = dict(BASE, measure={"kind": "entropic", "nu": 0.5, "mu": 1.0})
        with pytest.raises(ConfigError, match="mu"):
            parse_config(json.dumps(bad))

    def test_unknown_claim_kind(self):
        bad = dict(BASE, claim={"kind": "swaption"})
        with pytest.raises(ConfigError, match="swaption"):
            parse_config(json.dumps(bad))

    def test_missing_required_section(self):
        bad = {k: v for k, v in BASE.items() if k != "measure"}
        with pytest.raises(ConfigError, match="measure"):
            parse_config(json.dumps(bad))

    def test_parse_error_reports_position(self):
        with pytest.raises(ConfigError, match=r"line 1 column"):
            parse_config("{invalid json", source="broken.json")

    def test_unknown_task(self):
        bad = dict(BASE, task="meditate")
        with pytest.raises(ConfigError, match="meditate"):
            parse_config(json.dumps(bad))

    def test_task_param_scoping(self):
        # converge accepts n_values; solve does not
        ok = dict(BASE, task="converge",
                  params={"n_values": [64, 128], "ratio_tol": 0.25})
        parse_config(json.dumps(ok))
        bad = dict(BASE, params={"n_values": [64, 128]})
        with pytest.raises(ConfigError, match="n_values"):
            parse_config(json.dumps(bad))

    def test_bad_layout(self):
        bad = dict(BASE, tree={"steps": 8, "layout": "trinomial"})
        with pytest.raises(ConfigError, match="layout"):
            parse_config(json.dumps(bad))


class TestMain:
    def test_solve_exits_zero_and_writes_report(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out = tmp_path / "out"
        code = main(["solve", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "PASS" in text
        reports = list(out.glob("*.report.txt"))
        assert len(reports) == 1
        assert "elapsed" not in reports[0].read_text()

    def test_deterministic_output_bytes(self, tmp_path):
        cfg = write_cfg(tmp_path, task="dual",
                        tree={"steps": 10, "layout": "full"})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["dual", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["dual", "--config", str(cfg), "--out", str(out2)]) == 0
        for p1 in sorted(out1.iterdir()):
            p2 = out2 / p1.name
            assert p1.read_bytes() == p2.read_bytes()

    def test_axiom_failure_sets_exit_one(self, tmp_path, capsys):
        # entropic scaling violation is a genuine FAIL unless expected
        cfg = write_cfg(tmp_path, task="axioms",
                        tree={"steps": 8, "layout": "full"})
        assert main(["axioms", "--config", str(cfg),
                     "--out", str(tmp_path / "o1")]) == 1
        assert "FAIL" in capsys.readouterr().out
        cfg2 = write_cfg(tmp_path, name="cfg2.json", task="axioms",
                         tree={"steps": 8, "layout": "full"},
                         params={"expect_fail": ["positive_homogeneity",
                                                 "subadditivity"]})
        assert main(["axioms", "--config", str(cfg2),
                     "--out", str(tmp_path / "o2")]) == 0

    def test_config_error_sets_exit_two(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{broken")
        assert main(["solve", "--config", str(path),
                     "--out", str(tmp_path)]) == 2
        assert main(["solve", "--config", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path)]) == 2

    def test_task_flag_must_match_config(self, tmp_path):
        cfg = write_cfg(tmp_path)  # task: solve
        assert main(["axioms", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_penalize_schedule_table(self, tmp_path):
        cfg = write_cfg(
            tmp_path, task="penalize", claim=None,
            tree={"steps": 32, "layout": "recombining"},
            params={"mu_bar": 1.0, "nu_bar": 0.5, "z": 1.0,
                    "n_schedule": [4, 16, 64]})
        out = tmp_path / "out"
        code = main(["penalize", "--config", str(cfg), "--out", str(out),
                     "--format", "both"])
        assert code == 0
        csvs = list(out.glob("*.schedule.csv"))
        assert len(csvs) == 1
        header = csvs[0].read_text().splitlines()[0]
        assert header == "n,max_gap,max_Y_minus_y"

    def test_seed_override_echoed(self, tmp_path):
        cfg = write_cfg(tmp_path, task="dual",
                        tree={"steps": 8, "layout": "full"})
        out = tmp_path / "out"
        assert main(["dual", "--config", str(cfg), "--out", str(out),
                     "--seed", "99"]) == 0
        report = next(out.glob("*.report.txt")).read_text()
        assert "seed: 99" in report

    def test_tabular_format_writes_no_report(self, tmp_path):
        cfg = write_cfg(tmp_path, task="converge",
                        params={"n_values": [32, 64, 128]})
        out = tmp_path / "out"
        assert main(["converge", "--config", str(cfg), "--out", str(out),
                     "--format", "tabular"]) == 0
        assert not list(out.glob("*.report.txt"))
        assert list(out.glob("*.csv"))
