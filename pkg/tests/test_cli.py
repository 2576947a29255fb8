import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_online import cli, report
from robust_online.game import build_lower_bound_instance

MINIMAL = {
    "kernel": {"name": "massart", "eta": 0.25},
    "hypothesis_class": {"type": "random", "K": 4, "F": 6},
    "T": 50,
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


class TestParseConfig:
    def test_defaults(self):
        cfg = cli.parse_config(json.dumps(MINIMAL))
        assert cfg.delta == 0.05 and cfg.runs == 100 and cfg.seed0 == 0
        assert cfg.predictor == "l2-reduction"

    def test_unknown_predictor(self):
        doc = dict(MINIMAL, predictor={"name": "oracle"})
        with pytest.raises(cli.ConfigError, match="predictor.name"):
            cli.parse_config(json.dumps(doc))

    def test_unknown_key(self):
        doc = dict(MINIMAL, kernel={"name": "massart", "eta": 0.25, "rho": 1})
        with pytest.raises(cli.ConfigError, match="kernel.rho"):
            cli.parse_config(json.dumps(doc))

    def test_syntax_error_line(self):
        with pytest.raises(cli.ConfigError, match="line 3"):
            cli.parse_config('{\n  "T": 5,\n  "runs": }')

    @pytest.mark.parametrize("key,value", [("T", 0), ("runs", 0), ("delta", 1.0), ("delta", 0)])
    def test_invariants(self, key, value):
        with pytest.raises(cli.ConfigError, match=key):
            cli.parse_config(json.dumps(dict(MINIMAL, **{key: value})))

    def test_cube_singleton_is_lower_bound_instance(self):
        doc = {"kernel": {"name": "singleton", "gamma_H": 0.02}, "hypothesis_class": {"type": "cube", "tau": 4},
               "predictor": {"name": "pairwise-meta"}, "T": 400}
        exp = cli.parse_config(json.dumps(doc)).build()
        h, k, a = build_lower_bound_instance(4, 0.02, 400)
        np.testing.assert_array_equal(exp.hclass.labels, h.labels)
        for x in range(4):
            for y in range(2):
                np.testing.assert_allclose(exp.kernel.kernel_set(x, y).vertices, k.kernel_set(x, y).vertices)
        np.testing.assert_array_equal(exp.adversary.feature_rule.plan(h, 0, 400, None),
                                      a.feature_rule.plan(h, 0, 400, None))

    def test_instance_excludes_kernel(self):
        doc = dict(MINIMAL, instance={"name": "soft-gap", "alpha": 0.5})
        with pytest.raises(cli.ConfigError, match="instance"):
            cli.parse_config(json.dumps(doc))

    def test_with_value(self):
        cfg = cli.parse_config(json.dumps(MINIMAL))
        assert cfg.with_value("eta", 0.1).build().kernel.eta == 0.1
        assert cfg.with_value("K", 3).build().hclass.K == 3
        with pytest.raises(cli.ConfigError):
            cfg.with_value("alpha", 0.5)


class TestCsv:
    @given(st.lists(st.tuples(st.integers(0, 2**31), st.integers(0, 10**6), st.sampled_from([None, True, False])),
                    max_size=20))
    def test_summary_round_trip(self, rows):
        recs = [{"run_id": i, "seed": s, "predictor": "l2-reduction", "kernel": "massart", "T": 100,
                 "cum_errors": c, "guarantee_event": e} for i, (s, c, e) in enumerate(rows)]
        assert report.parse_summary(report.format_summary(recs)) == recs

    def test_curve_round_trip(self):
        pts = [(256.0, 6.0, 16.0, 8.05), (512.0, 6.5, 16.0, 8.0714285)]
        assert report.parse_curve(report.format_curve(pts)) == pts

    def test_lf_line_endings(self):
        text = report.format_summary([{"run_id": 0, "seed": 0, "predictor": "p", "kernel": "k", "T": 1,
                                       "cum_errors": 0, "guarantee_event": None}])
        assert "\r" not in text and text.endswith("\n")

    def test_svg(self):
        svg = report.svg_line_chart([256, 512, 1024], [3, 6, 12], loglog=True, title="risk")
        assert svg.startswith("<svg") and "polyline" in svg and "log-log" in svg


class TestCommands:
    def test_simulate_two_runs(self, tmp_path, capsys):
        path = write(tmp_path, dict(MINIMAL, runs=2))
        out = str(tmp_path / "res")
        assert cli.main(["simulate", "--config", path, "--out", out]) == 0
        rows = report.parse_summary((tmp_path / "res_summary.csv").read_text())
        assert len(rows) == 2 and rows[0]["T"] == 50
        first = (tmp_path / "res_summary.csv").read_bytes()
        assert cli.main(["simulate", "--config", path, "--out", out]) == 0
        assert (tmp_path / "res_summary.csv").read_bytes() == first

    def test_seed0_flag(self, tmp_path):
        path = write(tmp_path, dict(MINIMAL, runs=2))
        assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "r"), "--seed0", "7"]) == 0
        rows = report.parse_summary((tmp_path / "r_summary.csv").read_text())
        assert [r["seed"] for r in rows] == [7, 8]

    def test_sweep(self, tmp_path, capsys):
        path = write(tmp_path, dict(MINIMAL, runs=5))
        assert cli.main(["sweep", "--config", path, "--axis", "T", "--values", "64,128,256",
                         "--out", str(tmp_path / "s")]) == 0
        assert "slope" in capsys.readouterr().out
        pts = report.parse_curve((tmp_path / "s_curve.csv").read_text())
        assert [p[0] for p in pts] == [64, 128, 256]
        assert (tmp_path / "s_curve.svg").read_text().startswith("<svg")

    def test_sweep_empty_values(self, tmp_path):
        path = write(tmp_path, MINIMAL)
        assert cli.main(["sweep", "--config", path, "--axis", "T", "--values", ""]) == 1

    def test_sweep_invalid_axis_for_config(self, tmp_path):
        path = write(tmp_path, MINIMAL)
        assert cli.main(["sweep", "--config", path, "--axis", "alpha", "--values", "0.5"]) == 1

    def test_validation_exit(self, tmp_path):
        assert cli.main(["simulate", "--config", write(tmp_path, "{bad json")]) == 1
        assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1

    def test_usage_exit(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["nope"])
        assert e.value.code == 1

    def test_runtime_exit(self, tmp_path):
        doc = dict(MINIMAL, predictor={"name": "hellinger-singleton"}, runs=1)
        assert cli.main(["simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path / "x")]) == 2

    def test_gap(self, tmp_path, capsys):
        assert cli.main(["gap", "--config", write(tmp_path, MINIMAL)]) == 0
        out = capsys.readouterr().out
        assert "l2sq: gap=0.5" in out and "hellinger_sq: gap=0.267949" in out

    def test_test_pair(self, tmp_path, capsys):
        doc = dict(MINIMAL, pair={"truth": 1, "delta": 0.1})
        assert cli.main(["test-pair", "--config", write(tmp_path, doc)]) == 0
        assert "steps=23" in capsys.readouterr().out

    def test_verify(self, capsys):
        assert cli.main(["verify", "divergences"]) == 0
        out = capsys.readouterr().out
        assert "Hellinger tensorization" in out and "FAIL]" not in out

    def test_verify_failure_exit(self, monkeypatch):
        from robust_online.dist import CheckReport

        monkeypatch.setattr(cli, "run_suites", lambda names: [CheckReport("broken", False, -1.0, 1)])
        assert cli.main(["verify", "ewa"]) == 3

    def test_shipped_configs_parse(self):
        from pathlib import Path

        for p in sorted((Path(__file__).parent.parent / "configs").glob("*.json")):
            cli.load_config(p)
