import json
import math

import numpy as np
import pytest

from edswave import cli
from edswave.config import KNOWN_KEYS, RunConfig, SweepConfig, parse_config
from edswave.exponents import ExponentQuery, p_eds
from edswave.model import ConfigError, Grid, ModelParams
from edswave.plots import emit_plots, plot_phase_diagram
from edswave.records import (
    OUTPUT_DIR_ENV, SCHEMA_VERSION, csv_text, fmt, run_record, series_table, write_csv,
)
from edswave.solver import StoppingPolicy, run
from edswave.sweep import (
    SweepRecord, SweepResult, excluded_large_eps, fit_power_law, run_sweep,
    runs_test_pvalue, verdict,
)

SWEEP_DOC = """\
model.k = 0
model.mu = 1
model.p = 1.8
run.T_max = 30
sweep.eps_values = [2, 1.2, 0.8, 0.5, 0.2]
"""


class TestConfig:
    def test_run_defaults(self):
        cfg = parse_config("model.eps = 0.2\n")
        assert isinstance(cfg, RunConfig)
        assert cfg.model == ModelParams(eps=0.2)
        assert cfg.stop.T_max == 50.0
        assert cfg.grid.dx == 1 / 64

    def test_values_and_comments(self):
        cfg = parse_config("# header\nmodel.N = 3   # dimension\nmodel.f_profile = \"bump4\"\n"
                           "run.track_functionals = false\ngrid.dx = 0.02\n")
        assert cfg.model.N == 3 and cfg.model.f_profile == "bump4"
        assert cfg.stop.track_functionals is False and cfg.grid.dx == 0.02

    def test_sweep_document(self):
        cfg = parse_config(SWEEP_DOC)
        assert isinstance(cfg, SweepConfig)
        assert cfg.eps_values == (2.0, 1.2, 0.8, 0.5, 0.2)
        assert cfg.stop.track_functionals is False

    @pytest.mark.parametrize("doc,line,msg", [
        ("model.k = 1.0\n", 1, r"k must lie in \[0,1\)"),
        ("model.eps = 0.1\nmodel.mu = -1\n", 2, "mu"),
        ("model.k = 0\nmodel.k = 0.5\n", 2, "set twice"),
        ("model.kk = 0\n", 1, "unknown key"),
        ("solver.k = 0\n", 1, "unknown section"),
        ("model.k\n", 1, "expected"),
        ("model.N = 1.5\n", 1, "integer"),
        ("model.p = \"two\"\n", 1, "number"),
        ("run.track_functionals = 1\n", 1, "bool"),
        ("model.p = 1.8\nrun.T_max = 0.5\n", 2, "T_max"),
    ])
    def test_rejects_with_line(self, doc, line, msg):
        with pytest.raises(ConfigError, match=msg) as err:
            parse_config(doc)
        assert str(err.value).startswith(f"line {line}:")

    @pytest.mark.parametrize("eps,msg", [
        ([0.2, 0.2, 0.1, 0.05, 0.02], "distinct"),
        ([0.2, 0.1, 0.05, 0.02], "at least 5"),
        ([0.2, 0.1, 0.05, 0.03, 0.025], "decade"),
        ([0.02, 0.03, 0.05, 0.1, 0.2], "decreasing"),
        ([0.2, 0.1, 0.05, 0.02, 0.0], "positive"),
    ])
    def test_sweep_eps_rules(self, eps, msg):
        doc = f"model.p = 1.8\nsweep.eps_values = {json.dumps(eps)}\n"
        with pytest.raises(ConfigError, match=msg) as err:
            parse_config(doc)
        assert str(err.value).startswith("line 2:")

    def test_sweep_rejects_supercritical(self):
        with pytest.raises(ConfigError, match="p_eds"):
            parse_config("model.p = 3.5\nsweep.eps_values = [1, 0.5, 0.3, 0.2, 0.1]\n")

    def test_every_known_key_accepted(self):
        assert set(KNOWN_KEYS) == {"model", "grid", "run", "sweep"}


class TestFitting:
    def test_exact_power_law(self):
        eps = np.geomspace(0.3, 0.01, 7)
        s, b, err = fit_power_law(eps, 4.2 * eps ** -1.7)
        assert abs(s + 1.7) < 1e-10 and abs(b - math.log(4.2)) < 1e-10 and err < 1e-10

    def test_doubling_shifts_intercept_only(self):
        eps = np.geomspace(0.3, 0.01, 7)
        T = 3.0 * eps ** -1.2 * (1 + 0.05 * np.sin(np.arange(7)))
        s1, b1, _ = fit_power_law(eps, T)
        s2, b2, _ = fit_power_law(eps, 2 * T)
        assert s2 == pytest.approx(s1, abs=1e-12) and b2 - b1 == pytest.approx(math.log(2), abs=1e-12)

    def test_needs_distinct_eps(self):
        with pytest.raises(ValueError):
            fit_power_law([0.1, 0.1], [1.0, 2.0])

    def test_verdict(self):
        eps = np.geomspace(0.2, 0.02, 6)
        assert verdict(eps, 2 * eps ** (-4 / 3), -4 / 3)[0] == "pass"
        assert verdict(eps, 2 * eps ** -1.0, -4 / 3)[0] == "fail"
        assert verdict(eps[:2], eps[:2] ** -1.0, -4 / 3)[0] == "inconclusive"

    def test_verdict_bound_factor(self):
        eps = np.geomspace(0.2, 0.02, 6)
        T = eps ** -2.0
        T[2] *= 3.0
        assert verdict(eps, T, -2.0)[0] == "fail"

    def test_runs_test(self):
        # 3 plus, 3 minus: P(runs <= 2) = 2 / C(6,3)
        assert runs_test_pvalue([1, 1, 1, -1, -1, -1]) == pytest.approx(2 / 20)
        assert runs_test_pvalue([1, -1, 1, -1, 1, -1]) == pytest.approx(1.0)
        assert runs_test_pvalue([1, 1, 1]) == 1.0

    def test_runs_test_exact_enumeration(self):
        from itertools import permutations
        seq = [1, 1, -1, -1, -1, 1, -1]
        runs = lambda s: 1 + sum(a != b for a, b in zip(s, s[1:]))
        perms = set(permutations(seq))
        want = sum(runs(p) <= runs(seq) for p in perms) / len(perms)
        assert runs_test_pvalue(seq) == pytest.approx(want)

    def test_exclusion_of_curved_head(self):
        eps = np.geomspace(1.0, 0.01, 9)
        T = eps ** -1.5
        T[:3] *= np.array([3.0, 1.8, 1.3])
        excluded, s = excluded_large_eps(eps, T)
        assert excluded and excluded[0] == 1.0
        assert abs(s + 1.5) < abs(fit_power_law(eps, T)[0] + 1.5)


def _result(records):
    return SweepResult(records, -1.3, 0.01, 1.0, -4 / 3, "pass", 2.0, 1.1)


class TestPlots:
    def test_empty_sweep(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plots(_result([]), tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_sweep_outputs(self, tmp_path):
        recs = [SweepRecord(e, "blowup", 2 * e ** (-4 / 3), 2.1 * e ** (-4 / 3), 1e3, 100)
                for e in np.geomspace(0.2, 0.02, 5)]
        paths = emit_plots(_result(recs), tmp_path)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["scaling.svg", "sweep.csv"]
        assert [p.name for p in paths] == ["scaling.svg", "sweep.csv"]
        first = (tmp_path / "scaling.svg").read_bytes()
        emit_plots(_result(recs), tmp_path)
        assert (tmp_path / "scaling.svg").read_bytes() == first

    def test_empty_series(self, tmp_path):
        from edswave.functionals import FunctionalSeries
        with pytest.raises(ValueError):
            emit_plots(FunctionalSeries(ModelParams()), tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_unknown_object(self, tmp_path):
        with pytest.raises(TypeError):
            emit_plots(object(), tmp_path)

    def test_phase_diagram(self, tmp_path):
        # the contour p_eds = 2 for N = 1 is the line mu = 2 - k
        for k in (0.0, 0.3, 0.6):
            assert p_eds(ExponentQuery(1, k, 2 - k)) == pytest.approx(2.0, rel=1e-14)
        path = plot_phase_diagram(1, 2.0, tmp_path / "phase.svg", n=31)
        assert path.exists() and path.read_bytes().startswith(b"<?xml")


class TestRecords:
    def test_fmt(self):
        assert fmt(0.1) == "0.1" and fmt(np.float64(1 / 3)) == repr(1 / 3)
        assert fmt(None) == "" and fmt(True) == "true" and fmt(np.int64(3)) == "3"

    def test_csv_round_trip(self):
        rows = [(0.1, 1 / 3, None), (2.0, float("nan"), 7)]
        text = csv_text(("a", "b", "c"), rows)
        assert text.splitlines()[1].split(",")[1] == repr(1 / 3)
        assert float(text.splitlines()[1].split(",")[1]) == 1 / 3

    def test_run_csv_is_byte_stable(self, tmp_path):
        mp = ModelParams(eps=0.3, p=1.8)
        paths = []
        for i in range(2):
            out, ser = run(mp, Grid.for_horizon(mp, 3.0, dx=1 / 32),
                           StoppingPolicy(T_max=3.0, sample_interval=0.25))
            paths.append(write_csv(tmp_path / f"{i}.csv", *series_table(ser)))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_run_record(self):
        mp = ModelParams(eps=0.3, p=1.8)
        g = Grid.for_horizon(mp, 2.0, dx=1 / 32)
        stop = StoppingPolicy(T_max=2.0)
        out, ser = run(mp, g, stop)
        rec = run_record(mp, g, stop, out, ser)
        assert rec["schema_version"] == SCHEMA_VERSION == 1
        assert rec["model"]["p"] == 1.8 and rec["n_samples"] == len(ser)


class TestSweep:
    def test_workers_do_not_change_result(self):
        cfg = parse_config(SWEEP_DOC)
        a, b = run_sweep(cfg, workers=1), run_sweep(cfg, workers=2)
        assert a.to_dict() == b.to_dict()
        assert len(a.blowups) == 5

    def test_inconclusive_when_few_blowups(self):
        cfg = parse_config(SWEEP_DOC.replace("run.T_max = 30", "run.T_max = 4"))
        res = run_sweep(cfg)
        assert res.verdict == "inconclusive" and res.notes


class TestCli:
    def test_exponents(self, capsys):
        assert cli.main(["exponents", "--N", "1", "--k", "0.5", "--mu", "0.5", "--p", "2"]) == 0
        out = capsys.readouterr().out
        assert "p_E" in out and "q0          n/a" in out and "subcritical" in out

    def test_exponents_grid(self, capsys):
        assert cli.main(["exponents", "--grid", "3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "k,mu,p_G,p_T,p_E,q0,q0_shifted,q1,tsutaya" and len(lines) == 10

    def test_solve_and_env_override(self, tmp_path, monkeypatch, capsys):
        doc = tmp_path / "run.cfg"
        doc.write_text("model.p = 1.8\nmodel.eps = 0.3\nrun.T_max = 20\nrun.sample_interval = 0.1\n"
                       "grid.dx = 0.03125\n")
        target = tmp_path / "env_out"
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(target))
        assert cli.main(["solve", str(doc), "--out", str(tmp_path / "ignored"), "--plots"]) == 0
        assert sorted(p.name for p in target.iterdir()) == ["functionals.svg", "run.csv", "run.json"]
        rec = json.loads((target / "run.json").read_text())
        assert rec["outcome"]["status"] == "blowup"
        assert rec["bounds"]["U_lower"]["passed"] and rec["bounds"]["V_above_H"]["passed"]
        assert "status blowup" in capsys.readouterr().out

    def test_solve_bad_config(self, tmp_path, capsys):
        doc = tmp_path / "bad.cfg"
        doc.write_text("model.k = 1.0\n")
        assert cli.main(["solve", str(doc)]) == 1
        assert "line 1:" in capsys.readouterr().err

    def test_sweep_exit_codes(self, tmp_path, capsys):
        doc = tmp_path / "sweep.cfg"
        doc.write_text(SWEEP_DOC)
        code = cli.main(["sweep", str(doc), "--out", str(tmp_path / "s")])
        res = json.loads((tmp_path / "s" / "sweep.json").read_text())
        assert code == {"pass": 0, "fail": 2}[res["verdict"]]
        assert (tmp_path / "s" / "scaling.svg").exists()
        doc.write_text(SWEEP_DOC.replace("run.T_max = 30", "run.T_max = 4"))
        assert cli.main(["sweep", str(doc), "--out", str(tmp_path / "t")]) == 3

    def test_certify(self, capsys):
        assert cli.main(["certify"]) == 0
        out = capsys.readouterr().out
        assert "tail_weight" in out and "FAIL" not in out
        assert cli.main(["certify", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True

    def test_specialfns(self, capsys):
        assert cli.main(["specialfns", "--t", "1", "2", "--x", "0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("t,phi_k,log_rho") and lines[3].startswith("r,log_phi")
        assert float(lines[4].split(",")[2]) == pytest.approx(2 * math.cosh(0.5), rel=1e-12)
