import csv
import json
from pathlib import Path

import pytest

from vrpsd.cli import main
from vrpsd.instance import Instance


def run(argv):
    return main(argv)


class TestGen:
    def test_single_reproducible(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(["gen", "--seed", "5", "--n", "4", "--variability", "med",
                    "--f", "1.6", "--out", str(a)]) == 0
        assert run(["gen", "--seed", "5", "--n", "4", "--variability", "med",
                    "--f", "1.6", "--out", str(b)]) == 0
        assert a.read_text() == b.read_text()
        inst = Instance.from_json(a.read_text())
        assert inst.n_customers == 4

    def test_invalid_variability_usage_error(self, tmp_path):
        with pytest.raises(SystemExit):
            run(["gen", "--variability", "wild", "--out", str(tmp_path / "x.json")])


class TestEval:
    def test_dominance_columns(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "3", "--n", "6", "--variability", "med",
             "--f", "1.9", "--out", str(inst_path)])
        out = tmp_path / "eval.csv"
        assert run(["eval", "--instance", str(inst_path), "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 1
        row = rows[0]
        assert float(row["switch_vs_or_pct"]) >= -1e-9
        assert float(row["dtd_vs_or_pct"]) <= 1e-9
        assert float(row["switch"]) <= float(row["or"]) + 1e-6 * float(row["or"])

    def test_explicit_route(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "4", "--n", "4", "--variability", "low",
             "--f", "1.6", "--out", str(inst_path)])
        out = tmp_path / "eval.csv"
        assert run(["eval", "--instance", str(inst_path), "--route", "2,1,4,3",
                    "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert rows[0]["route"] == "2-1-4-3"


class TestSimulate:
    def test_zero_scenarios_usage_error(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "3", "--n", "4", "--variability", "med",
             "--f", "1.6", "--out", str(inst_path)])
        assert run(["simulate", "--instance", str(inst_path),
                    "--scenarios", "0"]) == 1

    def test_outputs_written(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "3", "--n", "5", "--variability", "med",
             "--f", "1.9", "--out", str(inst_path)])
        out = tmp_path / "sim"
        assert run(["simulate", "--instance", str(inst_path), "--policy", "switch",
                    "--scenarios", "200", "--seed", "9", "--out", str(out)]) == 0
        summary = (tmp_path / "sim.summary.csv").read_text()
        assert "mean_cost" in summary
        arcs = list(csv.reader((tmp_path / "sim.arcs.csv").open()))
        assert len(arcs) == 7  # header + depot + 5 customers
        meta = json.loads((tmp_path / "sim.meta.json").read_text())
        assert "dp_expected_cost" in meta
        assert meta["config"]["seed"] == 9


class TestSolve:
    def test_solve_small_and_report(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "6", "--n", "5", "--variability", "med",
             "--f", "1.6", "--out", str(inst_path)])
        out = tmp_path / "run.json"
        csv_path = tmp_path / "runs.csv"
        code = run(["solve", "--instance", str(inst_path), "--time-limit", "120",
                    "--out", str(out), "--csv", str(csv_path)])
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["status"] == "optimal"
        assert rep["best"] is not None
        assert rep["config"]["bounds"] == "all"
        rows = csv_path.read_text().splitlines()
        assert rows[0].startswith("instance,")
        assert len(rows) == 2

    def test_bounds_toggle_does_not_change_optimum(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "7", "--n", "5", "--variability", "med",
             "--f", "1.6", "--out", str(inst_path)])
        best = {}
        for b in ("all", "none"):
            out = tmp_path / f"{b}.json"
            assert run(["solve", "--instance", str(inst_path), "--bounds", b,
                        "--time-limit", "120", "--out", str(out)]) == 0
            best[b] = json.loads(out.read_text())["best"]
        assert best["all"] == pytest.approx(best["none"], abs=1e-6)

    def test_tiny_mem_cap_exit_code(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "8", "--n", "7", "--variability", "med",
             "--f", "2.5", "--out", str(inst_path)])
        code = run(["solve", "--instance", str(inst_path),
                    "--mem-limit", "0.0000001", "--time-limit", "60"])
        assert code == 3  # lower bound unavailable

    def test_report_merge(self, tmp_path):
        inst_path = tmp_path / "i.json"
        run(["gen", "--seed", "9", "--n", "4", "--variability", "low",
             "--f", "1.6", "--out", str(inst_path)])
        reports = []
        for k in range(2):
            out = tmp_path / f"r{k}.json"
            run(["solve", "--instance", str(inst_path), "--time-limit", "60",
                 "--out", str(out)])
            reports.append(str(out))
        merged = tmp_path / "merged.csv"
        assert run(["report-merge", *reports, "--out", str(merged)]) == 0
        lines = merged.read_text().splitlines()
        assert len(lines) == 3


class TestConfigFile:
    def test_flags_win_over_file(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("seed=11\nn=4\nvariability=low\nf=1.6\n")
        out = tmp_path / "i.json"
        assert run(["gen", "--config", str(cfg), "--n", "5",
                    "--out", str(out)]) == 0
        inst = Instance.from_json(out.read_text())
        assert inst.n_customers == 5          # flag wins
        assert inst.demands[1].kind == "binomial"  # file value applied