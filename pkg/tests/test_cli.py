"""End-to-end tests for the command-line interface, run in process."""

import json

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from smdd import camel_inner, phi_q
from smdd.cli import main
from smdd.io import read_matrix_csv, fmt


def _write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _camel_config(tmp_path, **overrides):
    doc = {"problem": "camel", "n_final": 22, "n_initial": 20, "seed": 3,
           "budget": 200, "mpv_test_size": 0}
    doc.update(overrides)
    return _write_json(tmp_path / "config.json", doc)


class TestLhd:
    def test_prints_csv_to_stdout(self, capsys):
        assert main(["lhd", "--n", "5", "--k", "2", "--seed", "1"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x1,x2"
        assert len(lines) == 6
        pts = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        np.testing.assert_allclose(np.sort(pts[:, 0]), (np.arange(5) + 0.5) / 5)

    def test_writes_file_deterministically(self, tmp_path):
        out = tmp_path / "design.csv"
        assert main(["lhd", "--n", "6", "--k", "3", "--seed", "9",
                     "--out", str(out)]) == 0
        first = out.read_bytes()
        assert main(["lhd", "--n", "6", "--k", "3", "--seed", "9",
                     "--out", str(out)]) == 0
        assert out.read_bytes() == first
        assert read_matrix_csv(str(out), "x").shape == (6, 3)

    def test_maximin_improves_criterion(self, tmp_path):
        plain = tmp_path / "plain.csv"
        tuned = tmp_path / "tuned.csv"
        main(["lhd", "--n", "12", "--k", "2", "--seed", "4", "--out", str(plain)])
        main(["lhd", "--n", "12", "--k", "2", "--seed", "4", "--maximin",
              "--budget", "20000", "--out", str(tuned)])
        a = read_matrix_csv(str(plain), "x")
        b = read_matrix_csv(str(tuned), "x")
        assert phi_q(pdist(b)) < phi_q(pdist(a))

    def test_missing_argument_is_usage_error(self):
        assert main(["lhd", "--k", "2"]) == 2


class TestSlhd:
    def test_stdout_lists_slices(self, capsys):
        assert main(["slhd", "--t", "2", "--m", "3", "--k", "2",
                     "--seed", "0", "--budget", "0"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "slice,x1,x2"
        assert len(lines) == 7
        assert [ln.split(",")[0] for ln in lines[1:]] == list("000111")

    def test_writes_file(self, tmp_path):
        out = tmp_path / "slices.csv"
        assert main(["slhd", "--t", "3", "--m", "4", "--k", "2",
                     "--seed", "5", "--budget", "100", "--out", str(out)]) == 0
        assert out.exists()
        assert len(out.read_text().strip().splitlines()) == 13


class TestRun:
    def test_produces_output_files(self, tmp_path):
        cfg = _camel_config(tmp_path)
        out_dir = tmp_path / "results"
        assert main(["run", "--config", cfg, "--out-dir", str(out_dir)]) == 0
        design = read_matrix_csv(str(out_dir / "design.csv"), "x")
        responses = read_matrix_csv(str(out_dir / "responses.csv"), "y")
        assert design.shape == (22, 2)
        assert responses.shape == (22, 2)
        np.testing.assert_allclose(responses, camel_inner(design), rtol=1e-12)
        trace = (out_dir / "trace.csv").read_text().strip().splitlines()
        assert trace[0].startswith("iteration,")
        assert len(trace) == 3
        assert (out_dir / "metrics.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = _camel_config(tmp_path)
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["run", "--config", cfg, "--out-dir", str(a)]) == 0
        assert main(["run", "--config", cfg, "--out-dir", str(b)]) == 0
        assert (a / "design.csv").read_bytes() == (b / "design.csv").read_bytes()
        assert (a / "responses.csv").read_bytes() == (b / "responses.csv").read_bytes()

    def test_out_dir_from_environment(self, tmp_path, monkeypatch):
        cfg = _camel_config(tmp_path)
        env_dir = tmp_path / "envout"
        monkeypatch.setenv("SMDD_OUT_DIR", str(env_dir))
        assert main(["run", "--config", cfg]) == 0
        assert (env_dir / "design.csv").exists()

    def test_config_errors(self, tmp_path):
        assert main(["run", "--config",
                     _write_json(tmp_path / "c1.json",
                                 {"problem": "camel", "n_final": 22,
                                  "warp": 1})]) == 2
        assert main(["run", "--config",
                     _write_json(tmp_path / "c2.json",
                                 {"problem": "rosenbrock", "n_final": 22})]) == 2
        assert main(["run", "--config",
                     _write_json(tmp_path / "c3.json",
                                 {"problem": "camel", "n_final": 22,
                                  "k": 3})]) == 2
        assert main(["run", "--config",
                     _write_json(tmp_path / "c4.json",
                                 {"k": 2, "l": 2, "n_final": 22})]) == 2
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


class TestAskTell:
    def _init(self, tmp_path, **overrides):
        cfg = _camel_config(tmp_path, **overrides)
        state = tmp_path / "state.json"
        assert main(["init", "--config", cfg, "--state", str(state)]) == 0
        return state

    def _ask_point(self, state, capsys):
        assert main(["ask", "--state", str(state)]) == 0
        return capsys.readouterr().out.strip()

    def test_cycle_matches_run_output(self, tmp_path, capsys):
        cfg = _camel_config(tmp_path)
        run_dir = tmp_path / "run"
        assert main(["run", "--config", cfg, "--out-dir", str(run_dir)]) == 0

        state = self._init(tmp_path)
        tell_dir = tmp_path / "tell"
        for _ in range(2):
            text = self._ask_point(state, capsys)
            point = np.array([float(v) for v in text.split(",")])
            values = camel_inner(point)
            assert main(["tell", "--state", str(state), "--point", text,
                         "--values", ",".join(fmt(v) for v in values),
                         "--out-dir", str(tell_dir)]) == 0
        assert (tell_dir / "design.csv").read_bytes() == \
            (run_dir / "design.csv").read_bytes()
        assert (tell_dir / "responses.csv").read_bytes() == \
            (run_dir / "responses.csv").read_bytes()

    def test_ask_is_stable_between_calls(self, tmp_path, capsys):
        state = self._init(tmp_path)
        assert self._ask_point(state, capsys) == self._ask_point(state, capsys)

    def test_finished_design_refuses_ask(self, tmp_path, capsys):
        state = self._init(tmp_path, n_final=21)
        text = self._ask_point(state, capsys)
        point = np.array([float(v) for v in text.split(",")])
        assert main(["tell", "--state", str(state), "--point", text,
                     "--values", ",".join(fmt(v) for v in camel_inner(point)),
                     "--out-dir", str(tmp_path / "out")]) == 0
        assert main(["ask", "--state", str(state)]) == 4

    def test_wrong_point_rejected(self, tmp_path, capsys):
        state = self._init(tmp_path)
        self._ask_point(state, capsys)
        assert main(["tell", "--state", str(state), "--point", "0.111,0.222",
                     "--values", "1.0,2.0"]) == 4

    def test_missing_state_file(self, tmp_path):
        assert main(["ask", "--state", str(tmp_path / "nope.json")]) == 3

    def test_corrupt_state_file(self, tmp_path):
        state = tmp_path / "state.json"
        state.write_text("{not json")
        assert main(["ask", "--state", str(state)]) == 3

    def test_external_problem_needs_initial_data(self, tmp_path):
        cfg = _write_json(tmp_path / "ext.json",
                          {"k": 2, "l": 2, "n_final": 22, "n_initial": 20,
                           "seed": 3, "budget": 200})
        state = tmp_path / "state.json"
        assert main(["init", "--config", cfg, "--state", str(state)]) == 2

    def test_external_problem_with_initial_data(self, tmp_path, capsys):
        ref = self._init(tmp_path)
        run_dir = tmp_path / "seeded"
        main(["run", "--config", _camel_config(tmp_path),
              "--out-dir", str(run_dir)])
        design = read_matrix_csv(str(run_dir / "design.csv"), "x")[:20]
        responses = read_matrix_csv(str(run_dir / "responses.csv"), "y")[:20]
        from smdd.io import write_design_csv, write_responses_csv
        write_design_csv(str(tmp_path / "d0.csv"), design)
        write_responses_csv(str(tmp_path / "r0.csv"), responses)
        cfg = _write_json(tmp_path / "ext.json",
                          {"k": 2, "l": 2, "n_final": 22, "n_initial": 20,
                           "seed": 3, "budget": 200})
        state = tmp_path / "ext_state.json"
        assert main(["init", "--config", cfg, "--state", str(state),
                     "--design", str(tmp_path / "d0.csv"),
                     "--responses", str(tmp_path / "r0.csv")]) == 0
        text = self._ask_point(state, capsys)
        assert len(text.split(",")) == 2


class TestMetrics:
    def test_appends_rows(self, tmp_path):
        run_dir = tmp_path / "run"
        main(["run", "--config", _camel_config(tmp_path),
              "--out-dir", str(run_dir)])
        out = tmp_path / "metrics.csv"
        args = ["metrics", "--design", str(run_dir / "design.csv"),
                "--responses", str(run_dir / "responses.csv"),
                "--out", str(out)]
        assert main(args + ["--label", "first"]) == 0
        assert main(args + ["--label", "second"]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("method,")
        assert len(lines) == 3
        assert lines[1].startswith("first,")
        assert lines[2].startswith("second,")

    def test_row_mismatch_rejected(self, tmp_path):
        run_dir = tmp_path / "run"
        main(["run", "--config", _camel_config(tmp_path),
              "--out-dir", str(run_dir)])
        from smdd.io import write_responses_csv
        short = tmp_path / "short.csv"
        write_responses_csv(str(short), np.ones((3, 2)))
        assert main(["metrics", "--design", str(run_dir / "design.csv"),
                     "--responses", str(short),
                     "--out", str(tmp_path / "m.csv")]) == 2


class TestBench:
    def test_small_plan(self, tmp_path):
        plan = _write_json(tmp_path / "plan.json",
                           {"problem": "camel", "methods": ["SMDD"],
                            "initials": ["ID1"], "replicates": 1,
                            "n_final": [21], "n_initial": 20, "budget": 100,
                            "mpv_test_size": 20})
        out = tmp_path / "bench.csv"
        trace = tmp_path / "trace.csv"
        assert main(["bench", "--plan", plan, "--out", str(out),
                     "--mpv-trace", str(trace)]) == 0
        rows = out.read_text().strip().splitlines()
        assert len(rows) == 2
        trace_rows = trace.read_text().strip().splitlines()
        assert len(trace_rows) == 3

    def test_unknown_plan_key_rejected(self, tmp_path):
        plan = _write_json(tmp_path / "plan.json",
                           {"problem": "camel", "n_reps": 3})
        assert main(["bench", "--plan", plan,
                     "--out", str(tmp_path / "b.csv")]) == 2
