"""Command-line front end.

Exit codes: 0 on success, 2 for usage/configuration problems, 3 for a corrupt
or unreadable state file, 4 for ask/tell protocol violations (including a
state file locked by another process).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np
from filelock import FileLock, Timeout

from . import bench as bench_mod
from . import io as io_mod
from . import pca
from .design import DEFAULT_Q, LEVEL_STYLES, MIDPOINT, generate_lhd, generate_slhd, \
    optimize_mmlhd
from .engine import SmddConfig, SmddState, VARIANT_DETERMINISTIC
from .errors import DesignComplete, ProtocolError, SmddError, StateFileError
from .gp import fit_gp
from .metrics import aid as aid_metric
from .metrics import mpv as mpv_metric

_ENGINE_KEYS = {f.name for f in dataclasses.fields(SmddConfig)}
_EXTRA_KEYS = {"problem", "out_dir", "mpv_test_size"}

OUT_DIR_ENV = "SMDD_OUT_DIR"


def _fail(message: str) -> "_CliError":
    return _CliError(message)


class _CliError(Exception):
    """Usage or configuration problem; maps to exit code 2."""


class _LockedError(Exception):
    """State file is in use by another process; maps to exit code 4."""


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise _fail(f"file not found: {path}") from None
    except (OSError, ValueError) as err:
        raise _fail(f"cannot read JSON file {path}: {err}") from None
    if not isinstance(doc, dict):
        raise _fail(f"{path}: expected a JSON object")
    return doc


def _load_run_config(path):
    """Split a config file into engine settings and CLI extras."""
    doc = _read_json(path)
    unknown = set(doc) - _ENGINE_KEYS - _EXTRA_KEYS
    if unknown:
        raise _fail(f"unknown config keys: {sorted(unknown)}")
    problem_name = doc.get("problem", "external")
    extras = {
        "problem": problem_name,
        "out_dir": doc.get("out_dir"),
        "mpv_test_size": int(doc.get("mpv_test_size", bench_mod.MPV_TEST_SIZE)),
    }
    engine_doc = {k: v for k, v in doc.items() if k in _ENGINE_KEYS}
    problem = None
    if problem_name != "external":
        problem = bench_mod.PROBLEMS.get(problem_name)
        if problem is None:
            raise _fail(f"unknown problem {problem_name!r}; "
                        f"choose from {sorted(bench_mod.PROBLEMS)} or 'external'")
        engine_doc.setdefault("k", problem.k)
        engine_doc.setdefault("l", problem.l)
        if engine_doc["k"] != problem.k or engine_doc["l"] != problem.l:
            raise _fail(f"k/l in config do not match problem {problem_name!r}")
    if "k" not in engine_doc or "l" not in engine_doc or "n_final" not in engine_doc:
        raise _fail("config must define k, l, and n_final")
    config = SmddConfig.from_dict(engine_doc)
    return config, problem, extras


def _out_dir(args_dir, extras=None) -> str:
    if args_dir:
        return args_dir
    if extras and extras.get("out_dir"):
        return extras["out_dir"]
    return os.environ.get(OUT_DIR_ENV, ".")


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.asarray([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise _fail(f"cannot parse float list: {text!r}") from None


def _locked(path):
    lock = FileLock(os.fspath(path) + ".lock")
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise _LockedError(f"state file {path} is in use by another process") from None
    return lock


def _method_label(config: SmddConfig) -> str:
    return (bench_mod.METHOD_SMDD_DET
            if config.distance_variant == VARIANT_DETERMINISTIC
            else bench_mod.METHOD_SMDD)


def _final_metrics(state: SmddState, mpv_test_size: int):
    fs = state.fit_surrogates()
    aid_x = aid_metric(state.x)
    score_matrix, _, _ = pca.realized_scores(state.y, state.config.pc_threshold)
    aid_h = aid_metric(score_matrix)
    mpv_values = []
    if mpv_test_size > 0:
        test = optimize_mmlhd(
            mpv_test_size, state.config.k, q=state.config.q,
            budget=state.config.budget,
            seed=np.random.default_rng(
                np.random.SeedSequence((state.config.seed, 90))),
        ).points
        mpv_values = [mpv_metric(g, test) for g in fs.gps if g is not None]
    return aid_x, aid_h, mpv_values


def _write_final_csvs(state: SmddState, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    io_mod.write_design_csv(os.path.join(directory, "design.csv"), state.x)
    io_mod.write_responses_csv(os.path.join(directory, "responses.csv"), state.y)


# ----------------------------------------------------------------- commands


def cmd_lhd(args) -> int:
    if args.maximin:
        design = optimize_mmlhd(args.n, args.k, q=args.q, budget=args.budget,
                                seed=args.seed, style=args.style)
    else:
        design = generate_lhd(args.n, args.k, style=args.style, seed=args.seed)
    if args.out:
        io_mod.write_design_csv(args.out, design.points)
    else:
        header = ",".join(f"x{j + 1}" for j in range(design.k))
        print(header)
        for row in design.points:
            print(",".join(io_mod.fmt(v) for v in row))
    return 0


def cmd_slhd(args) -> int:
    sliced = generate_slhd(args.t, args.m, args.k, q=args.q, budget=args.budget,
                           seed=args.seed, style=args.style)
    if args.out:
        io_mod.write_slices_csv(args.out, sliced)
    else:
        print("slice," + ",".join(f"x{j + 1}" for j in range(sliced.k)))
        for idx, sl in enumerate(sliced.slices):
            for row in sl.points:
                print(f"{idx}," + ",".join(io_mod.fmt(v) for v in row))
    return 0


def cmd_init(args) -> int:
    config, problem, extras = _load_run_config(args.config)
    design = responses = None
    if args.design:
        design = io_mod.read_matrix_csv(args.design, "x")
    if args.responses:
        responses = io_mod.read_matrix_csv(args.responses, "y")
    inner = problem.inner_point if problem is not None else None
    if inner is None and (design is None or responses is None):
        raise _fail("external problems need --design and --responses at init")
    lock = _locked(args.state)
    try:
        state = SmddState.initialize(config, inner=inner, design=design,
                                     responses=responses)
        state.save(args.state)
    finally:
        lock.release()
    return 0


def cmd_run(args) -> int:
    config, problem, extras = _load_run_config(args.config)
    if problem is None:
        raise _fail("run requires a built-in problem; use init/ask/tell for "
                    "external simulators")
    out_dir = _out_dir(args.out_dir, extras)
    os.makedirs(out_dir, exist_ok=True)
    state = SmddState.initialize(config, inner=problem.inner_point)
    trace = state.run(problem.inner_point)
    _write_final_csvs(state, out_dir)
    io_mod.write_trace_csv(os.path.join(out_dir, "trace.csv"), trace, config.k)
    aid_x, aid_h, mpv_values = _final_metrics(state, extras["mpv_test_size"])
    io_mod.append_metrics_csv(os.path.join(out_dir, "metrics.csv"),
                              _method_label(config), config.seed, state.n,
                              aid_x, aid_h, mpv_values)
    return 0


def cmd_ask(args) -> int:
    state = SmddState.load(args.state)
    point = state.ask()
    print(",".join(io_mod.fmt(v) for v in point))
    return 0


def cmd_tell(args) -> int:
    point = _parse_floats(args.point)
    values = _parse_floats(args.values)
    lock = _locked(args.state)
    try:
        state = SmddState.load(args.state)
        state.ask()
        state.tell(point, values)
        state.save(args.state)
        if state.finished:
            directory = args.out_dir or os.path.dirname(os.path.abspath(args.state))
            _write_final_csvs(state, directory)
    finally:
        lock.release()
    return 0


def cmd_metrics(args) -> int:
    design = io_mod.read_matrix_csv(args.design, "x")
    responses = io_mod.read_matrix_csv(args.responses, "y")
    if design.shape[0] != responses.shape[0]:
        raise _fail("design and responses must have the same number of rows")
    aid_x = aid_metric(design)
    score_matrix, _, _ = pca.realized_scores(responses, args.pc_threshold)
    aid_h = aid_metric(score_matrix)
    mpv_values = []
    if args.test_size > 0:
        test = optimize_mmlhd(
            args.test_size, design.shape[1],
            seed=np.random.default_rng(np.random.SeedSequence((args.seed, 90))),
        ).points
        for col in range(score_matrix.shape[1]):
            model = fit_gp(design, score_matrix[:, col])
            mpv_values.append(mpv_metric(model, test))
    io_mod.append_metrics_csv(args.out, args.label, args.seed, design.shape[0],
                              aid_x, aid_h, mpv_values)
    return 0


def cmd_bench(args) -> int:
    doc = _read_json(args.plan)
    known = {f.name for f in dataclasses.fields(bench_mod.ReplicationPlan)}
    unknown = set(doc) - known
    if unknown:
        raise _fail(f"unknown plan keys: {sorted(unknown)}")
    try:
        plan = bench_mod.ReplicationPlan(**doc)
    except TypeError as err:
        raise _fail(f"bad plan: {err}") from None
    rows, trace = bench_mod.run_replication(plan)
    io_mod.write_bench_csv(args.out, rows)
    if args.mpv_trace:
        io_mod.write_mpv_trace_csv(args.mpv_trace, trace)
    return 0


# -------------------------------------------------------------------- parser


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smdd",
        description="Sequential mixed-distance designs for two-layer simulators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lhd", help="generate a (maximin) Latin hypercube design")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--maximin", action="store_true")
    p.add_argument("--q", type=float, default=DEFAULT_Q)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--style", choices=LEVEL_STYLES, default=MIDPOINT)
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.set_defaults(func=cmd_lhd)

    p = sub.add_parser("slhd", help="generate a sliced Latin hypercube candidate set")
    p.add_argument("--t", type=int, required=True, help="number of slices")
    p.add_argument("--m", type=int, required=True, help="runs per slice")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--q", type=float, default=DEFAULT_Q)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--style", choices=LEVEL_STYLES, default=MIDPOINT)
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.set_defaults(func=cmd_slhd)

    p = sub.add_parser("run", help="run a full sequential design on a built-in problem")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("init", help="create a state file for an ask/tell run")
    p.add_argument("--config", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--design", default=None, help="initial design CSV")
    p.add_argument("--responses", default=None, help="initial responses CSV")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("ask", help="print the next point to evaluate")
    p.add_argument("--state", required=True)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("tell", help="record the response for the asked point")
    p.add_argument("--state", required=True)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--values", required=True, help="comma-separated responses")
    p.add_argument("--out-dir", default=None,
                   help="where design/responses CSVs land once the run finishes")
    p.set_defaults(func=cmd_tell)

    p = sub.add_parser("metrics", help="summarize a finished design")
    p.add_argument("--design", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--label", default="design")
    p.add_argument("--pc-threshold", type=float, default=0.90)
    p.add_argument("--test-size", type=int, default=0,
                   help="mean-posterior-variance test points (0 skips)")
    _add_seed(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="run a replication plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--mpv-trace", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except StateFileError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ProtocolError, DesignComplete, _LockedError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except (_CliError, SmddError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
