"""Acceptance suite: one test per shipping criterion, each printing a
single PASS/FAIL line with the measured quantity behind the verdict.

These run the library end to end, so a few take tens of seconds.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import cdist, pdist

import smdd
from smdd import (
    GpModel,
    Kernel,
    ReplicationPlan,
    SmddConfig,
    SmddState,
    camel_inner,
    fit_pca,
    generate_lhd,
    highdim_inner,
    optimize_mmlhd,
    phi_q,
    run_replication,
    select_num_pcs,
    standardize,
)
from smdd.cli import main as cli_main
from smdd.io import fmt


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert ok, detail


# ---------------------------------------------------------------- criterion 1


def test_criterion_01_output_distance_matches_monte_carlo():
    """Closed-form expected output distance vs 1e6-draw simulation."""
    start = time.time()
    cfg = SmddConfig(k=2, l=2, n_final=40, n_initial=20, seed=1)
    st = SmddState.initialize(cfg, inner=camel_inner)
    fs = st.fit_surrogates()
    gps = [fs.gps[col] for col in fs.active]
    sc = fs.score_matrix[:, list(fs.active)]
    rng = np.random.default_rng(42)
    candidates = rng.random((50, 2))

    worst = 0.0
    for x in candidates:
        stats = []
        for gp in gps:
            mean, var = gp.posterior(x)
            z = rng.normal(mean, math.sqrt(var), size=1_000_000)
            stats.append((z.mean(), np.mean(z * z)))
        for i in range(sc.shape[0]):
            d2 = 0.0
            for col, (m1, m2) in enumerate(stats):
                c = sc[i, col]
                d2 += m2 - 2.0 * c * m1 + c * c
            mc = math.sqrt(d2)
            exact = smdd.dist_h(x, i, gps, sc)
            worst = max(worst, abs(mc - exact) / exact)
    elapsed = time.time() - start
    _report(1, worst <= 5e-3 and elapsed < 60.0,
            f"worst relative gap {worst:.2e} over 50x20 pairs, {elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 2


def test_criterion_02_kriging_interpolates_and_matches_direct_inverse():
    """Near-exact interpolation plus agreement with dense-inverse algebra."""
    x = optimize_mmlhd(20, 2, seed=5, budget=5000).points
    y = camel_inner(x)[:, 0]
    tests = np.random.default_rng(7).random((100, 2))
    worst_interp = worst_var = worst_gap = 0.0

    for family, theta in (("gaussian", 5.0), ("matern", 1.0)):
        model = GpModel.build(x, y, Kernel(family, theta))
        mean, var = model.posterior(x)
        worst_interp = max(worst_interp, float(np.abs(mean - y).max()))
        worst_var = max(worst_var, float(var.max()) / model.sigma2_hat)

        # direct-inverse reference with hand-written kernels
        if family == "gaussian":
            corr = lambda a, b: np.exp(-theta * cdist(a, b, "sqeuclidean"))
        else:
            def corr(a, b, _t=theta):
                s = 2.0 * math.sqrt(2.5) / _t * cdist(a, b)
                return (1.0 + s + s * s / 3.0) * np.exp(-s)
        R = corr(x, x) + model.jitter * np.eye(len(y))
        Rinv = np.linalg.inv(R)
        ones = np.ones(len(y))
        beta = (ones @ Rinv @ y) / (ones @ Rinv @ ones)
        resid = y - beta
        sigma2 = (resid @ Rinv @ resid) / (len(y) - 1)
        r = corr(tests, x)
        mean_ref = beta + r @ Rinv @ resid
        var_ref = sigma2 * (1.0 - np.sum(r * (r @ Rinv), axis=1)
                            + (1.0 - r @ Rinv @ ones) ** 2 / (ones @ Rinv @ ones))
        mean_got, var_got = model.posterior(tests)
        scale = max(1.0, float(np.abs(mean_ref).max()))
        worst_gap = max(worst_gap,
                        float(np.abs(mean_got - mean_ref).max()) / scale,
                        float(np.abs(var_got - np.maximum(var_ref, 0.0)).max())
                        / max(sigma2, 1e-12))

    ok = worst_interp < 1e-6 and worst_var < 1e-6 and worst_gap < 1e-6
    _report(2, ok, f"interpolation gap {worst_interp:.1e}, variance ratio "
                   f"{worst_var:.1e}, direct-inverse gap {worst_gap:.1e}")


# ---------------------------------------------------------------- criterion 3


def test_criterion_03_pca_reconstruction_identity():
    """Full-rank scores reproduce the standardized matrix."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        ystar, _, _ = standardize(rng.standard_normal((20, 5)))
        m = fit_pca(ystar)
        full = ystar @ m.loadings
        back = full @ m.loadings.T
        worst = max(worst, float(np.abs(back - ystar).max()),
                    float(np.abs(m.loadings.T @ m.loadings - np.eye(5)).max()))
    _report(3, worst <= 1e-8, f"worst reconstruction gap {worst:.2e} "
                              f"over 100 random 20x5 matrices")


# ---------------------------------------------------------------- criterion 4


def test_criterion_04_first_component_share_on_camel():
    """First principal component share lands in [0.80, 0.90] for most
    20-run maximin starts, with two components kept there."""
    start = time.time()
    hits = 0
    kept_two = True
    fractions = []
    for rep in range(20):
        d = optimize_mmlhd(20, 2, seed=rep)
        ystar, _, _ = standardize(camel_inner(d.points))
        m = fit_pca(ystar)
        f1 = float(m.variance_fractions[0])
        fractions.append(f1)
        if 0.80 <= f1 <= 0.90:
            hits += 1
            kept_two &= select_num_pcs(m, 0.90) == 2
    elapsed = time.time() - start
    _report(4, hits >= 14 and kept_two and elapsed < 60.0,
            f"{hits}/20 in window, mean share {np.mean(fractions):.3f}, "
            f"two components kept in all hits: {kept_two}, {elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 5


def test_criterion_05_two_components_dominate_highdim():
    """First two components explain over 90 percent on the ten-output
    problem for nearly all 80-run starts."""
    start = time.time()
    hits = 0
    for rep in range(20):
        rng = np.random.default_rng(np.random.SeedSequence((5, rep)))
        d = optimize_mmlhd(80, 8, seed=rng)
        ystar, _, _ = standardize(highdim_inner(d.points))
        m = fit_pca(ystar)
        hits += float(m.variance_fractions[:2].sum()) > 0.90
    elapsed = time.time() - start
    _report(5, hits >= 18 and elapsed < 300.0,
            f"{hits}/20 replicates above 0.90, {elapsed:.0f}s")


# ------------------------------------------------------- criteria 6 and 7


@pytest.fixture(scope="module")
def camel_benchmark():
    plan = ReplicationPlan(problem="camel",
                           methods=("SMDD", "SMDD-Det", "MmLHD"),
                           initials=("ID1",), replicates=20, n_final=(40,),
                           base_seed=0, mpv_test_size=500)
    start = time.time()
    rows, trace = run_replication(plan)
    return plan, rows, trace, time.time() - start


def test_criterion_06_sequential_beats_space_filling_dispersion(camel_benchmark):
    """Mean output-space dispersion: SMDD above the one-shot baseline and
    not below its deterministic variant."""
    plan, rows, trace, elapsed = camel_benchmark
    mean_aid = {m: np.mean([r.aid_h for r in rows if r.method == m])
                for m in plan.methods}
    ok = (mean_aid["SMDD"] > mean_aid["MmLHD"]
          and mean_aid["SMDD"] >= mean_aid["SMDD-Det"]
          and elapsed < 1800.0)
    _report(6, ok, "mean output dispersion "
                   f"SMDD {mean_aid['SMDD']:.4f} vs MmLHD "
                   f"{mean_aid['MmLHD']:.4f} vs SMDD-Det "
                   f"{mean_aid['SMDD-Det']:.4f}, {elapsed:.0f}s")


def test_criterion_07_posterior_variance_shrinks(camel_benchmark):
    """Per-component mean posterior variance drops from the initial to the
    final size, and the stochastic variant ends no worse on average."""
    plan, rows, trace, _ = camel_benchmark
    drops = 0
    for rep in range(plan.replicates):
        seed = plan.base_seed + rep
        seq = [t for t in trace if t.method == "SMDD" and t.seed == seed]
        first = next(t.mpv for t in seq if t.n == 20)
        last = next(t.mpv for t in seq if t.n == 40)
        shared = min(len(first), len(last))
        pairs = [(a, b) for a, b in zip(first[:shared], last[:shared])
                 if math.isfinite(a) and math.isfinite(b)]
        drops += bool(pairs) and all(b < a for a, b in pairs)

    final_mean = {m: np.mean([np.nanmean(r.mpv) for r in rows if r.method == m])
                  for m in ("SMDD", "SMDD-Det")}
    ok = drops >= 18 and final_mean["SMDD"] <= final_mean["SMDD-Det"]
    _report(7, ok, f"variance dropped per component in {drops}/20 replicates; "
                   f"final mean {final_mean['SMDD']:.5f} (stochastic) vs "
                   f"{final_mean['SMDD-Det']:.5f} (deterministic)")


# ---------------------------------------------------------------- criterion 8


def test_criterion_08_selection_agrees_with_exhaustive_maximin():
    """The power-sum selection rule reproduces the exhaustive max-min pick
    on at least 95 of 100 fresh engine states with 200 candidates."""
    start = time.time()
    agree = 0
    for t in range(100):
        cfg = SmddConfig(k=2, l=2, n_final=60, n_initial=40,
                         candidate_multiplier=5.0, seed=t, budget=2000)
        assert cfg.n_candidates == 200
        st = SmddState.initialize(cfg, inner=camel_inner)
        fs = st.fit_surrogates()
        cands = st.candidates.copy()
        sc = fs.score_matrix
        best_val, best_idx = -math.inf, -1
        for c, x in enumerate(cands):
            total = np.zeros(sc.shape[0])
            for col in fs.active:
                mean, var = fs.gps[col].posterior(x)
                total += (mean - sc[:, col]) ** 2 + var
            dmin = math.sqrt(float(total.min()))
            if dmin > best_val:
                best_val, best_idx = dmin, c
        agree += np.array_equal(st.select_next(), cands[best_idx])
    elapsed = time.time() - start
    _report(8, agree >= 95, f"{agree}/100 states agree, {elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 9


def test_criterion_09_batch_and_ask_tell_runs_are_identical(tmp_path):
    """The one-shot runner and a full ask/tell cycle write byte-identical
    design files."""
    config = {"problem": "camel", "n_final": 40, "n_initial": 20, "seed": 0,
              "budget": 2000, "mpv_test_size": 0}
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))

    run_dir = tmp_path / "batch"
    assert cli_main(["run", "--config", str(cfg_path),
                     "--out-dir", str(run_dir)]) == 0

    state = tmp_path / "state.json"
    assert cli_main(["init", "--config", str(cfg_path),
                     "--state", str(state)]) == 0
    tell_dir = tmp_path / "asktell"
    for _ in range(20):
        st = SmddState.load(state)
        point = st.ask()
        text = ",".join(fmt(v) for v in point)
        values = ",".join(fmt(v) for v in camel_inner(point))
        assert cli_main(["tell", "--state", str(state), "--point", text,
                         "--values", values, "--out-dir", str(tell_dir)]) == 0

    same_design = (run_dir / "design.csv").read_bytes() == \
        (tell_dir / "design.csv").read_bytes()
    same_resp = (run_dir / "responses.csv").read_bytes() == \
        (tell_dir / "responses.csv").read_bytes()
    _report(9, same_design and same_resp,
            f"design bytes equal: {same_design}, "
            f"response bytes equal: {same_resp}")


# --------------------------------------------------------------- criterion 10


def test_criterion_10_annealer_beats_random_and_finds_small_optimum():
    """The annealed design improves on random Latin hypercubes every time,
    and on a 5x2 grid it reaches the exhaustive optimum."""
    wins = 0
    for trial in range(20):
        tuned = optimize_mmlhd(20, 2, seed=1000 + trial)
        tuned_phi = phi_q(pdist(tuned.points))
        rand_rng = np.random.default_rng(2000 + trial)
        rand_phis = [phi_q(pdist(generate_lhd(
            20, 2, seed=int(rand_rng.integers(1 << 31))).points))
            for _ in range(50)]
        wins += tuned_phi < float(np.median(rand_phis))

    # exhaustive reference: first column fixed, all second-column pairings
    levels = (np.arange(5) + 0.5) / 5.0
    best = math.inf
    for perm in itertools.permutations(range(5)):
        pts = np.column_stack([levels, levels[list(perm)]])
        best = min(best, phi_q(pdist(pts)))
    annealed = phi_q(pdist(optimize_mmlhd(5, 2, seed=0, budget=30000).points))
    gap = abs(annealed - best) / best
    _report(10, wins == 20 and gap <= 1e-9,
            f"beat the random median in {wins}/20 trials; "
            f"5x2 optimum gap {gap:.1e}")
