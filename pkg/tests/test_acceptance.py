"""Acceptance suite: one test per headline criterion, each printing a
PASS line with the measured values when it holds (an assertion failure
prints the offending numbers instead).

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import time

import numpy as np
import pytest

from subsetpriv import (
    chi2_sf,
    combined_power_study,
    dummy_wrap,
    em_mle,
    estimate_debias,
    fully_private_design,
    mi_report,
    mom_general,
    mom_uniform,
    non_private_report,
    one_step,
    paired_permutation_type_i,
    prediction_report,
    ranking_study,
    raw_contingency_pearson,
    sample_dataset,
    scaled_l2_benchmark,
    size_report,
    small_p_design,
    substream,
    uniform_design,
)
from subsetpriv.schema import Observations, mask_indicators

from test_chi2 import chi2_sf_oracle
from test_estimation import random_design

URN_W = [0.01, 0.1, 0.2, 0.69]
RACE_W = np.array([0.009551, 0.031909, 0.095943, 0.008323, 0.854274])
GENDER_INCOME = np.array([[9592, 1179], [15128, 6662]], dtype=float)
BENCH_W = np.array([0.1, 0.2, 0.3, 0.4])


def report(name: str, detail: str):
    print(f"[PASS] {name}: {detail}")


@pytest.fixture(scope="module")
def unif4():
    return uniform_design(4)


@pytest.fixture(scope="module")
def unif5():
    return uniform_design(5)


def test_urn_size_coverage(unif4):
    cond = unif4.induced()
    tau, _ = size_report(cond, URN_W)
    elapsed = min(_timed(lambda: size_report(cond, URN_W)) for _ in range(10))
    assert abs(tau - 0.684) <= 1e-3
    assert elapsed < 1e-3
    report("urn size coverage",
           f"coverage={tau:.6f} (target 0.684 +- 0.001), enumeration {elapsed*1e6:.0f}us")


def _timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def test_race_privacy_audit(unif5):
    start = time.perf_counter()
    cond = unif5.induced()
    non_private = non_private_report(RACE_W)
    tau, leak = size_report(cond, RACE_W)
    risk, _, blind = prediction_report(cond, RACE_W)
    elapsed = time.perf_counter() - start
    assert abs(non_private.size_leakage - 0.25) <= 0.02
    assert abs(non_private.size_leakage - 0.2598) <= 5e-4
    assert abs(leak - 0.15) <= 0.02
    assert abs(leak - 0.156) <= 1e-3
    assert abs(risk - 0.9) <= 0.05
    assert abs(blind - 0.854) <= 1e-3
    assert elapsed < 1.0
    report("race privacy audit",
           f"raw size leakage={non_private.size_leakage:.4f}, released={leak:.4f}, "
           f"prediction leakage={risk:.4f}, blind baseline={blind:.4f}, {elapsed:.3f}s")


def test_information_leakage_sanity(unif4):
    mi, cond_entropy = mi_report(unif4.induced(), [0.25] * 4)
    assert abs(mi - 1.0) <= 1e-9
    mi_full, _ = mi_report(fully_private_design(4), [0.25] * 4)
    assert mi_full == 0.0
    report("information leakage sanity",
           f"uniform design leaks {mi:.12f} bits, full release {mi_full} bits")


def test_estimator_asymptotics(unif4):
    start = time.perf_counter()
    bench = scaled_l2_benchmark(BENCH_W, unif4, n=1000, replications=500,
                                seed=7771, methods=("em", "mom"))
    elapsed = time.perf_counter() - start
    em_gap = abs(bench.mean("em") - bench.mle_trace)
    mom_gap = abs(bench.mean("mom") - bench.mom_trace)
    assert em_gap <= 3 * bench.stderr("em")
    assert mom_gap <= 3 * bench.stderr("mom")
    assert bench.mom_trace >= bench.mle_trace - 1e-12
    assert elapsed < 120
    report("estimator asymptotics",
           f"EM {bench.mean('em'):.3f} vs limit {bench.mle_trace:.3f} "
           f"({em_gap / bench.stderr('em'):.2f} SE); "
           f"MoM {bench.mean('mom'):.3f} vs limit {bench.mom_trace:.3f} "
           f"({mom_gap / bench.stderr('mom'):.2f} SE); {elapsed:.1f}s")


def test_closed_form_equivalence():
    # the two moment solvers agree whenever the empirical mean released
    # size matches its design value: identically at p=4, and on
    # exact-moment (population-weighted) data for every p
    rng = substream(2911)
    worst = 0.0
    for p in range(4, 11):
        design = uniform_design(p)
        cond = design.induced()
        w = rng.dirichlet(np.ones(p))
        weights = cond.subset_law(w) * 1e4
        obs = Observations(cond.masks, p, weights=weights)
        dev = float(np.abs(mom_uniform(obs).w_raw - mom_general(obs, cond).w_raw).max())
        worst = max(worst, dev)
    sampled = sample_dataset(BENCH_W, uniform_design(4), 20_000, seed=3001)
    dev4 = float(np.abs(mom_uniform(sampled).w_raw
                        - mom_general(sampled, uniform_design(4).induced()).w_raw).max())
    worst = max(worst, dev4)
    assert worst <= 1e-10
    report("closed-form equivalence", f"max coordinate deviation {worst:.2e} over p=4..10")


def test_one_step_efficiency(unif4):
    cond = unif4.induced()
    gaps = []
    for rep in range(100):
        obs = sample_dataset(BENCH_W, unif4, 10_000, substream(31337, rep))
        em = em_mle(obs)
        refined = one_step(obs, cond, mom_general(obs, cond))
        gaps.append(float(np.linalg.norm(refined.w_hat.w - em.w_hat.w)))
    mean_gap = float(np.mean(gaps))
    assert mean_gap <= 0.005
    report("one-step efficiency", f"mean ||one-step - EM||_2 = {mean_gap:.2e} over 100 runs")


def test_em_property_suite():
    # monotone log-likelihood on 1000 randomized instances
    rng = substream(6007)
    worst_drop = 0.0
    for _ in range(1000):
        p = int(rng.integers(4, 8))
        design = random_design(rng, p)
        w = rng.dirichlet(np.ones(p))
        obs = sample_dataset(w, design, int(rng.integers(5, 60)),
                             seed=int(rng.integers(2**32)))
        res = em_mle(obs)
        worst_drop = min(worst_drop, float(np.diff(res.ll_history).min()))
    assert worst_drop >= -1e-12

    # simplex scan at resolution 1e-3 never beats the EM optimum
    worst_gap = np.inf
    for rep in range(3):
        obs = sample_dataset(BENCH_W, uniform_design(4), int(10 + 10 * rep),
                             substream(5150, rep))
        res = em_mle(obs)
        grid_best = _best_grid_loglik(obs)
        worst_gap = min(worst_gap, res.log_likelihood - grid_best)
    assert worst_gap >= -1e-5
    report("EM property suite",
           f"worst log-likelihood drop {worst_drop:.1e} over 1000 instances; "
           f"EM beats the 1e-3 simplex grid by >= {worst_gap:.2e}")


def _best_grid_loglik(obs, resolution: int = 1000) -> float:
    masks, counts = obs.unique_counts()
    V = mask_indicators(masks, 4)
    R = resolution
    best = -np.inf
    for i in range(R + 1):
        rem = R - i
        lens = rem + 1 - np.arange(rem + 1)
        tri_j = np.repeat(np.arange(rem + 1), lens)
        offsets = np.concatenate([[0], np.cumsum(lens)[:-1]])
        tri_k = np.arange(tri_j.size) - offsets[tri_j]
        w0 = i / R
        w1 = tri_j / R
        w2 = tri_k / R
        w3 = 1.0 - w0 - w1 - w2
        ll = np.zeros(tri_j.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            for u in range(V.shape[0]):
                mass = V[u, 0] * w0 + V[u, 1] * w1 + V[u, 2] * w2 + V[u, 3] * w3
                ll += counts[u] * np.log(mass)
        with np.errstate(invalid="ignore"):
            value = float(np.nanmax(ll))
        best = max(best, value)
    return best


def test_high_dimension_trend():
    start = time.perf_counter()
    medians = []
    for p in (4, 6, 8, 10, 12):
        n = round((p * math.log(p)) ** 2)
        design = uniform_design(p)
        w = np.full(p, 1.0 / p)
        losses = [
            float(np.abs(mom_uniform(
                sample_dataset(w, design, n, substream((515, p), rep))).w_hat.w - w).sum())
            for rep in range(200)
        ]
        medians.append(float(np.median(losses)))
    elapsed = time.perf_counter() - start
    assert all(b <= a + 1e-12 for a, b in zip(medians, medians[1:]))
    assert elapsed < 300
    report("high-dimension trend",
           "median L1 losses " + ", ".join(f"{m:.3f}" for m in medians)
           + f" for p=4,6,8,10,12; {elapsed:.1f}s")


def test_gender_income_pipeline(unif4):
    start = time.perf_counter()
    raw = raw_contingency_pearson(GENDER_INCOME)
    assert raw.p_value < 1e-10

    W = GENDER_INCOME / GENDER_INCOME.sum()
    powers = combined_power_study(W, unif4, [500, 1000, 2000, 4000],
                                  replications=100, alpha=0.05, seed=99, method="mle")
    assert powers[4000] >= 0.7
    values = [powers[n] for n in (500, 1000, 2000, 4000)]
    assert all(b >= a for a, b in zip(values, values[1:]))

    margins_gender = [10771 / 32561, 21790 / 32561]
    margins_income = [24720 / 32561, 7841 / 32561]
    rate = paired_permutation_type_i(margins_gender, margins_income,
                                     small_p_design(2), small_p_design(2),
                                     n=2000, replications=200, b=199,
                                     alpha=0.05, seed=424)
    elapsed = time.perf_counter() - start
    assert 0.02 <= rate <= 0.10
    assert elapsed < 600
    report("gender-income testing",
           f"raw p={raw.p_value:.1e}; released-data power {values} for "
           f"n=500..4000; permutation type-I {rate:.3f}; {elapsed:.1f}s")


def test_ranking_of_tests(unif4):
    aucs = ranking_study(BENCH_W, BENCH_W, unif4, unif4, rho=0.05, n=1000,
                         replications=200, seed=2024)
    assert aucs["lrt-mle"] >= aucs["pearson"]
    assert aucs["lrt-mle"] >= aucs["bonferroni"]
    assert aucs["lrt-mom"] >= aucs["pearson"]
    assert aucs["lrt-mom"] >= aucs["bonferroni"]
    assert abs(aucs["lrt-mom"] - aucs["lrt-mle"]) <= 0.05
    report("test ranking",
           ", ".join(f"{k}={v:.3f}" for k, v in sorted(aucs.items())))


def test_chi_square_tail_accuracy():
    assert abs(chi2_sf(3.841, 1) - 0.05) <= 1e-4
    xs = [0.1, 0.5, 1.0, 2.0, 3.841, 5.0, 8.0, 15.0, 30.0, 60.0]
    dfs = [1, 2, 5, 12, 36]
    worst = max(abs(chi2_sf(x, df) - chi2_sf_oracle(x, df))
                for df in dfs for x in xs)
    assert worst <= 1e-9
    report("chi-square tail accuracy",
           f"sf(3.841,1)={chi2_sf(3.841, 1):.6f}; max |sf - quadrature| = {worst:.1e} "
           "on a 50-point grid")


def test_faithfulness_and_noninformativeness():
    rng = substream(8088)
    total = 0
    for block in range(10):
        p = int(rng.integers(4, 10))
        design = random_design(rng, p)
        w = rng.dirichlet(np.ones(p))
        obs, values = sample_dataset(w, design, 100_000,
                                     seed=int(rng.integers(2**32)), return_values=True)
        member = (obs.masks >> values.astype(np.uint64)) & np.uint64(1)
        assert int((member == 1).sum()) == len(obs)
        total += len(obs)
    assert total == 1_000_000

    worst = 0.0
    for p in (4, 5):
        cond = uniform_design(p).induced()
        w = substream(91, p).dirichlet(np.ones(p))
        ind = cond.indicator_matrix()
        masses = ind @ w
        for row, mass, mu in zip(ind, masses, cond.probs):
            for x in range(p):
                joint = w[x] * mu * row[x]
                posterior = joint / (mu * mass)
                expected = row[x] * w[x] / mass
                worst = max(worst, abs(posterior - expected))
    assert worst <= 1e-10
    report("faithfulness and non-informativeness",
           f"10^6 releases all contain the true value; posterior identity "
           f"holds to {worst:.1e} at p=4,5")


def test_dummy_coverage_floor(unif4):
    alpha = 0.2
    dummy = dummy_wrap(unif4, alpha)
    w = BENCH_W
    mixed = dummy.mixed_population(w)
    obs = dummy.sample_mixed_dataset(w, 100_000, seed=616)
    coverage = obs.indicator_matrix() @ mixed.w
    assert float(coverage.min()) >= alpha - 1e-12

    est = estimate_debias(obs, dummy)
    err = float(np.abs(est.w_hat.w - w).max())
    assert err <= 0.02
    report("dummy coverage floor",
           f"minimum released coverage {coverage.min():.4f} >= {alpha}; "
           f"debiased estimate within {err:.4f} of the population")
