"""Independence testing between two variables released as subset pairs.

The released pair (A, B) is independent exactly when the underlying
pair (X, Y) is, so tests operate on the contingency table of released
subsets over the two design supports. Four tests are provided: a
Pearson chi-square over the released table, a likelihood-ratio test
with either maximum-likelihood or moment plug-ins, and a per-coordinate
2x2 Pearson scan with Bonferroni correction. A permutation calibration
(shuffling one stream against the other) replaces the asymptotic
reference when cell counts are small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chi2 import chi2_sf
from .design import (
    ConditionalDesign,
    IndependentDesign,
    release_subsets,
    sample_dataset,
    substream,
)
from .errors import DegenerateTable, IdentifiabilityViolation
from .estimation import (
    check_identifiability,
    em_mle,
    mom_general,
    moment_matrix,
    project_to_simplex,
)
from .schema import Distribution, Observations, as_observations, as_prob_vector, mask_indicators

MASS_FLOOR = 1e-12
EXPECTED_CELL_WARN = 5.0


@dataclass(frozen=True)
class PairDataset:
    """Released subset pairs plus the two designs that produced them."""

    masks_a: np.ndarray
    masks_b: np.ndarray
    design_a: ConditionalDesign
    design_b: ConditionalDesign

    def __post_init__(self):
        object.__setattr__(self, "masks_a", np.asarray(self.masks_a, dtype=np.uint64))
        object.__setattr__(self, "masks_b", np.asarray(self.masks_b, dtype=np.uint64))
        if self.masks_a.shape != self.masks_b.shape:
            raise ValueError("the two streams must have equal length")

    @property
    def n(self) -> int:
        return int(self.masks_a.size)

    def permuted(self, perm: np.ndarray) -> "PairDataset":
        return PairDataset(self.masks_a[perm], self.masks_b, self.design_a, self.design_b)

    def stream_a(self) -> Observations:
        return Observations(self.masks_a, self.design_a.p)

    def stream_b(self) -> Observations:
        return Observations(self.masks_b, self.design_b.p)


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of released pairs over the cross product of supports."""

    counts: np.ndarray                  # (s, r) integer counts
    design_a: ConditionalDesign
    design_b: ConditionalDesign

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def marginal_a(self) -> Observations:
        return Observations(self.design_a.masks, self.design_a.p,
                            weights=self.counts.sum(axis=1).astype(float))

    def marginal_b(self) -> Observations:
        return Observations(self.design_b.masks, self.design_b.p,
                            weights=self.counts.sum(axis=0).astype(float))


@dataclass
class TestResult:
    statistic: float
    df: int
    p_value: float
    method: str
    calibration: str = "asymptotic"
    warnings: tuple[str, ...] = ()


def _support_index(masks: np.ndarray, support: np.ndarray, what: str) -> np.ndarray:
    idx = np.searchsorted(support, masks)
    idx = np.minimum(idx, support.size - 1)
    if masks.size and not np.array_equal(support[idx], masks):
        raise ValueError(f"a released subset is outside the {what} design support")
    return idx


def build_table(pairs: PairDataset) -> ContingencyTable:
    """Exact pair counts; unobserved support cells are present as zeros."""
    sa, sb = pairs.design_a.masks, pairs.design_b.masks
    ia = _support_index(pairs.masks_a, sa, "first")
    ib = _support_index(pairs.masks_b, sb, "second")
    flat = np.bincount(ia * sb.size + ib, minlength=sa.size * sb.size)
    return ContingencyTable(flat.reshape(sa.size, sb.size), pairs.design_a, pairs.design_b)


# ---------------------------------------------------------------------------
# joint estimation from the released table


@dataclass
class JointEstimate:
    W: np.ndarray                      # projected joint, (p, q)
    W_raw: np.ndarray
    w_x: Distribution
    w_y: Distribution
    method: str
    iterations: int = 0


def _require_identifiable(design: ConditionalDesign, name: str):
    diag = check_identifiability(design)
    if not diag.ok:
        raise IdentifiabilityViolation(f"{name} design is not identifiable",
                                       diagnosis=diag)


def _joint_em(table: ContingencyTable, tol: float = 1e-10,
              max_iter: int = 10_000) -> tuple[np.ndarray, int]:
    va = table.design_a.indicator_matrix()
    vb = table.design_b.indicator_matrix()
    counts = table.counts.astype(float)
    n = counts.sum()
    p, q = va.shape[1], vb.shape[1]
    W = np.full((p, q), 1.0 / (p * q))
    with np.errstate(divide="ignore"):
        ll_old = float(np.sum(np.where(counts > 0,
                                       counts * np.log(np.maximum(va @ W @ vb.T, 1e-320)),
                                       0.0)))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        masses = va @ W @ vb.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(counts > 0, counts / masses, 0.0)
        W = W * (va.T @ ratio @ vb) / n
        with np.errstate(divide="ignore"):
            ll = float(np.sum(np.where(counts > 0,
                                       counts * np.log(np.maximum(va @ W @ vb.T, 1e-320)),
                                       0.0)))
        if abs(ll - ll_old) <= tol * (abs(ll_old) + 1e-12):
            break
        ll_old = ll
    return W, iterations


def estimate_joint(pairs: PairDataset | ContingencyTable,
                   method: str = "mle") -> JointEstimate:
    """Estimate the joint and marginal distributions of (X, Y).

    ``mle`` runs EM over the released table, treating the pair as one
    combined variable with rectangle subsets; ``mom`` solves the
    pair-membership moment relation ``Gamma = Q_A W Q_B``. Marginals
    come from the per-stream estimators of the same family.
    """
    table = pairs if isinstance(pairs, ContingencyTable) else build_table(pairs)
    _require_identifiable(table.design_a, "first")
    _require_identifiable(table.design_b, "second")
    if method == "mle":
        W_raw, iters = _joint_em(table)
        w_x = em_mle(table.marginal_a()).w_hat
        w_y = em_mle(table.marginal_b()).w_hat
    elif method == "mom":
        va = table.design_a.indicator_matrix()
        vb = table.design_b.indicator_matrix()
        n = table.n
        if n == 0:
            raise DegenerateTable("cannot estimate from an empty table")
        gamma_pair = va.T @ table.counts @ vb / n
        qa = moment_matrix(table.design_a)
        qb = moment_matrix(table.design_b)
        W_raw = np.linalg.solve(qa, gamma_pair) @ np.linalg.inv(qb)
        iters = 0
        w_x = mom_general(table.marginal_a(), table.design_a).w_hat
        w_y = mom_general(table.marginal_b(), table.design_b).w_hat
    else:
        raise ValueError(f"unknown joint method {method!r}")
    W = project_to_simplex(W_raw.ravel()).reshape(W_raw.shape)
    return JointEstimate(W=W, W_raw=W_raw, w_x=w_x, w_y=w_y,
                         method=method, iterations=iters)


# ---------------------------------------------------------------------------
# tests on the released table


def pearson_test(table: ContingencyTable, w_x=None, w_y=None,
                 method: str = "mom") -> TestResult:
    """Pearson chi-square over released cells against product-form expecteds.

    Expected counts are ``n * P(A=a) * P(B=b)`` with subset laws plugged
    in from the marginal estimates. The asymptotic reference uses
    ``s * r`` degrees of freedom; a warning recommends permutation
    calibration whenever an expected cell drops below 5.
    """
    n = table.n
    if n == 0:
        raise DegenerateTable("empty contingency table")
    if w_x is None:
        w_x = (em_mle(table.marginal_a()).w_hat if method == "mle"
               else mom_general(table.marginal_a(), table.design_a).w_hat)
    if w_y is None:
        w_y = (em_mle(table.marginal_b()).w_hat if method == "mle"
               else mom_general(table.marginal_b(), table.design_b).w_hat)
    law_a = table.design_a.subset_law(w_x)
    law_b = table.design_b.subset_law(w_y)
    expected = n * np.outer(law_a, law_b)
    keep = expected > MASS_FLOOR
    stat = float(np.sum((table.counts[keep] - expected[keep]) ** 2 / expected[keep]))
    warn: tuple[str, ...] = ()
    if expected.min() < EXPECTED_CELL_WARN:
        warn = ("expected cell below 5: asymptotic reference unreliable, "
                "permutation calibration recommended",)
    s, r = table.shape
    df = s * r
    return TestResult(stat, df, chi2_sf(stat, df), method="pearson", warnings=warn)


def lrt_test(table: ContingencyTable, method: str = "mle") -> TestResult:
    """Likelihood-ratio test: free joint against the product of margins.

    Cells with zero counts contribute nothing; plug-in masses are
    floored at 1e-12 (with a warning) to keep the logs finite.
    """
    n = table.n
    if n == 0:
        raise DegenerateTable("empty contingency table")
    est = estimate_joint(table, method=method)
    va = table.design_a.indicator_matrix()
    vb = table.design_b.indicator_matrix()
    free = va @ est.W @ vb.T
    null = np.outer(va @ est.w_x.w, vb @ est.w_y.w)
    warn: tuple[str, ...] = ()
    observed = table.counts > 0
    if np.any((free[observed] < MASS_FLOOR) | (null[observed] < MASS_FLOOR)):
        warn = ("degenerate plug-in mass floored at 1e-12",)
    ratio = np.log(np.maximum(free, MASS_FLOOR) / np.maximum(null, MASS_FLOOR))
    stat = float(2.0 * np.sum(table.counts * np.where(observed, ratio, 0.0)))
    if stat < -1e-6:
        warn += (f"negative statistic {stat:.3e} from plug-in estimates",)
    p = table.design_a.p
    q = table.design_b.p
    df = (p - 1) * (q - 1)
    return TestResult(stat, df, chi2_sf(max(stat, 0.0), df),
                      method=f"lrt-{method}", warnings=warn)


def pearson_2x2_statistic(a: float, b: float, c: float, d: float) -> float:
    """Textbook 2x2 chi-square: n (ad - bc)^2 / product of margins."""
    n = a + b + c + d
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    if denom <= 0:
        return 0.0
    return n * (a * d - b * c) ** 2 / denom


def bonferroni_test(table: ContingencyTable, alpha: float = 0.05) -> TestResult:
    """Per-coordinate-pair 2x2 Pearson scan with Bonferroni correction.

    For each category pair (x, y) the released counts are collapsed by
    membership of x in A and y in B; rejection requires some 2x2 p-value
    below ``alpha / (p q)``. The reported p-value is the corrected
    minimum, the statistic the largest 2x2 chi-square.
    """
    n = table.n
    if n == 0:
        raise DegenerateTable("empty contingency table")
    va = table.design_a.indicator_matrix()
    vb = table.design_b.indicator_matrix()
    counts = table.counts.astype(float)
    both = va.T @ counts @ vb                 # (p, q): x in A and y in B
    row_in = va.T @ counts.sum(axis=1)        # (p,): x in A
    col_in = counts.sum(axis=0) @ vb          # (q,): y in B
    a = both
    b = row_in[:, None] - both
    c = col_in[None, :] - both
    d = n - a - b - c
    p, q = a.shape
    stats = np.zeros((p, q))
    for x in range(p):
        for y in range(q):
            stats[x, y] = pearson_2x2_statistic(a[x, y], b[x, y], c[x, y], d[x, y])
    pvals = np.array([[chi2_sf(stats[x, y], 1) for y in range(q)] for x in range(p)])
    min_p = float(pvals.min())
    corrected = min(1.0, p * q * min_p)
    rejected = min_p < alpha / (p * q)
    return TestResult(float(stats.max()), 1, corrected, method="bonferroni",
                      warnings=() if not rejected else (f"rejected at alpha={alpha}",))


def permutation_calibrate(test_fn, pairs: PairDataset, b: int = 199,
                          alpha: float = 0.05, seed=0) -> TestResult:
    """Calibrate a test's p-value against a shuffle-generated null.

    One stream is permuted against the other ``b`` times; the reported
    p-value is the rank fraction of the observed p-value within the
    shuffled ones, so rejection at level ``alpha`` means the observed
    value sits in the lower alpha-quantile of the empirical null.
    """
    if b < 99:
        raise ValueError("permutation calibration needs at least 99 shuffles")
    observed = test_fn(pairs)
    null_p = np.zeros(b)
    n = pairs.n
    for i in range(b):
        rng = substream(seed, i)
        null_p[i] = test_fn(pairs.permuted(rng.permutation(n))).p_value
    rank = int(np.sum(null_p <= observed.p_value))
    calibrated = (1 + rank) / (b + 1)
    return TestResult(observed.statistic, observed.df, float(calibrated),
                      method=observed.method, calibration="permutation",
                      warnings=observed.warnings)


def raw_contingency_pearson(counts) -> TestResult:
    """Classic Pearson chi-square on a raw (non-released) count table."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise DegenerateTable("empty contingency table")
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    keep = expected > 0
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    df = (counts.shape[0] - 1) * (counts.shape[1] - 1)
    return TestResult(stat, df, chi2_sf(stat, df), method="pearson-raw")


# ---------------------------------------------------------------------------
# combined-variable route (two small variables merged into one domain)


def combined_lrt_test(obs, p: int, q: int, design: ConditionalDesign,
                      method: str = "mle") -> TestResult:
    """Independence test when (X, Y) was released as one merged variable.

    The merged ``p*q``-category distribution is estimated freely, then
    compared against the product of its own margins (the null says the
    reshaped joint is rank one). Degrees of freedom: (p-1)(q-1).
    """
    obs = as_observations(obs, p * q)
    if len(obs) == 0:
        raise DegenerateTable("no observations")
    if method == "mle":
        est = em_mle(obs, design=design)
    elif method == "mom":
        est = mom_general(obs, design)
    else:
        raise ValueError(f"unknown method {method!r}")
    W = est.w_hat.w.reshape(p, q)
    w_null = np.outer(W.sum(axis=1), W.sum(axis=0)).ravel()
    masks, counts = obs.unique_counts()
    ind = mask_indicators(masks, p * q)
    free_mass = ind @ est.w_hat.w
    null_mass = ind @ w_null
    warn: tuple[str, ...] = ()
    if np.any((free_mass < MASS_FLOOR) | (null_mass < MASS_FLOOR)):
        warn = ("degenerate plug-in mass floored at 1e-12",)
    stat = float(2.0 * np.sum(counts * np.log(np.maximum(free_mass, MASS_FLOOR)
                                              / np.maximum(null_mass, MASS_FLOOR))))
    if stat < -1e-6:
        warn += (f"negative statistic {stat:.3e} from plug-in estimates",)
    df = (p - 1) * (q - 1)
    return TestResult(stat, df, chi2_sf(max(stat, 0.0), df),
                      method=f"lrt-combined-{method}", warnings=warn)


# ---------------------------------------------------------------------------
# simulation helpers for power studies


def dependent_joint(w_x, w_y, rho: float) -> np.ndarray:
    """Joint with a diagonal dependence bump, normalized to total mass one."""
    w_x = as_prob_vector(w_x)
    w_y = as_prob_vector(w_y)
    W = np.outer(w_x, w_y)
    if rho:
        if w_x.size != w_y.size:
            raise ValueError("diagonal bump needs equal category counts")
        W = W + rho * np.eye(w_x.size)
    return W / W.sum()


def sample_pair_dataset(W, ind_a: IndependentDesign, ind_b: IndependentDesign,
                        n: int, seed, return_values: bool = False):
    """Draw (X, Y) from a joint and release each coordinate independently."""
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed)
    W = np.asarray(W, dtype=float)
    p, q = W.shape
    if (p, q) != (ind_a.p, ind_b.p):
        raise ValueError("joint shape does not match the designs")
    flat = rng.choice(p * q, size=int(n), p=W.ravel() / W.sum())
    xs, ys = np.divmod(flat, q)
    masks_a = release_subsets(xs, ind_a, rng)
    masks_b = release_subsets(ys, ind_b, rng)
    pairs = PairDataset(masks_a, masks_b, ind_a.induced(), ind_b.induced())
    if return_values:
        return pairs, xs, ys
    return pairs


def pair_test_pvalues(pairs: PairDataset) -> dict[str, float]:
    """All four tests on one pair dataset."""
    table = build_table(pairs)
    return {
        "pearson": pearson_test(table).p_value,
        "lrt-mle": lrt_test(table, "mle").p_value,
        "lrt-mom": lrt_test(table, "mom").p_value,
        "bonferroni": bonferroni_test(table).p_value,
    }


def auc_score(labels, scores) -> float:
    """Area under the ROC curve by the rank statistic, ties counted half."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels]
    neg = scores[~labels]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both classes for an AUC")
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return float(wins / (pos.size * neg.size))


def ranking_study(w_x, w_y, ind_a: IndependentDesign, ind_b: IndependentDesign,
                  rho: float, n: int, replications: int, seed) -> dict[str, float]:
    """AUC of each test across null and dependent replications.

    Half the replications draw from the product joint, half from the
    diagonally bumped one; the score for the AUC is the evidence
    ``1 - p`` so larger means more dependent.
    """
    labels = []
    pvals: dict[str, list[float]] = {}
    for rep in range(int(replications)):
        dependent = rep % 2 == 1
        W = dependent_joint(w_x, w_y, rho if dependent else 0.0)
        pairs = sample_pair_dataset(W, ind_a, ind_b, n, substream(seed, rep))
        for name, p in pair_test_pvalues(pairs).items():
            pvals.setdefault(name, []).append(p)
        labels.append(dependent)
    return {name: auc_score(labels, 1.0 - np.asarray(ps))
            for name, ps in pvals.items()}


def combined_power_study(W, ind_combined: IndependentDesign, ns, replications: int,
                         alpha: float, seed, method: str = "mle") -> dict[int, float]:
    """Rejection rate of the merged-variable test at each sample size."""
    W = np.asarray(W, dtype=float)
    p, q = W.shape
    w_flat = W.ravel() / W.sum()
    cond = ind_combined.induced()
    powers: dict[int, float] = {}
    for i, n in enumerate(ns):
        rejections = 0
        for rep in range(int(replications)):
            obs = sample_dataset(w_flat, ind_combined, int(n), substream(seed, (i, rep)))
            res = combined_lrt_test(obs, p, q, cond, method=method)
            rejections += res.p_value <= alpha
        powers[int(n)] = rejections / replications
    return powers


def embed_margin(w, p: int) -> np.ndarray:
    """Pad a distribution with zero-mass categories up to domain size p.

    Used with the enlarged-domain constructions for small variables,
    whose artificial categories never occur as true values.
    """
    w = as_prob_vector(w)
    if w.size > p:
        raise ValueError(f"margin has {w.size} categories, domain only {p}")
    out = np.zeros(p)
    out[: w.size] = w
    return out


def paired_permutation_type_i(w_x, w_y, ind_a: IndependentDesign,
                              ind_b: IndependentDesign, n: int, replications: int,
                              b: int, alpha: float, seed) -> float:
    """Type-I rate of the permutation-calibrated Pearson test under the null.

    Margins smaller than the design domains are zero-padded (enlarged
    domains for two- or three-category variables), and the padded true
    margins serve as the Pearson plug-in; the calibration makes the test
    level-exact under exchangeability whatever the plug-in.
    """
    cond_a, cond_b = ind_a.induced(), ind_b.induced()
    wx = Distribution(embed_margin(w_x, ind_a.p))
    wy = Distribution(embed_margin(w_y, ind_b.p))
    W0 = np.outer(wx.w, wy.w)
    rejections = 0
    for rep in range(int(replications)):
        pairs = sample_pair_dataset(W0, ind_a, ind_b, n, substream(seed, (1, rep)))

        def run(prs: PairDataset):
            return pearson_test(build_table(prs), wx, wy)

        res = permutation_calibrate(run, pairs, b=b, alpha=alpha, seed=(seed, 2, rep))
        rejections += res.p_value <= alpha
    return rejections / replications
