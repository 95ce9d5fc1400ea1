"""Estimating the category distribution from subset observations.

Estimators provided:

* ``em_mle`` — maximum likelihood via the EM fixed-point update
  ``w_j <- n^-1 sum_i w_j 1{j in a_i} / (v_{a_i}' w)``, treating the
  hidden category as missing data. The log-likelihood is
  ``sum_i ln(v_{a_i}' w)`` up to a design constant.
* ``mom_general`` — method of moments. The per-category membership mean
  satisfies ``gamma = Q w`` with ``q_ij`` the design mass of subsets
  containing both ``i`` and ``j``, so the estimate solves
  ``Q w_hat = gamma_hat``.
* ``mom_uniform`` — closed form of the moment estimator under the
  uniform design: ``w_hat = (r_p * gamma_hat - 1) / (r_p - 1)`` with
  ``r_p = (2^(p-1) - p - 1) / (2^(p-2) - p + 1)``.
* ``one_step`` — a single Newton ascent step on the log-likelihood from
  a root-n-consistent start, which attains MLE efficiency.

The simplex is parametrized by its first ``p - 1`` coordinates:
``w = alpha0 + B theta`` with ``alpha0 = (0, ..., 0, 1)`` and ``B`` the
identity stacked on a row of minus ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .design import ConditionalDesign, IndependentDesign, substream, uniform_design
from .errors import DomainTooSmall, IdentifiabilityViolation, NonInteriorInit
from .schema import (
    Distribution,
    Observations,
    as_observations,
    as_prob_vector,
    mask_indicators,
)

SINGULAR_REL_TOL = 1e-10

DEFAULT_EM_TOL = 1e-9
DEFAULT_EM_MAX_ITER = 10_000

# estimates whose smallest pair mass min_{i,j}(w_i + w_j) falls below this
# sit too close to the boundary for the asymptotic covariance to be trusted
PAIR_MASS_WARN = 1e-6


# ---------------------------------------------------------------------------
# simplex parametrization


def basis_matrix(p: int) -> np.ndarray:
    """(p, p-1) matrix B with w = alpha0 + B theta on the simplex."""
    return np.vstack([np.eye(p - 1), -np.ones(p - 1)])


def alpha0_vector(p: int) -> np.ndarray:
    out = np.zeros(p)
    out[-1] = 1.0
    return out


def theta_of(w: np.ndarray) -> np.ndarray:
    return np.asarray(w, dtype=float)[:-1].copy()


def w_of_theta(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([theta, [1.0 - theta.sum()]])


def project_to_simplex(raw: np.ndarray) -> np.ndarray:
    """Clip negative coordinates to zero and renormalize."""
    clipped = np.clip(np.asarray(raw, dtype=float), 0.0, None)
    total = clipped.sum()
    if total <= 0:
        return np.full(clipped.size, 1.0 / clipped.size)
    return clipped / total


# ---------------------------------------------------------------------------
# results


@dataclass
class EstimateDiagnostics:
    identifiable: bool = True
    projection_applied: bool = False
    singular_hessian: bool = False
    notes: tuple[str, ...] = ()


@dataclass
class EstimateResult:
    """An estimated distribution with its asymptotic covariance."""

    w_hat: Distribution
    w_raw: np.ndarray
    covariance: np.ndarray | None
    method: str
    iterations: int = 0
    log_likelihood: float | None = None
    diagnostics: EstimateDiagnostics = field(default_factory=EstimateDiagnostics)
    ll_history: np.ndarray | None = None


def _finish(raw: np.ndarray, **kwargs) -> EstimateResult:
    raw = np.asarray(raw, dtype=float)
    projected = project_to_simplex(raw)
    diag = kwargs.pop("diagnostics", EstimateDiagnostics())
    diag.projection_applied = bool(np.any(raw < 0) or abs(raw.sum() - 1.0) > 1e-12)
    return EstimateResult(w_hat=Distribution(projected), w_raw=raw,
                          diagnostics=diag, **kwargs)


# ---------------------------------------------------------------------------
# likelihood pieces


def _unique_system(obs: Observations) -> tuple[np.ndarray, np.ndarray, float]:
    """Distinct-mask indicator matrix, weights per mask, and total weight."""
    masks, counts = obs.unique_counts()
    return mask_indicators(masks, obs.p), counts, float(counts.sum())


def log_likelihood(w, obs) -> float:
    """Sum of log subset masses; -inf if any observed subset has mass zero."""
    obs = as_observations(obs)
    w = as_prob_vector(w, obs.p)
    ind, counts, _ = _unique_system(obs)
    masses = ind @ w
    zero = masses <= 0
    if np.any(zero & (counts > 0)):
        offender = int(np.argmax(zero & (counts > 0)))
        warnings.warn(f"observed subset with zero mass (unique-mask index {offender})",
                      RuntimeWarning, stacklevel=2)
        return float("-inf")
    return float(counts @ np.log(masses))


def score_and_hessian(w, obs) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the log-likelihood in theta coordinates."""
    obs = as_observations(obs)
    w = as_prob_vector(w, obs.p)
    ind, counts, _ = _unique_system(obs)
    B = basis_matrix(obs.p)
    bt = ind @ B                       # per unique mask: B' v_a
    masses = ind @ w
    grad = bt.T @ (counts / masses)
    hess = -(bt * (counts / masses**2)[:, None]).T @ bt
    return grad, hess


# ---------------------------------------------------------------------------
# EM


def em_mle(obs, init=None, tol: float = DEFAULT_EM_TOL,
           max_iter: int = DEFAULT_EM_MAX_ITER,
           design: ConditionalDesign | None = None) -> EstimateResult:
    """Maximum likelihood by EM; the log-likelihood never decreases.

    ``init`` defaults to the uniform distribution and must be strictly
    interior. When ``design`` is supplied the asymptotic covariance
    ``B I(theta)^-1 B' / n`` is evaluated at the estimate; otherwise the
    covariance is omitted and noted in the diagnostics.
    """
    obs = as_observations(obs)
    p = obs.p
    if init is None:
        w = np.full(p, 1.0 / p)
    else:
        w = as_prob_vector(init, p).copy()
        if np.any(w <= 0):
            raise NonInteriorInit("EM initialization must be strictly positive")
    ind, counts, n = _unique_system(obs)
    if n <= 0:
        raise ValueError("no observations")

    history = [float(counts @ np.log(ind @ w))]
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        masses = ind @ w
        w = w * (ind.T @ (counts / masses)) / n
        ll = float(counts @ np.log(np.maximum(ind @ w, 1e-320)))
        history.append(ll)
        if abs(ll - history[-2]) <= tol * (abs(history[-2]) + 1e-12):
            break

    diag = EstimateDiagnostics()
    # unique maximizer needs the observed membership vectors to span the
    # reparametrized space
    bt = ind @ basis_matrix(p)
    rank = np.linalg.matrix_rank(bt, tol=SINGULAR_REL_TOL * max(1.0, float(np.abs(bt).max())))
    if rank < p - 1:
        diag.identifiable = False
        diag.notes += ("observed subsets do not pin down a unique maximizer",)
    sorted_w = np.sort(w)
    if sorted_w[0] + sorted_w[1] < PAIR_MASS_WARN:
        diag.notes += ("near-boundary estimate: smallest pair mass below 1e-6, "
                       "asymptotic covariance unreliable",)

    covariance = None
    if design is not None:
        covariance, cov_note = _mle_covariance_at(w, design, n)
        if cov_note:
            diag.notes += (cov_note,)
    else:
        diag.notes += ("covariance omitted: no design supplied",)

    return _finish(w, covariance=covariance, method="em", iterations=iterations,
                   log_likelihood=history[-1], diagnostics=diag,
                   ll_history=np.array(history))


# ---------------------------------------------------------------------------
# moment machinery


def moment_matrix(design: ConditionalDesign) -> np.ndarray:
    """Q with q_ij = design mass of subsets containing both i and j."""
    ind = design.indicator_matrix()
    return (ind * design.probs[:, None]).T @ ind


def moment_second(design: ConditionalDesign, w) -> np.ndarray:
    """H = E[v_A v_A'] under the design at population ``w``."""
    w = as_prob_vector(w, design.p)
    ind = design.indicator_matrix()
    masses = ind @ w
    return (ind * (design.probs * masses)[:, None]).T @ ind


def moment_covariance(design: ConditionalDesign, w) -> np.ndarray:
    """C = Cov(v_A) = H - gamma gamma' at population ``w``."""
    w = as_prob_vector(w, design.p)
    gamma = moment_matrix(design) @ w
    return moment_second(design, w) - np.outer(gamma, gamma)


@dataclass(frozen=True)
class MomentSystem:
    """The pieces of the moment relation gamma = Q w for one dataset."""

    Q: np.ndarray
    gamma_hat: np.ndarray
    H: np.ndarray
    C: np.ndarray


def build_moment_system(obs, design: ConditionalDesign, w_for_cov) -> MomentSystem:
    obs = as_observations(obs, design.p)
    ind, counts, n = _unique_system(obs)
    gamma_hat = ind.T @ counts / n
    Q = moment_matrix(design)
    H = moment_second(design, w_for_cov)
    gamma_model = Q @ as_prob_vector(w_for_cov, design.p)
    return MomentSystem(Q, gamma_hat, H, H - np.outer(gamma_model, gamma_model))


def _solve_spd(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    """Symmetric solve with a pseudo-inverse fallback; returns (x, fell_back)."""
    eigvals = np.linalg.eigvalsh(A)
    if eigvals[0] > SINGULAR_REL_TOL * max(abs(eigvals[-1]), 1e-300):
        return np.linalg.solve(A, b), False
    return np.linalg.pinv(A, rcond=SINGULAR_REL_TOL) @ b, True


def mom_general(obs, design: ConditionalDesign) -> EstimateResult:
    """Moment estimator: solve Q w_hat = gamma_hat for a known design."""
    obs = as_observations(obs, design.p)
    Q = moment_matrix(design)
    eigvals = np.linalg.eigvalsh(Q)
    if eigvals[0] <= SINGULAR_REL_TOL * max(abs(eigvals[-1]), 1e-300):
        raise IdentifiabilityViolation(
            "moment matrix is singular: the design cannot separate all "
            "distributions", diagnosis=check_identifiability(design))
    ind, counts, n = _unique_system(obs)
    gamma_hat = ind.T @ counts / n
    raw = np.linalg.solve(Q, gamma_hat)
    result = _finish(raw, covariance=None, method="mom", iterations=0,
                     log_likelihood=None)
    result.covariance = _mom_covariance_at(result.w_hat.w, design, n)
    return result


def uniform_moment_ratio(p: int) -> float:
    """r_p: inverse off-diagonal mass of Q under the uniform design."""
    p = int(p)
    if p < 4:
        raise DomainTooSmall(f"uniform design needs p >= 4, got p={p}")
    return (2 ** (p - 1) - p - 1) / (2 ** (p - 2) - p + 1)


def mom_uniform(obs, p: int | None = None) -> EstimateResult:
    """Closed-form moment estimator for data from the uniform design.

    Matches ``mom_general`` on the induced uniform design whenever the
    empirical mean subset size equals its design value (always the case
    at p = 4, where every released subset has two elements).
    """
    obs = as_observations(obs, p)
    p = obs.p
    r = uniform_moment_ratio(p)
    ind, counts, n = _unique_system(obs)
    gamma_hat = ind.T @ counts / n
    raw = (r * gamma_hat - 1.0) / (r - 1.0)
    result = _finish(raw, covariance=None, method="mom-uniform", iterations=0,
                     log_likelihood=None)
    design = uniform_design(p).induced()
    result.covariance = _mom_covariance_at(result.w_hat.w, design, n)
    return result


def _mom_covariance_at(w: np.ndarray, design: ConditionalDesign, n: float) -> np.ndarray:
    Q = moment_matrix(design)
    C = moment_covariance(design, w)
    Qinv = np.linalg.pinv(Q, rcond=SINGULAR_REL_TOL)
    return Qinv @ C @ Qinv / n


# ---------------------------------------------------------------------------
# one-step Newton refinement


ONE_STEP_CLAMP = 1e-6


def one_step(obs, design: ConditionalDesign | None, start) -> EstimateResult:
    """One Newton ascent step on the log-likelihood from a consistent start.

    ``start`` may be an :class:`EstimateResult` (its raw vector is used)
    or any probability-like vector; coordinates are clamped into
    ``[1e-6, 1 - 1e-6]`` and renormalized so the step is evaluated at an
    interior point.
    """
    obs = as_observations(obs)
    p = obs.p
    if isinstance(start, EstimateResult):
        w0 = np.asarray(start.w_raw, dtype=float)
    else:
        w0 = np.asarray(start, dtype=float)
    w0 = np.clip(w0, ONE_STEP_CLAMP, 1.0 - ONE_STEP_CLAMP)
    w0 = w0 / w0.sum()

    grad, hess = score_and_hessian(w0, obs)
    diag = EstimateDiagnostics()
    step, fell_back = _solve_spd(-hess, grad)
    if fell_back:
        diag.singular_hessian = True
        diag.notes += ("singular Hessian: pseudo-inverse step",)
    theta = theta_of(w0) + step
    raw = w_of_theta(theta)

    covariance = None
    n = float(_unique_system(obs)[1].sum())
    if design is not None:
        w_eval = project_to_simplex(raw)
        covariance, cov_note = _mle_covariance_at(w_eval, design, n)
        if cov_note:
            diag.notes += (cov_note,)
    else:
        diag.notes += ("covariance omitted: no design supplied",)
    return _finish(raw, covariance=covariance, method="one-step", iterations=1,
                   log_likelihood=None, diagnostics=diag)


# ---------------------------------------------------------------------------
# information and identifiability


def fisher_information(w, design: ConditionalDesign) -> np.ndarray:
    """I(theta) = sum_a mu_a (B'v_a)(B'v_a)' / (v_a'w) over the support."""
    w = as_prob_vector(w, design.p)
    ind = design.indicator_matrix()
    bt = ind @ basis_matrix(design.p)
    masses = ind @ w
    keep = design.probs > 0
    if np.any(masses[keep] <= 0):
        raise ValueError("a support subset has zero mass under w")
    weights = design.probs[keep] / masses[keep]
    btk = bt[keep]
    return (btk * weights[:, None]).T @ btk


def mle_asymptotic_covariance(w, design: ConditionalDesign) -> np.ndarray:
    """Limit covariance of the MLE in w-space: B I(theta)^-1 B'."""
    B = basis_matrix(design.p)
    info = fisher_information(w, design)
    inv = np.linalg.pinv(info, rcond=SINGULAR_REL_TOL)
    return B @ inv @ B.T


def _mle_covariance_at(w, design: ConditionalDesign, n: float):
    ind = design.indicator_matrix()
    masses = ind @ as_prob_vector(w, design.p)
    if np.any(masses[design.probs > 0] <= 1e-12):
        return None, "covariance omitted: estimate puts zero mass on a support subset"
    info = fisher_information(w, design)
    eigvals = np.linalg.eigvalsh(info)
    note = None
    if eigvals[0] <= SINGULAR_REL_TOL * max(abs(eigvals[-1]), 1e-300):
        note = "information matrix singular: pseudo-inverse covariance"
    B = basis_matrix(design.p)
    inv = np.linalg.pinv(info, rcond=SINGULAR_REL_TOL)
    return B @ inv @ B.T / n, note


@dataclass(frozen=True)
class IdentifiabilityDiagnosis:
    ok: bool
    rank: int
    required_rank: int
    null_direction: np.ndarray | None
    q_min_eigenvalue: float


def check_identifiability(design: ConditionalDesign) -> IdentifiabilityDiagnosis:
    """Can distinct distributions be told apart under this design?

    Passes iff the membership vectors of the support span the
    reparametrized space (rank ``p - 1`` after multiplying by the
    simplex basis), equivalently iff the moment matrix Q is positive
    definite for complement-closed supports. On failure the returned
    direction ``u`` satisfies ``v_a'u = 0`` for the blind subsets.
    """
    p = design.p
    ind = design.indicator_matrix()
    keep = design.probs > 0
    bt = ind[keep] @ basis_matrix(p)
    svals = np.linalg.svd(bt, compute_uv=False) if bt.size else np.zeros(0)
    smax = float(svals[0]) if svals.size else 0.0
    rank = int(np.sum(svals > SINGULAR_REL_TOL * max(smax, 1e-300)))
    Q = moment_matrix(design)
    eigvals, eigvecs = np.linalg.eigh(Q)
    ok = rank == p - 1
    null_direction = None
    if not ok:
        if eigvals[0] <= SINGULAR_REL_TOL * max(abs(eigvals[-1]), 1e-300):
            null_direction = eigvecs[:, 0]
        else:
            _, _, vt = np.linalg.svd(bt)
            null_direction = basis_matrix(p) @ vt[-1]
            null_direction = null_direction / np.linalg.norm(null_direction)
    return IdentifiabilityDiagnosis(ok=ok, rank=rank, required_rank=p - 1,
                                    null_direction=null_direction,
                                    q_min_eigenvalue=float(eigvals[0]))


# ---------------------------------------------------------------------------
# dummy-augmented data


def estimate_debias(obs, dummy) -> EstimateResult:
    """Recover the true-category distribution from dummy-augmented data.

    Strips the artificial categories from each released subset. A real
    record then contributes a base release, a dummy record a bare
    candidate draw, so the membership mean decomposes as
    ``(1 - 2a) Q w + 2a gamma_cand``; solving and renormalizing removes
    the dummy inflation.
    """
    obs = as_observations(obs)
    base = dummy.base
    p = base.p
    if obs.p != p + 2:
        raise ValueError(f"expected enlarged domain {p + 2}, got {obs.p}")
    alpha = dummy.alpha
    true_bits = np.uint64((1 << p) - 1)
    stripped = obs.masks & true_bits
    ind = mask_indicators(stripped, p)
    if obs.weights is None:
        counts = np.ones(len(obs))
    else:
        counts = obs.weights
    n = counts.sum()
    gamma_hat = ind.T @ counts / n
    gamma_cand = base.membership_mean()
    target = (gamma_hat - 2 * alpha * gamma_cand) / (1 - 2 * alpha)
    design = base.induced()
    Q = moment_matrix(design)
    raw, fell_back = _solve_spd(Q, target)
    diag = EstimateDiagnostics()
    if fell_back:
        diag.identifiable = False
        diag.notes += ("base moment matrix singular",)
    diag.notes += ("covariance omitted for dummy-debiased estimate",)
    return _finish(raw, covariance=None, method="mom-debias", iterations=0,
                   log_likelihood=None, diagnostics=diag)


# ---------------------------------------------------------------------------
# benchmark harness


@dataclass
class BenchmarkResult:
    """Monte-Carlo scaled quadratic losses next to their theoretical limits."""

    losses: dict[str, np.ndarray]
    mle_trace: float
    mom_trace: float

    def mean(self, method: str) -> float:
        return float(self.losses[method].mean())

    def stderr(self, method: str) -> float:
        x = self.losses[method]
        return float(x.std(ddof=1) / np.sqrt(x.size))

    def summary(self) -> dict:
        out = {m: {"mean": self.mean(m), "stderr": self.stderr(m)}
               for m in self.losses}
        out["limits"] = {"mle": self.mle_trace, "mom": self.mom_trace}
        return out


def scaled_l2_benchmark(w, ind_design: IndependentDesign, n: int,
                        replications: int, seed,
                        methods: tuple[str, ...] = ("em", "mom", "one_step"),
                        ) -> BenchmarkResult:
    """Replicate estimation and record ``n * ||w_hat - w||^2`` per method.

    The theoretical limits are ``tr(B I(theta)^-1 B')`` for the MLE path
    and ``tr(Q^-1 C Q^-1)`` for the moment path, both at the true ``w``.
    Raw (unprojected) estimates feed the loss so the moment loss is an
    exactly unbiased estimate of its trace at every ``n``.
    """
    from .design import sample_dataset  # local import keeps module load light

    w = as_prob_vector(w, ind_design.p)
    cond = ind_design.induced()
    diag = check_identifiability(cond)
    if not diag.ok:
        raise IdentifiabilityViolation("benchmark needs an identifiable design",
                                       diagnosis=diag)
    losses = {m: np.zeros(int(replications)) for m in methods}
    for rep in range(int(replications)):
        rng = substream(seed, rep)
        obs = sample_dataset(w, ind_design, n, rng)
        mom_res = mom_general(obs, cond) if ("mom" in methods or "one_step" in methods) else None
        for m in methods:
            if m == "em":
                est = em_mle(obs).w_raw
            elif m == "mom":
                est = mom_res.w_raw
            elif m == "one_step":
                est = one_step(obs, None, mom_res).w_raw
            else:
                raise ValueError(f"unknown method {m!r}")
            losses[m][rep] = n * float(np.sum((est - w) ** 2))

    mle_trace = float(np.trace(mle_asymptotic_covariance(w, cond)))
    Q = moment_matrix(cond)
    C = moment_covariance(cond, w)
    Qinv = np.linalg.inv(Q)
    mom_trace = float(np.trace(Qinv @ C @ Qinv))
    return BenchmarkResult(losses=losses, mle_trace=mle_trace, mom_trace=mom_trace)
