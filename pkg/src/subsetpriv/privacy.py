"""Privacy coverage and leakage of a release design under a population.

Three views, all computed by exact enumeration over the design support:

* size — a released subset covering population mass ``L(a)`` hides its
  owner among that fraction of the population; coverage is the expected
  mass of the released subset, leakage its complement.
* mutual information — bits the released subset carries about the true
  category (base-2 throughout).
* prediction — the best probability of guessing the category from the
  released subset; the blind baseline is the largest single mass.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .design import ConditionalDesign, fully_private_design
from .schema import Distribution, Subset, as_prob_vector


@dataclass(frozen=True)
class PerRecordReport:
    """Leakage of one released subset under a published estimate."""

    size_leakage: float
    guess: int
    guess_posterior: float


@dataclass(frozen=True)
class PrivacyReport:
    size_coverage: float
    size_leakage: float
    mi_leakage_bits: float
    entropy_coverage_bits: float
    prediction_leakage: float
    prediction_coverage: float
    blind_guess_rate: float

    def as_dict(self) -> dict:
        return asdict(self)


def subset_size(a: Subset, w) -> float:
    """Population mass covered by the subset: L(a) = v_a' w."""
    if a.mask == 0:
        raise ValueError("the empty subset is never released")
    w = as_prob_vector(w, a.p)
    return float(a.indicator() @ w)


def size_report(design: ConditionalDesign, w) -> tuple[float, float]:
    """(coverage, leakage) with coverage = E[L(A)] = sum_a mu_a L(a)^2."""
    w = as_prob_vector(w, design.p)
    masses = design.indicator_matrix() @ w
    tau = float(np.sum(design.probs * masses**2))
    return tau, 1.0 - tau


def mi_report(design: ConditionalDesign, w) -> tuple[float, float]:
    """(information leakage, conditional entropy) in bits, by enumeration."""
    w = as_prob_vector(w, design.p)
    ind = design.indicator_matrix()
    masses = ind @ w                       # per subset: L(a)
    p_a = design.probs * masses            # P(A = a)
    joint = design.probs[:, None] * ind * w[None, :]   # P(X = x, A = a)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = joint / (p_a[:, None] * w[None, :])
        terms = np.where(joint > 0, joint * np.log2(np.where(joint > 0, ratio, 1.0)), 0.0)
    leakage = float(terms.sum())
    entropy = Distribution(w).entropy_bits()
    return leakage, entropy - leakage


def prediction_report(design: ConditionalDesign, w) -> tuple[float, float, float]:
    """(prediction leakage, coverage, blind baseline).

    The best guess given a released subset is its most likely member, so
    the leakage is ``sum_a mu_a max_{x in a} w_x``. With no observation
    the best rate is ``max_j w_j``.
    """
    w = as_prob_vector(w, design.p)
    ind = design.indicator_matrix()
    best = (ind * w[None, :]).max(axis=1)
    risk = float(np.sum(design.probs * best))
    return risk, 1.0 - risk, float(w.max())


def per_record_report(a: Subset, w_hat) -> PerRecordReport:
    """Record-level leakage; guess ties break toward the lowest index."""
    w = as_prob_vector(w_hat, a.p)
    mass = subset_size(a, w)
    members = np.array(a.indices)
    inside = w[members]
    guess = int(members[int(np.argmax(inside))])   # argmax takes the first max
    return PerRecordReport(size_leakage=1.0 - mass, guess=guess,
                           guess_posterior=float(inside.max() / mass))


def population_report(design: ConditionalDesign, w) -> PrivacyReport:
    tau, s = size_report(design, w)
    mi, cond_entropy = mi_report(design, w)
    risk, pred_cov, blind = prediction_report(design, w)
    return PrivacyReport(size_coverage=tau, size_leakage=s,
                         mi_leakage_bits=mi, entropy_coverage_bits=cond_entropy,
                         prediction_leakage=risk, prediction_coverage=pred_cov,
                         blind_guess_rate=blind)


def non_private_report(w) -> PrivacyReport:
    """Baseline where the raw category itself is collected (A = {X}).

    Not a valid release design (singletons); stated in closed form for
    comparison: coverage sum w_j^2, information leakage the full entropy,
    prediction leakage one.
    """
    w = as_prob_vector(w)
    tau = float(np.sum(w**2))
    entropy = Distribution(w).entropy_bits()
    return PrivacyReport(size_coverage=tau, size_leakage=1.0 - tau,
                         mi_leakage_bits=entropy, entropy_coverage_bits=0.0,
                         prediction_leakage=1.0, prediction_coverage=0.0,
                         blind_guess_rate=float(w.max()))


def fully_private_report(w) -> PrivacyReport:
    """Baseline where the whole domain is always released."""
    w = as_prob_vector(w)
    return population_report(fully_private_design(w.size), w)
