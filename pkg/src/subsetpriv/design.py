"""Subset-release mechanisms for categorical data.

A *conditional design* assigns each subset ``a`` a probability ``mu_a``
of being released when the true category lies in ``a``; validity
requires that for every category the probabilities of subsets
containing it sum to one, which makes the released subset carry no
information beyond membership. An *independent design* realizes this by
drawing a candidate subset independently of the data and releasing
either the candidate (if the true value is inside) or its complement.
The respondent therefore only ever answers a yes/no membership
question, and every released subset contains the true value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AsymmetricBase, DomainTooLarge, DomainTooSmall
from .schema import (
    DEFAULT_ENUM_CAP,
    CategorySchema,
    Distribution,
    Observations,
    Subset,
    as_prob_vector,
    complement_masks,
    mask_indicators,
    mask_sizes,
)

PROB_SUM_TOL = 1e-12
ROW_SUM_TOL = 1e-10


def substream(seed, index: int | tuple = ()) -> np.random.Generator:
    """Child random stream for a replication index.

    Streams derived from the same seed but different indices are
    independent, so replicated experiments give identical results
    whether they run sequentially or in parallel. ``seed`` may be an
    integer or a tuple of integers.
    """
    key = index if isinstance(index, tuple) else (int(index),)
    entropy = [int(s) for s in seed] if isinstance(seed, (tuple, list)) else int(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=key))


def _normalize_entries(entries, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Sort, merge and prune a {mask: prob} mapping into parallel arrays."""
    if isinstance(entries, dict):
        items = entries.items()
    else:
        items = entries
    acc: dict[int, float] = {}
    for key, prob in items:
        mask = key.mask if isinstance(key, Subset) else int(key)
        if mask < 0 or mask >> p:
            raise ValueError(f"mask {mask:#x} does not fit p={p}")
        prob = float(prob)
        if prob < 0:
            raise ValueError("probabilities must be nonnegative")
        if prob > 0:
            acc[mask] = acc.get(mask, 0.0) + prob
    masks = np.array(sorted(acc), dtype=np.uint64)
    probs = np.array([acc[int(m)] for m in masks], dtype=float)
    return masks, probs


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking a conditional design's defining constraints."""

    row_deviation: np.ndarray          # per category: |sum of probs over subsets containing it - 1|
    support_violations: tuple[Subset, ...]  # subsets with positive probability but fewer than 2 elements
    ok: bool

    @property
    def max_row_deviation(self) -> float:
        return float(self.row_deviation.max()) if self.row_deviation.size else 0.0


class ConditionalDesign:
    """Sparse subset-probability table ``{a: mu_a}`` over ``[0, p)``."""

    def __init__(self, schema: CategorySchema | int, entries):
        self.schema = schema if isinstance(schema, CategorySchema) else CategorySchema(int(schema))
        self.masks, self.probs = _normalize_entries(entries, self.schema.p)
        self._rows = None

    @property
    def p(self) -> int:
        return self.schema.p

    @property
    def support(self) -> list[Subset]:
        return [Subset(int(m), self.p) for m in self.masks]

    def prob_of(self, subset: Subset | int) -> float:
        mask = subset.mask if isinstance(subset, Subset) else int(subset)
        i = int(np.searchsorted(self.masks, np.uint64(mask)))
        if i < self.masks.size and int(self.masks[i]) == mask:
            return float(self.probs[i])
        return 0.0

    def indicator_matrix(self) -> np.ndarray:
        """(support size, p) matrix of membership indicators."""
        return mask_indicators(self.masks, self.p)

    def subset_law(self, w) -> np.ndarray:
        """P(released subset = a) for each support subset, under ``w``."""
        w = as_prob_vector(w, self.p)
        return self.probs * (self.indicator_matrix() @ w)

    def validate(self) -> ValidationReport:
        return validate_conditional(self)

    def _row_tables(self):
        # per category: indices into the support of subsets containing it,
        # with cumulative probabilities for inverse-CDF draws
        if self._rows is None:
            ind = self.indicator_matrix()
            rows = []
            for j in range(self.p):
                idx = np.nonzero(ind[:, j])[0]
                cum = np.cumsum(self.probs[idx])
                rows.append((idx, cum))
            self._rows = rows
        return self._rows

    def sample_given(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Release one subset per record, conditional on true categories."""
        values = np.asarray(values, dtype=int)
        out = np.zeros(values.shape, dtype=np.uint64)
        rows = self._row_tables()
        u = rng.random(values.shape)
        for j in range(self.p):
            sel = values == j
            if not sel.any():
                continue
            idx, cum = rows[j]
            if idx.size == 0 or cum[-1] <= 0:
                raise ValueError(f"design has no support covering category {j}")
            pick = np.searchsorted(cum / cum[-1], u[sel], side="right")
            pick = np.minimum(pick, idx.size - 1)
            out[sel] = self.masks[idx[pick]]
        return out

    def __eq__(self, other):
        return (isinstance(other, ConditionalDesign) and self.p == other.p
                and np.array_equal(self.masks, other.masks)
                and np.allclose(self.probs, other.probs, atol=0, rtol=0))

    def __repr__(self):
        return f"ConditionalDesign(p={self.p}, support={self.masks.size})"


class IndependentDesign:
    """Data-independent candidate-subset law ``{a: nu_a}``.

    ``allow_small`` relaxes the usual ban on candidate subsets of size 1
    or ``p - 1`` (used by the enlarged-domain constructions for two- and
    three-category variables). Candidates of size 0 or ``p`` are always
    rejected.
    """

    kind = "explicit"  # analytic constructors override for exact round-trips

    def __init__(self, schema: CategorySchema | int, entries, allow_small: bool = False):
        self.schema = schema if isinstance(schema, CategorySchema) else CategorySchema(int(schema))
        self.allow_small = bool(allow_small)
        self.masks, self.probs = _normalize_entries(entries, self.schema.p)
        total = float(self.probs.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"candidate probabilities sum to {total!r}, not 1")
        sizes = mask_sizes(self.masks, self.p)
        if np.any(sizes == 0) or np.any(sizes == self.p):
            raise ValueError("empty or full candidate subsets are not allowed")
        if not self.allow_small and np.any((sizes == 1) | (sizes == self.p - 1)):
            raise ValueError(
                "candidate subsets of size 1 or p-1 require allow_small=True")
        self._cum = np.cumsum(self.probs)

    @property
    def p(self) -> int:
        return self.schema.p

    @property
    def support(self) -> list[Subset]:
        return [Subset(int(m), self.p) for m in self.masks]

    def prob_of(self, subset: Subset | int) -> float:
        mask = subset.mask if isinstance(subset, Subset) else int(subset)
        i = int(np.searchsorted(self.masks, np.uint64(mask)))
        if i < self.masks.size and int(self.masks[i]) == mask:
            return float(self.probs[i])
        return 0.0

    def is_complement_symmetric(self, tol: float = PROB_SUM_TOL) -> bool:
        comp = complement_masks(self.masks, self.p)
        return all(abs(self.prob_of(int(c)) - float(q)) <= tol
                   for c, q in zip(comp, self.probs))

    def draw_candidates(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` candidate subsets (independent of any data)."""
        u = rng.random(n)
        pick = np.searchsorted(self._cum / self._cum[-1], u, side="right")
        pick = np.minimum(pick, self.masks.size - 1)
        return self.masks[pick]

    def membership_mean(self) -> np.ndarray:
        """Per category, the probability that a candidate contains it."""
        return self.indicator_matrix().T @ self.probs

    def indicator_matrix(self) -> np.ndarray:
        return mask_indicators(self.masks, self.p)

    def induced(self) -> ConditionalDesign:
        return induce_conditional(self)

    def __repr__(self):
        return f"IndependentDesign(p={self.p}, support={self.masks.size})"


def validate_conditional(design: ConditionalDesign) -> ValidationReport:
    """Check the row-sum and minimum-size constraints; never raises."""
    p = design.p
    ind = design.indicator_matrix()
    row_sums = ind.T @ design.probs
    deviation = np.abs(row_sums - 1.0)
    sizes = mask_sizes(design.masks, p)
    bad = [Subset(int(m), p)
           for m, s, q in zip(design.masks, sizes, design.probs)
           if s < 2 and q > 0]
    ok = bool(deviation.max(initial=0.0) <= ROW_SUM_TOL) and not bad
    return ValidationReport(deviation, tuple(bad), ok)


def induce_conditional(ind: IndependentDesign) -> ConditionalDesign:
    """Conditional law of the released subset: ``mu_a = nu_a + nu_{a^c}``."""
    entries: dict[int, float] = {}
    full = (1 << ind.p) - 1
    for m, q in zip(ind.masks, ind.probs):
        m = int(m)
        entries[m] = entries.get(m, 0.0) + float(q)
        entries[m ^ full] = entries.get(m ^ full, 0.0) + float(q)
    return ConditionalDesign(ind.schema, entries)


def enumerate_masks(p: int, enum_cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """All 2**p subset masks; guarded by the enumeration cap."""
    if p > enum_cap:
        raise DomainTooLarge(f"enumerating 2**{p} subsets exceeds cap {enum_cap}")
    return np.arange(1 << p, dtype=np.uint64)


def uniform_design(p: int, enum_cap: int = DEFAULT_ENUM_CAP) -> IndependentDesign:
    """Equal probability on every subset of size 2 through ``p - 2``.

    There are ``2**p - 2p - 2`` such subsets, so each gets probability
    ``1 / (2**p - 2p - 2)``.
    """
    p = int(p)
    if p < 4:
        raise DomainTooSmall(f"uniform design needs p >= 4, got p={p}")
    masks = enumerate_masks(p, enum_cap)
    sizes = mask_sizes(masks, p)
    keep = masks[(sizes >= 2) & (sizes <= p - 2)]
    m = (1 << p) - 2 * p - 2
    assert keep.size == m
    probs = np.full(keep.size, 1.0 / m)
    design = IndependentDesign(CategorySchema(p), zip(keep.tolist(), probs))
    design.kind = "uniform"
    return design


def fully_private_design(p: int) -> ConditionalDesign:
    """Always release the whole domain (no information beyond the range)."""
    return ConditionalDesign(CategorySchema(p), {(1 << p) - 1: 1.0})


def release_subsets(values: np.ndarray, ind: IndependentDesign,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorized candidate-or-complement release for an array of values."""
    values = np.asarray(values, dtype=int)
    cand = ind.draw_candidates(values.size, rng).reshape(values.shape)
    member = (cand >> values.astype(np.uint64)) & np.uint64(1)
    comp = complement_masks(cand, ind.p)
    return np.where(member == 1, cand, comp)


def draw_subset(x: int, ind: IndependentDesign, rng: np.random.Generator) -> Subset:
    """Release one subset for true category ``x``; always contains ``x``."""
    if not 0 <= int(x) < ind.p:
        raise ValueError(f"category {x} out of range for p={ind.p}")
    mask = release_subsets(np.array([int(x)]), ind, rng)[0]
    return Subset(int(mask), ind.p)


def sample_dataset(w, ind: IndependentDesign, n: int, seed,
                   return_values: bool = False):
    """Draw ``n`` i.i.d. categories from ``w`` and release one subset each.

    The raw categories are discarded unless ``return_values`` is set
    (debugging / faithfulness checks only).
    """
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed)
    w = as_prob_vector(w, ind.p)
    n = int(n)
    values = rng.choice(ind.p, size=n, p=w) if n else np.zeros(0, dtype=int)
    masks = release_subsets(values, ind, rng) if n else np.zeros(0, dtype=np.uint64)
    obs = Observations(masks, ind.p)
    if return_values:
        return obs, values
    return obs


class ProductDesign:
    """Coordinate-wise conditional designs for a vector of variables.

    Each variable is released through its own design; the joint release
    is the tuple of per-variable subsets.
    """

    def __init__(self, components: Sequence[ConditionalDesign]):
        if not components:
            raise ValueError("need at least one component design")
        self.components = tuple(components)

    @property
    def d(self) -> int:
        return len(self.components)

    def sample_given(self, values: np.ndarray, rng: np.random.Generator) -> list[np.ndarray]:
        """values: (n, d) int array -> one mask array per component."""
        values = np.asarray(values, dtype=int)
        if values.ndim != 2 or values.shape[1] != self.d:
            raise ValueError(f"values must be (n, {self.d})")
        return [c.sample_given(values[:, k], rng) for k, c in enumerate(self.components)]

    def pair_law(self, W) -> np.ndarray:
        """Joint law P(A=a, B=b) over the two supports (two variables only)."""
        if self.d != 2:
            raise ValueError("pair_law is defined for two components")
        da, db = self.components
        W = np.asarray(W, dtype=float)
        if W.shape != (da.p, db.p):
            raise ValueError(f"joint must be {(da.p, db.p)}")
        mass = da.indicator_matrix() @ W @ db.indicator_matrix().T
        return da.probs[:, None] * db.probs[None, :] * mass


class DummyDesign:
    """Base design wrapped with two artificial categories.

    The domain grows from ``p`` to ``p + 2``. A real record first gets a
    base release over ``[0, p)`` and then one of the two extra
    categories is appended with a fair coin; an artificial record (whose
    "value" is one of the extras) gets a base candidate plus its own
    category. Mixing in artificial records at fraction ``2 * alpha``
    guarantees that every released subset covers at least ``alpha``
    population mass, whatever the data distribution.
    """

    def __init__(self, base: IndependentDesign, alpha: float):
        if not 0 < alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not base.is_complement_symmetric():
            raise AsymmetricBase(
                "dummy augmentation needs a complement-symmetric base design")
        if base.p + 2 > 64:
            raise DomainTooLarge("enlarged domain exceeds the bitmask limit")
        self.base = base
        self.alpha = float(alpha)
        labels = None
        if base.schema.labels is not None:
            labels = base.schema.labels + ("__dummy_a__", "__dummy_b__")
        self.schema = CategorySchema(base.p + 2, labels)

    @property
    def p(self) -> int:
        """Size of the original (true-category) domain."""
        return self.base.p

    @property
    def dummy_indices(self) -> tuple[int, int]:
        return (self.base.p, self.base.p + 1)

    def mixed_population(self, w) -> Distribution:
        """Population over the enlarged domain at dummy fraction 2*alpha."""
        w = as_prob_vector(w, self.base.p)
        return Distribution(np.concatenate([
            (1 - 2 * self.alpha) * w, [self.alpha, self.alpha]]))

    def dummy_count(self, n: int) -> int:
        """Artificial records to add so the mixture fraction is exactly 2*alpha."""
        return round(2 * self.alpha * n / (1 - 2 * self.alpha))

    def induced_conditional(self) -> ConditionalDesign:
        """The enlarged mechanism as a conditional design on ``p + 2``."""
        entries: dict[int, float] = {}
        for m, q in zip(self.base.masks, self.base.probs):
            for d in self.dummy_indices:
                key = int(m) | (1 << d)
                # complement symmetry of the base makes the true-record law
                # (half the induced base prob) match the dummy-record law (q)
                entries[key] = entries.get(key, 0.0) + float(q)
        return ConditionalDesign(self.schema, entries)

    def sample_enlarged(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Release enlarged subsets for values over ``[0, p + 2)``."""
        values = np.asarray(values, dtype=int)
        n = values.size
        out = np.zeros(n, dtype=np.uint64)
        real = values < self.base.p
        if real.any():
            base_masks = release_subsets(values[real], self.base, rng)
            coin = rng.integers(0, 2, size=int(real.sum()))
            extra = (np.uint64(1) << (np.uint64(self.base.p) + coin.astype(np.uint64)))
            out[real] = base_masks | extra
        fake = ~real
        if fake.any():
            cand = self.base.draw_candidates(int(fake.sum()), rng)
            own = np.uint64(1) << values[fake].astype(np.uint64)
            out[fake] = cand | own
        return out

    def sample_mixed_dataset(self, w, n: int, seed, return_values: bool = False):
        """``n`` real records from ``w`` plus the matching artificial ones."""
        rng = seed if isinstance(seed, np.random.Generator) else substream(seed)
        w = as_prob_vector(w, self.base.p)
        m = self.dummy_count(int(n))
        real = rng.choice(self.base.p, size=int(n), p=w)
        fake = rng.integers(self.base.p, self.base.p + 2, size=m)
        values = np.concatenate([real, fake])
        masks = self.sample_enlarged(values, rng)
        obs = Observations(masks, self.schema.p)
        if return_values:
            return obs, values
        return obs


def dummy_wrap(ind: IndependentDesign, alpha: float) -> DummyDesign:
    """Wrap a complement-symmetric design with two artificial categories."""
    return DummyDesign(ind, alpha)


def small_p_design(p: int) -> IndependentDesign:
    """Release mechanism for two- or three-category variables.

    Works on the enlarged domain ``[0, p + 2)`` whose last two
    categories are artificial. Candidates are the ``2p`` pairs of one
    true and one artificial category, drawn uniformly. For ``p = 2``
    this releases ``{x, dummy}`` with a fair dummy coin for true values
    and ``{dummy, true}`` uniformly for artificial ones; for ``p = 3``
    the complement branch additionally emits (two-true, one-dummy)
    triples, which keeps the row sums valid.
    """
    p = int(p)
    if p not in (2, 3):
        raise DomainTooSmall(f"small-domain construction is for p in {{2, 3}}, got {p}")
    enlarged = p + 2
    entries = {}
    for x in range(p):
        for d in (p, p + 1):
            entries[(1 << x) | (1 << d)] = 1.0 / (2 * p)
    design = IndependentDesign(CategorySchema(enlarged), entries, allow_small=True)
    design.kind = "small_p"
    return design
