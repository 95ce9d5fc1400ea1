"""Core data types: category schemas, subsets as bitmasks, distributions.

Categories are 0-based indices ``0..p-1`` throughout. A subset of
categories is stored as an integer bitmask (bit ``j`` set iff category
``j`` is in the subset), which caps the domain at 64 categories. Bulk
collections of subsets are kept as uint64 arrays so that sampling and
estimation stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainTooLarge

MAX_CATEGORIES = 64
# Cap for any operation that enumerates all 2**p subsets.
DEFAULT_ENUM_CAP = 20

SIMPLEX_TOL = 1e-12


def _check_p(p: int) -> int:
    p = int(p)
    if p < 2:
        raise ValueError(f"need at least 2 categories, got p={p}")
    if p > MAX_CATEGORIES:
        raise DomainTooLarge(f"p={p} exceeds the bitmask limit of {MAX_CATEGORIES}")
    return p


@dataclass(frozen=True)
class CategorySchema:
    """A categorical domain: its size and optional display labels."""

    p: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", _check_p(self.p))
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.p:
                raise ValueError(f"expected {self.p} labels, got {len(labels)}")
            if len(set(labels)) != len(labels):
                raise ValueError("labels must be unique")
            object.__setattr__(self, "labels", labels)

    def label(self, j: int) -> str:
        if self.labels is not None:
            return self.labels[j]
        return str(j)

    def index_of(self, label: str) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)


@dataclass(frozen=True, order=True)
class Subset:
    """A subset of ``[0, p)`` stored as a bitmask.

    The empty subset is representable (mask 0) but is never a valid
    observation.
    """

    mask: int
    p: int

    def __post_init__(self):
        object.__setattr__(self, "p", _check_p(self.p))
        mask = int(self.mask)
        if mask < 0 or mask >> self.p:
            raise ValueError(f"mask {mask:#x} does not fit in {self.p} categories")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, indices: Iterable[int], p: int) -> "Subset":
        mask = 0
        for j in indices:
            j = int(j)
            if not 0 <= j < p:
                raise ValueError(f"category {j} out of range for p={p}")
            mask |= 1 << j
        return cls(mask, p)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.p) if self.mask >> j & 1)

    @property
    def size(self) -> int:
        return int(self.mask).bit_count()

    def contains(self, j: int) -> bool:
        return bool(self.mask >> j & 1)

    def complement(self) -> "Subset":
        return Subset(~self.mask & (1 << self.p) - 1, self.p)

    def indicator(self) -> np.ndarray:
        return mask_indicators(np.array([self.mask], dtype=np.uint64), self.p)[0]

    def labels(self, schema: CategorySchema) -> tuple[str, ...]:
        return tuple(schema.label(j) for j in self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"Subset({{{','.join(map(str, self.indices))}}}, p={self.p})"


def mask_indicators(masks: np.ndarray, p: int) -> np.ndarray:
    """Expand an array of bitmasks into an (n, p) 0/1 float matrix."""
    masks = np.asarray(masks, dtype=np.uint64)
    bits = (masks[:, None] >> np.arange(p, dtype=np.uint64)) & np.uint64(1)
    return bits.astype(float)


def mask_sizes(masks: np.ndarray, p: int) -> np.ndarray:
    """Popcount of each mask, restricted to the low ``p`` bits."""
    return mask_indicators(masks, p).sum(axis=1).astype(int)


def complement_masks(masks: np.ndarray, p: int) -> np.ndarray:
    full = np.uint64((1 << p) - 1)
    return np.asarray(masks, dtype=np.uint64) ^ full


@dataclass(frozen=True)
class Distribution:
    """A probability vector over ``p`` categories."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).copy()
        w.setflags(write=False)
        if w.ndim != 1:
            raise ValueError("distribution must be a 1-d vector")
        _check_p(w.size)
        if np.any(w < -SIMPLEX_TOL) or np.any(w > 1 + SIMPLEX_TOL):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"probabilities sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, p: int) -> "Distribution":
        return cls(np.full(p, 1.0 / p))

    @property
    def p(self) -> int:
        return self.w.size

    def mass(self, subset: Subset | int) -> float:
        """Total probability of the categories in ``subset``."""
        mask = subset.mask if isinstance(subset, Subset) else int(subset)
        return float(sum(self.w[j] for j in range(self.p) if mask >> j & 1))

    def entropy_bits(self) -> float:
        w = self.w[self.w > 0]
        return float(-(w * np.log2(w)).sum())

    def __getitem__(self, j: int) -> float:
        return float(self.w[j])

    def __len__(self) -> int:
        return self.p


def as_prob_vector(w, p: int | None = None) -> np.ndarray:
    """Coerce a Distribution or array-like to a validated probability vector."""
    if isinstance(w, Distribution):
        vec = w.w
    else:
        vec = Distribution(np.asarray(w, dtype=float)).w
    if p is not None and vec.size != p:
        raise ValueError(f"expected {p} categories, got {vec.size}")
    return vec


class Observations(Sequence):
    """A collection of subset observations over a fixed domain.

    Stores one bitmask per record plus optional record weights. Behaves
    as a sequence of :class:`Subset` while keeping the underlying arrays
    available for vectorized work.
    """

    def __init__(self, masks, p: int, weights=None):
        self.p = _check_p(p)
        masks = np.asarray(masks, dtype=np.uint64)
        if masks.ndim != 1:
            raise ValueError("masks must be a 1-d array")
        if masks.size and int(masks.max()) >> self.p:
            raise ValueError("mask does not fit the declared domain")
        if np.any(masks == 0):
            raise ValueError("empty subsets are not valid observations")
        self.masks = masks
        if weights is None:
            self.weights = None
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != masks.shape:
                raise ValueError("weights must match masks in length")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            self.weights = w

    @classmethod
    def from_subsets(cls, subsets: Iterable[Subset], p: int | None = None) -> "Observations":
        subsets = list(subsets)
        if p is None:
            if not subsets:
                raise ValueError("cannot infer domain size from an empty list")
            p = subsets[0].p
        for s in subsets:
            if s.p != p:
                raise ValueError("subsets disagree on domain size")
        return cls(np.array([s.mask for s in subsets], dtype=np.uint64), p)

    @property
    def n(self) -> float:
        """Total weight (record count when unweighted)."""
        if self.weights is None:
            return float(self.masks.size)
        return float(self.weights.sum())

    def indicator_matrix(self) -> np.ndarray:
        return mask_indicators(self.masks, self.p)

    def unique_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct masks and their total weights, sorted by mask value."""
        if self.weights is None:
            masks, counts = np.unique(self.masks, return_counts=True)
            return masks, counts.astype(float)
        masks, inverse = np.unique(self.masks, return_inverse=True)
        totals = np.zeros(masks.size)
        np.add.at(totals, inverse, self.weights)
        return masks, totals

    def subset(self, i: int) -> Subset:
        return Subset(int(self.masks[i]), self.p)

    def __len__(self) -> int:
        return self.masks.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Observations(self.masks[i], self.p,
                                None if self.weights is None else self.weights[i])
        return self.subset(int(i))

    def __repr__(self) -> str:
        return f"Observations(n={len(self)}, p={self.p})"


def as_observations(obs, p: int | None = None) -> Observations:
    if isinstance(obs, Observations):
        if p is not None and obs.p != p:
            raise ValueError(f"expected domain {p}, got {obs.p}")
        return obs
    return Observations.from_subsets(obs, p)


@dataclass(frozen=True)
class VariableProduct:
    """Several categorical variables merged into one, in row-major order.

    The combined index of ``(j_1, ..., j_d)`` is the mixed-radix value
    with the last variable varying fastest, so for two variables it is
    ``j_1 * p_2 + j_2``.
    """

    schemas: tuple[CategorySchema, ...]
    schema: CategorySchema = field(init=False)

    def __post_init__(self):
        total = 1
        for s in self.schemas:
            total *= s.p
        if total > MAX_CATEGORIES:
            raise DomainTooLarge(
                f"combined domain of size {total} exceeds {MAX_CATEGORIES}")
        labels = None
        if all(s.labels is not None for s in self.schemas):
            labels = []
            for idx in range(total):
                parts = self.levels_of_index(idx, total)
                labels.append("|".join(s.labels[j] for s, j in zip(self.schemas, parts)))
        object.__setattr__(self, "schema", CategorySchema(total, labels))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s.p for s in self.schemas)

    def index_of(self, levels: Sequence[int]) -> int:
        if len(levels) != len(self.schemas):
            raise ValueError("wrong number of levels")
        idx = 0
        for s, j in zip(self.schemas, levels):
            j = int(j)
            if not 0 <= j < s.p:
                raise ValueError(f"level {j} out of range for p={s.p}")
            idx = idx * s.p + j
        return idx

    def levels_of_index(self, idx: int, _total: int | None = None) -> tuple[int, ...]:
        total = _total if _total is not None else self.schema.p
        if not 0 <= idx < total:
            raise ValueError(f"combined index {idx} out of range")
        out = []
        for s in reversed(self.schemas):
            out.append(idx % s.p)
            idx //= s.p
        return tuple(reversed(out))

    def combine_distribution(self, *margins) -> Distribution:
        """Joint distribution of independent variables with these margins."""
        if len(margins) != len(self.schemas):
            raise ValueError("one margin per variable required")
        joint = np.array([1.0])
        for s, m in zip(self.schemas, margins):
            joint = np.kron(joint, as_prob_vector(m, s.p))
        return Distribution(joint)

    def marginal(self, w, k: int) -> Distribution:
        """Margin of variable ``k`` under a combined distribution."""
        vec = as_prob_vector(w, self.schema.p)
        cube = vec.reshape(self.sizes)
        axes = tuple(i for i in range(len(self.schemas)) if i != k)
        return Distribution(cube.sum(axis=axes))


def combine_variables(schemas: Sequence[CategorySchema]) -> VariableProduct:
    """Merge variables into a single row-major product variable."""
    if not schemas:
        raise ValueError("need at least one schema")
    return VariableProduct(tuple(schemas))
