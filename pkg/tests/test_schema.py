import numpy as np
import pytest
from hypothesis import given, strategies as st

from subsetpriv import CategorySchema, Distribution, Observations, Subset, combine_variables
from subsetpriv.errors import DomainTooLarge


class TestSubset:
    def test_from_indices_roundtrip(self):
        s = Subset.from_indices([0, 2, 3], 4)
        assert s.indices == (0, 2, 3)
        assert s.size == 3
        assert s.contains(2) and not s.contains(1)

    def test_complement(self):
        s = Subset.from_indices([0, 1], 4)
        assert s.complement().indices == (2, 3)

    def test_empty_representable(self):
        assert Subset(0, 4).size == 0

    def test_mask_must_fit(self):
        with pytest.raises(ValueError):
            Subset(1 << 4, 4)

    def test_indicator(self):
        np.testing.assert_array_equal(Subset.from_indices([1, 3], 4).indicator(),
                                      [0, 1, 0, 1])


class TestDistribution:
    def test_valid(self):
        d = Distribution(np.array([0.1, 0.2, 0.3, 0.4]))
        assert d.p == 4
        assert d.mass(Subset.from_indices([1, 2], 4)) == pytest.approx(0.5)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            Distribution(np.array([0.5, 0.6]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Distribution(np.array([-0.1, 1.1]))

    def test_uniform_entropy(self):
        assert Distribution.uniform(4).entropy_bits() == pytest.approx(2.0)


class TestSchema:
    def test_labels_checked(self):
        with pytest.raises(ValueError):
            CategorySchema(3, ["a", "b"])
        with pytest.raises(ValueError):
            CategorySchema(2, ["a", "a"])

    def test_label_lookup(self):
        s = CategorySchema(2, ["low", "high"])
        assert s.index_of("high") == 1
        assert s.label(0) == "low"


class TestObservations:
    def test_sequence_protocol(self):
        obs = Observations(np.array([0b0011, 0b1100], dtype=np.uint64), 4)
        assert len(obs) == 2
        assert obs[0] == Subset.from_indices([0, 1], 4)
        assert [s.indices for s in obs] == [(0, 1), (2, 3)]

    def test_rejects_empty_subset(self):
        with pytest.raises(ValueError):
            Observations(np.array([0], dtype=np.uint64), 4)

    def test_unique_counts_weighted(self):
        obs = Observations(np.array([3, 3, 12], dtype=np.uint64), 4,
                           weights=np.array([1.0, 2.0, 4.0]))
        masks, counts = obs.unique_counts()
        np.testing.assert_array_equal(masks, [3, 12])
        np.testing.assert_allclose(counts, [3.0, 4.0])
        assert obs.n == 7.0

    def test_indicator_matrix(self):
        obs = Observations(np.array([0b0101], dtype=np.uint64), 4)
        np.testing.assert_array_equal(obs.indicator_matrix(), [[1, 0, 1, 0]])


class TestCombineVariables:
    def test_two_binary_row_major(self):
        gender = CategorySchema(2, ["female", "male"])
        income = CategorySchema(2, ["low", "high"])
        prod = combine_variables([gender, income])
        assert prod.schema.p == 4
        # row-major: (female, high) -> 0 * 2 + 1
        assert prod.index_of((0, 1)) == 1
        assert prod.levels_of_index(3) == (1, 1)
        assert prod.schema.labels[1] == "female|high"

    def test_two_by_three(self):
        prod = combine_variables([CategorySchema(2), CategorySchema(3)])
        assert prod.schema.p == 6
        assert prod.index_of((1, 2)) == 5

    def test_marginals_recover(self):
        prod = combine_variables([CategorySchema(2), CategorySchema(2)])
        w = [0.3, 0.2, 0.4, 0.1]
        np.testing.assert_allclose(prod.marginal(w, 0).w, [0.5, 0.5])
        np.testing.assert_allclose(prod.marginal(w, 1).w, [0.7, 0.3])

    def test_combine_distribution_is_product(self):
        prod = combine_variables([CategorySchema(2), CategorySchema(2)])
        joint = prod.combine_distribution([0.3, 0.7], [0.6, 0.4])
        np.testing.assert_allclose(joint.w, [0.18, 0.12, 0.42, 0.28])

    def test_cap(self):
        with pytest.raises(DomainTooLarge):
            combine_variables([CategorySchema(10)] * 3)

    @given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 15))
    def test_index_bijection(self, p1, p2, raw):
        prod = combine_variables([CategorySchema(p1), CategorySchema(p2)])
        idx = raw % (p1 * p2)
        assert prod.index_of(prod.levels_of_index(idx)) == idx
