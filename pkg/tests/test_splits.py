import numpy as np
import pytest

from didbcf.forest import split_candidates


class TestSplitCandidates:
    def test_constant_column_has_no_cuts(self):
        assert split_candidates(np.full(10, 3.0), 100).size == 0

    def test_four_distinct_values_give_midpoints(self):
        cuts = split_candidates(np.array([1.0, 2.0, 3.0, 4.0, 2.0, 3.0]), 100)
        np.testing.assert_allclose(cuts, [1.5, 2.5, 3.5])

    def test_large_column_gives_grid_quantiles(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=1000)
        cuts = split_candidates(values, 100)
        expected = np.quantile(values, np.arange(1, 101) / 101)
        assert cuts.size == 100
        np.testing.assert_allclose(cuts, expected)

    def test_no_empty_children(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            values = rng.choice([0.0, 1.0, 2.0, 5.0], size=50)
            cuts = split_candidates(values, 3)
            for c in cuts:
                assert (values <= c).any() and (values > c).any()

    def test_empty_node_rejected(self):
        with pytest.raises(ValueError):
            split_candidates(np.empty(0), 10)
