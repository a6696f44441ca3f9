import math

import numpy as np
import pytest

from byzsgd.vectors import (
    INF,
    as_stack,
    distances_to,
    lp_dist,
    lp_norm,
    norm_order,
    pairwise_distances,
    pnorm_pow,
    root,
)

import oracles


class TestNormOrder:
    @pytest.mark.parametrize("raw, expected", [(1, 1), (2, 2), (7, 7), ("3", 3), ("inf", INF), (INF, INF)])
    def test_accepts(self, raw, expected):
        assert norm_order(raw) == expected

    @pytest.mark.parametrize("raw", [0, -1, "zero"])
    def test_rejects_values(self, raw):
        with pytest.raises(ValueError):
            norm_order(raw)

    @pytest.mark.parametrize("raw", [2.0, math.inf, True])
    def test_rejects_types(self, raw):
        with pytest.raises(TypeError):
            norm_order(raw)


class TestNorms:
    def test_known_values(self):
        v = [3.0, -4.0]
        assert lp_norm(v, 1) == 7.0
        assert lp_norm(v, 2) == 5.0
        assert lp_norm(v, INF) == 4.0

    def test_large_p_does_not_overflow(self):
        assert lp_norm([1e200, 1e200], 3) == pytest.approx(1e200 * 2 ** (1 / 3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            lp_dist([1.0, 2.0], [1.0], 2)

    @pytest.mark.parametrize("p", [1, 2, 3, INF])
    def test_pairwise_matches_loops(self, p):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((6, 5))
        dm = pairwise_distances(x, p)
        ref_p = math.inf if p is INF else p
        for i in range(6):
            assert dm[i, i] == 0.0
            for j in range(6):
                assert dm[i, j] == pytest.approx(oracles.dist(x[i], x[j], ref_p), rel=1e-12)
                assert dm[i, j] == dm[j, i]

    @pytest.mark.parametrize("p", [1, 2, 4, INF])
    def test_distances_to_agrees_with_pairwise(self, p):
        x = np.random.default_rng(5).standard_normal((4, 3))
        np.testing.assert_allclose(distances_to(x[0], x, p), pairwise_distances(x, p)[0], rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("p", [1, 2, 3, INF])
    def test_pnorm_pow_root_roundtrip(self, p):
        v = np.random.default_rng(6).standard_normal((3, 8))
        expected = [lp_norm(r, p) for r in v]
        np.testing.assert_allclose(root(pnorm_pow(v, p), p), expected, rtol=1e-12)


class TestStacks:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_stack([[0.0, np.nan]])

    def test_rejects_ragged(self):
        with pytest.raises(ValueError, match="mismatched"):
            as_stack([[0.0, 1.0], [1.0]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            as_stack([])

    def test_single_row_distance_matrix(self):
        assert pairwise_distances([[1.0, 2.0]]).shape == (1, 1)
