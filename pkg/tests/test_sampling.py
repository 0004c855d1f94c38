import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from transopt.errors import ConfigError, InputError
from transopt.fnsuite import InstanceSpec, make_instance
from transopt.sampling import build_design, lhs_sample, minmax_scale


def stratum_counts(column, s):
    """Brute-force count of points per stratum [lo_k, hi_k) (last one closed)."""
    edges = -5.0 + 10.0 * np.arange(s + 1) / s
    counts = np.zeros(s, dtype=int)
    for v in column:
        for k in range(s):
            if edges[k] <= v < edges[k + 1] or (k == s - 1 and v == edges[s]):
                counts[k] += 1
                break
    return counts


class TestLhs:
    def test_one_dim_two_points(self):
        x = lhs_sample(1, 2, seed=5)[:, 0]
        assert sorted(x < 0) == [False, True]
        assert np.all((x >= -5) & (x <= 5))

    @pytest.mark.parametrize("d,s", [(2, 4), (3, 10), (5, 33)])
    def test_stratification(self, d, s):
        x = lhs_sample(d, s, seed=11)
        for j in range(d):
            assert np.all(stratum_counts(x[:, j], s) == 1)

    def test_deterministic(self):
        assert np.array_equal(lhs_sample(3, 20, 9), lhs_sample(3, 20, 9))
        assert not np.array_equal(lhs_sample(3, 20, 9), lhs_sample(3, 20, 10))

    def test_axes_use_independent_permutations(self):
        x = lhs_sample(2, 200, 1)
        assert abs(np.corrcoef(x[:, 0], x[:, 1])[0, 1]) < 0.3

    @pytest.mark.parametrize("d,s", [(0, 5), (2, 0)])
    def test_bad_arguments(self, d, s):
        with pytest.raises(ConfigError):
            lhs_sample(d, s, 0)

    @settings(max_examples=40, deadline=None)
    @given(d=st.integers(1, 4), s=st.integers(1, 60), seed=st.integers(0, 2**64 - 1))
    def test_stratification_property(self, d, s, seed):
        x = lhs_sample(d, s, seed)
        assert x.shape == (s, d)
        for j in range(d):
            assert np.all(stratum_counts(x[:, j], s) == 1)


class TestMinmaxScale:
    def test_examples(self):
        assert minmax_scale([2, 4, 6]).tolist() == [0.0, 0.5, 1.0]
        assert minmax_scale([7, 7, 7]).tolist() == [0.0, 0.0, 0.0]
        assert minmax_scale([-1, 1]).tolist() == [0.0, 1.0]

    def test_non_finite(self):
        with pytest.raises(InputError):
            minmax_scale([1.0, np.inf])

    def test_empty(self):
        with pytest.raises(InputError):
            minmax_scale([])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e6, 1e6)))
    def test_idempotent(self, v):
        if v.max() == v.min():
            return
        once = minmax_scale(v)
        assert np.max(np.abs(minmax_scale(once) - once)) <= 1e-15

    @settings(max_examples=100, deadline=None)
    @given(
        arrays(np.float64, st.integers(2, 50), elements=st.floats(-100, 100)),
        st.floats(0.01, 100),
        st.floats(-100, 100),
    )
    def test_affine_invariance(self, v, a, t):
        # rounding a * v + b costs about eps * (|a v| + |b|) / (a * spread) after
        # scaling, so keep max|v| and the offset b within 1e3 spreads
        spread = v.max() - v.min()
        assume(spread > 1e-3 * np.abs(v).max())
        b = a * spread * t
        assert np.max(np.abs(minmax_scale(a * v + b) - minmax_scale(v))) < 1e-12


class TestBuildDesign:
    def test_shape_d3(self):
        dm = build_design(make_instance(InstanceSpec(4, 1, 3)), 50, 0)
        assert dm.as_input().shape == (150, 4)
        assert dm.class_label == 4

    def test_sample_count_d20(self):
        dm = build_design(make_instance(InstanceSpec(1, 1, 20)), 100, 0)
        assert dm.s == 2000

    def test_scaled_range(self):
        dm = build_design(make_instance(InstanceSpec(9, 2, 3)), 50, 0)
        assert dm.y.min() == 0.0 and dm.y.max() == 1.0
        assert np.all(np.abs(dm.x) <= 5.0)

    def test_multiplier_guard(self):
        inst = make_instance(InstanceSpec(1, 1, 2))
        with pytest.raises(ConfigError):
            build_design(inst, 10, 0)
        assert build_design(inst, 10, 0, allow_any_multiplier=True).s == 20

    def test_seed_changes_sample(self):
        inst = make_instance(InstanceSpec(1, 1, 3))
        assert not np.array_equal(build_design(inst, 50, 0).x, build_design(inst, 50, 1).x)
        assert np.array_equal(build_design(inst, 50, 3).x, build_design(inst, 50, 3).x)
