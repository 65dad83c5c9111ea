"""Norms: pinned values, homogeneity, symmetry, smooth-region flags."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotlab.group import FiliformGroup, engel_group
from carnotlab.norms import (
    NormKind,
    aux_seminorm,
    engel_kind,
    engel_norm,
    engel_seminorm,
    equivalence_band,
    filiform_kind,
    filiform_norm,
    filiform_seminorm,
    norm_value,
    smooth_mask,
    smooth_region,
)


class TestPinnedValues:
    def test_engel_seminorm_ignores_top_coordinate(self):
        assert engel_seminorm(np.array([0.0, 0, 0, 5])) == 0.0

    def test_engel_seminorm_value(self):
        assert engel_seminorm(np.array([1.0, 1, 1, 1])) == pytest.approx(
            np.sqrt(3), abs=1e-12
        )

    def test_engel_norm_at_origin(self):
        assert engel_norm(np.zeros(4)) == 0.0

    def test_engel_norm_value(self):
        expected = (3.0**1.5 + 1.0) ** (1.0 / 3.0)
        assert engel_norm(np.array([1.0, 1, 1, 1])) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(1.8368, abs=1e-4)

    def test_filiform_norm_step3_value(self):
        g = FiliformGroup(3)
        expected = (2.0 * 3.0**1.5 + 1.0) ** (1.0 / 3.0)
        got = filiform_norm(g, np.array([1.0, 1, 1, 1]))
        assert got == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(2.2501, abs=1e-4)

    def test_filiform_norm_first_axis(self):
        # Single nonzero x_1 = 1: every S_j equals 1, so |x|^n = n - 1.
        for n in (3, 4, 6):
            g = FiliformGroup(n)
            x = np.zeros(n + 1)
            x[0] = 1.0
            assert filiform_norm(g, x) == pytest.approx((n - 1) ** (1.0 / n), abs=1e-12)
        assert filiform_norm(FiliformGroup(3), np.array([1.0, 0, 0, 0])) == pytest.approx(
            2.0 ** (1.0 / 3.0), abs=1e-12
        )

    def test_filiform_x2_double_count(self):
        # The j=2 summand is (|x1|^((n+1)/2) + 2|x2|^((n+1)/2))^beta.
        n = 4
        g = FiliformGroup(n)
        x = np.array([0.0, 1.0, 0, 0, 0])
        beta = 2.0 * n / (n + 1)
        expected = (2.0**beta + 1.0 + 1.0) ** (1.0 / n)  # S_2 = 2, S_3 = S_4 = 1
        assert filiform_norm(g, x) == pytest.approx(expected, abs=1e-12)

    def test_aux_seminorm(self):
        assert aux_seminorm(engel_kind(), np.array([3.0, -2, 1, 1])) == 2.0
        assert aux_seminorm(filiform_kind(4), np.array([-2.0, 5, 0, 0, 0])) == 2.0
        assert aux_seminorm(engel_kind(), np.zeros(4)) == 0.0


class TestKindValidation:
    def test_engel_requires_step_three(self):
        with pytest.raises(ValueError):
            NormKind("engel", FiliformGroup(4))

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            NormKind("other", engel_group())

    def test_filiform_any_step(self):
        for n in (3, 5, 12):
            NormKind("filiform", FiliformGroup(n))


@pytest.mark.parametrize(
    "kind",
    [engel_kind(), filiform_kind(3), filiform_kind(4), filiform_kind(6)],
    ids=lambda k: f"{k.variant}-n{k.group.step}",
)
class TestHomogeneityAndSymmetry:
    def test_exact_homogeneity(self, kind):
        g = kind.group
        rng = np.random.default_rng(11)
        x = rng.uniform(-5, 5, size=(2000, g.dimension))
        lam = rng.uniform(0.1, 4.0, size=2000)
        scaled = np.stack([g.dilate(l, xi) for l, xi in zip(lam, x)])
        n_x = norm_value(kind, x)
        n_s = norm_value(kind, scaled)
        assert np.max(np.abs(n_s - lam * n_x)) <= 1e-12 * np.max(lam * n_x) * 10

    def test_positive_off_origin(self, kind):
        g = kind.group
        rng = np.random.default_rng(12)
        x = rng.uniform(-5, 5, size=(500, g.dimension))
        vals = norm_value(kind, x)
        assert np.all(vals[np.max(np.abs(x), axis=1) > 1e-9] > 0)
        assert norm_value(kind, np.zeros(g.dimension)) == 0.0

    def test_single_sign_flip_invariance(self, kind):
        g = kind.group
        rng = np.random.default_rng(13)
        x = rng.uniform(-5, 5, size=(500, g.dimension))
        base = norm_value(kind, x)
        for j in range(g.dimension):
            flipped = x.copy()
            flipped[:, j] *= -1.0
            np.testing.assert_allclose(norm_value(kind, flipped), base, rtol=1e-14)

    def test_continuity_at_hyperplanes(self, kind):
        # Values approaching a singular hyperplane converge to the on-plane value.
        g = kind.group
        rng = np.random.default_rng(14)
        x = rng.uniform(-3, 3, size=(100, g.dimension))
        for j in kind.singular_axes:
            on = x.copy()
            on[:, j] = 0.0
            near = on.copy()
            near[:, j] = 1e-9
            assert np.max(np.abs(norm_value(kind, near) - norm_value(kind, on))) < 1e-5


class TestSmoothRegion:
    def test_engel_smooth_point(self):
        flag = smooth_region(engel_kind(), np.array([1.0, 1, 1, 1]))
        assert flag.is_smooth
        assert flag.violated == ()
        assert flag.component_signs == (1, 1)

    def test_engel_hyperplane_point(self):
        flag = smooth_region(engel_kind(), np.array([1.0, 1, 0, 1]))
        assert not flag.is_smooth
        assert flag.violated == (2,)

    def test_engel_first_coordinates_do_not_matter(self):
        flag = smooth_region(engel_kind(), np.array([0.0, 0, 1, 1]))
        assert flag.is_smooth

    def test_filiform_all_axes_matter(self):
        kind = filiform_kind(4)
        flag = smooth_region(kind, np.array([1.0, 1, 1, 1, 1]))
        assert flag.is_smooth
        flag = smooth_region(kind, np.array([0.0, 1, 1, 1, 1]))
        assert flag.violated == (0,)

    def test_relative_tolerance(self):
        # |x_3| below 1e-9*(1+max|x|) counts as vanishing.
        kind = engel_kind()
        assert not smooth_region(kind, np.array([100.0, 0, 5e-8, 1])).is_smooth
        assert smooth_region(kind, np.array([0.1, 0.1, 5e-8, 1])).is_smooth

    def test_mask_matches_flags(self):
        kind = filiform_kind(3)
        rng = np.random.default_rng(15)
        pts = rng.uniform(-2, 2, size=(200, 4))
        pts[::5, 2] = 0.0
        mask = smooth_mask(kind, pts)
        for p, ok in zip(pts, mask):
            assert smooth_region(kind, p).is_smooth == ok


class TestEquivalenceBand:
    def test_band_is_proper_and_stable(self):
        lo1, hi1 = equivalence_band(nsamples=20000, seed=0)
        lo2, hi2 = equivalence_band(nsamples=20000, seed=1)
        assert 0 < lo1 <= hi1 < np.inf
        assert abs(lo1 - lo2) <= 0.02 * lo1 + 1e-12
        assert abs(hi1 - hi2) <= 0.02 * hi1
        # The two norms genuinely differ.
        assert hi1 > 1.05

    def test_matches_direct_ratio(self):
        g = engel_group()
        rng = np.random.default_rng(3)
        pts = rng.uniform(-5, 5, size=(100, 4))
        r = filiform_norm(g, pts) / engel_norm(pts)
        lo, hi = equivalence_band(nsamples=50000, seed=0)
        assert np.all(r >= lo - 1e-9) or np.min(r) >= lo * 0.98
        assert np.all(r <= hi + 1e-9) or np.max(r) <= hi * 1.02


@given(
    lam=st.floats(0.05, 10.0, allow_nan=False),
    coords=st.lists(st.floats(-8, 8, width=64), min_size=5, max_size=5),
)
@settings(max_examples=80, deadline=None)
def test_filiform_homogeneity_property(lam, coords):
    g = FiliformGroup(4)
    x = np.array(coords)
    lhs = filiform_norm(g, g.dilate(lam, x))
    rhs = lam * filiform_norm(g, x)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, rhs)


def test_seminorm_homogeneity():
    g = FiliformGroup(5)
    rng = np.random.default_rng(77)
    x = rng.uniform(-4, 4, size=(300, 6))
    lam = 1.7
    np.testing.assert_allclose(
        filiform_seminorm(g, g.dilate(lam, x)),
        lam * filiform_seminorm(g, x),
        rtol=1e-12,
    )
