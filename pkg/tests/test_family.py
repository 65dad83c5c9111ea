"""Test-function family: construction, exact gradients, symmetry, audits."""

from __future__ import annotations

import numpy as np
import pytest

from carnotlab.calculus import fd_frame_first, norm_derivative_tables
from carnotlab.family import (
    TestFunction,
    TestFunctionFamily,
    central_shift_member,
    default_family,
    family_audit,
    monomial_member,
    weighted_monomial_exponents,
)
from carnotlab.frames import left_frame, right_frame_engel
from carnotlab.norms import ENGEL, NormKind, engel_kind, filiform_kind


def natural_frame(kind: NormKind):
    if kind.variant == ENGEL:
        return right_frame_engel(kind.group)
    return left_frame(kind.group)


def smooth_points(kind: NormKind, count: int, seed: int) -> np.ndarray:
    """Points with every coordinate well inside one sign region.

    The top coordinate sits in (2.2, 3.0) so the +-1 central shifts stay
    clear of the norm's singular set too.
    """
    rng = np.random.default_rng(seed)
    d = kind.group.dimension
    pts = rng.uniform(0.4, 1.4, size=(count, d))
    pts[:, -1] = rng.uniform(2.2, 3.0, size=count)
    return pts


def mirror(x: np.ndarray) -> np.ndarray:
    """The automorphism x_1 -> -x_1, x_k -> (-1)^k x_k for k >= 2."""
    out = np.array(x, dtype=np.float64, copy=True)
    out[..., 0] = -out[..., 0]
    for k in range(2, out.shape[-1] + 1):
        out[..., k - 1] = (-1.0) ** k * out[..., k - 1]
    return out


class TestEnumeration:
    def test_engel_count_and_order(self):
        expts = weighted_monomial_exponents(engel_kind(), 3)
        assert len(expts) == 14
        assert expts[0] == (0, 0, 0, 0)
        weights = (1, 1, 2, 3)
        degs = [sum(e * w for e, w in zip(t, weights)) for t in expts]
        assert degs == sorted(degs)
        assert max(degs) <= 3
        # Within a degree the order is lexicographic.
        for d in set(degs):
            chunk = [t for t, dd in zip(expts, degs) if dd == d]
            assert chunk == sorted(chunk)

    def test_count_is_step_independent(self):
        # Coordinates past x4 have weight > 3 and cannot appear.
        for n in (4, 5, 6):
            assert len(weighted_monomial_exponents(filiform_kind(n), 3)) == 14

    def test_no_duplicates(self):
        expts = weighted_monomial_exponents(filiform_kind(5), 3)
        assert len(set(expts)) == len(expts)


class TestConstruction:
    def test_size_and_split(self):
        fam = default_family(engel_kind(), q=1.5)
        assert len(fam) >= 70
        assert len(fam.train_indices) == 50
        assert len(fam.holdout_indices) == len(fam) - 50
        assert len(fam.holdout_indices) >= 20
        assert not set(fam.train_indices) & set(fam.holdout_indices)
        assert sorted(fam.train_indices + fam.holdout_indices) == list(
            range(len(fam))
        )

    def test_contains_coordinates_and_constant(self):
        fam = default_family(engel_kind(), q=1.5)
        labels = [m.label for m in fam.members]
        assert "x1" in labels
        assert "x2" in labels
        constant = [m for m in fam.members if m.is_constant]
        assert len(constant) == 1
        assert constant[0].label == "one"
        assert constant[0] in fam.train_members

    def test_labels_unique(self):
        for kind in (engel_kind(), filiform_kind(4)):
            fam = default_family(kind, q=2.0)
            labels = [m.label for m in fam.members]
            assert len(set(labels)) == len(labels)

    def test_deterministic(self):
        a = default_family(engel_kind(), q=1.5)
        b = default_family(engel_kind(), q=1.5)
        assert [m.label for m in a.members] == [m.label for m in b.members]
        assert a.train_indices == b.train_indices
        assert a.holdout_indices == b.holdout_indices

    def test_rejects_bad_q(self):
        with pytest.raises(ValueError):
            default_family(engel_kind(), q=1.0)

    def test_rejects_overlapping_split(self):
        fam = default_family(engel_kind(), q=1.5)
        with pytest.raises(ValueError, match="overlap"):
            TestFunctionFamily(
                kind=fam.kind,
                q=fam.q,
                members=fam.members,
                train_indices=(0, 1),
                holdout_indices=(1, 2),
                description="bad",
            )


class TestGradients:
    @pytest.mark.parametrize(
        "kind", [engel_kind(), filiform_kind(4)], ids=["engel", "fil4"]
    )
    def test_every_member_matches_finite_differences(self, kind):
        fam = default_family(kind, q=1.5)
        frame = natural_frame(kind)
        pts = smooth_points(kind, 25, seed=11)
        for member in fam.members:
            exact = member.gradient(pts)
            approx = fd_frame_first(member.value, frame, pts, h=1e-3)
            scale = np.max(np.abs(exact)) + 1.0
            assert np.max(np.abs(exact - approx)) <= 1e-6 * scale, member.label

    def test_constant_gradient_is_zero(self):
        fam = default_family(engel_kind(), q=1.5)
        one = next(m for m in fam.members if m.is_constant)
        pts = smooth_points(engel_kind(), 10, seed=3)
        assert np.all(one.gradient(pts) == 0.0)
        assert np.all(one.value(pts) == 1.0)

    def test_monomial_values(self):
        kind = engel_kind()
        member = monomial_member(kind, (2, 1))
        pts = smooth_points(kind, 8, seed=5)
        np.testing.assert_allclose(
            member.value(pts), pts[:, 0] ** 2 * pts[:, 1], rtol=1e-15
        )


class TestSymmetry:
    def test_mirror_is_automorphism(self):
        g = engel_kind().group
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 4))
        y = rng.normal(size=(50, 4))
        lhs = mirror(g.compose(x, y))
        rhs = g.compose(mirror(x), mirror(y))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    @pytest.mark.parametrize(
        "kind", [engel_kind(), filiform_kind(4)], ids=["engel", "fil4"]
    )
    def test_mirror_closure(self, kind):
        """Each member composed with the mirror is +- some member."""
        fam = default_family(kind, q=1.5)
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(40, kind.group.dimension))
        values = np.stack([m.value(pts) for m in fam.members])
        mirrored = np.stack([m.value(mirror(pts)) for m in fam.members])
        for i, row in enumerate(mirrored):
            hit = np.any(
                np.all(np.abs(values - row) <= 1e-12, axis=1)
                | np.all(np.abs(values + row) <= 1e-12, axis=1)
            )
            assert hit, fam.members[i].label


class TestShifts:
    def test_central_shift_is_group_translation(self):
        # The shift element lies in the center: both product orders agree
        # and reduce to coordinate addition, which the member exploits.
        kind = engel_kind()
        g = kind.group
        base = monomial_member(kind, (1, 1))
        member = central_shift_member(kind, base, 0.7)
        c = np.zeros(4)
        c[-1] = 0.7
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(30, 4))
        right = np.array([g.compose(p, c) for p in pts])
        left = np.array([g.compose(c, p) for p in pts])
        np.testing.assert_allclose(right, pts + c, atol=1e-14)
        np.testing.assert_allclose(left, pts + c, atol=1e-14)
        np.testing.assert_allclose(
            member.value(pts), base.value(right), atol=1e-14
        )


class TestAudit:
    def test_moments_finite_on_gaussianish_cloud(self):
        kind = engel_kind()
        fam = default_family(kind, q=1.5)
        rng = np.random.default_rng(4)
        coords = rng.normal(size=(4_000, 4))
        audit = family_audit(fam, coords)
        assert audit.all_finite is True
        assert len(audit.labels) == len(fam)
        one_idx = audit.labels.index("one")
        assert audit.value_moments[one_idx] == pytest.approx(1.0)
        assert audit.gradient_moments[one_idx] == 0.0

    def test_nonconstant_requirement(self):
        kind = engel_kind()
        one = monomial_member(kind, (0, 0, 0, 0))
        with pytest.raises(ValueError, match="nonconstant"):
            TestFunctionFamily(
                kind=kind,
                q=2.0,
                members=(one,),
                train_indices=(0,),
                holdout_indices=(),
                description="only the constant",
            )


class TestTags:
    def test_tags_partition_sensibly(self):
        fam = default_family(engel_kind(), q=1.5)
        by_tag = {}
        for m in fam.members:
            for t in m.tags:
                by_tag.setdefault(t, []).append(m.label)
        assert len(by_tag.get("monomial", [])) >= 14
        assert len(by_tag.get("bump", [])) >= 42
        assert len(by_tag.get("shifted", [])) == 12  # 6 shifts + 6 rescaled
        assert len(by_tag.get("rescaled", [])) == 6
        assert len(by_tag.get("truncation", [])) >= 3
