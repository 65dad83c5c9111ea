"""Homogeneous norms on filiform groups and their smooth regions.

Two norm families are provided on the step-n group.

Step-3 norm (`engel_norm`), built from the seminorm
``|x| = (x_1^2 + x_2^2 + |x_3|)^(1/2)``:

    N(x) = (|x|^3 + |x_4|)^(1/3).

General filiform norm (`filiform_norm`), any step n >= 3, built from

    |x|^n = sum_{j=2}^{n} S_j^(2n/(n+1)),
    S_j = |x_1|^((n+1)/2) + |x_2|^((n+1)/2) + |x_j|^((n+1)/(2(j-1))),

as ``(|x|^n + |x_{n+1}|)^(1/n)``.  Note the j = 2 summand counts |x_2| twice
(its own power term coincides with the shared one); the formula is kept
verbatim, and downstream derivative code honours the doubled term.

Both norms are exactly 1-homogeneous under the weighted dilations, positive
off the origin, continuous, and invariant under flipping the sign of any one
coordinate.  The step-3 norm is smooth except on {x_3 = 0} and {x_4 = 0}; the
filiform norm is smooth except on every coordinate hyperplane.  The scalar
seminorm `aux_seminorm` (|x_2| for the step-3 kind, |x_1| for the filiform
kind) is the quantity whose powers weight the energy-method inequalities in
the measures and inequality modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .group import FiliformGroup, _as_batch, engel_group

ENGEL = "engel"
FILIFORM = "filiform"

SINGULAR_RTOL = 1e-9


@dataclass(frozen=True)
class NormKind:
    """Selects one norm family on a concrete group.

    variant "engel" requires a step-3 group; "filiform" accepts any step.
    """

    variant: str
    group: FiliformGroup

    def __post_init__(self) -> None:
        if self.variant not in (ENGEL, FILIFORM):
            raise ValueError(f"unknown norm variant {self.variant!r}")
        if self.variant == ENGEL and self.group.step != 3:
            raise ValueError("the engel norm kind requires a step-3 group")

    @property
    def singular_axes(self) -> tuple[int, ...]:
        """0-based coordinate indices whose vanishing breaks smoothness."""
        if self.variant == ENGEL:
            return (2, 3)
        return tuple(range(self.group.dimension))

    @property
    def aux_axis(self) -> int:
        """0-based index of the coordinate returned by aux_seminorm."""
        return 1 if self.variant == ENGEL else 0


def engel_kind() -> NormKind:
    return NormKind(ENGEL, engel_group())


def filiform_kind(n: int) -> NormKind:
    return NormKind(FILIFORM, FiliformGroup(n))


@dataclass(frozen=True)
class SmoothRegionFlag:
    """Membership report for the norm's smooth region at one point.

    `violated` lists the 0-based coordinate indices found (numerically) on a
    singular hyperplane; `component_signs` gives the sign pattern of the
    singularity-relevant coordinates, identifying the connected component of
    the smooth region when `is_smooth` holds.
    """

    is_smooth: bool
    violated: tuple[int, ...]
    component_signs: tuple[int, ...]


def engel_seminorm(x: np.ndarray) -> np.ndarray:
    """(x_1^2 + x_2^2 + |x_3|)^(1/2) on the step-3 group."""
    xb, single = _as_batch(x, 4)
    out = np.sqrt(xb[:, 0] ** 2 + xb[:, 1] ** 2 + np.abs(xb[:, 2]))
    return out[0] if single else out


def engel_norm(x: np.ndarray) -> np.ndarray:
    """(seminorm^3 + |x_4|)^(1/3) on the step-3 group."""
    xb, single = _as_batch(x, 4)
    sem = np.sqrt(xb[:, 0] ** 2 + xb[:, 1] ** 2 + np.abs(xb[:, 2]))
    out = np.cbrt(sem**3 + np.abs(xb[:, 3]))
    return out[0] if single else out


def _filiform_s_terms(group: FiliformGroup, xb: np.ndarray) -> np.ndarray:
    """Stack of S_j for j = 2..n, shape (n-1, m)."""
    n = group.step
    half = (n + 1) / 2.0
    a_pow = np.abs(xb[:, 0]) ** half
    b_pow = np.abs(xb[:, 1]) ** half
    rows = []
    for j in range(2, n + 1):
        t = np.abs(xb[:, j - 1]) ** ((n + 1) / (2.0 * (j - 1)))
        rows.append(a_pow + b_pow + t)
    return np.stack(rows, axis=0)


def filiform_seminorm(group: FiliformGroup, x: np.ndarray) -> np.ndarray:
    """The degree-1 homogeneous seminorm |x| with |x|^n = sum_j S_j^(2n/(n+1))."""
    xb, single = _as_batch(x, group.dimension)
    n = group.step
    beta = 2.0 * n / (n + 1)
    s = _filiform_s_terms(group, xb)
    out = np.sum(s**beta, axis=0) ** (1.0 / n)
    return out[0] if single else out


def filiform_norm(group: FiliformGroup, x: np.ndarray) -> np.ndarray:
    """(|x|^n + |x_{n+1}|)^(1/n) for the filiform seminorm above."""
    xb, single = _as_batch(x, group.dimension)
    n = group.step
    beta = 2.0 * n / (n + 1)
    s = _filiform_s_terms(group, xb)
    out = (np.sum(s**beta, axis=0) + np.abs(xb[:, -1])) ** (1.0 / n)
    return out[0] if single else out


def norm_value(kind: NormKind, x: np.ndarray) -> np.ndarray:
    """Evaluate the norm selected by `kind`."""
    if kind.variant == ENGEL:
        return engel_norm(x)
    return filiform_norm(kind.group, x)


def seminorm_value(kind: NormKind, x: np.ndarray) -> np.ndarray:
    """Evaluate the paired seminorm selected by `kind`."""
    if kind.variant == ENGEL:
        return engel_seminorm(x)
    return filiform_seminorm(kind.group, x)


def aux_seminorm(kind: NormKind, x: np.ndarray) -> np.ndarray:
    """|x_2| for the engel kind, |x_1| for the filiform kind."""
    xb, single = _as_batch(x, kind.group.dimension)
    out = np.abs(xb[:, kind.aux_axis])
    return out[0] if single else out


def smooth_region(kind: NormKind, x: np.ndarray) -> SmoothRegionFlag:
    """Classify a single point against the norm's singular hyperplanes.

    A coordinate counts as vanishing when |x_j| < 1e-9 * (1 + max_k |x_k|);
    the relative tolerance keeps sign functions meaningful on the scale of
    the point itself.
    """
    xp = np.asarray(x, dtype=np.float64)
    if xp.shape != (kind.group.dimension,):
        raise ValueError("smooth_region expects a single point")
    tol = SINGULAR_RTOL * (1.0 + np.max(np.abs(xp)))
    violated = tuple(j for j in kind.singular_axes if abs(xp[j]) < tol)
    signs = tuple(int(np.sign(xp[j])) for j in kind.singular_axes)
    return SmoothRegionFlag(len(violated) == 0, violated, signs)


def smooth_mask(kind: NormKind, x: np.ndarray) -> np.ndarray:
    """Vectorised smooth-region membership for a batch of points."""
    xb, single = _as_batch(x, kind.group.dimension)
    tol = SINGULAR_RTOL * (1.0 + np.max(np.abs(xb), axis=1))
    ok = np.ones(xb.shape[0], dtype=bool)
    for j in kind.singular_axes:
        ok &= np.abs(xb[:, j]) >= tol
    return ok[0] if single else ok


def equivalence_band(
    nsamples: int = 100_000, seed: int = 0, box: float = 5.0
) -> tuple[float, float]:
    """Empirical band of filiform(3)-norm over step-3-norm ratios.

    Samples nonzero points uniformly in a box and returns (min, max) of the
    ratio.  The two norms are equivalent but not equal, so the band is a
    proper interval with positive lower edge.
    """
    g = engel_group()
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(nsamples, 4))
    keep = np.max(np.abs(pts), axis=1) > 1e-12
    pts = pts[keep]
    ratio = filiform_norm(g, pts) / engel_norm(pts)
    return float(np.min(ratio)), float(np.max(ratio))
