"""Horizontal gradient and sub-Laplacian along a two-generator frame.

For a frame with horizontal fields X_1, X_2 the horizontal gradient of a
scalar field f is (X_1 f, X_2 f) and the sub-Laplacian is X_1^2 f + X_2^2 f.
Derivatives come from an analytic table when the field carries one, and
otherwise from finite differences along frame directions:

* first order: 4th-order central stencil on t -> f(x + t V) with V the frame
  coefficient vector frozen at x (exact convention for first derivatives,
  since X f(x) = V . grad f(x));
* second order: a central difference of the first-order map z -> (X f)(z),
  which re-evaluates the coefficients at the displaced points, so the
  product-rule term of non-constant coefficients is picked up.

`norm_derivative_tables` builds closed-form first and second frame
derivatives of the homogeneous norms: the step-3 norm along the
right-canonical frame and the filiform norm along the left-canonical frame.
All table methods are vectorised over point batches and valid on the norm's
smooth region only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .frames import Frame, left_frame, right_frame_engel
from .group import _as_batch
from .norms import (
    ENGEL,
    NormKind,
    engel_norm,
    engel_seminorm,
    filiform_norm,
    filiform_seminorm,
    smooth_mask,
)


class SingularPointError(ValueError):
    """Raised when a derivative is requested outside the smoothness domain."""


@dataclass(frozen=True)
class HorizontalVector:
    """A horizontal tangent vector: coefficients along (X_1, X_2) plus length.

    `components` has shape (2,) for a single point or (m, 2) for a batch;
    `norm` is the Euclidean length of the component pair.
    """

    components: np.ndarray
    norm: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        comps = np.asarray(self.components, dtype=np.float64)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "norm", np.sqrt(np.sum(comps**2, axis=-1)))


@dataclass
class ScalarField:
    """A scalar function on the group, with optional smoothness data.

    value:
        Vectorised evaluator mapping a batch (m, d) to values (m,).
    smooth:
        Optional predicate mapping a batch to a boolean mask; points failing
        it make derivative calls raise SingularPointError.
    table:
        Optional analytic frame-derivative table (an object with a `frame`
        attribute and `first`/`second` batch methods); used instead of finite
        differences when its frame label matches.
    """

    value: Callable[[np.ndarray], np.ndarray]
    smooth: Callable[[np.ndarray], np.ndarray] | None = None
    table: "NormDerivativeTable | None" = None


def directional_stencil(
    value_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    v: np.ndarray,
    h: float,
) -> np.ndarray:
    """4th-order central difference of t -> value_fn(x + t v) at t = 0."""
    return (
        -value_fn(x + 2 * h * v)
        + 8.0 * value_fn(x + h * v)
        - 8.0 * value_fn(x - h * v)
        + value_fn(x - 2 * h * v)
    ) / (12.0 * h)


def fd_frame_first(
    value_fn: Callable[[np.ndarray], np.ndarray],
    frame: Frame,
    x: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Finite-difference (X_1 f, X_2 f), shape (m, 2)."""
    xb, _ = _as_batch(x, frame.group.dimension)
    cols = [
        directional_stencil(value_fn, xb, f.coefficients(xb), h)
        for f in frame.horizontal
    ]
    return np.stack(cols, axis=-1)


def fd_frame_second(
    value_fn: Callable[[np.ndarray], np.ndarray],
    frame: Frame,
    x: np.ndarray,
    h1: float = 1e-5,
    h2: float = 1e-4,
) -> np.ndarray:
    """Finite-difference (X_1^2 f, X_2^2 f), shape (m, 2).

    The outer difference displaces along the coefficient vector frozen at x
    while the inner first-derivative map re-reads coefficients at the
    displaced points, matching the composition X(X f).
    """
    xb, _ = _as_batch(x, frame.group.dimension)
    out = []
    for f in frame.horizontal:
        def first(z, f=f):
            return directional_stencil(value_fn, z, f.coefficients(z), h1)

        v = f.coefficients(xb)
        out.append((first(xb + h2 * v) - first(xb - h2 * v)) / (2.0 * h2))
    return np.stack(out, axis=-1)


def _check_smooth(f: ScalarField, xb: np.ndarray) -> None:
    if f.smooth is not None:
        ok = np.asarray(f.smooth(xb))
        if not np.all(ok):
            bad = int(np.argmin(ok))
            raise SingularPointError(
                f"point {xb[bad]} lies outside the field's smoothness domain"
            )


def subgradient(f: ScalarField, frame: Frame, x: np.ndarray) -> HorizontalVector:
    """Horizontal gradient (X_1 f, X_2 f) at x (single point or batch)."""
    xb, single = _as_batch(x, frame.group.dimension)
    _check_smooth(f, xb)
    if f.table is not None and f.table.frame.label == frame.label:
        comps = f.table.first(xb)
    else:
        comps = fd_frame_first(f.value, frame, xb)
    return HorizontalVector(comps[0] if single else comps)


def sublaplacian(f: ScalarField, frame: Frame, x: np.ndarray) -> np.ndarray:
    """X_1^2 f + X_2^2 f at x (single point or batch)."""
    xb, single = _as_batch(x, frame.group.dimension)
    _check_smooth(f, xb)
    if f.table is not None and f.table.frame.label == frame.label:
        second = f.table.second(xb)
    else:
        second = fd_frame_second(f.value, frame, xb)
    out = np.sum(second, axis=-1)
    return out[0] if single else out


class NormDerivativeTable:
    """Closed-form frame derivatives of a homogeneous norm.

    Subclasses fix the norm kind and its natural frame and implement
    vectorised `value`, `seminorm`, `first` (X_i N, shape (m, 2)) and
    `second` (X_i^2 N, shape (m, 2)).  Values are only meaningful on the
    smooth region; no masking is applied here.
    """

    kind: NormKind
    frame: Frame

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def seminorm(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def first(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def second(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient_norm(self, x: np.ndarray) -> np.ndarray:
        comps = self.first(x)
        return np.sqrt(np.sum(comps**2, axis=-1))

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        return np.sum(self.second(x), axis=-1)

    def as_scalar_field(self) -> ScalarField:
        kind = self.kind
        return ScalarField(
            value=lambda X: _norm_of(kind, X),
            smooth=lambda X: smooth_mask(kind, X),
            table=self,
        )


def _norm_of(kind: NormKind, x: np.ndarray) -> np.ndarray:
    if kind.variant == ENGEL:
        return engel_norm(x)
    return filiform_norm(kind.group, x)


class EngelNormTable(NormDerivativeTable):
    """Step-3 norm along the right-canonical frame.

    With g = |x|^3 + |x_4|, s_k = sgn(x_k) and w = 2 x_1 - x_2 s_3:

        X_1 g = 1.5 |x| w - x_3 s_4          X_2 g = 3 |x| x_2
        X_1^2 g = 3 w^2/(4|x|) + 3|x| + x_2 s_4
        X_2^2 g = 3 x_2^2/|x| + 3 |x|

    and N = g^(1/3) gives X_i N = X_i g/(3 N^2),
    X_i^2 N = X_i^2 g/(3 N^2) - (2/9)(X_i g)^2/N^5.
    """

    def __init__(self, kind: NormKind):
        if kind.variant != ENGEL:
            raise ValueError("EngelNormTable requires the engel norm kind")
        self.kind = kind
        self.frame = right_frame_engel(kind.group)

    def value(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, 4)
        out = engel_norm(xb)
        return out[0] if single else out

    def seminorm(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, 4)
        out = engel_seminorm(xb)
        return out[0] if single else out

    def _pieces(self, xb: np.ndarray):
        sem = engel_seminorm(xb)
        nval = np.cbrt(sem**3 + np.abs(xb[:, 3]))
        s3 = np.sign(xb[:, 2])
        s4 = np.sign(xb[:, 3])
        w = 2.0 * xb[:, 0] - xb[:, 1] * s3
        g1 = 1.5 * sem * w - xb[:, 2] * s4
        g2 = 3.0 * sem * xb[:, 1]
        return sem, nval, s3, s4, w, g1, g2

    def first(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, 4)
        _, nval, _, _, _, g1, g2 = self._pieces(xb)
        denom = 3.0 * nval**2
        out = np.stack([g1 / denom, g2 / denom], axis=-1)
        return out[0] if single else out

    def second(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, 4)
        sem, nval, _, s4, w, g1, g2 = self._pieces(xb)
        gg1 = 0.75 * w**2 / sem + 3.0 * sem + xb[:, 1] * s4
        gg2 = 3.0 * xb[:, 1] ** 2 / sem + 3.0 * sem
        denom = 3.0 * nval**2
        quint = nval**5
        out = np.stack(
            [
                gg1 / denom - (2.0 / 9.0) * g1**2 / quint,
                gg2 / denom - (2.0 / 9.0) * g2**2 / quint,
            ],
            axis=-1,
        )
        return out[0] if single else out


class FiliformNormTable(NormDerivativeTable):
    """Filiform norm along the left-canonical frame, any step n.

    Writes g = sum_{j=2}^n S_j^beta + |x_{n+1}| with beta = 2n/(n+1),
    S_j = A + B + T_j, A = |x_1|^((n+1)/2), B = |x_2|^((n+1)/2),
    T_j = |x_j|^(alpha_j), alpha_j = (n+1)/(2(j-1)); the j = 2 term has
    T_2 = B, so x_2 enters it twice and all x_2-derivatives carry the factor
    (1 + [j=2]).  First derivatives:

        X_1 g = beta A' sum_j S_j^(beta-1)
        X_2 g = sum_{k>=2} c_k dg/dx_k,   c_k = x_1^(k-2)/(k-2)!

    and second derivatives assemble the Hessian entries of g over the
    coordinates that X_2 touches (the X_2 coefficients depend on x_1 only
    and the field has no d/dx_1 component, so no correction term appears).
    N = g^(1/n) then gives X_i N = X_i g/(n N^(n-1)) and
    X_i^2 N = X_i^2 g/(n N^(n-1)) - ((n-1)/n^2)(X_i g)^2/N^(2n-1).

    The coefficient constants the closed form produces are recorded:
    `c_first` = `c_second` = n(n-1)/2 multiply the two |x_1|-power sums in
    X_1^2 g, and `sj_coefficients[j]` holds the pair multiplying
    S_j^(beta-1)|x_j|^(alpha_j-2) and S_j^(beta-2)|x_j|^(2 alpha_j-2) in
    d^2 g/dx_j^2.
    """

    def __init__(self, kind: NormKind):
        if kind.variant == ENGEL:
            raise ValueError("FiliformNormTable requires the filiform norm kind")
        self.kind = kind
        self.frame = left_frame(kind.group)
        n = kind.group.step
        self.n = n
        self.beta = 2.0 * n / (n + 1)
        self.alphas = {j: (n + 1) / (2.0 * (j - 1)) for j in range(2, n + 1)}
        self.c_first = n * (n - 1) / 2.0
        self.c_second = n * (n - 1) / 2.0
        self.sj_coefficients = {
            j: (
                self.beta * a * (a - 1.0),
                self.beta * (self.beta - 1.0) * a**2,
            )
            for j, a in self.alphas.items()
        }

    def value(self, x: np.ndarray) -> np.ndarray:
        return filiform_norm(self.kind.group, x)

    def seminorm(self, x: np.ndarray) -> np.ndarray:
        return filiform_seminorm(self.kind.group, x)

    def _core(self, xb: np.ndarray):
        n = self.n
        half = (n + 1) / 2.0
        ax1 = np.abs(xb[:, 0])
        ax2 = np.abs(xb[:, 1])
        a_pow = ax1**half
        b_pow = ax2**half
        s_rows = []
        t_primes = {}
        t_seconds = {}
        for j in range(2, n + 1):
            aj = self.alphas[j]
            axj = np.abs(xb[:, j - 1])
            s_rows.append(a_pow + b_pow + axj**aj)
            t_primes[j] = aj * axj ** (aj - 1.0) * np.sign(xb[:, j - 1])
            if aj == 1.0:
                t_seconds[j] = np.zeros_like(axj)
            else:
                t_seconds[j] = aj * (aj - 1.0) * axj ** (aj - 2.0)
        s = np.stack(s_rows, axis=0)  # (n-1, m), rows j = 2..n
        sb1 = s ** (self.beta - 1.0)
        sb2 = s ** (self.beta - 2.0)
        a_prime = half * ax1 ** (half - 1.0) * np.sign(xb[:, 0])
        a_second = half * (half - 1.0) * ax1 ** (half - 2.0)
        b_prime = half * ax2 ** (half - 1.0) * np.sign(xb[:, 1])
        b_second = half * (half - 1.0) * ax2 ** (half - 2.0)
        return s, sb1, sb2, a_prime, a_second, b_prime, b_second, t_primes, t_seconds

    def _x2_coeffs(self, xb: np.ndarray) -> np.ndarray:
        """Left X_2 coefficients c_k = x_1^(k-2)/(k-2)!, rows k = 2..n+1."""
        d = self.kind.group.dimension
        out = np.empty((d - 1, xb.shape[0]))
        out[0] = 1.0
        for k in range(3, d + 1):
            out[k - 2] = out[k - 3] * xb[:, 0] / (k - 2)
        return out

    def _g_derivatives(self, xb: np.ndarray):
        beta = self.beta
        n = self.n
        (s, sb1, sb2, a_p, a_pp, b_p, b_pp, t_p, t_pp) = self._core(xb)
        sum_sb1 = np.sum(sb1, axis=0)
        sum_sb2 = np.sum(sb2, axis=0)
        c = self._x2_coeffs(xb)  # rows k = 2..n+1

        g1 = beta * a_p * sum_sb1
        # dg/dx2 counts the j=2 row twice.
        d2g = beta * b_p * (sum_sb1 + sb1[0])
        x2g = c[0] * d2g
        for j in range(3, n + 1):
            x2g = x2g + c[j - 2] * beta * sb1[j - 2] * t_p[j]
        x2g = x2g + c[n - 1] * np.sign(xb[:, -1])

        gg1 = beta * ((beta - 1.0) * a_p**2 * sum_sb2 + a_pp * sum_sb1)

        # Hessian block over coordinates 2..n+1 contracted with c.
        mult = np.ones(n - 1)
        mult[0] = 2.0  # j = 2 row's x_2 multiplicity
        h22 = beta * (
            (beta - 1.0) * b_p**2 * np.einsum("j,jm->m", mult**2, sb2)
            + b_pp * np.einsum("j,jm->m", mult, sb1)
        )
        gg2 = c[0] ** 2 * h22
        for j in range(3, n + 1):
            h2k = beta * (beta - 1.0) * sb2[j - 2] * b_p * t_p[j]
            hkk = beta * ((beta - 1.0) * sb2[j - 2] * t_p[j] ** 2 + sb1[j - 2] * t_pp[j])
            gg2 = gg2 + 2.0 * c[0] * c[j - 2] * h2k + c[j - 2] ** 2 * hkk
        return g1, x2g, gg1, gg2

    def first(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, self.kind.group.dimension)
        g1, g2, _, _ = self._g_derivatives(xb)
        nval = filiform_norm(self.kind.group, xb)
        denom = self.n * nval ** (self.n - 1)
        out = np.stack([g1 / denom, g2 / denom], axis=-1)
        return out[0] if single else out

    def second(self, x: np.ndarray) -> np.ndarray:
        xb, single = _as_batch(x, self.kind.group.dimension)
        g1, g2, gg1, gg2 = self._g_derivatives(xb)
        nval = filiform_norm(self.kind.group, xb)
        n = self.n
        denom = n * nval ** (n - 1)
        corr = (n - 1.0) / n**2 / nval ** (2 * n - 1)
        out = np.stack(
            [gg1 / denom - corr * g1**2, gg2 / denom - corr * g2**2], axis=-1
        )
        return out[0] if single else out


def norm_derivative_tables(kind: NormKind) -> NormDerivativeTable:
    """Analytic first/second frame-derivative table for the given norm kind."""
    if kind.variant == ENGEL:
        return EngelNormTable(kind)
    return FiliformNormTable(kind)
