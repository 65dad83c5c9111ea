"""Canonical horizontal frames and their invariance and bracket structure.

Two frames are provided.

Left frame (any step n):

    X_1 = d/dx_1,
    X_j = sum_{k=j}^{n+1} x_1^(k-j)/(k-j)! d/dx_k,   j = 2, ..., n+1.

Each X_j is invariant under left translations z -> alpha o z, and the only
nonzero brackets are [X_1, X_j] = X_{j+1} for 2 <= j <= n.

Right frame (step 3 only):

    X_1 = d/dx_1 - x_2 d/dx_3 - x_3 d/dx_4,
    X_2 = d/dx_2,   X_3 = d/dx_3,   X_4 = d/dx_4.

These fields commute with every left-frame field and are invariant under the
adapted right translation z -> reflected_compose(z, alpha) (the right
translation of the presentation with the first coordinate negated; see
FiliformGroup.reflected_compose).  `check_invariance` applies the matching
translation for each label.  The bracket pattern is again
[X_1, X_j] = X_{j+1}.

In both frames the first two fields span the horizontal distribution; their
iterated brackets restore the full tangent space at every point, which
`stratification_rank` verifies numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .group import FiliformGroup, _as_batch, _restore

LEFT_LABEL = "left-canonical"
RIGHT_LABEL = "right-canonical"


@dataclass(frozen=True)
class VectorField:
    """One frame field, identified by its frame label and 1-based index."""

    group: FiliformGroup
    label: str
    index: int

    def __post_init__(self) -> None:
        if self.label not in (LEFT_LABEL, RIGHT_LABEL):
            raise ValueError(f"unknown frame label {self.label!r}")
        if self.label == RIGHT_LABEL and self.group.step != 3:
            raise ValueError("the right-canonical frame is only defined for step 3")
        if not 1 <= self.index <= self.group.dimension:
            raise ValueError(f"field index out of range: {self.index}")

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Coefficient vector of the field in the coordinate basis at x."""
        d = self.group.dimension
        xb, single = _as_batch(x, d)
        out = np.zeros((xb.shape[0], d))
        j = self.index
        if self.label == LEFT_LABEL:
            if j == 1:
                out[:, 0] = 1.0
            else:
                term = np.ones(xb.shape[0])
                for k in range(j, d + 1):
                    out[:, k - 1] = term
                    term = term * xb[:, 0] / (k - j + 1)
        else:
            if j == 1:
                out[:, 0] = 1.0
                out[:, 2] = -xb[:, 1]
                out[:, 3] = -xb[:, 2]
            else:
                out[:, j - 1] = 1.0
        return _restore(out, single)

    def coefficient_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Partial derivatives J[k, l] = d(coefficients_k)/dx_l at x."""
        d = self.group.dimension
        xb, single = _as_batch(x, d)
        jac = np.zeros((xb.shape[0], d, d))
        j = self.index
        if self.label == LEFT_LABEL:
            if j >= 2:
                term = np.ones(xb.shape[0])
                for k in range(j + 1, d + 1):
                    jac[:, k - 1, 0] = term
                    term = term * xb[:, 0] / (k - j)
        else:
            if j == 1:
                jac[:, 2, 1] = -1.0
                jac[:, 3, 2] = -1.0
        return jac[0] if single else jac

    def apply(self, gradient: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Directional derivative: contract a Euclidean gradient with the field."""
        coeff = self.coefficients(x)
        return np.sum(np.atleast_2d(coeff) * np.atleast_2d(gradient), axis=-1)


@dataclass(frozen=True)
class Frame:
    """An ordered family of frame fields; the first two are horizontal."""

    group: FiliformGroup
    label: str
    fields: tuple[VectorField, ...]
    horizontal_count: int = 2

    @property
    def horizontal(self) -> tuple[VectorField, ...]:
        return self.fields[: self.horizontal_count]

    def __len__(self) -> int:
        return len(self.fields)


def left_frame(group: FiliformGroup) -> Frame:
    fields = tuple(
        VectorField(group, LEFT_LABEL, j) for j in range(1, group.dimension + 1)
    )
    return Frame(group, LEFT_LABEL, fields)


def right_frame_engel(group: FiliformGroup) -> Frame:
    """The step-3 right frame displayed above.  Raises for any other step."""
    if group.step != 3:
        raise ValueError("right_frame_engel requires a step-3 group")
    fields = tuple(VectorField(group, RIGHT_LABEL, j) for j in range(1, 5))
    return Frame(group, RIGHT_LABEL, fields)


def translation_jacobian(
    group: FiliformGroup, label: str, alpha: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Jacobian of the label-matching translation, evaluated at x.

    For the left label this is d/dx of x -> alpha o x, which is a constant
    unipotent matrix in alpha_1.  For the right label it is d/dx of
    x -> reflected_compose(x, alpha), the identity plus corrections in the
    first column built from alpha_2, ..., alpha_n and powers of -x_1.
    """
    d = group.dimension
    a = np.asarray(alpha, dtype=np.float64)
    xp = np.asarray(x, dtype=np.float64)
    jac = np.eye(d)
    if label == LEFT_LABEL:
        term_row = np.empty(d)  # alpha_1^t / t!
        term_row[0] = 1.0
        for t in range(1, d):
            term_row[t] = term_row[t - 1] * a[0] / t
        for k in range(3, d + 1):
            for i in range(2, k):
                jac[k - 1, i - 1] += term_row[k - i]
    elif label == RIGHT_LABEL:
        # d/dx1 of sum_i alpha_i (-x1)^(k-i)/(k-i)! is
        # -sum_i alpha_i (-x1)^(k-i-1)/(k-i-1)!.
        neg = np.empty(d)  # (-x1)^t / t!
        neg[0] = 1.0
        for t in range(1, d):
            neg[t] = neg[t - 1] * (-xp[0]) / t
        for k in range(3, d + 1):
            acc = 0.0
            for i in range(2, k):
                acc -= a[i - 1] * neg[k - i - 1]
            jac[k - 1, 0] += acc
    else:
        raise ValueError(f"unknown frame label {label!r}")
    return jac


def _translate(group: FiliformGroup, label: str, alpha, x) -> np.ndarray:
    if label == LEFT_LABEL:
        return group.compose(alpha, x)
    return group.reflected_compose(x, alpha)


def check_invariance(field: VectorField, alpha: np.ndarray, x: np.ndarray) -> float:
    """Max-norm residual of the invariance identity for one translation.

    Compares the field's coefficients at the translated point with the
    pushforward of its coefficients at x through the translation matching the
    field's label.  Exactly invariant fields give a residual at rounding
    level.
    """
    g = field.group
    z = _translate(g, field.label, alpha, x)
    jac = translation_jacobian(g, field.label, alpha, x)
    pushed = jac @ field.coefficients(x)
    return float(np.max(np.abs(field.coefficients(z) - pushed)))


def _fd_coefficient_jacobian(field: VectorField, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = field.group.dimension
    jac = np.zeros((d, d))
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        jac[:, l] = (field.coefficients(x + e) - field.coefficients(x - e)) / (2 * h)
    return jac


def commutator_coefficients(
    fa: VectorField, fb: VectorField, x: np.ndarray, method: str = "analytic"
) -> np.ndarray:
    """Coefficients of [fa, fb] at x in the coordinate basis.

    [X, Y]_k = sum_l (a_l d b_k/dx_l - b_l d a_k/dx_l); the Jacobians come
    from the closed forms when method == "analytic" and from central
    differences of the coefficient maps when method == "fd".
    """
    a = fa.coefficients(x)
    b = fb.coefficients(x)
    if method == "analytic":
        ja = fa.coefficient_jacobian(x)
        jb = fb.coefficient_jacobian(x)
    elif method == "fd":
        ja = _fd_coefficient_jacobian(fa, x)
        jb = _fd_coefficient_jacobian(fb, x)
    else:
        raise ValueError(f"unknown method {method!r}")
    return jb @ a - ja @ b


def commutator_table(
    frame: Frame, points: np.ndarray | None = None
) -> dict[tuple[int, int], np.ndarray]:
    """Structure constants of the frame: [X_i, X_j] expanded in the frame.

    Evaluates each commutator at several points, expands it in the frame
    basis by solving the (triangular on the left frame) coefficient system,
    and checks the expansion is point independent to 1e-10 before returning
    it.  Keys are (i, j) with i < j.
    """
    g = frame.group
    d = g.dimension
    if points is None:
        rng = np.random.default_rng(7)
        points = rng.uniform(-2.0, 2.0, size=(5, d))
    table: dict[tuple[int, int], np.ndarray] = {}
    for i in range(1, len(frame.fields) + 1):
        for j in range(i + 1, len(frame.fields) + 1):
            rows = []
            for p in np.atleast_2d(points):
                comm = commutator_coefficients(frame.fields[i - 1], frame.fields[j - 1], p)
                basis = np.stack([f.coefficients(p) for f in frame.fields], axis=1)
                rows.append(np.linalg.solve(basis, comm))
            rows = np.array(rows)
            spread = np.max(np.abs(rows - rows[0]))
            if spread > 1e-10:
                raise RuntimeError(
                    f"structure constants for ({i}, {j}) vary across points: {spread:g}"
                )
            table[(i, j)] = rows[0]
    return table


def stratification_rank(frame: Frame, x: np.ndarray, tol: float = 1e-6) -> int:
    """Rank at x of the horizontal fields plus their iterated brackets.

    Brackets are formed as coefficient maps and differentiated by central
    differences, nesting up to the group step, so the result is the numeric
    rank (singular values above tol) of the generated distribution.  A frame
    satisfying the bracket-generating condition returns the full dimension.
    """
    g = frame.group
    d = g.dimension
    x = np.asarray(x, dtype=np.float64)
    # Left-frame coefficients depend on x1 only, right-frame ones on x1..x3;
    # both properties are closed under brackets, so the remaining partials
    # vanish identically and are skipped.
    active = (0,) if frame.label == LEFT_LABEL else (0, 1, 2)

    def field_fn(f: VectorField):
        return lambda z: f.coefficients(z)

    def bracket(fa, fb):
        def coeff(z, fa=fa, fb=fb):
            h = 1e-4
            dz = len(z)
            ja = np.zeros((dz, dz))
            jb = np.zeros((dz, dz))
            for l in active:
                e = np.zeros(dz)
                e[l] = h
                ja[:, l] = (fa(z + e) - fa(z - e)) / (2 * h)
                jb[:, l] = (fb(z + e) - fb(z - e)) / (2 * h)
            return jb @ fa(z) - ja @ fb(z)

        return coeff

    gens = [field_fn(f) for f in frame.horizontal]
    layer = [gens[1]]
    collected = list(gens)
    for _ in range(g.step - 1):
        nxt = [bracket(gens[0], f) for f in layer]
        collected.extend(nxt)
        layer = nxt
    mat = np.stack([fn(x) for fn in collected], axis=0)
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * s[0]))
