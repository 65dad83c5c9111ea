"""Horizontal-path optimization: upper bounds on the metric distance.

A path is K segments of constant controls (u1, u2) over total time 1,
flowing along the left frame: x1' = u1, xk' = u2 x1^(k-2)/(k-2)!.  Each
segment's flow is polynomial in time, so the endpoint and its Jacobian in
the controls come from closed-form binomial sums; a one-step 4th-order
integrator cross-checks (exactly for step 3, and with substeps beyond).

`approx_distance` minimizes the path length sum (1/K) |u_s| subject to the
endpoint constraint via an augmented Lagrangian with analytic gradients, a
Gauss-Newton feasibility polish, and a cascade over segment counts that
warm-starts each level from the refined previous optimum.  A staircase
construction (move x1 to a ladder of levels, pulse u2 at each) solves a
Vandermonde system to reach any target exactly, so every optimization
starts feasible.  Results are genuine distance upper bounds: the optimal
value is reported with a one-sided pad of a relative 1e-9 plus 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
import scipy.optimize

from .group import FiliformGroup, GroupPoint, _as_batch
from .norms import NormKind, filiform_norm, norm_value
from .seeding import derive_rng

RESIDUAL_REPORT_FACTOR = 1e-6
VALUE_PAD_REL = 1e-9
VALUE_PAD_ABS = 1e-12


class InfeasiblePathError(RuntimeError):
    """No path met the endpoint tolerance; carries the best residual."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


def _poly_integrals(x1: float, u1: float, tau: float, max_m: int):
    """I_m = integral of (x1 + u1 t)^m / m! and J_m = same with extra t.

    Binomial expansions, stable for every u1 including zero.
    """
    i_vals = np.zeros(max_m + 1)
    j_vals = np.zeros(max_m + 1)
    for m in range(max_m + 1):
        acc_i = 0.0
        acc_j = 0.0
        for j in range(m + 1):
            base = x1 ** (m - j) / factorial(m - j) * u1**j / factorial(j)
            acc_i += base * tau ** (j + 1) / (j + 1)
            acc_j += base * tau ** (j + 2) / (j + 2)
        i_vals[m] = acc_i
        j_vals[m] = acc_j
    return i_vals, j_vals


def segment_flow(
    group: FiliformGroup, x: np.ndarray, u1: float, u2: float, tau: float
):
    """One segment: endpoint, state Jacobian, control Jacobian.

    The state Jacobian is the identity plus a first-column correction
    u2 * I_(k-3) in rows k >= 3 (dependence enters through x1 only).
    """
    d = group.dimension
    i_vals, j_vals = _poly_integrals(float(x[0]), u1, tau, d - 2)
    new = x.copy()
    new[0] += u1 * tau
    for k in range(2, d + 1):
        new[k - 1] += u2 * i_vals[k - 2]

    jac_x_col = np.zeros(d)
    for k in range(3, d + 1):
        jac_x_col[k - 1] = u2 * i_vals[k - 3]

    jac_u = np.zeros((d, 2))
    jac_u[0, 0] = tau
    for k in range(3, d + 1):
        jac_u[k - 1, 0] = u2 * j_vals[k - 3]
    for k in range(2, d + 1):
        jac_u[k - 1, 1] = i_vals[k - 2]
    return new, jac_x_col, jac_u


def endpoint_and_jacobian(group: FiliformGroup, controls: np.ndarray):
    """Endpoint of the path from the identity, plus d x 2K Jacobian."""
    k_seg = controls.shape[0]
    tau = 1.0 / k_seg
    d = group.dimension
    x = np.zeros(d)
    jac = np.zeros((d, 2 * k_seg))
    for s in range(k_seg):
        u1, u2 = controls[s]
        x_new, col, jac_u = segment_flow(group, x, u1, u2, tau)
        # Chain rule: previous columns feel this segment only through x1.
        jac += np.outer(col, jac[0, :])
        jac[:, 2 * s : 2 * s + 2] = jac_u
        x = x_new
    return x, jac


def endpoint_only(group: FiliformGroup, controls: np.ndarray) -> np.ndarray:
    k_seg = controls.shape[0]
    tau = 1.0 / k_seg
    x = np.zeros(group.dimension)
    for s in range(k_seg):
        u1, u2 = controls[s]
        i_vals, _ = _poly_integrals(float(x[0]), u1, tau, group.dimension - 2)
        x_new = x.copy()
        x_new[0] += u1 * tau
        for k in range(2, group.dimension + 1):
            x_new[k - 1] += u2 * i_vals[k - 2]
        x = x_new
    return x


def rk4_endpoint(
    group: FiliformGroup, controls: np.ndarray, substeps: int = 1
) -> np.ndarray:
    """Classical one-step (or substepped) 4th-order endpoint integrator.

    For step 3 the segment dynamics are polynomial of degree <= 2 in time,
    so a single 4th-order step is exact; higher steps need substeps to
    reach comparable accuracy.
    """
    d = group.dimension
    x = np.zeros(d)
    tau = 1.0 / controls.shape[0]
    h = tau / substeps

    def rhs(state, u1, u2):
        out = np.zeros(d)
        out[0] = u1
        for k in range(2, d + 1):
            out[k - 1] = u2 * state[0] ** (k - 2) / factorial(k - 2)
        return out

    for u1, u2 in controls:
        for _ in range(substeps):
            k1 = rhs(x, u1, u2)
            k2 = rhs(x + 0.5 * h * k1, u1, u2)
            k3 = rhs(x + 0.5 * h * k2, u1, u2)
            k4 = rhs(x + h * k3, u1, u2)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


@dataclass(frozen=True)
class HorizontalPath:
    """A piecewise-constant control path from the identity."""

    group: FiliformGroup
    controls: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.controls, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("controls must have shape (K, 2)")
        object.__setattr__(self, "controls", c)

    @property
    def segments(self) -> int:
        return self.controls.shape[0]

    def endpoint(self) -> GroupPoint:
        return GroupPoint(self.group, endpoint_only(self.group, self.controls))

    def length(self) -> float:
        return float(
            np.sum(np.sqrt(np.sum(self.controls**2, axis=1))) / self.segments
        )

    def refined(self) -> "HorizontalPath":
        """Split every segment in two; same trajectory, same length."""
        doubled = np.repeat(self.controls, 2, axis=0)
        return HorizontalPath(self.group, doubled)

    def states(self) -> np.ndarray:
        """States after each segment, shape (K, dimension)."""
        out = np.zeros((self.segments, self.group.dimension))
        x = np.zeros(self.group.dimension)
        tau = 1.0 / self.segments
        for s in range(self.segments):
            u1, u2 = self.controls[s]
            i_vals, _ = _poly_integrals(
                float(x[0]), u1, tau, self.group.dimension - 2
            )
            x = x.copy()
            x[0] += u1 * tau
            for k in range(2, self.group.dimension + 1):
                x[k - 1] += u2 * i_vals[k - 2]
            out[s] = x
        return out


@dataclass(frozen=True)
class DistanceEstimate:
    target: GroupPoint
    value: float
    residual: float
    segments: int
    iterations: int
    path: HorizontalPath

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("distance upper bound cannot be negative")


def staircase_controls(
    group: FiliformGroup, target: np.ndarray, k_seg: int
) -> np.ndarray | None:
    """Exactly feasible warm start: x1 staircase with u2 pulses.

    Move x1 through n distinct levels; at each level fire a pure-u2 pulse.
    The pulse increments form a Vandermonde-type system in the levels, so
    any target is reached exactly with 2n + 1 segments.  Returns None when
    K is too small for the construction.
    """
    n = group.step
    d = group.dimension
    if k_seg < 2 * n + 1:
        return None
    scale = max(float(np.max(np.abs(target) ** (1.0 / np.array(group.weights)))), 1.0)
    base = np.linspace(-1.0, 1.0, n) if n > 1 else np.array([1.0])
    levels = scale * (base + 0.1)  # offset keeps levels distinct from 0
    tau = 1.0 / k_seg
    vand = np.zeros((n, n))
    for row, k in enumerate(range(2, d + 1)):
        for col, a in enumerate(levels):
            vand[row, col] = a ** (k - 2) / factorial(k - 2) * tau
    pulses = np.linalg.solve(vand, target[1:])
    controls = np.zeros((k_seg, 2))
    prev = 0.0
    seg = 0
    for a, c in zip(levels, pulses):
        controls[seg, 0] = (a - prev) / tau
        seg += 1
        controls[seg, 1] = c
        seg += 1
        prev = a
    controls[seg, 0] = (target[0] - prev) / tau
    return controls


def _smooth_length_and_grad(controls: np.ndarray, eps: float):
    k_seg = controls.shape[0]
    mags = np.sqrt(np.sum(controls**2, axis=1) + eps**2)
    grad = controls / mags[:, None] / k_seg
    return float(np.sum(mags) / k_seg), grad


def _augmented_objective(
    flat: np.ndarray,
    group: FiliformGroup,
    target: np.ndarray,
    lam: np.ndarray,
    rho: float,
    eps: float,
):
    controls = flat.reshape(-1, 2)
    length, grad_len = _smooth_length_and_grad(controls, eps)
    endpoint, jac = endpoint_and_jacobian(group, controls)
    resid = endpoint - target
    value = length + float(lam @ resid) + 0.5 * rho * float(resid @ resid)
    grad = grad_len.ravel() + jac.T @ (lam + rho * resid)
    return value, grad


def _optimize_from(
    group: FiliformGroup,
    target: np.ndarray,
    controls: np.ndarray,
    scale: float,
    max_outer: int = 10,
) -> tuple[np.ndarray, float, int]:
    """Augmented-Lagrangian descent followed by Gauss-Newton projection."""
    d = group.dimension
    lam = np.zeros(d)
    rho = 10.0
    eps = 1e-9 * (1.0 + scale)
    iterations = 0
    flat = controls.ravel().copy()
    prev_resid = np.inf
    for _ in range(max_outer):
        result = scipy.optimize.minimize(
            _augmented_objective,
            flat,
            args=(group, target, lam, rho, eps),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 300, "ftol": 1e-14, "gtol": 1e-12},
        )
        flat = result.x
        iterations += int(result.nit)
        endpoint, _ = endpoint_and_jacobian(group, flat.reshape(-1, 2))
        resid = endpoint - target
        rnorm = float(np.linalg.norm(resid))
        lam = lam + rho * resid
        if rnorm > 0.3 * prev_resid:
            rho *= 6.0
        prev_resid = rnorm
        if rnorm < 1e-11 * (1.0 + scale):
            break

    # Feasibility polish: full Newton steps on the endpoint constraint.
    controls = flat.reshape(-1, 2)
    for _ in range(40):
        endpoint, jac = endpoint_and_jacobian(group, controls)
        resid = endpoint - target
        rnorm = float(np.linalg.norm(resid))
        if rnorm <= 1e-13 * (1.0 + scale):
            break
        step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
        controls = controls + step.reshape(-1, 2)
        iterations += 1
    endpoint, _ = endpoint_and_jacobian(group, controls)
    rnorm = float(np.linalg.norm(endpoint - target))
    return controls, rnorm, iterations


def approx_distance(
    target: GroupPoint, k_segments: int = 16, restarts: int = 3, seed: int = 0
) -> DistanceEstimate:
    """Upper bound on the metric distance from the identity to `target`.

    Cascades over doubling segment counts, warm-starting each level with
    the refined previous optimum plus staircase, constant, and randomized
    initial paths; restarts merge deterministically by taking the shortest
    feasible result (ties keep the earliest).
    """
    if k_segments < 4:
        raise ValueError("need at least 4 segments")
    group = target.group
    tvec = np.asarray(target.coords, dtype=np.float64)
    if not np.all(np.isfinite(tvec)):
        raise ValueError("target must be finite")
    nval = float(filiform_norm(group, tvec))
    if nval == 0.0:
        path = HorizontalPath(group, np.zeros((k_segments, 2)))
        return DistanceEstimate(
            target=target,
            value=0.0,
            residual=0.0,
            segments=k_segments,
            iterations=0,
            path=path,
        )
    scale = nval
    rng = derive_rng(seed, "distance-restarts")

    levels = [k_segments]
    while levels[0] > 8:
        levels.insert(0, levels[0] // 2)

    best_controls = None
    best_length = np.inf
    total_iterations = 0
    best_residual = np.inf
    for level_idx, k_seg in enumerate(levels):
        starts: list[np.ndarray] = []
        if best_controls is not None:
            starts.append(np.repeat(best_controls, 2, axis=0))
        stair = staircase_controls(group, tvec, k_seg)
        if stair is not None:
            starts.append(stair)
        starts.append(np.tile(tvec[:2], (k_seg, 1)))
        n_random = restarts if level_idx == len(levels) - 1 else 1
        for _ in range(n_random):
            starts.append(rng.normal(scale=scale, size=(k_seg, 2)))

        level_best = None
        level_len = np.inf
        for start in starts:
            controls, rnorm, iters = _optimize_from(group, tvec, start, scale)
            total_iterations += iters
            best_residual = min(best_residual, rnorm)
            if rnorm <= RESIDUAL_REPORT_FACTOR * (1.0 + nval):
                length = HorizontalPath(group, controls).length()
                if length < level_len:
                    level_len = length
                    level_best = (controls, rnorm)
        if level_best is not None:
            best_controls = level_best[0]
            best_length = level_len

    if best_controls is None:
        raise InfeasiblePathError(
            f"no path reached the target within tolerance; best residual "
            f"{best_residual:.3e}",
            best_residual,
        )
    path = HorizontalPath(group, best_controls)
    endpoint = endpoint_only(group, best_controls)
    residual = float(np.linalg.norm(endpoint - tvec))
    value = best_length * (1.0 + VALUE_PAD_REL) + VALUE_PAD_ABS
    return DistanceEstimate(
        target=target,
        value=value,
        residual=residual,
        segments=path.segments,
        iterations=total_iterations,
        path=path,
    )


@dataclass(frozen=True)
class EquivalenceBand:
    """Empirical envelope of approx_distance(x) / Norm(x) over sample points."""

    kind_variant: str
    step: int
    ratio_min: float
    ratio_max: float
    spread: float
    count: int
    segments: int
    seed: int
    caveat: str


def equivalence_scan(
    kind: NormKind, points: np.ndarray, k_segments: int = 16, seed: int = 0
) -> EquivalenceBand:
    """Ratio band of the distance upper bound against the homogeneous norm."""
    xb, _ = _as_batch(points, kind.group.dimension)
    ratios = []
    for row in xb:
        nval = float(norm_value(kind, row))
        if nval <= 0:
            raise ValueError("scan points must avoid the origin")
        est = approx_distance(GroupPoint(kind.group, row), k_segments, seed=seed)
        ratios.append(est.value / nval)
    ratios = np.asarray(ratios)
    return EquivalenceBand(
        kind_variant=kind.variant,
        step=kind.group.step,
        ratio_min=float(ratios.min()),
        ratio_max=float(ratios.max()),
        spread=float(ratios.max() / ratios.min()),
        count=len(ratios),
        segments=k_segments,
        seed=seed,
        caveat=(
            "distance values are upper bounds; the band's lower edge is "
            "conservative"
        ),
    )


def dump_path_csv(path_obj: HorizontalPath, file_path) -> None:
    """CSV rows (segment, u1, u2, state after segment)."""
    d = path_obj.group.dimension
    states = path_obj.states()
    header = "segment,u1,u2," + ",".join(f"x{k}" for k in range(1, d + 1))
    lines = [header]
    for s in range(path_obj.segments):
        u1, u2 = path_obj.controls[s]
        row = [str(s), repr(float(u1)), repr(float(u2))]
        row.extend(repr(float(v)) for v in states[s])
        lines.append(",".join(row))
    with open(file_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
