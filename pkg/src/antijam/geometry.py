"""Feasible geometry of movable-antenna positions on a finite rail.

Positions are kept in sorted order with a minimum pairwise spacing inside a
fixed aperture, written as the linear system U x <= l.  Euclidean projection
onto that set reduces, after subtracting the cumulative spacing from each
coordinate, to isotonic regression with a common box, which pool-adjacent-
violators solves exactly in linear time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GeometryConfig:
    """Rail description: antenna count, minimum spacing, aperture length."""

    n_antennas: int
    min_spacing: float
    aperture: float

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("need at least one antenna")
        if self.min_spacing <= 0:
            raise ValueError("minimum spacing must be positive")
        if self.aperture < (self.n_antennas - 1) * self.min_spacing:
            raise ValueError(
                "aperture cannot host n_antennas at the minimum spacing"
            )


@dataclass
class ConstraintSystem:
    """Stacked inequalities U x <= l describing the feasible position set."""

    matrix: np.ndarray  # (n_antennas + 1, n_antennas)
    bounds: np.ndarray  # (n_antennas + 1,)


def build_constraints(geom: GeometryConfig) -> ConstraintSystem:
    """Spacing rows x_m - x_{m+1} <= -d, then -x_1 <= 0 and x_n <= aperture."""
    n = geom.n_antennas
    u = np.zeros((n + 1, n))
    l = np.empty(n + 1)
    for m in range(n - 1):
        u[m, m] = 1.0
        u[m, m + 1] = -1.0
        l[m] = -geom.min_spacing
    u[n - 1, 0] = -1.0
    l[n - 1] = 0.0
    u[n, n - 1] = 1.0
    l[n] = geom.aperture
    return ConstraintSystem(matrix=u, bounds=l)


def ula(geom: GeometryConfig) -> np.ndarray:
    """Uniform array at the minimum spacing, anchored at the rail origin."""
    return geom.min_spacing * np.arange(geom.n_antennas, dtype=float)


@dataclass
class FeasibilityResult:
    ok: bool
    violations: list[str]
    max_violation: float

    def __bool__(self) -> bool:
        return self.ok


def is_feasible(
    x: np.ndarray, geom: GeometryConfig, tol: float = 1e-9
) -> FeasibilityResult:
    """Check U x <= l within ``tol`` and name any violated rows."""
    x = np.asarray(x, dtype=float)
    if x.shape != (geom.n_antennas,):
        raise ValueError(f"expected {geom.n_antennas} positions, got shape {x.shape}")
    system = build_constraints(geom)
    slack = system.matrix @ x - system.bounds
    violations = []
    n = geom.n_antennas
    for row in np.nonzero(slack > tol)[0]:
        if row < n - 1:
            violations.append(
                f"spacing({row},{row + 1}): gap {x[row + 1] - x[row]:.6g} "
                f"< {geom.min_spacing:.6g}"
            )
        elif row == n - 1:
            violations.append(f"lower bound: x[0] = {x[0]:.6g} < 0")
        else:
            violations.append(
                f"upper bound: x[{n - 1}] = {x[n - 1]:.6g} > {geom.aperture:.6g}"
            )
    max_violation = float(max(slack.max(), 0.0))
    return FeasibilityResult(not violations, violations, max_violation)


def _isotonic_nondecreasing(values: np.ndarray) -> np.ndarray:
    """Least-squares nondecreasing fit by pool-adjacent-violators."""
    means: list[float] = []
    counts: list[int] = []
    for v in values:
        means.append(float(v))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m = means.pop()
            c = counts.pop()
            total = counts[-1] + c
            means[-1] = (means[-1] * counts[-1] + m * c) / total
            counts[-1] = total
    return np.repeat(means, counts)


def project(trial: np.ndarray, geom: GeometryConfig) -> np.ndarray:
    """Euclidean projection of ``trial`` onto the feasible position set.

    Substituting y_n = x_n - n*d turns the constraints into "y nondecreasing
    inside a common box", solved by PAVA followed by clipping to the box;
    clipping a nondecreasing vector to a common interval preserves both
    monotonicity and optimality.
    """
    t = np.asarray(trial, dtype=float)
    if t.shape != (geom.n_antennas,):
        raise ValueError(f"expected {geom.n_antennas} positions, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("trial point has non-finite entries")
    d = geom.min_spacing
    n = geom.n_antennas
    offsets = d * np.arange(1, n + 1)
    y = _isotonic_nondecreasing(t - offsets)
    y = np.clip(y, -d, geom.aperture - n * d)
    return y + offsets
