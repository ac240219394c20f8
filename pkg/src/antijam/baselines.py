"""Baseline position optimizers and the historical-average covariance variant.

Projected gradient ascent and a projected modified-Newton method maximize the
same per-block surrogate as the trust-region solver, so head-to-head runs
differ only in how they move through the feasible set.  The historical
variant replaces the current block's covariance with the running average over
every anchor visited so far.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import GeometryConfig, is_feasible, project
from .model import DesiredPaths, FactorizedCovariance
from .objective import SurrogateContext, gradient, hessian, surrogate_value
from .trsolver import TraceRecord, TrustRegionConfig, ptrso, TrState


@dataclass
class LineSearchConfig:
    """Backtracking Armijo parameters shared by both baselines."""

    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 30

    def __post_init__(self):
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("need 0 < armijo_c1 < 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("need 0 < backtrack < 1")
        if self.initial_step <= 0:
            raise ValueError("initial step must be positive")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")


def _projected_ascent(
    value_fn,
    grad_fn,
    direction_fn,
    x0: np.ndarray,
    geom: GeometryConfig,
    ls: LineSearchConfig,
    max_iter: int,
    tol_grad: float,
    tol_step: float,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """Armijo backtracking along projected trials of a chosen ascent direction.

    A trial x(t) = project(x + t * direction) is accepted when

        f(x(t)) - f(x) >= c1 * grad(x)^T (x(t) - x) > 0,

    which for convex feasible sets guarantees strictly increasing objective
    values (Bertsekas' projected Armijo rule).
    """
    x0 = np.asarray(x0, dtype=float)
    feas = is_feasible(x0, geom)
    if not feas:
        raise ValueError(f"infeasible start: {'; '.join(feas.violations)}")
    x = x0.copy()
    value = float(value_fn(x))
    trace: list[TraceRecord] = []
    for k in range(max_iter):
        grad = np.asarray(grad_fn(x), dtype=float)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol_grad:
            break
        direction = direction_fn(x, grad)
        t = ls.initial_step
        accepted = False
        x_new = x
        value_new = value
        step_norm = 0.0
        for _ in range(ls.max_backtracks + 1):
            cand = project(x + t * direction, geom)
            move = cand - x
            inner = float(grad @ move)
            cand_value = float(value_fn(cand))
            if inner > 0 and cand_value - value >= ls.armijo_c1 * inner:
                x_new, value_new = cand, cand_value
                step_norm = float(np.linalg.norm(move))
                accepted = True
                break
            t *= ls.backtrack
        trace.append(
            TraceRecord(
                k=k,
                value=value,
                grad_norm=gnorm,
                radius=None,
                rho=None,
                cg_iters=0,
                accepted=accepted,
                step_norm=step_norm,
            )
        )
        if not accepted:
            break
        x, value = x_new, value_new
        if step_norm < tol_step:
            break
    return x, trace


def pgd(
    x0: np.ndarray,
    ctx: SurrogateContext,
    geom: GeometryConfig,
    ls: LineSearchConfig | None = None,
    max_iter: int = 100,
    tol_grad: float = 1e-6,
    tol_step: float = 1e-6,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """Projected gradient ascent on the surrogate."""
    ls = ls or LineSearchConfig()
    return _projected_ascent(
        lambda x: surrogate_value(x, ctx),
        lambda x: gradient(x, ctx),
        lambda x, g: g,
        x0,
        geom,
        ls,
        max_iter,
        tol_grad,
        tol_step,
    )


def _newton_direction(h: np.ndarray, grad: np.ndarray, margin: float = 1e-8) -> np.ndarray:
    """Solve (-H + tau I) p = grad with the minimal shift making it definite."""
    lam_max = float(np.linalg.eigvalsh(h)[-1])
    tau = max(0.0, lam_max + margin)
    m = -h + tau * np.eye(h.shape[0])
    return cho_solve(cho_factor(m, lower=True, check_finite=False), grad)


def projected_newton(
    x0: np.ndarray,
    ctx: SurrogateContext,
    geom: GeometryConfig,
    ls: LineSearchConfig | None = None,
    max_iter: int = 100,
    tol_grad: float = 1e-6,
    tol_step: float = 1e-6,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """Projected modified-Newton ascent with an explicitly formed Hessian.

    Each iteration eigen-probes the dense Hessian, shifts it just enough to
    be negative definite (so the Newton system gives an ascent direction),
    and backtracks along projected trials.
    """
    ls = ls or LineSearchConfig()
    return _projected_ascent(
        lambda x: surrogate_value(x, ctx),
        lambda x: gradient(x, ctx),
        lambda x, g: _newton_direction(hessian(x, ctx), g),
        x0,
        geom,
        ls,
        max_iter,
        tol_grad,
        tol_step,
    )


def historical_average_covariance(
    covs: list[FactorizedCovariance],
    eps_load: float = 0.0,
    fallback_load: bool = True,
) -> FactorizedCovariance:
    """Entrywise mean of raw block covariances, refactorized."""
    if not covs:
        raise ValueError("need at least one block covariance")
    dim = covs[0].dim
    if any(c.dim != dim for c in covs):
        raise ValueError("block covariances must share a dimension")
    mean = sum(c.matrix for c in covs) / len(covs)
    return FactorizedCovariance.from_matrix(mean, eps_load, fallback_load)


def ptrso_historical(
    x0: np.ndarray,
    covs: list[FactorizedCovariance],
    paths: DesiredPaths,
    wavenumber: float,
    geom: GeometryConfig,
    cfg: TrustRegionConfig,
) -> tuple[np.ndarray, TrState]:
    """Trust-region ascent against the running average of block covariances.

    ``covs`` lists every block covariance measured so far, the current
    block's included; with a single block this coincides with the
    local-anchor solver exactly.
    """
    avg = historical_average_covariance(covs)
    ctx = SurrogateContext(
        anchor=np.asarray(x0, dtype=float),
        cov=avg,
        paths=paths,
        wavenumber=wavenumber,
    )
    return ptrso(np.asarray(x0, dtype=float), ctx, geom, cfg)
