"""Projected trust-region ascent over antenna positions.

Each outer iteration maximizes the second-order Taylor model of the
surrogate inside a trust region using only Hessian-vector products, projects
the trial point back onto the feasible geometry, and accepts or rejects the
projected step from the agreement ratio between actual and predicted
surrogate gain.

The subproblem solver is Steihaug-Toint conjugate gradients generalized with
the Lanczos tridiagonal reduction: interior solves coincide with classic CG,
and when the solution lies on the boundary the small reduced problem is
solved exactly in the growing Krylov subspace, so negative curvature is
exploited rather than merely detected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryConfig, is_feasible, project
from .model import ScenarioConfig, generate_snapshots, sample_covariance
from .objective import SurrogateContext, model_point, surrogate_value

_BOUNDARY_RTOL = 1e-9


@dataclass
class TrustRegionConfig:
    """Trust-region outer-loop parameters.

    Radii are in the same length unit as antenna positions.  ``cg_tol``
    and ``cg_max_iter`` default per call to the inexact-Newton forcing
    sequence min(0.5, sqrt(|g|))*|g| and to twice the dimension.
    """

    radius0: float = 0.25
    radius_max: float = 2.0
    eta: float = 0.0
    eta1: float = 0.25
    eta2: float = 0.75
    gamma1: float = 0.25
    gamma2: float = 2.0
    tol_grad: float = 1e-6
    tol_step: float = 1e-6
    max_iters: int = 100
    cg_tol: float | None = None
    cg_max_iter: int | None = None

    def __post_init__(self):
        if not 0 < self.radius0 <= self.radius_max:
            raise ValueError("need 0 < radius0 <= radius_max")
        if not 0 <= self.eta < self.eta1 < self.eta2 < 1:
            raise ValueError("need 0 <= eta < eta1 < eta2 < 1")
        if not 0 < self.gamma1 < 1 < self.gamma2:
            raise ValueError("need 0 < gamma1 < 1 < gamma2")
        if self.max_iters < 1:
            raise ValueError("need at least one iteration")

    @classmethod
    def for_geometry(cls, geom: GeometryConfig, wavelength: float = 1.0, **kw):
        """Quarter-wavelength initial radius capped at a quarter aperture."""
        return cls(
            radius0=min(wavelength / 4.0, geom.aperture / 4.0),
            radius_max=geom.aperture / 4.0,
            **kw,
        )


@dataclass
class TraceRecord:
    """One outer iteration: model quality, radius evolution, acceptance."""

    k: int
    value: float
    grad_norm: float
    radius: float | None
    rho: float | None
    cg_iters: int
    accepted: bool
    step_norm: float
    note: str = ""


@dataclass
class TrState:
    """Solver state at exit plus the full iteration trace."""

    x: np.ndarray
    radius: float
    rho: float | None = None
    grad_norm: float = np.inf
    step_norm: float = np.inf
    accepted: bool = False
    cg_iters: int = 0
    value_history: list[float] = field(default_factory=list)
    trace: list[TraceRecord] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def n_iters(self) -> int:
        return len(self.trace)


def _tridiag_tr_minimize(bnorm: float, alphas, betas, radius: float):
    """Exactly minimize bnorm*y_1 + 0.5 y^T T y over ||y|| <= radius.

    T is the symmetric tridiagonal Lanczos matrix (diagonal ``alphas``,
    off-diagonal ``betas``).  Solved through its eigendecomposition with a
    bisection on the secular equation; the hard case falls back to adding a
    minimal-eigenvector component to reach the boundary.
    """
    k = len(alphas)
    t = np.diag(np.asarray(alphas, dtype=float))
    if k > 1:
        off = np.asarray(betas[: k - 1], dtype=float)
        t += np.diag(off, 1) + np.diag(off, -1)
    lam, q = np.linalg.eigh(t)
    beta = q[0] * bnorm  # projections of the linear term bnorm*e1
    lam_min = lam[0]

    def y_of(nu):
        return -q @ (beta / (lam + nu))

    if lam_min > 0:
        y0 = y_of(0.0)
        if np.linalg.norm(y0) <= radius:
            return y0, 0.0
    nu_floor = max(0.0, -lam_min)
    near_min = lam - lam_min <= 1e-12 * max(1.0, abs(lam_min))
    if np.all(np.abs(beta[near_min]) <= 1e-13 * max(1.0, abs(bnorm))):
        # hard case: no linear component along the minimal eigenspace
        safe = ~near_min
        y = np.zeros(k)
        if np.any(safe):
            y = -q[:, safe] @ (beta[safe] / (lam[safe] + nu_floor))
        nrm = np.linalg.norm(y)
        if nrm <= radius:
            step = np.sqrt(max(radius * radius - nrm * nrm, 0.0))
            return y + step * q[:, near_min][:, 0], nu_floor
    lo = nu_floor
    hi = nu_floor + max(1.0, abs(bnorm) / radius)
    while np.linalg.norm(y_of(hi)) > radius:
        hi = nu_floor + 2.0 * (hi - nu_floor)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= nu_floor:
            lo = mid
            continue
        if np.linalg.norm(y_of(mid)) > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return y_of(hi), hi


def steihaug_cg(
    grad: np.ndarray,
    hvp,
    radius: float,
    tol: float | None = None,
    max_iter: int | None = None,
):
    """Maximize g^T p + 0.5 p^T H p over ||p|| <= radius with H-products only.

    Returns ``(p, reason, iterations)`` with reason one of ``stationary``,
    ``converged`` (interior), ``boundary``, ``negative_curvature``, or
    ``max_iter``.  The model gain of ``p`` is never below the Cauchy
    (best-along-gradient) gain because the reduced subproblem is solved
    exactly over a Krylov subspace that contains the gradient.
    """
    grad = np.asarray(grad, dtype=float)
    if radius <= 0:
        raise ValueError("trust-region radius must be positive")
    n = grad.size
    b = -grad  # minimize b^T p + 0.5 p^T (-H) p
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), "stationary", 0
    if tol is None:
        tol = min(0.5, np.sqrt(bnorm)) * bnorm
    if max_iter is None:
        max_iter = 2 * n
    max_iter = max(1, max_iter)

    v = np.zeros((n, max_iter))
    v[:, 0] = b / bnorm
    alphas: list[float] = []
    betas: list[float] = []
    y = np.zeros(1)
    m_prev = np.inf
    for k in range(max_iter):
        w = -np.asarray(hvp(v[:, k]), dtype=float)
        alphas.append(float(v[:, k] @ w))
        w = w - alphas[-1] * v[:, k]
        if k > 0:
            w = w - betas[-1] * v[:, k - 1]
        # full reorthogonalization keeps ||V y|| = ||y|| reliable
        w = w - v[:, : k + 1] @ (v[:, : k + 1].T @ w)
        beta_next = float(np.linalg.norm(w))
        y, _ = _tridiag_tr_minimize(bnorm, alphas, betas, radius)
        residual = beta_next * abs(y[-1])
        interior = np.linalg.norm(y) < radius * (1.0 - _BOUNDARY_RTOL)
        exhausted = beta_next <= 1e-14 * bnorm
        # the forcing tolerance gates the Newton residual; the subspace model
        # value must also stabilize so returned steps are essentially exact
        m_cur = bnorm * y[0] + 0.5 * float(y @ _tridiag_apply(alphas, betas, y))
        stabilized = abs(m_prev - m_cur) <= 1e-10 * max(1.0, abs(m_cur))
        m_prev = m_cur
        converged = exhausted or (residual <= tol and stabilized)
        if converged or k + 1 == max_iter:
            p = v[:, : k + 1] @ y
            if converged:
                if interior:
                    reason = "converged"
                else:
                    tmat = np.diag(alphas)
                    if k > 0:
                        off = np.asarray(betas, dtype=float)
                        tmat += np.diag(off, 1) + np.diag(off, -1)
                    lam_min = np.linalg.eigvalsh(tmat)[0]
                    reason = "negative_curvature" if lam_min <= 0 else "boundary"
            else:
                reason = "max_iter"
            return p, reason, k + 1
        betas.append(beta_next)
        v[:, k + 1] = w / beta_next
    raise AssertionError("unreachable")


def _tridiag_apply(alphas, betas, y: np.ndarray) -> np.ndarray:
    out = np.asarray(alphas, dtype=float) * y
    if len(y) > 1:
        off = np.asarray(betas[: len(y) - 1], dtype=float)
        out[:-1] += off * y[1:]
        out[1:] += off * y[:-1]
    return out


def cauchy_gain(grad: np.ndarray, hvp, radius: float) -> float:
    """Best model gain along the gradient ray inside the ball."""
    grad = np.asarray(grad, dtype=float)
    gnorm = np.linalg.norm(grad)
    if gnorm == 0.0:
        return 0.0
    d = grad / gnorm
    curv = float(d @ hvp(d))
    if curv < 0:
        t = min(radius, gnorm / (-curv))
    else:
        t = radius
    return float(t * gnorm + 0.5 * t * t * curv)


@dataclass
class StepEvaluation:
    """Predicted versus actual surrogate gain for one projected step."""

    pred: float
    ared: float
    rho: float | None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.rho is not None


def _evaluate_step(value_fn, x: np.ndarray, d: np.ndarray, point) -> StepEvaluation:
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        return StepEvaluation(pred=0.0, ared=0.0, rho=None, reason="zero step")
    pred = float(point.grad @ d + 0.5 * (d @ point.hvp(d)))
    ared = float(value_fn(x + d) - point.value)
    if pred <= 0:
        return StepEvaluation(
            pred=pred, ared=ared, rho=None, reason="nonpositive predicted gain"
        )
    return StepEvaluation(pred=pred, ared=ared, rho=ared / pred)


def evaluate_step(
    x: np.ndarray, d: np.ndarray, ctx: SurrogateContext, point: "TaylorPoint" = None
) -> StepEvaluation:
    """Gain ratio of the projected step ``d`` from ``x`` on the surrogate."""
    if point is None:
        point = model_point(x, ctx)
    return _evaluate_step(lambda z: surrogate_value(z, ctx), x, d, point)


def update_radius(
    radius: float, rho: float, step_norm: float, cfg: TrustRegionConfig
) -> float:
    """Shrink on poor agreement; grow only when a full-length step agrees."""
    if rho <= cfg.eta1:
        return cfg.gamma1 * radius
    if rho >= cfg.eta2 and step_norm >= radius * (1.0 - _BOUNDARY_RTOL):
        return min(cfg.gamma2 * radius, cfg.radius_max)
    return radius


def maximize_surrogate(
    point_fn,
    value_fn,
    x0: np.ndarray,
    geom: GeometryConfig,
    cfg: TrustRegionConfig,
) -> tuple[np.ndarray, TrState]:
    """Projected trust-region ascent core.

    ``point_fn(x)`` must return an object with ``value``, ``grad`` and
    ``hvp(v)``; ``value_fn(x)`` evaluates the objective alone.  Iterates stay
    feasible, accepted objective values increase strictly, and the loop stops
    on gradient norm, step norm, collapsed radius, or the iteration cap.
    """
    x0 = np.asarray(x0, dtype=float)
    feas = is_feasible(x0, geom)
    if not feas:
        raise ValueError(f"infeasible start: {'; '.join(feas.violations)}")
    x = x0.copy()
    radius = cfg.radius0
    state = TrState(x=x, radius=radius)
    state.value_history.append(float(value_fn(x)))
    for k in range(cfg.max_iters):
        point = point_fn(x)
        gnorm = float(np.linalg.norm(point.grad))
        state.grad_norm = gnorm
        if gnorm < cfg.tol_grad:
            state.stop_reason = "gradient"
            break
        cg_tol = cfg.cg_tol
        if cg_tol is None:
            cg_tol = min(0.5, np.sqrt(gnorm)) * gnorm
        cg_max = cfg.cg_max_iter if cfg.cg_max_iter is not None else 2 * x.size
        p, cg_reason, cg_iters = steihaug_cg(point.grad, point.hvp, radius, cg_tol, cg_max)
        d = project(x + p, geom) - x
        step_norm = float(np.linalg.norm(d))
        ev = _evaluate_step(value_fn, x, d, point)
        rho_for_radius = ev.rho if ev.ok else -np.inf
        # growth gates on the subproblem step reaching the boundary; the
        # projected step is almost always shorter and would freeze the radius
        new_radius = update_radius(radius, rho_for_radius, float(np.linalg.norm(p)), cfg)
        accepted = ev.ok and ev.rho > cfg.eta
        if accepted:
            x = x + d
            state.value_history.append(point.value + ev.ared)
        state.trace.append(
            TraceRecord(
                k=k,
                value=point.value,
                grad_norm=gnorm,
                radius=radius,
                rho=ev.rho,
                cg_iters=cg_iters,
                accepted=accepted,
                step_norm=step_norm,
                note=ev.reason or cg_reason,
            )
        )
        state.x = x
        state.rho = ev.rho
        state.step_norm = step_norm
        state.accepted = accepted
        state.cg_iters = cg_iters
        radius = new_radius
        state.radius = radius
        if step_norm < cfg.tol_step:
            state.stop_reason = "step"
            break
        if radius < cfg.tol_step:
            state.stop_reason = "radius"
            break
    else:
        state.stop_reason = "max_iterations"
    state.x = x
    return x, state


def ptrso(
    x0: np.ndarray,
    ctx: SurrogateContext,
    geom: GeometryConfig,
    cfg: TrustRegionConfig,
) -> tuple[np.ndarray, TrState]:
    """Projected trust-region surrogate ascent from a feasible start."""
    return maximize_surrogate(
        lambda x: model_point(x, ctx),
        lambda x: surrogate_value(x, ctx),
        x0,
        geom,
        cfg,
    )


@dataclass
class BlockResult:
    """Outcome of one coherence block: measured context and optimized anchor."""

    anchor: np.ndarray
    next_anchor: np.ndarray
    cov: "FactorizedCovariance"
    context: SurrogateContext
    state: TrState


def run_block(
    anchor: np.ndarray,
    scenario: ScenarioConfig,
    n_snapshots: int,
    geom: GeometryConfig,
    cfg: TrustRegionConfig,
    rng: np.random.Generator,
    eps_load: float = 0.0,
    fallback_load: bool = True,
    symbols: str = "gaussian",
    block_index: int = 0,
) -> BlockResult:
    """Measure one block at ``anchor`` and optimize positions for the next."""
    block = generate_snapshots(
        anchor, scenario, n_snapshots, rng, symbols=symbols, block_index=block_index
    )
    cov = sample_covariance(block, eps_load=eps_load, fallback_load=fallback_load)
    ctx = SurrogateContext(
        anchor=np.asarray(anchor, dtype=float),
        cov=cov,
        paths=scenario.paths,
        wavenumber=scenario.wavenumber,
    )
    x_next, state = ptrso(np.asarray(anchor, dtype=float), ctx, geom, cfg)
    return BlockResult(
        anchor=np.asarray(anchor, dtype=float),
        next_anchor=x_next,
        cov=cov,
        context=ctx,
        state=state,
    )
