"""Covariance-surrogate beamforming objective and its derivatives.

The optimal-SINR quadratic form g(x) = h0(x)^H R(x)^{-1} h0(x) depends on the
unknown covariance at candidate positions, so optimization runs on the
surrogate that freezes the covariance at the measured anchor:

    ghat(x) = h0(x)^H Rhat(x_anchor)^{-1} h0(x).

Because only the channel h0 moves, the gradient and Hessian have closed
forms in the per-antenna phase derivatives, and Hessian-vector products cost
one pair of triangular solves against the cached covariance factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DesiredPaths,
    FactorizedCovariance,
    ScenarioConfig,
    desired_channel,
    steering_matrix,
    true_covariance,
)


@dataclass(frozen=True)
class SurrogateContext:
    """Frozen per-block data: anchor, factorized covariance, channel model."""

    anchor: np.ndarray
    cov: FactorizedCovariance
    paths: DesiredPaths
    wavenumber: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        if self.cov.dim != self.anchor.size:
            raise ValueError("covariance dimension does not match the anchor")


def channel_terms(
    x: np.ndarray, paths: DesiredPaths, wavenumber: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Channel h0 and its per-antenna first and second phase derivatives.

    Entry n of the returned arrays:
        h0_n = sum_l alpha_l e^{j k x_n sin(theta_l)}
        b_n  = sum_l j k alpha_l sin(theta_l) e^{j k x_n sin(theta_l)}
        c_n  = sum_l alpha_l sin^2(theta_l) e^{j k x_n sin(theta_l)}
    so dh0/dx = diag(b) and b' = j k c (up to the j k factor kept explicit in
    the Hessian below).
    """
    phases = steering_matrix(x, paths.angles, wavenumber)
    s = np.sin(paths.angles)
    h0 = phases @ paths.gains
    b = phases @ (1j * wavenumber * paths.gains * s)
    c = phases @ (paths.gains * s * s)
    return h0, b, c


@dataclass
class TaylorPoint:
    """Value, gradient, and an O(n^2) Hessian-vector product at one point.

    The Hessian itself is never materialized here: hvp() applies

        H v = 2 Re{conj(b) * Rinv (b * v)} - diag_term * v

    with one pair of triangular solves per call.
    """

    x: np.ndarray
    value: float
    grad: np.ndarray
    _b: np.ndarray
    _diag: np.ndarray
    _cov: FactorizedCovariance

    def hvp(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        w = self._cov.solve(self._b * v)
        return 2.0 * np.real(np.conj(self._b) * w) - self._diag * v


def model_point(x: np.ndarray, ctx: SurrogateContext) -> TaylorPoint:
    """Evaluate the surrogate and cache what derivatives need at ``x``."""
    x = np.asarray(x, dtype=float)
    h0, b, c = channel_terms(x, ctx.paths, ctx.wavenumber)
    u = ctx.cov.solve(h0)
    value = float(np.real(h0.conj() @ u))
    grad = 2.0 * np.real(np.conj(b) * u)
    k = ctx.wavenumber
    diag = 2.0 * k * k * np.real(np.conj(c) * u)
    return TaylorPoint(x=x, value=value, grad=grad, _b=b, _diag=diag, _cov=ctx.cov)


def surrogate_value(x: np.ndarray, ctx: SurrogateContext) -> float:
    """ghat(x) = h0(x)^H Rhat^{-1} h0(x); real and positive."""
    h0 = desired_channel(x, ctx.paths, ctx.wavenumber)
    return float(np.real(h0.conj() @ ctx.cov.solve(h0)))


def true_value(x: np.ndarray, scenario: ScenarioConfig) -> float:
    """g(x) with the exact covariance evaluated at ``x`` itself."""
    h0 = desired_channel(x, scenario.paths, scenario.wavenumber)
    cov = true_covariance(x, scenario)
    return float(np.real(h0.conj() @ cov.solve(h0)))


def gradient(x: np.ndarray, ctx: SurrogateContext) -> np.ndarray:
    """Gradient of the surrogate: 2 Re{conj(b) * Rhat^{-1} h0}."""
    return model_point(x, ctx).grad


def hessian(x: np.ndarray, ctx: SurrogateContext) -> np.ndarray:
    """Dense symmetric Hessian of the surrogate.

    H = 2 Re{diag(b)^H Rhat^{-1} diag(b)} - 2 k^2 diag(Re{conj(c) * u})
    with u = Rhat^{-1} h0(x).
    """
    x = np.asarray(x, dtype=float)
    h0, b, c = channel_terms(x, ctx.paths, ctx.wavenumber)
    u = ctx.cov.solve(h0)
    rinv = ctx.cov.inverse()
    k = ctx.wavenumber
    h = 2.0 * np.real(np.conj(b)[:, None] * rinv * b[None, :])
    h[np.diag_indices_from(h)] -= 2.0 * k * k * np.real(np.conj(c) * u)
    return 0.5 * (h + h.T)


def hessian_vector_product(
    x: np.ndarray, ctx: SurrogateContext, v: np.ndarray
) -> np.ndarray:
    """H v without forming H; one pair of triangular solves."""
    v = np.asarray(v, dtype=float)
    if v.shape != np.asarray(x).shape:
        raise ValueError("vector dimension does not match the point")
    return model_point(x, ctx).hvp(v)


def quadratic_model(f0: float, grad: np.ndarray, hvp, p: np.ndarray) -> float:
    """Second-order Taylor model f0 + g^T p + 0.5 p^T H p."""
    p = np.asarray(p, dtype=float)
    return float(f0 + grad @ p + 0.5 * (p @ hvp(p)))
