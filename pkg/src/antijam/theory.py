"""Empirical verifiers for the error bounds behind the surrogate approach.

Each check draws random instances and tests a stated inequality or scaling
law: steering and covariance Lipschitz continuity, sample-covariance
spectral concentration, growth of the surrogate gap with anchor distance,
matrix inverse perturbation bounds, and the geometric-bias certificate that
separates the historical-average covariance from the local-anchor one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ScenarioConfig,
    complex_normal,
    desired_channel,
    generate_snapshots,
    hermitize,
    random_scenario,
    sample_covariance,
    steering_vector,
    true_covariance,
)
from .objective import surrogate_value, true_value, SurrogateContext


def spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, ord=2))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(complex_normal(rng, (dim, dim), 1.0))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pd(
    rng: np.random.Generator, dim: int, log10_eig_range: tuple[float, float] = (-2, 2)
) -> np.ndarray:
    """Random Hermitian positive definite matrix with log-uniform spectrum."""
    eigs = 10.0 ** rng.uniform(*log10_eig_range, size=dim)
    q = random_unitary(rng, dim)
    return hermitize(q @ np.diag(eigs) @ q.conj().T)


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    g = complex_normal(rng, (dim, dim), scale * scale)
    return hermitize(g)


@dataclass
class TheoryBounds:
    """Closed-form constants attached to one scenario and array size."""

    lipschitz_r: float
    gap_constant: float
    n_antennas: int


@dataclass
class BiasCertificate:
    """Constants of the geometric-bias separation guarantee.

    ``margin`` (= c0/2) is the guaranteed gap between the inverse-covariance
    distances of the averaged and local anchors, valid for displacements up
    to ``rho0``.
    """

    mu: float
    lam: float
    a0: float
    c0: float
    c1: float
    rho0: float

    @property
    def margin(self) -> float:
        return 0.5 * self.c0


def lipschitz_constant(scenario: ScenarioConfig, n_antennas: int) -> float:
    """Spectral-norm Lipschitz constant of x -> R(x).

    L_R = 2 k sqrt(N) (sigma_s^2 sqrt(L) |alpha|^2 sqrt(sum sin^2 theta)
          + sum_i sigma_i^2 |zeta_i|^2 |sin phi_i|).
    """
    k = scenario.wavenumber
    alpha = scenario.paths.gains
    sin_t = np.sin(scenario.paths.angles)
    path_term = (
        scenario.sigma_s2
        * np.sqrt(scenario.paths.n_paths)
        * float(np.linalg.norm(alpha)) ** 2
        * float(np.sqrt(np.sum(sin_t**2)))
    )
    jam_term = float(
        np.sum(
            scenario.jammers.powers
            * np.abs(scenario.jammers.gains) ** 2
            * np.abs(np.sin(scenario.jammers.angles))
        )
    )
    return 2.0 * k * np.sqrt(n_antennas) * (path_term + jam_term)


def gap_constant(scenario: ScenarioConfig) -> float:
    """Prefactor C_R = 2 k sqrt(L) |alpha| / sigma_n^4 of the surrogate gap bound."""
    return (
        2.0
        * scenario.wavenumber
        * np.sqrt(scenario.paths.n_paths)
        * float(np.linalg.norm(scenario.paths.gains))
        / scenario.sigma_n2**4
    )


def bounds_for(scenario: ScenarioConfig, n_antennas: int) -> TheoryBounds:
    return TheoryBounds(
        lipschitz_r=lipschitz_constant(scenario, n_antennas),
        gap_constant=gap_constant(scenario),
        n_antennas=n_antennas,
    )


def check_steering_lipschitz(
    n_trials: int,
    rng: np.random.Generator,
    n_antennas: int = 8,
    box: float = 8.0,
    wavenumber: float = 2.0 * np.pi,
    tol: float = 1e-9,
) -> tuple[int, float]:
    """Test |a(x) - a(y)| <= k |sin theta| |x - y| on random draws.

    Returns the violation count and the largest observed slack
    (LHS - RHS, negative when the bound holds strictly).
    """
    violations = 0
    max_slack = -np.inf
    for _ in range(n_trials):
        x = rng.uniform(0.0, box, size=n_antennas)
        y = rng.uniform(0.0, box, size=n_antennas)
        theta = rng.uniform(-np.pi, np.pi)
        lhs = np.linalg.norm(
            steering_vector(x, theta, wavenumber) - steering_vector(y, theta, wavenumber)
        )
        rhs = wavenumber * abs(np.sin(theta)) * np.linalg.norm(x - y)
        slack = lhs - rhs
        max_slack = max(max_slack, slack)
        if slack > tol * max(1.0, rhs):
            violations += 1
    return violations, float(max_slack)


def check_covariance_lipschitz(
    n_trials: int,
    rng: np.random.Generator,
    n_antennas: int = 8,
    box: float = 8.0,
    scenario: ScenarioConfig | None = None,
    tol: float = 1e-9,
) -> tuple[int, float]:
    """Test |R(x) - R(y)| <= L_R |x - y| in spectral norm on random pairs."""
    violations = 0
    max_slack = -np.inf
    for _ in range(n_trials):
        s = scenario or random_scenario(rng, snr_db=rng.uniform(-10, 10))
        l_r = lipschitz_constant(s, n_antennas)
        x = rng.uniform(0.0, box, size=n_antennas)
        y = rng.uniform(0.0, box, size=n_antennas)
        lhs = spectral_norm(true_covariance(x, s).matrix - true_covariance(y, s).matrix)
        rhs = l_r * float(np.linalg.norm(x - y))
        slack = lhs - rhs
        max_slack = max(max_slack, slack)
        if slack > tol * max(1.0, rhs):
            violations += 1
    return violations, float(max_slack)


def concentration_curve(
    scenario: ScenarioConfig,
    x: np.ndarray,
    t_values,
    n_trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Mean spectral error |Rhat - R| at each snapshot count."""
    x = np.asarray(x, dtype=float)
    r = true_covariance(x, scenario).matrix
    means = np.zeros(len(t_values))
    for j, t in enumerate(t_values):
        errs = [
            spectral_norm(
                sample_covariance(
                    generate_snapshots(x, scenario, int(t), rng)
                ).matrix
                - r
            )
            for _ in range(n_trials)
        ]
        means[j] = float(np.mean(errs))
    return means


def loglog_slope(t_values, errors) -> float:
    """Least-squares slope of log(error) against log(T)."""
    coeffs = np.polyfit(np.log(np.asarray(t_values, float)), np.log(errors), 1)
    return float(coeffs[0])


def surrogate_gap_profile(
    scenario: ScenarioConfig,
    anchor: np.ndarray,
    t_grid,
    n_snapshots: int,
    n_trials: int,
    rng: np.random.Generator,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """Mean |g(x_t) - ghat(x_t)| along a ray x_t = anchor + t * direction.

    One snapshot block per trial is reused across the whole ray, so the
    profile isolates how the gap grows with distance from the anchor.
    """
    anchor = np.asarray(anchor, dtype=float)
    if direction is None:
        direction = rng.standard_normal(anchor.size)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    t_grid = np.asarray(t_grid, dtype=float)
    gaps = np.zeros((n_trials, t_grid.size))
    true_vals = np.array(
        [true_value(anchor + t * direction, scenario) for t in t_grid]
    )
    for trial in range(n_trials):
        cov = sample_covariance(generate_snapshots(anchor, scenario, n_snapshots, rng))
        ctx = SurrogateContext(
            anchor=anchor,
            cov=cov,
            paths=scenario.paths,
            wavenumber=scenario.wavenumber,
        )
        for j, t in enumerate(t_grid):
            gaps[trial, j] = abs(
                true_vals[j] - surrogate_value(anchor + t * direction, ctx)
            )
    return gaps.mean(axis=0)


def check_inverse_perturbation(
    n_trials: int,
    rng: np.random.Generator,
    dim: int = 4,
    tol: float = 1e-9,
) -> dict:
    """Test both inverse-perturbation bounds on random Hermitian draws.

    Lower bound: |(A+B)^{-1} - A^{-1}| >= |X| / ((1+|X|) |A|) with
    X = A^{-1/2} B A^{-1/2} and A, A+B positive definite.
    Upper bound: |H1^{-1} - H2^{-1}| <= |H1 - H2| / mu^2 when both
    matrices dominate mu I.
    """
    lower_violations = 0
    lower_slack = -np.inf
    upper_violations = 0
    upper_slack = -np.inf
    for _ in range(n_trials):
        a = random_pd(rng, dim)
        b = random_hermitian(rng, dim, scale=spectral_norm(a))
        for _ in range(200):
            if np.linalg.eigvalsh(a + b)[0] > 1e-10 * spectral_norm(a):
                break
            b = 0.5 * b
        lam, q = np.linalg.eigh(a)
        a_inv_half = q @ np.diag(lam**-0.5) @ q.conj().T
        x = hermitize(a_inv_half @ b @ a_inv_half)
        xnorm = spectral_norm(x)
        lhs = spectral_norm(np.linalg.inv(a + b) - np.linalg.inv(a))
        rhs = xnorm / ((1.0 + xnorm) * spectral_norm(a))
        slack = rhs - lhs
        lower_slack = max(lower_slack, slack)
        if slack > tol * max(1.0, rhs):
            lower_violations += 1

        h1 = random_pd(rng, dim)
        h2 = random_pd(rng, dim)
        mu = min(np.linalg.eigvalsh(h1)[0], np.linalg.eigvalsh(h2)[0])
        lhs = spectral_norm(np.linalg.inv(h1) - np.linalg.inv(h2))
        rhs = spectral_norm(h1 - h2) / mu**2
        slack = lhs - rhs
        upper_slack = max(upper_slack, slack)
        if slack > tol * max(1.0, rhs):
            upper_violations += 1
    return {
        "trials": n_trials,
        "lower_violations": lower_violations,
        "lower_max_slack": float(lower_slack),
        "upper_violations": upper_violations,
        "upper_max_slack": float(upper_slack),
    }


def _mean_covariance(
    positions: list[np.ndarray],
    scenario: ScenarioConfig,
    n_snapshots: int | None,
    rng: np.random.Generator | None,
) -> np.ndarray:
    mats = []
    for x in positions:
        if n_snapshots is None:
            mats.append(true_covariance(x, scenario).matrix)
        else:
            mats.append(
                sample_covariance(
                    generate_snapshots(x, scenario, n_snapshots, rng)
                ).matrix
            )
    return sum(mats) / len(mats)


def geometric_bias_check(
    x_star: np.ndarray,
    anchors: list[np.ndarray],
    scenario: ScenarioConfig,
    rng: np.random.Generator,
    radii=(0.1, 0.5, 1.0),
    samples_per_radius: int = 3,
    n_snapshots: int | None = None,
) -> tuple[BiasCertificate, int, int]:
    """Certify that averaging covariances over spread anchors hurts locally.

    Builds the certificate constants from the exact covariances, then tests

        |Rtil^{-1} - R(x*+delta)^{-1}| >= |R0^{-1} - R(x*+delta)^{-1}| + c0/2

    for displacements with |delta| <= rho0.  With ``n_snapshots`` set, the
    two anchored covariances are replaced by sample estimates while the
    certificate and the displaced covariance stay exact.  Returns the
    certificate and the pass/total counts.
    """
    x_star = np.asarray(x_star, dtype=float)
    n = x_star.size
    r0_true = true_covariance(x_star, scenario).matrix
    rtil_true = sum(true_covariance(np.asarray(a, float), scenario).matrix for a in anchors) / len(anchors)
    b = rtil_true - r0_true
    lam, q = np.linalg.eigh(r0_true)
    inv_half = q @ np.diag(lam**-0.5) @ q.conj().T
    a0 = spectral_norm(hermitize(inv_half @ b @ inv_half))
    if a0 <= 1e-12:
        raise ValueError("anchor spread produces no covariance bias; certificate is vacuous")
    power_sum = scenario.sigma_s2 * float(
        np.sum(np.abs(scenario.paths.gains) ** 2)
    ) + float(np.sum(scenario.jammers.powers * np.abs(scenario.jammers.gains) ** 2))
    lam_bound = n * power_sum + scenario.sigma_n2
    mu = scenario.sigma_n2
    c0 = a0 / ((1.0 + a0) * lam_bound)
    c1 = lipschitz_constant(scenario, n) / mu**2
    cert = BiasCertificate(mu=mu, lam=lam_bound, a0=a0, c0=c0, c1=c1, rho0=c0 / (4.0 * c1))

    if n_snapshots is None:
        r0_eval, rtil_eval = r0_true, rtil_true
    else:
        r0_eval = _mean_covariance([x_star], scenario, n_snapshots, rng)
        rtil_eval = _mean_covariance(
            [np.asarray(a, float) for a in anchors], scenario, n_snapshots, rng
        )
    r0_inv = np.linalg.inv(r0_eval)
    rtil_inv = np.linalg.inv(rtil_eval)
    passes = 0
    total = 0
    for frac in radii:
        for _ in range(samples_per_radius):
            delta = rng.standard_normal(n)
            delta *= frac * cert.rho0 / np.linalg.norm(delta)
            r_delta_inv = np.linalg.inv(true_covariance(x_star + delta, scenario).matrix)
            lhs = spectral_norm(rtil_inv - r_delta_inv)
            rhs = spectral_norm(r0_inv - r_delta_inv) + cert.margin
            total += 1
            if lhs >= rhs - 1e-12 * max(1.0, rhs):
                passes += 1
    return cert, passes, total


def surrogate_error_comparison(
    x_star: np.ndarray,
    anchors: list[np.ndarray],
    scenario: ScenarioConfig,
    rng: np.random.Generator,
    radii=(0.1, 0.5, 1.0),
    samples_per_radius: int = 3,
) -> tuple[int, int]:
    """Count displacements where the averaged surrogate has the larger error.

    Compares |h^H Rtil^{-1} h - g| against |h^H R0^{-1} h - g| at small
    displacements from x*, all with exact covariances.
    """
    x_star = np.asarray(x_star, dtype=float)
    cert, _, _ = geometric_bias_check(
        x_star, anchors, scenario, rng, radii=(), samples_per_radius=0
    )
    r0 = true_covariance(x_star, scenario).matrix
    rtil = sum(true_covariance(np.asarray(a, float), scenario).matrix for a in anchors) / len(anchors)
    r0_inv = np.linalg.inv(r0)
    rtil_inv = np.linalg.inv(rtil)
    k = scenario.wavenumber
    wins = 0
    total = 0
    for frac in radii:
        for _ in range(samples_per_radius):
            delta = rng.standard_normal(x_star.size)
            delta *= frac * cert.rho0 / np.linalg.norm(delta)
            x = x_star + delta
            h = desired_channel(x, scenario.paths, k)
            g = true_value(x, scenario)
            err_avg = abs(float(np.real(h.conj() @ rtil_inv @ h)) - g)
            err_loc = abs(float(np.real(h.conj() @ r0_inv @ h)) - g)
            total += 1
            if err_avg >= err_loc:
                wins += 1
    return wins, total
