"""Physical-layer model for a movable-antenna receive array under jamming.

Narrowband far-field model on a linear axis.  A desired user reaches the
array over L planar paths, each jammer over a single line-of-sight path, and
the receiver sees those channels plus spatially white noise.  Covariances
(exact or blockwise sample estimates) are wrapped in a cached Cholesky
factorization so MVDR weights, quadratic forms, and derivative solves all
reuse cheap triangular solves.

Positions are expressed in the same length unit as the wavelength; with the
default wavelength of 1 every coordinate is in wavelengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


class CovarianceFactorizationError(RuntimeError):
    """Cholesky factorization failed; caller should raise the diagonal load."""


def to_db(ratio: float) -> float:
    """Power ratio to decibels."""
    return 10.0 * np.log10(ratio)


def from_db(db: float) -> float:
    """Decibels to power ratio."""
    return 10.0 ** (db / 10.0)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Nearest Hermitian matrix (symmetric part)."""
    return 0.5 * (a + a.conj().T)


def complex_normal(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian samples with E|z|^2 = power."""
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class DesiredPaths:
    """Multipath description of the desired user's channel.

    angles are arrival angles in radians measured from the array axis
    broadside; gains are the complex path amplitudes.
    """

    angles: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        self.angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        self.gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        if self.angles.shape != self.gains.shape:
            raise ValueError("angles and gains must have matching shapes")
        if self.angles.size == 0:
            raise ValueError("at least one propagation path is required")

    @property
    def n_paths(self) -> int:
        return self.angles.size


@dataclass
class JammerSet:
    """Line-of-sight jammers: arrival angle, complex gain, transmit power."""

    angles: np.ndarray
    gains: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        self.angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        self.gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        self.powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        if not (self.angles.shape == self.gains.shape == self.powers.shape):
            raise ValueError("angles, gains and powers must have matching shapes")
        if np.any(self.powers < 0):
            raise ValueError("jammer powers must be nonnegative")

    @classmethod
    def empty(cls) -> "JammerSet":
        return cls(np.zeros(0), np.zeros(0, dtype=complex), np.zeros(0))

    @property
    def count(self) -> int:
        return self.angles.size


@dataclass
class ScenarioConfig:
    """Signal environment: desired multipath, jammers, powers, wavelength."""

    wavelength: float
    sigma_s2: float
    sigma_n2: float
    paths: DesiredPaths
    jammers: JammerSet = field(default_factory=JammerSet.empty)

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.sigma_s2 < 0:
            raise ValueError("signal power must be nonnegative")
        if self.sigma_n2 <= 0:
            raise ValueError("noise power must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength


@dataclass
class SnapshotBlock:
    """One coherence block of array snapshots taken at a fixed anchor."""

    snapshots: np.ndarray  # (n_antennas, n_snapshots) complex
    anchor: np.ndarray
    index: int = 0

    def __post_init__(self):
        self.snapshots = np.asarray(self.snapshots, dtype=complex)
        self.anchor = np.asarray(self.anchor, dtype=float)
        if self.snapshots.ndim != 2:
            raise ValueError("snapshots must be a 2-D array")
        if self.snapshots.shape[0] != self.anchor.size:
            raise ValueError("snapshot rows must match the anchor dimension")

    @property
    def n_snapshots(self) -> int:
        return self.snapshots.shape[1]


@dataclass
class FactorizedCovariance:
    """Hermitian covariance with a cached lower Cholesky factor.

    ``matrix`` holds the raw (unloaded) covariance; ``factor`` is the lower
    Cholesky factor of ``matrix + eps_load * I``, and every solve goes
    through it.
    """

    matrix: np.ndarray
    factor: np.ndarray
    eps_load: float = 0.0

    @classmethod
    def from_matrix(
        cls,
        matrix: np.ndarray,
        eps_load: float = 0.0,
        fallback_load: bool = False,
    ) -> "FactorizedCovariance":
        """Factorize a covariance, optionally retrying with a trace-scaled load.

        With ``fallback_load`` a failed factorization is retried once with
        ``eps_load = 1e-6 * trace(R) / n``; otherwise the failure raises
        :class:`CovarianceFactorizationError`.
        """
        r = hermitize(np.asarray(matrix, dtype=complex))
        n = r.shape[0]
        try:
            factor = np.linalg.cholesky(r + eps_load * np.eye(n))
        except np.linalg.LinAlgError:
            if not fallback_load:
                raise CovarianceFactorizationError(
                    "covariance is not positive definite; raise eps_load"
                ) from None
            eps_load = max(eps_load, 1e-6 * np.trace(r).real / n)
            try:
                factor = np.linalg.cholesky(r + eps_load * np.eye(n))
            except np.linalg.LinAlgError:
                raise CovarianceFactorizationError(
                    "covariance is not positive definite even after loading"
                ) from None
        return cls(matrix=r, factor=factor, eps_load=eps_load)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply the inverse of the loaded covariance via two triangular solves."""
        z = solve_triangular(self.factor, b, lower=True, check_finite=False)
        return solve_triangular(
            self.factor.conj().T, z, lower=False, check_finite=False
        )

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.dim, dtype=complex))


def steering_vector(x: np.ndarray, theta: float, wavenumber: float) -> np.ndarray:
    """Array response at positions ``x`` for a plane wave from angle ``theta``.

    Entry n is exp(j * k * x_n * sin(theta)); every entry has unit modulus.
    """
    x = np.asarray(x, dtype=float)
    return np.exp(1j * wavenumber * np.sin(theta) * x)


def steering_matrix(x: np.ndarray, angles: np.ndarray, wavenumber: float) -> np.ndarray:
    """Stack steering vectors for several angles as columns."""
    x = np.asarray(x, dtype=float)
    return np.exp(1j * wavenumber * np.outer(x, np.sin(angles)))


def desired_channel(x: np.ndarray, paths: DesiredPaths, wavenumber: float) -> np.ndarray:
    """Desired-user channel: gain-weighted sum of path steering vectors."""
    return steering_matrix(x, paths.angles, wavenumber) @ paths.gains


def jammer_channel(
    x: np.ndarray, index: int, jammers: JammerSet, wavenumber: float
) -> np.ndarray:
    """Channel of one jammer: its complex gain times its steering vector."""
    if not 0 <= index < jammers.count:
        raise IndexError(f"jammer index {index} out of range [0, {jammers.count})")
    return jammers.gains[index] * steering_vector(x, jammers.angles[index], wavenumber)


def interference_plus_noise_covariance(
    x: np.ndarray, scenario: ScenarioConfig
) -> FactorizedCovariance:
    """Exact covariance of jamming plus noise at positions ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    r = scenario.sigma_n2 * np.eye(n, dtype=complex)
    k = scenario.wavenumber
    for i in range(scenario.jammers.count):
        g = jammer_channel(x, i, scenario.jammers, k)
        r += scenario.jammers.powers[i] * np.outer(g, g.conj())
    return FactorizedCovariance.from_matrix(r)


def true_covariance(x: np.ndarray, scenario: ScenarioConfig) -> FactorizedCovariance:
    """Exact receive covariance: signal plus jamming plus noise."""
    rin = interference_plus_noise_covariance(x, scenario)
    h0 = desired_channel(x, scenario.paths, scenario.wavenumber)
    r = rin.matrix + scenario.sigma_s2 * np.outer(h0, h0.conj())
    return FactorizedCovariance.from_matrix(r)


def _symbols(
    rng: np.random.Generator, n: int, power: float, kind: str
) -> np.ndarray:
    if kind == "gaussian":
        return complex_normal(rng, n, power)
    if kind == "qpsk":
        phases = 0.25 * np.pi * (2 * rng.integers(0, 4, size=n) + 1)
        return np.sqrt(power) * np.exp(1j * phases)
    raise ValueError(f"unknown symbol distribution {kind!r}")


def generate_snapshots(
    x: np.ndarray,
    scenario: ScenarioConfig,
    n_snapshots: int,
    rng: np.random.Generator,
    symbols: str = "gaussian",
    block_index: int = 0,
) -> SnapshotBlock:
    """Draw one coherence block of snapshots at anchor ``x``.

    Source symbols and noise are drawn in a fixed order (desired, jammers in
    index order, then noise) so runs with a common seed share realizations.
    """
    x = np.asarray(x, dtype=float)
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    k = scenario.wavenumber
    h0 = desired_channel(x, scenario.paths, k)
    s0 = _symbols(rng, n_snapshots, scenario.sigma_s2, symbols)
    data = np.outer(h0, s0)
    for i in range(scenario.jammers.count):
        gi = jammer_channel(x, i, scenario.jammers, k)
        si = _symbols(rng, n_snapshots, scenario.jammers.powers[i], symbols)
        data += np.outer(gi, si)
    data += complex_normal(rng, (x.size, n_snapshots), scenario.sigma_n2)
    return SnapshotBlock(snapshots=data, anchor=x.copy(), index=block_index)


def sample_covariance(
    block: SnapshotBlock,
    eps_load: float = 0.0,
    fallback_load: bool = False,
) -> FactorizedCovariance:
    """Blockwise sample covariance (outer-product average) of one block."""
    s = block.snapshots
    r = (s @ s.conj().T) / block.n_snapshots
    return FactorizedCovariance.from_matrix(r, eps_load, fallback_load)


def mvdr_weights(cov: FactorizedCovariance, h0: np.ndarray) -> np.ndarray:
    """Distortionless minimum-variance weights against ``cov``.

    w = R^{-1} h0 / (h0^H R^{-1} h0), so w^H h0 = 1 exactly.
    """
    h0 = np.asarray(h0, dtype=complex)
    if not np.any(h0):
        raise ValueError("steering channel is identically zero")
    u = cov.solve(h0)
    denom = np.real(h0.conj() @ u)
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("covariance solve produced a nonpositive quadratic form")
    return u / denom


def output_sinr(w: np.ndarray, x: np.ndarray, scenario: ScenarioConfig) -> float:
    """True output SINR of weights ``w`` applied at positions ``x``."""
    w = np.asarray(w, dtype=complex)
    h0 = desired_channel(x, scenario.paths, scenario.wavenumber)
    rin = interference_plus_noise_covariance(x, scenario).matrix
    signal = scenario.sigma_s2 * abs(w.conj() @ h0) ** 2
    denom = np.real(w.conj() @ rin @ w)
    return float(signal / denom)


def beampattern(
    w: np.ndarray,
    x: np.ndarray,
    angles: np.ndarray,
    wavenumber: float,
    normalize: bool = True,
) -> np.ndarray:
    """Magnitude response |w^H a(x, theta)| over a grid of angles.

    With ``normalize`` the response is returned in dB relative to its peak
    (peak = 0 dB); otherwise raw magnitudes are returned.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("angle grid is empty")
    a = steering_matrix(x, angles, wavenumber)
    mags = np.abs(np.asarray(w, dtype=complex).conj() @ a)
    if not normalize:
        return mags
    peak = mags.max()
    if peak == 0:
        raise ValueError("pattern is identically zero")
    return 20.0 * np.log10(mags / peak)


def random_scenario(
    rng: np.random.Generator,
    n_paths: int = 8,
    n_jammers: int = 8,
    snr_db: float = 0.0,
    jammer_power_ratio: float = 10.0,
    sigma_n2: float = 1.0,
    wavelength: float = 1.0,
) -> ScenarioConfig:
    """Draw a random environment.

    Path and jammer angles are uniform on [0, pi]; path gains are
    CN(0, 1/(2 n_paths)), jammer gains CN(0, 1).  Noise power is the
    reference: sigma_s2 = sigma_n2 * 10^(snr_db/10) and every jammer
    transmits at jammer_power_ratio * sigma_s2.  Jammers are drawn one at a
    time so scenarios with fewer jammers are prefixes of larger ones under a
    common seed.
    """
    sigma_s2 = sigma_n2 * from_db(snr_db)
    path_angles = rng.uniform(0.0, np.pi, size=n_paths)
    path_gains = complex_normal(rng, n_paths, 1.0 / (2.0 * n_paths))
    jam_angles = np.empty(n_jammers)
    jam_gains = np.empty(n_jammers, dtype=complex)
    for i in range(n_jammers):
        jam_angles[i] = rng.uniform(0.0, np.pi)
        jam_gains[i] = complex_normal(rng, (), 1.0)
    jammers = JammerSet(
        angles=jam_angles,
        gains=jam_gains,
        powers=np.full(n_jammers, jammer_power_ratio * sigma_s2),
    )
    return ScenarioConfig(
        wavelength=wavelength,
        sigma_s2=sigma_s2,
        sigma_n2=sigma_n2,
        paths=DesiredPaths(angles=path_angles, gains=path_gains),
        jammers=jammers,
    )
