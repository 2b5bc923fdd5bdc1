"""Gaussian (covariance-matrix) description of a two-polarization light field.

Quadratures are ordered ``(q_x, p_x, q_y, p_y)`` and normalized so that the
vacuum variance of every quadrature is 1 (shot-noise limit = 0 dB). Mean
quadratures are expressed per unit bandwidth, i.e. a coherent carrier with
photon flux ``F`` (photons/s) has ``mean_q = 2*sqrt(F)``.

All operations are pure functions returning new states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

DEFAULT_WAVELENGTH_M = 795e-9

# float round-off allowance for composed symplectic maps
EIG_TOL = 1e-12
HEISENBERG_TOL = 1e-9

_OMEGA = np.array([[0.0, 1.0], [-1.0, 0.0]])


class PhysicsDomainError(ValueError):
    """A parameter lies outside the physically meaningful domain."""


def rotation_2x2(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def photon_flux(power_W: float, wavelength_m: float = DEFAULT_WAVELENGTH_M) -> float:
    """Photon flux in photons/s carried by ``power_W`` at ``wavelength_m``."""
    if power_W < 0:
        raise PhysicsDomainError(f"power_W must be >= 0, got {power_W}")
    return power_W * wavelength_m / (PLANCK * SPEED_OF_LIGHT)


def photon_energy(wavelength_m: float = DEFAULT_WAVELENGTH_M) -> float:
    return PLANCK * SPEED_OF_LIGHT / wavelength_m


def _clean_cov(cov, size: int) -> np.ndarray:
    cov = np.array(cov, dtype=float)
    if cov.shape != (size, size):
        raise ValueError(f"covariance must be {size}x{size}, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ValueError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > 1e-9 * scale:
        raise ValueError("covariance matrix is not symmetric")
    return 0.5 * (cov + cov.T)


def _check_physical(cov: np.ndarray) -> np.ndarray:
    """Validate positivity and the uncertainty principle; clamp round-off."""
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= -EIG_TOL:
        raise PhysicsDomainError(
            f"covariance is not positive definite (min eigenvalue {evals[0]:.3e})"
        )
    if evals[0] < EIG_TOL:
        evals = np.clip(evals, EIG_TOL, None)
        cov = (evecs * evals) @ evecs.T
    n = cov.shape[0] // 2
    omega = np.kron(np.eye(n), _OMEGA)
    # symplectic eigenvalues are |eig(i*Omega*V)|; each must be >= 1
    nu = np.sort(np.abs(np.linalg.eigvals(1j * omega @ cov)))
    if nu[0] < 1.0 - HEISENBERG_TOL:
        raise PhysicsDomainError(
            f"covariance violates the uncertainty bound (symplectic eigenvalue {nu[0]:.6g} < 1)"
        )
    return cov


@dataclass(frozen=True, eq=False)
class ModeState:
    """Single optical mode: mean quadratures and 2x2 covariance."""

    mean_q: float = 0.0
    mean_p: float = 0.0
    cov: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        cov = _check_physical(_clean_cov(self.cov, 2))
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean_q", float(self.mean_q))
        object.__setattr__(self, "mean_p", float(self.mean_p))

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean_q, self.mean_p])

    def variance_along(self, angle: float) -> float:
        """Variance of the quadrature ``q cos(angle) + p sin(angle)``."""
        u = np.array([np.cos(angle), np.sin(angle)])
        return float(u @ self.cov @ u)

    def min_variance(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])

    def max_variance(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[-1])


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezer output parameters.

    ``r`` is the squeezing parameter, ``theta_rad`` the direction of the
    minor (squeezed) axis in the q-p plane and ``excess`` a multiplicative
    impurity factor applied to both axes.
    """

    r: float = 0.3639
    theta_rad: float = 0.0
    excess: float = 1.26

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise PhysicsDomainError(f"squeezing parameter r must be >= 0, got {self.r}")
        if not np.isfinite(self.excess) or self.excess < 1:
            raise PhysicsDomainError(f"excess must be >= 1, got {self.excess}")

    @property
    def min_variance(self) -> float:
        return self.excess * np.exp(-2 * self.r)

    @property
    def max_variance(self) -> float:
        return self.excess * np.exp(2 * self.r)

    @classmethod
    def from_db(cls, squeezing_db: float, theta_rad: float = 0.0, excess: float = 1.0):
        """Build parameters giving ``squeezing_db`` below SQL on the minor axis."""
        v_min = 10 ** (-abs(squeezing_db) / 10)
        r = max(0.0, 0.5 * np.log(excess / v_min))
        return cls(r=r, theta_rad=theta_rad, excess=excess)


@dataclass(frozen=True, eq=False)
class PolarizationState:
    """Two polarization modes (x carrier, y orthogonal) as one Gaussian state.

    The optical power is not stored independently; it follows from the mean
    field through the photon-flux conversion so the two can never disagree.
    """

    mean: np.ndarray = field(default_factory=lambda: np.zeros(4))
    cov: np.ndarray = field(default_factory=lambda: np.eye(4))
    wavelength_m: float = DEFAULT_WAVELENGTH_M

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        cov = _check_physical(_clean_cov(self.cov, 4))
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if self.wavelength_m <= 0:
            raise PhysicsDomainError("wavelength must be positive")

    @classmethod
    def from_modes(cls, x_mode: ModeState, y_mode: ModeState, xy_cov=None,
                   wavelength_m: float = DEFAULT_WAVELENGTH_M) -> "PolarizationState":
        xy = np.zeros((2, 2)) if xy_cov is None else np.asarray(xy_cov, dtype=float)
        cov = np.block([[x_mode.cov, xy], [xy.T, y_mode.cov]])
        mean = np.concatenate([x_mode.mean, y_mode.mean])
        return cls(mean=mean, cov=cov, wavelength_m=wavelength_m)

    @property
    def x_mode(self) -> ModeState:
        return ModeState(self.mean[0], self.mean[1], self.cov[:2, :2])

    @property
    def y_mode(self) -> ModeState:
        return ModeState(self.mean[2], self.mean[3], self.cov[2:, 2:])

    @property
    def xy_cov(self) -> np.ndarray:
        return self.cov[:2, 2:].copy()

    @property
    def photon_flux(self) -> float:
        """Mean photon flux (photons/s) of both polarizations together."""
        return float(self.mean @ self.mean) / 4.0

    @property
    def power_W(self) -> float:
        return self.photon_flux * photon_energy(self.wavelength_m)

    def replace(self, mean=None, cov=None) -> "PolarizationState":
        return PolarizationState(
            mean=self.mean if mean is None else mean,
            cov=self.cov if cov is None else cov,
            wavelength_m=self.wavelength_m,
        )


def vacuum_state(wavelength_m: float = DEFAULT_WAVELENGTH_M) -> PolarizationState:
    return PolarizationState(wavelength_m=wavelength_m)


def coherent_probe(power_W: float, wavelength_m: float = DEFAULT_WAVELENGTH_M) -> PolarizationState:
    """x-polarized coherent carrier with a vacuum y-polarization."""
    flux = photon_flux(power_W, wavelength_m)
    mean = np.array([2.0 * np.sqrt(flux), 0.0, 0.0, 0.0])
    return PolarizationState(mean=mean, cov=np.eye(4), wavelength_m=wavelength_m)


def squeezed_vacuum(params: SqueezeParams) -> ModeState:
    """Zero-mean squeezed (possibly impure) vacuum with minor axis at ``theta_rad``."""
    rot = rotation_2x2(params.theta_rad)
    diag = np.diag([params.min_variance, params.max_variance])
    return ModeState(0.0, 0.0, rot @ diag @ rot.T)


def squeezed_probe(power_W: float, params: SqueezeParams,
                   wavelength_m: float = DEFAULT_WAVELENGTH_M) -> PolarizationState:
    """Polarization-squeezed probe: x carrier plus squeezed vacuum in y."""
    carrier = coherent_probe(power_W, wavelength_m)
    return PolarizationState.from_modes(carrier.x_mode, squeezed_vacuum(params),
                                        wavelength_m=wavelength_m)


def apply_loss(state: PolarizationState, eta: float) -> PolarizationState:
    """Polarization-independent loss with power transmission ``eta``.

    Equivalent to a beam splitter mixing each mode with vacuum:
    ``V -> eta*V + (1-eta)*I`` and means scaled by ``sqrt(eta)``.
    """
    if not (0.0 <= eta <= 1.0) or not np.isfinite(eta):
        raise PhysicsDomainError(f"transmission eta must lie in [0, 1], got {eta}")
    cov = eta * state.cov + (1.0 - eta) * np.eye(4)
    return state.replace(mean=np.sqrt(eta) * state.mean, cov=cov)


def _apply_symplectic(state: PolarizationState, m: np.ndarray) -> PolarizationState:
    return state.replace(mean=m @ state.mean, cov=m @ state.cov @ m.T)


def apply_phase_retarder(state: PolarizationState, delta_rad: float) -> PolarizationState:
    """Phase shift ``delta_rad`` of the y polarization relative to x.

    Rotates the y-mode quadratures (and its cross-covariance with x) in
    phase space; the x carrier is untouched.
    """
    m = np.eye(4)
    m[2:, 2:] = rotation_2x2(delta_rad)
    return _apply_symplectic(state, m)


def apply_polarization_rotation(state: PolarizationState, phi_rad: float) -> PolarizationState:
    """Rotate the polarization by ``phi_rad`` (x -> x cos - y sin, y -> x sin + y cos)."""
    m = np.kron(rotation_2x2(phi_rad), np.eye(2))
    return _apply_symplectic(state, m)


def project_pbs(state: PolarizationState, keep_axis: str = "x") -> PolarizationState:
    """Keep one polarization; the rejected port is refilled by vacuum."""
    if keep_axis not in ("x", "y"):
        raise ValueError(f"keep_axis must be 'x' or 'y', got {keep_axis!r}")
    kept = slice(0, 2) if keep_axis == "x" else slice(2, 4)
    mean = np.zeros(4)
    mean[kept] = state.mean[kept]
    cov = np.eye(4)
    cov[kept, kept] = state.cov[kept, kept]
    return state.replace(mean=mean, cov=cov)


def _analyzer_ports(angle: float):
    """Linear maps from (q_x, p_x, q_y, p_y) to the two PBS output quadratures."""
    c, s = np.cos(angle), np.sin(angle)
    a = np.array([[c, 0, s, 0], [0, c, 0, s]], dtype=float)
    b = np.array([[-s, 0, c, 0], [0, -s, 0, c]], dtype=float)
    return a, b


def analyzer_signal(state: PolarizationState, analyzer_angle_rad: float = np.pi / 4) -> float:
    """Mean balanced photocurrent (photons/s) of a PBS analyzer at the given angle."""
    a, b = _analyzer_ports(analyzer_angle_rad)
    xa, xb = a @ state.mean, b @ state.mean
    return float(xa @ xa - xb @ xb) / 4.0


def analyzer_variance(state: PolarizationState, analyzer_angle_rad: float = np.pi / 4) -> float:
    """Balanced-detection noise variance normalized to shot noise.

    Linearized about the mean field: the photocurrent difference
    ``(|a|^2 - |b|^2)`` is expanded to first order in the quadrature
    fluctuations, and its variance is divided by the total photon number,
    which is the variance a coherent state of equal power would give.
    """
    total = state.photon_flux
    if total <= 0:
        raise PhysicsDomainError("analyzer_variance needs a nonzero carrier (no local oscillator)")
    a, b = _analyzer_ports(analyzer_angle_rad)
    grad = 0.5 * (a.T @ (a @ state.mean) - b.T @ (b @ state.mean))
    return float(grad @ state.cov @ grad) / total
