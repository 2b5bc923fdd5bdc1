"""Rb vapor cell phenomenology: density, absorption and the NMOR response.

Densities are in atoms/cm^3 throughout; fields in tesla; powers in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .gaussian_optics import PhysicsDomainError

# log10(N / cm^-3) = A - B / T[K], least-squares fit to the seven
# (temperature, density) pairs quoted for the squeezer and magnetometer cells
VAPOR_FIT_A = 23.500525196402098
VAPOR_FIT_B_K = 3988.8847843658914
VAPOR_DENSITY_POINTS = (
    (25.0, 1.3e10),
    (35.0, 3.6e10),
    (50.0, 1.5e11),
    (55.0, 2.2e11),
    (60.0, 3.4e11),
    (66.0, 5.4e11),
    (70.0, 7.4e11),
)
T_MIN_C, T_MAX_C = -20.0, 200.0

# reference density for the rotation amplitudes
REF_DENSITY_CM3 = 1e11

# squeezer cell: 7 mW pump leaves as a 6 mW probe at 5.4e11 cm^-3 over 75 mm
SQUEEZER_PUMP_W = 7e-3
SQUEEZER_PROBE_W = 6e-3
SQUEEZER_DENSITY_CM3 = 5.4e11


def vapor_density(temperature_C: float) -> float:
    """Saturated Rb number density (cm^-3) at ``temperature_C``."""
    t = float(temperature_C)
    if not np.isfinite(t) or not (T_MIN_C <= t <= T_MAX_C):
        raise PhysicsDomainError(
            f"temperature {temperature_C} C outside vapor-curve domain [{T_MIN_C}, {T_MAX_C}] C"
        )
    return float(10 ** (VAPOR_FIT_A - VAPOR_FIT_B_K / (t + 273.15)))


@dataclass(frozen=True)
class CellParams:
    """Magnetometer (or squeezer) vapor cell.

    Rotation amplitudes are quoted per ``REF_DENSITY_CM3`` atoms and for a
    fully saturated NMOR power dependence; the model rescales them by
    density, transmission and probe power.
    """

    temperature_C: float = 40.0
    length_m: float = 0.075
    sigma_cm2: float = 3.6036036036036036e-13
    broad_width_T: float = 50e-6
    narrow_width_T: float = 2.5e-6
    broad_amp_rad: float = 3.534e-3
    narrow_amp_rad: float = 2.827e-3
    narrow_sat_power_W: float = 1.5e-3
    narrow_gate_width_W: float = 0.1e-3
    amp_sat_power_W: float = 6e-3
    asym: float = 0.05
    bias_field_T: float = -2.5e-6
    rin_coupling_gain: float = 28.26

    def __post_init__(self):
        positive = ("length_m", "sigma_cm2", "broad_width_T", "narrow_width_T",
                    "narrow_sat_power_W", "narrow_gate_width_W", "amp_sat_power_W")
        for name in positive:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise PhysicsDomainError(f"{name} must be > 0, got {value}")
        if not (0.0 <= self.asym < 1.0):
            raise PhysicsDomainError(f"asym must lie in [0, 1), got {self.asym}")
        if self.broad_amp_rad < 0 or self.narrow_amp_rad < 0 or self.rin_coupling_gain < 0:
            raise PhysicsDomainError("amplitudes and coupling gain must be >= 0")

    @property
    def length_cm(self) -> float:
        return self.length_m * 100.0

    @property
    def density_cm3(self) -> float:
        return vapor_density(self.temperature_C)

    @property
    def optimal_density_cm3(self) -> float:
        """Density maximizing N*exp(-sigma*N*L), i.e. one absorption length."""
        return 1.0 / (self.sigma_cm2 * self.length_cm)

    def with_(self, **changes) -> "CellParams":
        return replace(self, **changes)


def squeezer_cell() -> CellParams:
    """Squeezer cell profile, cross-section anchored to the 7 mW -> 6 mW loss."""
    length_cm = 7.5
    sigma = -np.log(SQUEEZER_PROBE_W / SQUEEZER_PUMP_W) / (SQUEEZER_DENSITY_CM3 * length_cm)
    return CellParams(temperature_C=66.0, length_m=0.075, sigma_cm2=float(sigma))


def transmission(density_cm3, cell: CellParams):
    """Beer-Lambert power transmission ``exp(-sigma*N*L)``."""
    n = np.asarray(density_cm3, dtype=float)
    if np.any(n < 0):
        raise PhysicsDomainError("density must be >= 0")
    t = np.exp(-cell.sigma_cm2 * n * cell.length_cm)
    return float(t) if t.ndim == 0 else t


def dispersive(u):
    """Dispersive Lorentzian u/(1+u^2); extrema +-1/2 at u = +-1."""
    u = np.asarray(u, dtype=float)
    return u / (1.0 + u * u)


def narrow_gate(power_W, cell: CellParams):
    """Logistic switch-on of the narrow resonance around ``narrow_sat_power_W``."""
    x = (np.asarray(power_W, dtype=float) - cell.narrow_sat_power_W) / cell.narrow_gate_width_W
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def power_factor(power_W, cell: CellParams):
    p = np.asarray(power_W, dtype=float)
    return p / (p + cell.amp_sat_power_W)


def _amplitude_scale(density_cm3: float, power_W: float, cell: CellParams) -> float:
    if power_W < 0:
        raise PhysicsDomainError(f"power must be >= 0, got {power_W}")
    return (density_cm3 / REF_DENSITY_CM3) * transmission(density_cm3, cell) \
        * float(power_factor(power_W, cell))


def nmor_components(B_T, cell: CellParams, density_cm3: float, power_W: float):
    """Return the (broad, narrow) rotation contributions in radians."""
    scale = _amplitude_scale(density_cm3, power_W, cell)
    b = np.asarray(B_T, dtype=float)
    broad = scale * cell.broad_amp_rad * dispersive(b / cell.broad_width_T)
    un = b / cell.narrow_width_T
    narrow = (scale * cell.narrow_amp_rad * float(narrow_gate(power_W, cell))
              * dispersive(un) * (1.0 + cell.asym * un))
    return broad, narrow


def nmor_rotation(B_T, cell: CellParams, density_cm3: float, power_W: float):
    """Polarization rotation (rad) versus longitudinal field ``B_T``.

    Broad Zeeman S-curve plus a narrow zero-field feature from atoms that
    return to the beam; both scale with density times transmission. The
    narrow term is gated off below ``narrow_sat_power_W``.
    """
    broad, narrow = nmor_components(B_T, cell, density_cm3, power_W)
    out = broad + narrow
    return float(out) if np.ndim(out) == 0 else out


def _slope_at(B, cell, density_cm3, power_W) -> float:
    # central difference on a step small against the narrowest feature
    h = 1e-4 * cell.narrow_width_T
    hi = nmor_rotation(B + h, cell, density_cm3, power_W)
    lo = nmor_rotation(B - h, cell, density_cm3, power_W)
    return (hi - lo) / (2 * h)


def operating_point(cell: CellParams, density_cm3: float, power_W: float) -> tuple[float, float]:
    """Steepest point (field, slope) on the B <= 0 flank of the narrow resonance."""
    if density_cm3 <= 0 or _amplitude_scale(density_cm3, power_W, cell) == 0:
        return 0.0, 0.0
    span = 2.0 * cell.broad_width_T
    grid = np.unique(np.concatenate([
        -np.linspace(0.0, 4.0 * cell.narrow_width_T, 801),
        -np.linspace(4.0 * cell.narrow_width_T, span, 401),
    ]))
    slopes = np.array([_slope_at(b, cell, density_cm3, power_W) for b in grid])
    i = int(np.argmax(slopes))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best_b, best_s = float(grid[i]), float(slopes[i])
    if hi > lo:
        res = minimize_scalar(lambda b: -_slope_at(b, cell, density_cm3, power_W),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6 * cell.narrow_width_T})
        if -res.fun > best_s:
            best_b, best_s = float(res.x), float(-res.fun)
    return best_b, max(best_s, 0.0)


def response_slope(cell: CellParams, density_cm3: float, power_W: float) -> float:
    """Maximum rotation slope (rad/T) on the left flank of the narrow peak."""
    return operating_point(cell, density_cm3, power_W)[1]


def rin_coupling(density_cm3: float, power_W: float, cell: CellParams) -> float:
    """Rotation produced per unit relative power fluctuation (rad).

    ``|P * dphi/dP|`` at the magnetometer's bias field, scaled by
    ``cell.rin_coupling_gain``. Zero without atoms.
    """
    if density_cm3 < 0:
        raise PhysicsDomainError("density must be >= 0")
    if density_cm3 == 0 or power_W <= 0:
        return 0.0
    eps = 1e-4
    up = nmor_rotation(cell.bias_field_T, cell, density_cm3, power_W * (1 + eps))
    dn = nmor_rotation(cell.bias_field_T, cell, density_cm3, power_W * (1 - eps))
    return cell.rin_coupling_gain * abs(up - dn) / (2 * eps)


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    b_values_T: np.ndarray
    phi_values_rad: np.ndarray
    slope_rad_per_T: float
    operating_field_T: float = 0.0
    density_cm3: float = 0.0
    power_W: float = 0.0

    def __post_init__(self):
        if len(self.b_values_T) != len(self.phi_values_rad):
            raise ValueError("b_values_T and phi_values_rad differ in length")


def response_curve(b_values_T, cell: CellParams, density_cm3: float, power_W: float) -> ResponseCurve:
    b = np.asarray(b_values_T, dtype=float)
    phi = np.asarray(nmor_rotation(b, cell, density_cm3, power_W), dtype=float)
    b_op, slope = operating_point(cell, density_cm3, power_W)
    return ResponseCurve(b, phi, slope, b_op, density_cm3, power_W)
