"""System parameters, unit conversions, planar-array response, and the ADC model.

All statistical parameters are stored in linear scale; dB / dBm values are
converted at the configuration boundary.  Every type here is immutable after
construction and every function is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Inverse signal-to-quantization-noise ratio of a b-bit scalar quantizer.
# Tabulated for b <= 5; the asymptotic formula (pi*sqrt(3)/2) * 2^(-2b)
# applies strictly for b > 5 (it does not reproduce the b = 5 entry).
_RHO_TABLE = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}

INFINITE_BITS = math.inf


def db_to_linear(x_db: float) -> float:
    """Convert a dB value to linear scale."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a linear value to dB."""
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    """Convert a dBm power to watts."""
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def rho_for_bits(bits: float) -> float:
    """Distortion factor rho of a b-bit ADC; 0 for infinite resolution.

    Uses the exact table for b in 1..5 and (pi*sqrt(3)/2) * 2^(-2b) for b > 5.
    """
    if bits == INFINITE_BITS:
        return 0.0
    if bits != int(bits) or bits < 1:
        raise ValueError(f"ADC bits must be a positive integer or infinite, got {bits!r}")
    b = int(bits)
    if b in _RHO_TABLE:
        return _RHO_TABLE[b]
    return (math.pi * math.sqrt(3.0) / 2.0) * 2.0 ** (-2 * b)


@dataclass(frozen=True)
class QuantizationModel:
    """Additive quantization noise model of a b-bit ADC.

    The quantizer output is alpha * y + z_q with z_q zero-mean Gaussian of
    variance alpha * (1 - alpha) * diag(E{y y^H}).
    """

    bits: float
    rho: float
    alpha: float

    @classmethod
    def from_bits(cls, bits: float) -> "QuantizationModel":
        rho = rho_for_bits(bits)
        return cls(bits=bits, rho=rho, alpha=1.0 - rho)


def _grid_side(n_elements: int) -> int:
    """Row-major grid width for an n-element planar array."""
    return math.isqrt(n_elements) if math.isqrt(n_elements) ** 2 == n_elements else math.ceil(math.sqrt(n_elements))


def array_response(side: int, index: int, az: float, el: float, spacing: float) -> complex:
    """Response of one unit of a side x side square planar array.

    Element ``index`` sits at grid position (index mod side, index // side);
    the phase is 2*pi*spacing*(x*sin(az)*sin(el) + y*cos(el)).  Unit modulus.
    """
    if not 0 <= index < side * side:
        raise ValueError(f"element index {index} out of range for a {side}x{side} array")
    x = index % side
    y = index // side
    phase = 2.0 * math.pi * spacing * (x * math.sin(az) * math.sin(el) + y * math.cos(el))
    return complex(math.cos(phase), math.sin(phase))


def steering_vector(n_elements: int, az: float, el: float, spacing: float) -> np.ndarray:
    """Array response for all elements of an n-element planar array.

    For perfect-square counts this is the square-array response element by
    element; otherwise elements fill a ceil(sqrt(n)) wide grid row-major
    (partial last row).  Either way every entry has unit modulus.
    """
    side = _grid_side(n_elements)
    idx = np.arange(n_elements)
    x = idx % side
    y = idx // side
    phase = 2.0 * math.pi * spacing * (x * math.sin(az) * math.sin(el) + y * math.cos(el))
    return np.exp(1j * phase)


def tap_power_profile(n_taps: int, step_db: float) -> np.ndarray:
    """Exponentially decaying tap powers with the given per-tap attenuation.

    Returns sigma^2_l proportional to 10^(-l*step_db/10), normalized to sum 1.
    """
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    raw = 10.0 ** (-step_db * np.arange(n_taps) / 10.0)
    return raw / raw.sum()


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Geometry:
    """Azimuth/elevation angles of the two hops, radians.

    user_azimuth/user_elevation are arrival angles at the RIS, one per user;
    ris_departure_* is the RIS departure toward the BS; bs_* is the arrival
    at the BS.
    """

    user_azimuth: np.ndarray
    user_elevation: np.ndarray
    ris_departure_azimuth: float
    ris_departure_elevation: float
    bs_azimuth: float
    bs_elevation: float

    def __post_init__(self):
        object.__setattr__(self, "user_azimuth", _readonly(np.asarray(self.user_azimuth, dtype=float)))
        object.__setattr__(self, "user_elevation", _readonly(np.asarray(self.user_elevation, dtype=float)))

    @classmethod
    def uniform_random(cls, n_users: int, rng: np.random.Generator) -> "Geometry":
        """All angles drawn uniformly on (0, 2*pi)."""
        draw = lambda size=None: rng.uniform(0.0, 2.0 * math.pi, size=size)
        return cls(
            user_azimuth=draw(n_users),
            user_elevation=draw(n_users),
            ris_departure_azimuth=float(draw()),
            ris_departure_elevation=float(draw()),
            bs_azimuth=float(draw()),
            bs_elevation=float(draw()),
        )


@dataclass(frozen=True)
class SystemConfig:
    """All dimensional and statistical parameters of the uplink.

    Rician factors and path losses are linear; transmit powers are watts per
    subcarrier; noise power is watts.  ``adc_bits`` may be ``math.inf`` for a
    perfect front end.
    """

    n_bs_antennas: int
    n_ris_elements: int
    n_users: int
    n_subcarriers: int
    cp_length: int
    taps_user_ris: int
    taps_ris_bs: int
    rician_user: np.ndarray
    rician_bs: float
    tap_power_user: np.ndarray
    tap_power_bs: np.ndarray
    pathloss_user: np.ndarray
    pathloss_bs: float
    tx_power: np.ndarray
    noise_power: float
    adc_bits: float
    geometry: Geometry
    element_spacing_over_wavelength: float = 0.5
    quantization: QuantizationModel = field(init=False)

    def __post_init__(self):
        for name in ("rician_user", "pathloss_user", "tx_power"):
            arr = _readonly(np.asarray(getattr(self, name), dtype=float))
            if arr.shape != (self.n_users,):
                raise ValueError(f"{name} must have one entry per user, got shape {arr.shape}")
            object.__setattr__(self, name, arr)
        tp_u = _readonly(np.asarray(self.tap_power_user, dtype=float))
        tp_b = _readonly(np.asarray(self.tap_power_bs, dtype=float))
        object.__setattr__(self, "tap_power_user", tp_u)
        object.__setattr__(self, "tap_power_bs", tp_b)
        object.__setattr__(self, "quantization", QuantizationModel.from_bits(self.adc_bits))

        if min(self.n_bs_antennas, self.n_ris_elements, self.n_users, self.n_subcarriers) < 1:
            raise ValueError("array sizes, user count and subcarrier count must be positive")
        if self.taps_user_ris < 1 or self.taps_ris_bs < 1:
            raise ValueError("tap counts must be positive")
        if max(self.taps_user_ris, self.taps_ris_bs) > self.n_subcarriers:
            raise ValueError("tap counts must not exceed the number of subcarriers")
        if self.cp_length < self.taps_ris_bs + self.taps_user_ris - 2:
            raise ValueError(
                "cp_length violates N_cp >= L_b + L_u - 2: "
                f"N_cp={self.cp_length}, L_b={self.taps_ris_bs}, L_u={self.taps_user_ris}"
            )
        if tp_u.shape != (self.n_users, self.taps_user_ris):
            raise ValueError(f"tap_power_user must have shape (n_users, taps_user_ris), got {tp_u.shape}")
        if tp_b.shape != (self.taps_ris_bs,):
            raise ValueError(f"tap_power_bs must have shape (taps_ris_bs,), got {tp_b.shape}")
        if np.any(np.abs(tp_u.sum(axis=1) - 1.0) > 1e-12) or abs(tp_b.sum() - 1.0) > 1e-12:
            raise ValueError("every tap-power vector must sum to 1 within 1e-12")
        if np.any(self.rician_user < 0.0) or self.rician_bs < 0.0:
            raise ValueError("Rician factors must be non-negative")
        if np.any(self.pathloss_user <= 0.0) or self.pathloss_bs <= 0.0:
            raise ValueError("path-loss coefficients must be positive")
        if np.any(self.tx_power <= 0.0) or self.noise_power <= 0.0:
            raise ValueError("transmit and noise powers must be positive")
        if self.geometry.user_azimuth.shape != (self.n_users,):
            raise ValueError("geometry must carry one arrival direction per user")

    @property
    def rate_prefactor(self) -> float:
        """N_c / (N_cp + N_c), the CP overhead factor common to every rate."""
        return self.n_subcarriers / (self.cp_length + self.n_subcarriers)
