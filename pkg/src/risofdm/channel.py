"""Frequency-selective Rician channel: time-domain taps and per-subcarrier entries.

The first tap of each link carries the LoS component weighted by the Rician
factor; later taps are pure complex Gaussian.  Per-subcarrier entries are the
scaled DFT of the (zero-padded) tap vector, computed as direct length-L inner
products and split additively into a subcarrier-independent LoS part and the
remaining NLoS part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from risofdm.config import SystemConfig, steering_vector


def dft_entry(t: int, k: int, n_c: int) -> complex:
    """Entry (t, k) of the unitary DFT matrix: exp(-j*2*pi*t*k/N_c)/sqrt(N_c)."""
    if not (0 <= t < n_c and 0 <= k < n_c):
        raise ValueError(f"DFT index ({t}, {k}) out of range for N_c={n_c}")
    return np.exp(-2j * np.pi * t * k / n_c) / np.sqrt(n_c)


def dft_matrix(n_c: int) -> np.ndarray:
    """The full N_c x N_c unitary DFT matrix."""
    t = np.arange(n_c)
    return np.exp(-2j * np.pi * np.outer(t, t) / n_c) / np.sqrt(n_c)


def user_los_taps(cfg: SystemConfig) -> np.ndarray:
    """LoS factor of the first User-to-RIS tap, indexed (ris element, user)."""
    geo = cfg.geometry
    cols = [
        steering_vector(cfg.n_ris_elements, geo.user_azimuth[j], geo.user_elevation[j],
                        cfg.element_spacing_over_wavelength)
        for j in range(cfg.n_users)
    ]
    return np.stack(cols, axis=1)


def bs_los_taps(cfg: SystemConfig) -> np.ndarray:
    """LoS factor of the first RIS-to-BS tap, indexed (bs antenna, ris element)."""
    geo = cfg.geometry
    a_bs = steering_vector(cfg.n_bs_antennas, geo.bs_azimuth, geo.bs_elevation,
                           cfg.element_spacing_over_wavelength)
    a_dep = steering_vector(cfg.n_ris_elements, geo.ris_departure_azimuth, geo.ris_departure_elevation,
                            cfg.element_spacing_over_wavelength)
    return np.outer(a_bs, a_dep.conj())


@dataclass(frozen=True)
class TapSet:
    """One draw (or a leading batch of draws) of all time-domain taps.

    user_ris: (..., N_r, N_u, L_u) complex
    ris_bs:   (..., N_b, N_r, L_b) complex
    """

    user_ris: np.ndarray
    ris_bs: np.ndarray


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    # (x + jy)/sqrt(2) with x, y standard normal: unit-variance circular Gaussian.
    z = rng.standard_normal(size=(*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def draw_taps(cfg: SystemConfig, rng: np.random.Generator, batch: int | None = None) -> TapSet:
    """Draw channel taps for both hops; independent per (element, element) pair.

    The random source is split into one child stream per link, so the two hops
    are independent and individually reproducible.
    """
    rng_u, rng_b = rng.spawn(2)
    lead = () if batch is None else (batch,)

    h_u = _complex_normal(rng_u, (*lead, cfg.n_ris_elements, cfg.n_users, cfg.taps_user_ris))
    h_u *= np.sqrt(cfg.tap_power_user)  # (N_u, L_u) broadcast over elements
    k_u = cfg.rician_user
    los_u = user_los_taps(cfg)
    h_u[..., 0] *= np.sqrt(1.0 / (k_u + 1.0))
    h_u[..., 0] += np.sqrt(k_u / (k_u + 1.0)) * np.sqrt(cfg.tap_power_user[:, 0]) * los_u

    sigma_b = np.sqrt(cfg.tap_power_bs)
    h_b = _complex_normal(rng_b, (*lead, cfg.n_bs_antennas, cfg.n_ris_elements, cfg.taps_ris_bs))
    h_b *= sigma_b
    k_b = cfg.rician_bs
    los_b = bs_los_taps(cfg)
    h_b[..., 0] *= np.sqrt(1.0 / (k_b + 1.0))
    h_b[..., 0] += np.sqrt(k_b / (k_b + 1.0)) * np.sqrt(cfg.tap_power_bs[0]) * los_b

    return TapSet(user_ris=h_u, ris_bs=h_b)


@dataclass(frozen=True)
class FreqChannel:
    """Per-subcarrier channel entries with their LoS/NLoS decomposition.

    g_user: (..., N_r, N_u, N_c); g_bs: (..., N_b, N_r, N_c).
    The LoS parts are subcarrier-independent; g = los[..., None] + nlos exactly.
    """

    g_user: np.ndarray
    g_bs: np.ndarray
    g_user_los: np.ndarray
    g_bs_los: np.ndarray
    g_user_nlos: np.ndarray
    g_bs_nlos: np.ndarray


def freq_entries(taps: TapSet, cfg: SystemConfig) -> FreqChannel:
    """Per-subcarrier entries sqrt(N_c*beta) * (F h)_t of every diagonal block.

    Computed as direct length-L inner products against the DFT rows (L << N_c),
    which is identical to transforming the zero-padded tap vector.
    """
    n_c = cfg.n_subcarriers
    t = np.arange(n_c)

    w_u = np.exp(-2j * np.pi * np.outer(t, np.arange(cfg.taps_user_ris)) / n_c)  # (N_c, L_u)
    g_u = np.einsum("...l,tl->...t", taps.user_ris, w_u)
    g_u *= np.sqrt(cfg.pathloss_user)[:, None]  # user axis is -2

    w_b = np.exp(-2j * np.pi * np.outer(t, np.arange(cfg.taps_ris_bs)) / n_c)
    g_b = np.einsum("...l,tl->...t", taps.ris_bs, w_b)
    g_b *= np.sqrt(cfg.pathloss_bs)

    k_u = cfg.rician_user
    los_u = np.sqrt(cfg.pathloss_user * k_u / (k_u + 1.0) * cfg.tap_power_user[:, 0]) * user_los_taps(cfg)
    k_b = cfg.rician_bs
    los_b = np.sqrt(cfg.pathloss_bs * k_b / (k_b + 1.0) * cfg.tap_power_bs[0]) * bs_los_taps(cfg)

    return FreqChannel(
        g_user=g_u,
        g_bs=g_b,
        g_user_los=los_u,
        g_bs_los=los_b,
        g_user_nlos=g_u - los_u[..., None],
        g_bs_nlos=g_b - los_b[..., None],
    )


def dump_taps_csv(taps: TapSet, path) -> None:
    """Debug dump: one row per (i, j, l) tap with real/imag columns."""
    with open(path, "w") as fh:
        fh.write("link,i,j,l,re,im\n")
        for name, arr in (("user_ris", taps.user_ris), ("ris_bs", taps.ris_bs)):
            if arr.ndim != 3:
                raise ValueError("dump_taps_csv expects a single (unbatched) realization")
            for (i, j, l), v in np.ndenumerate(arr):
                fh.write(f"{name},{i},{j},{l},{v.real!r},{v.imag!r}\n")
