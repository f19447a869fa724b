"""Closed-form ergodic-rate machinery: second moments, rate, limits.

Every quantity here is a deterministic function of the system parameters and
the RIS phases.  The four second moments (varpi, eta, xi, epsilon) are the
channel expectations of the signal, interference, quantization and noise-gain
quadratic forms; each is validated against Monte Carlo sample means in the
test suite.  Index ranges of the multi-sums are implemented exactly as the
half-open ranges they denote; empty ranges contribute zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from risofdm.config import SystemConfig, steering_vector


def _steering(cfg: SystemConfig):
    """RIS-side steering: departure vector, per-user arrival matrix, inner products.

    Returns (dep (N_r,), arr (N_u, N_r), inner (N_u, N_u)) with
    inner[a, b] = sum_r conj(arr[a, r]) * arr[b, r], the Gram matrix of the
    user LoS vectors.
    """
    geo = cfg.geometry
    spacing = cfg.element_spacing_over_wavelength
    dep = steering_vector(cfg.n_ris_elements, geo.ris_departure_azimuth, geo.ris_departure_elevation, spacing)
    arr = np.stack(
        [
            steering_vector(cfg.n_ris_elements, geo.user_azimuth[j], geo.user_elevation[j], spacing)
            for j in range(cfg.n_users)
        ]
    )
    inner = arr.conj() @ arr.T
    return dep, arr, inner


def _theta_of(phases) -> np.ndarray:
    theta = getattr(phases, "theta", phases)
    return np.asarray(theta, dtype=float)


def phi_matrix(cfg: SystemConfig, phases) -> np.ndarray:
    """Steering products Phi(n, r) = e^{j theta_r} conj(dep_r) arr_{n,r}, (N_u, N_r)."""
    dep, arr, _ = _steering(cfg)
    return np.exp(1j * _theta_of(phases))[None, :] * dep.conj()[None, :] * arr


def phi_products(cfg: SystemConfig, phases, n: int):
    """(Phi(n, .) vector, Phi_{N_r}(n) sum) for user n."""
    if not 0 <= n < cfg.n_users:
        raise ValueError(f"user index {n} out of range")
    row = phi_matrix(cfg, phases)[n]
    return row, complex(row.sum())


@dataclass(frozen=True)
class TapSumConstants:
    """Per-user tap-power sums and moment constants entering xi / Remark 1.

    s1..s4 are the closed right-hand sides of the periodic-sum identities;
    s5 is the variant whose outer index starts at tap 0 (shared by the
    quantization term and the Rayleigh special case).
    """

    s1: float
    s2: float
    s3: float
    s4: float
    s5: float
    quartic_user: float
    quartic_bs: float
    quartic_cross: float
    tau_b: float
    tau_u: float
    varsigma_u: float
    varsigma_b: float


def tap_sum_constants(cfg: SystemConfig, n: int) -> TapSumConstants:
    """All tap-sum constants for user n; empty index ranges give zero."""
    pu = cfg.tap_power_user[n]
    pb = cfg.tap_power_bs
    l_u, l_b = cfg.taps_user_ris, cfg.taps_ris_bs

    s1 = sum(pu[k] * pb[k] for k in range(1, min(l_b, l_u)))
    s2 = sum(
        pu[k1] * pu[k2] * pb[k2 - k1]
        for k1 in range(1, l_u)
        for k2 in range(k1 + 1, min(l_u, l_b + k1))
    )
    s3 = sum(
        pb[k1] * pb[k2] * pu[k2 - k1]
        for k1 in range(1, l_b)
        for k2 in range(k1 + 1, min(l_b, l_u + k1))
    )
    s4 = sum(
        pb[k1] * pb[k2] * pu[k3] * pu[k1 - k2 + k3]
        for k1 in range(1, l_b)
        for k2 in range(k1 + 1, min(l_b, l_u + k1 - 1))
        for k3 in range(k2 - k1 + 1, l_u)
    )
    s5 = sum(
        pb[k1] * pb[k2] * pu[k3] * pu[k1 - k2 + k3]
        for k1 in range(0, l_b)
        for k2 in range(k1 + 1, min(l_b, l_u + k1))
        for k3 in range(k2 - k1, l_u)
    )

    quartic_user = float(np.sum(pu[1:] ** 2))
    quartic_bs = float(np.sum(pb[1:] ** 2))
    ku = cfg.rician_user[n]
    kb = cfg.rician_bs
    su0, sb0 = pu[0], pb[0]
    tau_b = (kb**2 + 1.0) / (kb + 1.0) ** 2 * sb0**2 - 2.0 * kb / (kb + 1.0) * sb0 + 1.0
    tau_u = (ku**2 + 1.0) / (ku + 1.0) ** 2 * su0**2 - 2.0 * ku / (ku + 1.0) * su0 + 1.0
    return TapSumConstants(
        s1=float(s1),
        s2=float(s2),
        s3=float(s3),
        s4=float(s4),
        s5=float(s5),
        quartic_user=quartic_user,
        quartic_bs=quartic_bs,
        quartic_cross=quartic_bs * quartic_user,
        tau_b=tau_b,
        tau_u=tau_u,
        varsigma_u=float((1.0 - su0) * ku + 1.0),
        varsigma_b=float((1.0 - sb0) * kb + 1.0),
    )


@dataclass(frozen=True)
class AuxTerms:
    """The four second moments for one user at a given phase vector.

    ``eta`` holds eta_{n,u} for every other user u (entry u = n is zero).
    """

    varpi: float
    eta: np.ndarray
    xi: float
    eps: float


@dataclass(frozen=True)
class AuxContext:
    """Shared precomputation for the second moments and their gradients."""

    phi: np.ndarray  # (N_u, N_r) steering products
    phi_sum: np.ndarray  # (N_u,) Phi_{N_r}(n)
    phi2: np.ndarray  # |Phi_{N_r}(n)|^2
    inner: np.ndarray  # (N_u, N_u) user LoS Gram matrix
    tsc: tuple[TapSumConstants, ...]
    varpi: np.ndarray  # (N_u,)
    eta: np.ndarray  # (N_u, N_u), zero diagonal
    xi: np.ndarray  # (N_u,)
    eps: np.ndarray  # (N_u,)


def aux_context(cfg: SystemConfig, phases) -> AuxContext:
    """Evaluate all users' second moments once for a given phase vector."""
    phi = phi_matrix(cfg, phases)
    phi_sum = phi.sum(axis=1)
    phi2 = np.abs(phi_sum) ** 2
    _, _, inner = _steering(cfg)
    tsc = tuple(tap_sum_constants(cfg, n) for n in range(cfg.n_users))

    n_u = cfg.n_users
    varpi_v = np.array([_varpi_value(cfg, tsc[n], phi2[n], n) for n in range(n_u)])
    eps_v = np.array([_eps_value(cfg, tsc[n], phi2[n], n) for n in range(n_u)])
    eta_m = np.zeros((n_u, n_u))
    for n in range(n_u):
        for u in range(n_u):
            if u != n:
                eta_m[n, u] = _eta_value(cfg, tsc, phi_sum, phi2, inner, n, u)
    xi_v = np.array([_xi_value(cfg, tsc, phi_sum, phi2, inner, n) for n in range(n_u)])
    return AuxContext(
        phi=phi, phi_sum=phi_sum, phi2=phi2, inner=inner, tsc=tsc,
        varpi=varpi_v, eta=eta_m, xi=xi_v, eps=eps_v,
    )


def _link_scalars(cfg: SystemConfig, tsc: TapSumConstants, n: int):
    return (
        cfg.tap_power_user[n, 0],  # first-tap power, user link
        cfg.tap_power_bs[0],
        cfg.rician_user[n],
        cfg.rician_bs,
        tsc.varsigma_u,
        tsc.varsigma_b,
        cfg.pathloss_user[n],
        cfg.pathloss_bs,
    )


def _varpi_value(cfg: SystemConfig, tsc: TapSumConstants, phi2_n: float, n: int) -> float:
    su0, sb0, ku, kb, vu, vb, bu, bb = _link_scalars(cfg, tsc, n)
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    pre = bu**2 * bb**2 * nb / ((ku + 1.0) ** 2 * (kb + 1.0) ** 2)
    inner = (
        su0**2 * sb0**2 * ku**2 * kb**2 * nb * phi2_n**2
        + 2.0 * su0 * sb0 * ku * kb * phi2_n
        * (2.0 * sb0 * vu * kb * nb * nr + (su0 * vb * ku + vu * vb) * (nb + 1.0) * nr
           + 2.0 * vu * vb * (nb + 1.0))
        + (su0**2 * vb**2 * ku**2 + 2.0 * su0 * sb0 * vu * vb * ku * kb) * (nb + 1.0) * nr**2
        + 2.0 * sb0**2 * vu**2 * kb**2 * nb * nr**2
        + (2.0 * su0 * vu * vb**2 * ku + 2.0 * sb0 * vu**2 * vb * kb + vu**2 * vb**2)
        * (nb + 1.0) * nr * (nr + 1.0)
    )
    return pre * inner


def _eps_value(cfg: SystemConfig, tsc: TapSumConstants, phi2_n: float, n: int) -> float:
    su0, sb0, ku, kb, vu, vb, bu, bb = _link_scalars(cfg, tsc, n)
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    pre = bu * bb * nb / ((ku + 1.0) * (kb + 1.0))
    return pre * (su0 * ku * sb0 * kb * phi2_n + (su0 * ku * vb + sb0 * kb * vu + vu * vb) * nr)


def _eta_value(cfg, tsc, phi_sum, phi2, inner, n: int, u: int) -> float:
    su0n, sb0, kun, kb, vun, vb, bun, bb = _link_scalars(cfg, tsc[n], n)
    su0u = cfg.tap_power_user[u, 0]
    kuu = cfg.rician_user[u]
    vuu = tsc[u].varsigma_u
    buu = cfg.pathloss_user[u]
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    p2n, p2u = phi2[n], phi2[u]
    # inner[u, n] = (hbar^{(., u)})^H hbar^{(., n)}
    cross = (phi_sum[n].conj() * phi_sum[u] * inner[u, n]).real
    pre = bun * buu * bb**2 * nb / ((kun + 1.0) * (kuu + 1.0) * (kb + 1.0) ** 2)
    body = (
        su0n * su0u * sb0**2 * kun * kuu * kb**2 * nb * p2n * p2u
        + ((sb0 * vuu * kb * nb + su0u * vb * kuu + vuu * vb) * nr + 2.0 * vuu * vb * nb)
        * su0n * sb0 * kun * kb * p2n
        + ((sb0 * vun * kb * nb + su0n * vb * kun + vun * vb) * nr + 2.0 * vun * vb * nb)
        * su0u * sb0 * kuu * kb * p2u
        + (vun * vuu * sb0**2 * kb**2 * nb + su0n * su0u * vb**2 * kun * kuu
           + (su0n * vuu * kun + su0u * vun * kuu) * sb0 * vb * kb) * nr**2
        + (su0u * vun * vb**2 * kuu + su0n * vuu * vb**2 * kun
           + vun * vuu * (2.0 * sb0 * vb * kb + vb**2)) * nr * (nb + nr)
        + su0n * su0u * vb**2 * kun * kuu * nb * np.abs(inner[n, u]) ** 2
        + 2.0 * su0n * su0u * sb0 * vb * kun * kuu * kb * nb * cross
    )
    return pre * body


def _xi_value(cfg, tsc, phi_sum, phi2, inner, n: int) -> float:
    su0, sb0, ku, kb, vu, vb, bu, bb = _link_scalars(cfg, tsc[n], n)
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    c = tsc[n]
    p = cfg.tx_power
    p2n = phi2[n]

    # Per-user weights: LoS-powered and scattered-power combinations.
    k_all = cfg.rician_user
    a_w = p * cfg.pathloss_user * cfg.tap_power_user[:, 0] * k_all / (k_all + 1.0)
    b_w = p * cfg.pathloss_user * np.array([tsc[u].varsigma_u for u in range(cfg.n_users)]) / (k_all + 1.0)

    c1 = bu * bb**2 * nb / ((ku + 1.0) * (kb + 1.0) ** 2)
    c2 = bu * bb**2 * nb / (ku + 1.0)
    c3 = p[n] * bu**2 * bb**2 * sb0 * nb / ((ku + 1.0) ** 2 * (kb + 1.0) ** 2)
    c4 = p[n] * bu**2 * bb**2 * nb * nr

    t1 = (su0 * sb0**2 * ku * kb * p2n + su0 * sb0 * vb * ku * nr + sb0**2 * vu * kb * nr
          + sb0 * vu * vb * nr + 2.0 * sb0**2 * vu)
    t2 = (su0 * sb0 * vb * ku * kb * p2n + su0 * vb**2 * ku * (nr - 1.0) + sb0 * vu * vb * kb * nr
          + vu * vb**2 * (nr - 1.0) - su0 * sb0**2 * ku
          + (kb + 1.0) ** 2 * (su0 * c.tau_b * ku + vu * c.tau_b + vu * c.quartic_bs))
    t3 = ((vb * nr + 2.0 * sb0 + sb0 * kb * nr) * su0 * sb0 * ku * kb * p2n
          + su0 * sb0 * vb * ku * kb * nr**2
          + su0 * ku * (kb + 1.0) ** 2 * (c.tau_b + c.quartic_bs) * nr
          + (su0 * ku + vu) * vb**2 * nr * (nr - 1.0))
    t4 = (c.tau_b + c.quartic_bs + sb0 * vb * kb * (nr - 1.0) / (kb + 1.0) ** 2
          + 2.0 * sb0**2 * kb / (kb + 1.0) ** 2
          + sb0 * kb * nr * (sb0 * kb + vb) / (kb + 1.0) ** 2)
    t5 = (su0**2 * sb0 * (nr - 1.0) + 2.0 * su0**2 * sb0 * ku * kb * nr
          + 2.0 * su0**2 * sb0 * (kb + ku) * (nr - 1.0)
          + kb * (su0**2 * sb0 * kb + sb0 * vu**2 * kb + 2.0 * vu**2 * vb) * (nr - 1.0))
    t6 = (c.tau_b * c.tau_u + 2.0 * su0**2 * ku / (ku + 1.0) ** 2 * c.tau_b
          + sb0 * kb / (kb + 1.0) ** 2 * (sb0 * kb + 2.0 * sb0 + 2.0 * vb) * c.tau_u
          + (c.tau_b + sb0 / (kb + 1.0) ** 2
             * (sb0 * (kb**2 * nr + 2.0 * kb * nr + nr - 1.0) + 2.0 * vb * kb)) * c.quartic_user
          + (c.tau_u + su0**2 / (ku + 1.0) ** 2 * (2.0 * ku * nr + nr - 1.0)) * c.quartic_bs
          + nr * c.quartic_cross
          + 2.0 * nr * c.s5)

    cross_vec = phi_sum * inner[:, n]  # entry u: Phi_{N_r}(u) * (hbar^{(., u)})^H hbar^{(., n)}
    value = (
        t1 * kb * c1 * float(a_w @ phi2)
        + 2.0 * su0 * sb0**2 * ku * kb * c1 * float((phi_sum[n].conj() * (a_w @ cross_vec)).real)
        + t2 * nr * c1 * float(a_w.sum())
        + t3 * c1 * float(b_w.sum())
        + (sb0**2 / (kb + 1.0) ** 2 + c.quartic_bs) * su0 * ku * c2
        * float(a_w @ (np.abs(inner[n, :]) ** 2))
        + t4 * vu * nr * c2 * float(b_w.sum() - b_w[n])
        + t5 * nr * c3
        + t6 * c4
        + (sb0 * kb * nr + sb0 * nr + 2.0 * vb) * 2.0 * su0**2 * ku * kb * c3 * p2n
    )
    return value


def varpi(cfg: SystemConfig, phases, n: int) -> float:
    """Second moment of the desired-signal quadratic form for user n."""
    _, phi_sum = phi_products(cfg, phases, n)
    return _varpi_value(cfg, tap_sum_constants(cfg, n), abs(phi_sum) ** 2, n)


def epsilon(cfg: SystemConfig, phases, n: int) -> float:
    """Mean squared norm of the combined channel (noise gain) for user n."""
    _, phi_sum = phi_products(cfg, phases, n)
    return _eps_value(cfg, tap_sum_constants(cfg, n), abs(phi_sum) ** 2, n)


def eta(cfg: SystemConfig, phases, n: int, u: int) -> float:
    """Second moment of the interference quadratic form between users n and u."""
    if u == n:
        raise ValueError("eta is defined for distinct user pairs only")
    ctx_phi = phi_matrix(cfg, phases)
    phi_sum = ctx_phi.sum(axis=1)
    phi2 = np.abs(phi_sum) ** 2
    _, _, inner = _steering(cfg)
    tsc = tuple(tap_sum_constants(cfg, j) for j in range(cfg.n_users))
    return _eta_value(cfg, tsc, phi_sum, phi2, inner, n, u)


def xi(cfg: SystemConfig, phases, n: int) -> float:
    """Quantization-noise second moment for user n (depends on all tx powers)."""
    ctx_phi = phi_matrix(cfg, phases)
    phi_sum = ctx_phi.sum(axis=1)
    phi2 = np.abs(phi_sum) ** 2
    _, _, inner = _steering(cfg)
    tsc = tuple(tap_sum_constants(cfg, j) for j in range(cfg.n_users))
    return _xi_value(cfg, tsc, phi_sum, phi2, inner, n)


def aux_terms(cfg: SystemConfig, phases, n: int) -> AuxTerms:
    """All four second moments for user n."""
    ctx = aux_context(cfg, phases)
    return AuxTerms(varpi=float(ctx.varpi[n]), eta=ctx.eta[n].copy(), xi=float(ctx.xi[n]), eps=float(ctx.eps[n]))


def sinr_from_context(cfg: SystemConfig, ctx: AuxContext, n: int) -> float:
    """Closed-form SINR of user n assembled from precomputed moments."""
    alpha = cfg.quantization.alpha
    p = cfg.tx_power
    num = alpha**2 * p[n] * ctx.varpi[n]
    den = (
        alpha**2 * float(ctx.eta[n] @ p)
        + alpha * (1.0 - alpha) * ctx.xi[n]
        + cfg.noise_power * alpha * ctx.eps[n]
    )
    return num / den


def rate_theorem1(cfg: SystemConfig, phases, n: int) -> float:
    """Closed-form approximate uplink rate of user n, bits/s/Hz."""
    ctx = aux_context(cfg, phases)
    return cfg.rate_prefactor * math.log2(1.0 + sinr_from_context(cfg, ctx, n))


def rate_rayleigh(cfg: SystemConfig, n: int) -> float:
    """Rayleigh special case of the closed-form rate (all Rician factors zero)."""
    if cfg.rician_bs != 0.0 or np.any(cfg.rician_user != 0.0):
        raise ValueError("rate_rayleigh requires every Rician factor to be zero")
    alpha = cfg.quantization.alpha
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    p = cfg.tx_power
    beta = cfg.pathloss_user
    tsc = tap_sum_constants(cfg, n)
    quartic_b_full = float(np.sum(cfg.tap_power_bs**2))
    quartic_u_full = float(np.sum(cfg.tap_power_user[n] ** 2))
    c_ray = (
        nr * float(p @ beta)
        + float(p @ beta) * quartic_b_full
        + p[n] * beta[n] * quartic_u_full
        + p[n] * beta[n] * nr * quartic_b_full * quartic_u_full
        + 2.0 * p[n] * beta[n] * nr * tsc.s5
    )
    num = alpha**2 * p[n] * beta[n] * (nb + 1.0) * (nr + 1.0)
    den = (
        alpha**2 * (float(p @ beta) - p[n] * beta[n]) * (nb + nr)
        + alpha * (1.0 - alpha) * c_ray
        + cfg.noise_power * alpha / cfg.pathloss_bs
    )
    return cfg.rate_prefactor * math.log2(1.0 + num / den)


def asymptotic_rate(cfg: SystemConfig, aligned: bool, n: int, n_ris: int | None = None) -> float:
    """Limiting rate as both array sizes grow without bound.

    The unaligned branch assumes every |Phi_{N_r}(.)| stays bounded and is
    independent of the array sizes; the aligned branch keeps the finite
    ``n_ris`` printed inside the logarithm.  Both drop the quantization term,
    exact at infinite ADC resolution.
    """
    tsc = [tap_sum_constants(cfg, j) for j in range(cfg.n_users)]
    su0, sb0, ku, kb, vu, vb, _, _ = _link_scalars(cfg, tsc[n], n)
    p, beta = cfg.tx_power, cfg.pathloss_user
    ratios = np.array(
        [
            p[u] * beta[u] * (ku + 1.0) / (p[n] * beta[n] * (cfg.rician_user[u] + 1.0))
            for u in range(cfg.n_users)
        ]
    )
    if aligned:
        num = su0 * ku * float(n_ris if n_ris is not None else cfg.n_ris_elements)
        den = sum(ratios[u] * tsc[u].varsigma_u for u in range(cfg.n_users) if u != n)
    else:
        num = sb0**2 * vu**2 * kb**2 + (sb0 * vu * kb + su0 * vb * ku + vu * vb) ** 2
        den = sum(ratios[u] * sb0**2 * vu * tsc[u].varsigma_u * kb**2 for u in range(cfg.n_users) if u != n)
    if den == 0.0:
        return math.inf
    return cfg.rate_prefactor * math.log2(1.0 + num / den)


def _gamma_corollary2(cfg: SystemConfig, ctx_phi_sum, ctx_phi2, inner, tsc, n: int, u: int | None):
    """Gamma^1 / Gamma^3 (u None) or Gamma^2_{n,u} of the 1/N_b scaling law."""
    su0, sb0, ku, kb, vu, vb, _, _ = _link_scalars(cfg, tsc[n], n)
    nr = cfg.n_ris_elements
    p2n = ctx_phi2[n]
    if u is None:
        g1 = (
            su0**2 * sb0**2 * ku**2 * kb**2 * p2n**2
            + (2.0 * su0 * vu * vb**2 * ku + 2.0 * sb0 * vu**2 * vb * kb + vu**2 * vb**2) * nr
            + 2.0 * su0 * sb0 * ku * kb * p2n
            * ((2.0 * sb0 * vu * kb + su0 * vb * ku + vu * vb) * nr + 2.0 * vu * vb)
            + (sb0**2 * vu**2 * kb**2 + (sb0 * vu * kb + su0 * vb * ku + vu * vb) ** 2) * nr**2
        )
        g3 = su0 * ku * sb0 * kb * p2n + (su0 * ku * vb + sb0 * kb * vu + vu * vb) * nr
        return g1, g3
    su0u = cfg.tap_power_user[u, 0]
    kuu = cfg.rician_user[u]
    vuu = tsc[u].varsigma_u
    p2u = ctx_phi2[u]
    cross = (ctx_phi_sum[n].conj() * ctx_phi_sum[u] * inner[u, n]).real
    g2 = (
        su0 * su0u * sb0**2 * ku * kuu * kb**2 * p2n * p2u
        + vu * vuu * sb0**2 * kb**2 * nr**2
        + (sb0 * vuu * kb * nr + 2.0 * vuu * vb) * su0 * sb0 * ku * kb * p2n
        + (sb0 * vu * kb * nr + 2.0 * vu * vb) * su0u * sb0 * kuu * kb * p2u
        + (su0u * vu * vb**2 * kuu + su0 * vuu * vb**2 * ku
           + vu * vuu * (2.0 * sb0 * vb * kb + vb**2)) * nr
        + su0 * su0u * vb**2 * ku * kuu * np.abs(inner[n, u]) ** 2
        + 2.0 * su0 * su0u * sb0 * vb * ku * kuu * kb * cross
    )
    return g2


def scaled_rate(
    cfg: SystemConfig,
    n: int,
    law: str,
    energies: np.ndarray,
    phases=None,
) -> float:
    """Limiting rate under a power-scaling law with fixed per-user energies.

    law "Nb":     p_j = E_j / N_b as N_b grows (any phases; pass them in).
    law "NbNr":   p_j = E_j / (N_b N_r), RIS not aligned with any user.
    law "aligned": p_n = E_n / (N_b N_r^2), p_u = E_u / (N_b N_r), RIS aligned
    with user n.
    """
    e = np.asarray(energies, dtype=float)
    if e.shape != (cfg.n_users,):
        raise ValueError("energies must have one entry per user")
    tsc = [tap_sum_constants(cfg, j) for j in range(cfg.n_users)]
    su0, sb0, ku, kb, vu, vb, bun, bb = _link_scalars(cfg, tsc[n], n)
    alpha = cfg.quantization.alpha
    beta = cfg.pathloss_user
    ratios = np.array(
        [
            e[u] * beta[u] * (ku + 1.0) / (e[n] * beta[n] * (cfg.rician_user[u] + 1.0))
            for u in range(cfg.n_users)
        ]
    )
    noise_coef = cfg.noise_power * (ku + 1.0) * (kb + 1.0) / (alpha * bun * bb * e[n])

    if law == "Nb":
        if phases is None:
            raise ValueError('law "Nb" keeps the phase-dependent terms; pass phases')
        phi_sum = phi_matrix(cfg, phases).sum(axis=1)
        phi2 = np.abs(phi_sum) ** 2
        _, _, inner = _steering(cfg)
        g1, g3 = _gamma_corollary2(cfg, phi_sum, phi2, inner, tsc, n, None)
        interf = sum(
            ratios[u] * _gamma_corollary2(cfg, phi_sum, phi2, inner, tsc, n, u)
            for u in range(cfg.n_users)
            if u != n
        )
        sinr = g1 / (interf + noise_coef * g3)
    elif law == "NbNr":
        g1 = sb0**2 * vu**2 * kb**2 + (sb0 * vu * kb + su0 * vb * ku + vu * vb) ** 2
        g3 = su0 * ku * vb + sb0 * kb * vu + vu * vb
        interf = sum(
            ratios[u] * vu * tsc[u].varsigma_u * sb0**2 * kb**2
            for u in range(cfg.n_users)
            if u != n
        )
        sinr = g1 / (interf + noise_coef * g3)
    elif law == "aligned":
        num = su0 * sb0 * ku * kb
        interf = sum(
            ratios[u] * sb0 * tsc[u].varsigma_u * kb for u in range(cfg.n_users) if u != n
        )
        sinr = num / (interf + noise_coef)
    else:
        raise ValueError(f"unknown power-scaling law {law!r}")
    return cfg.rate_prefactor * math.log2(1.0 + sinr)
