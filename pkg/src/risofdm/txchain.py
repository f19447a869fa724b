"""Uplink transmission chain and Monte Carlo rate estimation.

The per-subcarrier SINR components are deterministic functionals of a channel
realization (the rate expectations are over channels, not over symbols or
noise), so the Monte Carlo estimators never draw symbols.  The literal
time-domain chain (CP, cyclic convolution, CP removal) is kept as a
correctness oracle behind ``simulate_rx(..., path="time")``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from risofdm import closedform
from risofdm.channel import FreqChannel, TapSet, dft_matrix, draw_taps, freq_entries
from risofdm.config import QuantizationModel, SystemConfig


@dataclass(frozen=True)
class PhaseVector:
    """RIS phase angles theta_r, stored wrapped into [0, 2*pi)."""

    theta: np.ndarray

    def __post_init__(self):
        wrapped = np.mod(np.asarray(self.theta, dtype=float), 2.0 * np.pi)
        wrapped.setflags(write=False)
        object.__setattr__(self, "theta", wrapped)

    @property
    def unit(self) -> np.ndarray:
        """exp(j*theta_r) per element."""
        return np.exp(1j * self.theta)

    def __len__(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def random(cls, n_elements: int, rng: np.random.Generator) -> "PhaseVector":
        return cls(rng.uniform(0.0, 2.0 * np.pi, size=n_elements))

    @classmethod
    def aligned(cls, cfg: SystemConfig, user: int) -> "PhaseVector":
        """Phases cancelling the steering product for one user: Phi(n, r) = 1."""
        from risofdm.closedform import _steering  # local import avoids cycle at module load

        dep, arr, _ = _steering(cfg)
        return cls(-np.angle(np.conj(dep) * arr[user]))


@dataclass(frozen=True)
class SinrSample:
    """The four SINR components for one user/subcarrier, one realization."""

    signal: float
    interference: float
    noise_term: float
    quant_term: float
    user: int
    subcarrier: int

    @property
    def sinr(self) -> float:
        return self.signal / (self.interference + self.noise_term + self.quant_term)


@dataclass(frozen=True)
class RateReport:
    """Per-user rates from one Monte Carlo run plus the closed form."""

    rate_mc_exact: np.ndarray
    rate_mc_approx: np.ndarray
    rate_closed_form: np.ndarray
    se_mc_exact: np.ndarray
    se_mc_approx: np.ndarray
    trials: int
    mean_signal: np.ndarray
    mean_interference: np.ndarray
    mean_noise: np.ndarray
    mean_quant: np.ndarray

    def to_rows(self) -> list[dict]:
        rows = []
        for n in range(len(self.rate_mc_exact)):
            rows.append(
                {
                    "user": n,
                    "rate_mc_exact": self.rate_mc_exact[n],
                    "rate_mc_approx": self.rate_mc_approx[n],
                    "rate_closed_form": self.rate_closed_form[n],
                    "se_mc_exact": self.se_mc_exact[n],
                    "se_mc_approx": self.se_mc_approx[n],
                    "trials": self.trials,
                    "mean_signal": self.mean_signal[n],
                    "mean_interference": self.mean_interference[n],
                    "mean_noise": self.mean_noise[n],
                    "mean_quant": self.mean_quant[n],
                }
            )
        return rows


def add_cyclic_prefix(symbol: np.ndarray, n_cp: int) -> np.ndarray:
    """Prepend the last n_cp samples: out[m] = symbol[(m - n_cp) mod N_c]."""
    n_c = symbol.shape[-1]
    if n_cp > n_c:
        raise ValueError(f"cyclic prefix length {n_cp} exceeds symbol length {n_c}")
    if n_cp == 0:
        return symbol.copy()
    return np.concatenate([symbol[..., n_c - n_cp:], symbol], axis=-1)


def cyclic_convolve(h: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Cyclic convolution out[m] = sum_k h[k] * s[(m - k) mod N]."""
    if h.shape[-1] != s.shape[-1]:
        raise ValueError("cyclic convolution requires equal lengths")
    n = h.shape[-1]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return np.einsum("...k,...mk->...m", h, s[..., idx])


def cascade(freq: FreqChannel, phases: PhaseVector) -> np.ndarray:
    """Per-subcarrier cascaded channel c[b, n, t] = sum_r e^{j theta_r} g_bs[b,r,t] g_user[r,n,t]."""
    return np.einsum("...brt,r,...rnt->...bnt", freq.g_bs, phases.unit, freq.g_user)


def qpsk_symbols(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus frequency-domain symbols, one per (user, subcarrier)."""
    quadrant = rng.integers(0, 4, size=(cfg.n_users, cfg.n_subcarriers))
    return np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * quadrant))


def simulate_rx(
    cfg: SystemConfig,
    taps: TapSet,
    phases: PhaseVector,
    symbols: np.ndarray,
    rng: np.random.Generator | None = None,
    path: str = "frequency",
) -> np.ndarray:
    """Steady-state received block at the BS antennas, time domain, (N_b, N_c).

    ``path="frequency"`` multiplies per-subcarrier diagonal channels and
    inverse-transforms; ``path="time"`` runs the literal chain (IDFT, CP,
    two cyclic convolutions through the RIS, CP removal).  Both are exactly
    equivalent when N_cp >= L_b + L_u - 2.  AWGN is added only when ``rng``
    is given.
    """
    if symbols.shape != (cfg.n_users, cfg.n_subcarriers):
        raise ValueError("symbols must be (n_users, n_subcarriers)")
    f_mat = dft_matrix(cfg.n_subcarriers)
    sqrt_p = np.sqrt(cfg.tx_power)

    if path == "frequency":
        freq = freq_entries(taps, cfg)
        c = cascade(freq, phases)  # (N_b, N_u, N_c)
        y_f = np.einsum("bnt,n,nt->bt", c, sqrt_p, symbols)
        y = y_f @ f_mat.conj()  # F^H per antenna row
    elif path == "time":
        n_c, n_cp = cfg.n_subcarriers, cfg.cp_length
        s_time = symbols @ f_mat.conj().T  # s_n = F^H x_n, (N_u, N_c)
        d = add_cyclic_prefix(s_time, n_cp)  # (N_u, N_c + N_cp)
        span = n_c + n_cp
        # Signal at each RIS element over the whole symbol incl. CP; indices
        # m - l < 0 touch the previous symbol and are only consumed by kept
        # samples when the CP constraint holds, so zeros are safe here.
        y_ris = np.zeros((cfg.n_ris_elements, span), dtype=complex)
        for l in range(cfg.taps_user_ris):
            shifted = np.zeros_like(d)
            shifted[:, l:] = d[:, : span - l]
            y_ris += np.einsum(
                "rn,n,nm->rm", taps.user_ris[:, :, l], np.sqrt(cfg.pathloss_user) * sqrt_p, shifted
            )
        y_full = np.zeros((cfg.n_bs_antennas, span), dtype=complex)
        w = phases.unit
        for l in range(cfg.taps_ris_bs):
            shifted = np.zeros_like(y_ris)
            shifted[:, l:] = y_ris[:, : span - l]
            y_full += math.sqrt(cfg.pathloss_bs) * np.einsum("br,r,rm->bm", taps.ris_bs[:, :, l], w, shifted)
        y = y_full[:, n_cp : n_cp + n_c]
    else:
        raise ValueError(f"unknown path {path!r}")

    if rng is not None:
        z = rng.standard_normal((cfg.n_bs_antennas, cfg.n_subcarriers, 2))
        y = y + math.sqrt(cfg.noise_power / 2.0) * (z[..., 0] + 1j * z[..., 1])
    return y


def quantize_aqnm(
    y: np.ndarray,
    quant: QuantizationModel,
    covariance_diag: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """AQNM quantizer: alpha * y + z_q, z_q ~ CN(0, alpha*(1-alpha)*covariance_diag).

    ``covariance_diag`` is diag(E{y y^H}) conditioned on the realization.
    """
    cov = np.broadcast_to(np.asarray(covariance_diag, dtype=float), y.shape)
    if np.any(cov < 0.0):
        raise ValueError("received-power diagonal has a negative entry")
    var = quant.alpha * (1.0 - quant.alpha) * cov
    z = rng.standard_normal((*y.shape, 2))
    z_q = np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])
    return quant.alpha * y + z_q


def received_power_diag(cfg: SystemConfig, c: np.ndarray) -> np.ndarray:
    """diag(E{y y^H}) per antenna, conditioned on the cascaded channel c.

    The signal part is flat across the N_c samples of each antenna block:
    gamma(b) = (1/N_c) sum_{s,u} p_u |c[b,u,s]|^2.  Returns gamma + noise, (N_b,).
    """
    gamma = np.einsum("u,...but->...b", cfg.tx_power, np.abs(c) ** 2) / cfg.n_subcarriers
    return gamma + cfg.noise_power


def mrc_combine(freq: FreqChannel, phases: PhaseVector, y_qf: np.ndarray) -> np.ndarray:
    """MRC combining r[n, t] = sum_b conj(c[b,n,t]) * y_qf[b, t]."""
    c = cascade(freq, phases)
    return np.einsum("bnt,bt->nt", c.conj(), y_qf)


def mrc_terms(
    cfg: SystemConfig,
    freq: FreqChannel,
    phases: PhaseVector,
    symbols: np.ndarray,
    z_time: np.ndarray,
    zq_time: np.ndarray,
) -> dict[str, np.ndarray]:
    """The four separately-exposed terms of the combined signal r[n, t].

    Returns desired / interference / awgn / quantization arrays (N_u, N_c)
    whose sum equals mrc_combine applied to the quantized received signal.
    """
    quant = cfg.quantization
    f_mat = dft_matrix(cfg.n_subcarriers)
    c = cascade(freq, phases)
    q = np.einsum("bnt,bnt->nt", c.conj(), c).real
    m = np.einsum("bnt,but->nut", c.conj(), c)
    sqrt_p = np.sqrt(cfg.tx_power)
    desired = quant.alpha * sqrt_p[:, None] * q * symbols
    full = quant.alpha * np.einsum("nut,u,ut->nt", m, sqrt_p, symbols)
    interference = full - desired
    z_f = z_time @ f_mat.T
    zq_f = zq_time @ f_mat.T
    awgn = quant.alpha * np.einsum("bnt,bt->nt", c.conj(), z_f)
    quantization = np.einsum("bnt,bt->nt", c.conj(), zq_f)
    return {
        "desired": desired,
        "interference": interference,
        "awgn": awgn,
        "quantization": quantization,
    }


def _sinr_terms(cfg: SystemConfig, c: np.ndarray):
    """Vectorized SINR components from cascaded channels c (..., N_b, N_u, N_c).

    Returns (signal, interference, noise, quant), each (..., N_u, N_c).  All
    are deterministic given the realization; the quantization term applies the
    realization-conditioned diagonal of E{y y^H}.
    """
    alpha = cfg.quantization.alpha
    p = cfg.tx_power
    a = np.abs(c) ** 2  # (..., N_b, N_u, N_c)
    q = a.sum(axis=-3)  # matched-filter gain, (..., N_u, N_c)
    signal = alpha**2 * p[:, None] * q**2

    m2 = np.abs(np.einsum("...bnt,...but->...nut", c.conj(), c)) ** 2
    interference = alpha**2 * (np.einsum("...nut,u->...nt", m2, p) - p[:, None] * q**2)

    noise = cfg.noise_power * alpha**2 * q

    gamma = np.einsum("...but,u->...b", a, p) / cfg.n_subcarriers
    quant = alpha * (1.0 - alpha) * np.einsum("...bnt,...b->...nt", a, gamma + cfg.noise_power)
    return signal, interference, noise, quant


def sinr_components(
    realization: TapSet | FreqChannel,
    phases: PhaseVector,
    cfg: SystemConfig,
    n: int,
    t: int,
) -> SinrSample:
    """The four SINR components for user n on subcarrier t, one realization."""
    if not (0 <= n < cfg.n_users and 0 <= t < cfg.n_subcarriers):
        raise ValueError(f"user/subcarrier index ({n}, {t}) out of range")
    freq = realization if isinstance(realization, FreqChannel) else freq_entries(realization, cfg)
    signal, interference, noise, quant = _sinr_terms(cfg, cascade(freq, phases))
    return SinrSample(
        signal=float(signal[n, t]),
        interference=float(interference[n, t]),
        noise_term=float(noise[n, t]),
        quant_term=float(quant[n, t]),
        user=n,
        subcarrier=t,
    )


def _pairwise_reduce(items: list, combine):
    """Fixed-shape binary tree reduction; independent of evaluation order."""
    items = list(items)
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items), 2):
            nxt.append(combine(items[i], items[i + 1]) if i + 1 < len(items) else items[i])
        items = nxt
    return items[0]


def _combine_partials(x: dict, y: dict) -> dict:
    return {k: x[k] + y[k] for k in x}


def _trial_batches(trials: int, batch: int) -> list[range]:
    return [range(lo, min(lo + batch, trials)) for lo in range(0, trials, batch)]


def _default_batch(cfg: SystemConfig) -> int:
    per_trial = cfg.n_bs_antennas * max(cfg.n_ris_elements, cfg.n_users) * cfg.n_subcarriers
    return int(np.clip(2**22 // max(per_trial, 1), 16, 4096))


def monte_carlo_rate(
    cfg: SystemConfig,
    phases: PhaseVector,
    trials: int,
    seed: int | np.random.SeedSequence = 0,
    n_workers: int = 1,
    batch: int | None = None,
) -> RateReport:
    """Per-user rates by Monte Carlo over channel realizations.

    ``rate_mc_exact`` averages log2(1 + S/I) over trials; ``rate_mc_approx``
    uses log2(1 + mean(S)/mean(I)) per subcarrier.  Each trial owns a child of
    the root seed sequence, and batch partials are combined with a pairwise
    tree, so results are identical for any ``n_workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    trial_seeds = root.spawn(trials)
    batch = batch or _default_batch(cfg)
    shape_u = (cfg.n_ris_elements, cfg.n_users, cfg.taps_user_ris)
    shape_b = (cfg.n_bs_antennas, cfg.n_ris_elements, cfg.taps_ris_bs)

    def run_batch(rows: range) -> dict:
        nb = len(rows)
        taps_u = np.empty((nb, *shape_u), dtype=complex)
        taps_b = np.empty((nb, *shape_b), dtype=complex)
        for k, trial in enumerate(rows):
            one = draw_taps(cfg, np.random.default_rng(trial_seeds[trial]))
            taps_u[k] = one.user_ris
            taps_b[k] = one.ris_bs
        freq = freq_entries(TapSet(user_ris=taps_u, ris_bs=taps_b), cfg)
        signal, interference, noise, quant = _sinr_terms(cfg, cascade(freq, phases))
        denom = interference + noise + quant
        log_terms = np.log2(1.0 + signal / denom)  # (nb, N_u, N_c)
        z = log_terms.sum(axis=-1)  # per-trial summed-over-t rate numerator
        return {
            "sum_S": signal.sum(axis=0),
            "sum_I": denom.sum(axis=0),
            "sum_z": z.sum(axis=0),
            "sum_z2": (z**2).sum(axis=0),
            "sum_sig": signal.sum(axis=(0, 2)),
            "sum_int": interference.sum(axis=(0, 2)),
            "sum_noise": noise.sum(axis=(0, 2)),
            "sum_quant": quant.sum(axis=(0, 2)),
            "count": np.array(nb),
            "batch_rates": _approx_rates(cfg, signal.sum(axis=0), denom.sum(axis=0))[None, :],
        }

    batches = _trial_batches(trials, batch)
    if n_workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            partials = list(pool.map(run_batch, batches))
    else:
        partials = [run_batch(b) for b in batches]

    def combine(x, y):
        out = {k: x[k] + y[k] for k in x if k != "batch_rates"}
        out["batch_rates"] = np.concatenate([x["batch_rates"], y["batch_rates"]], axis=0)
        return out

    total = _pairwise_reduce(partials, combine)

    t_count = int(total["count"])
    denom_sym = cfg.cp_length + cfg.n_subcarriers
    rate_exact = total["sum_z"] / t_count / denom_sym
    var_z = np.maximum(total["sum_z2"] / t_count - (total["sum_z"] / t_count) ** 2, 0.0)
    se_exact = np.sqrt(var_z / t_count) / denom_sym
    rate_approx = _approx_rates(cfg, total["sum_S"], total["sum_I"])
    if total["batch_rates"].shape[0] > 1:
        se_approx = total["batch_rates"].std(axis=0, ddof=1) / math.sqrt(total["batch_rates"].shape[0])
    else:
        se_approx = np.full(cfg.n_users, np.nan)

    closed = np.array([closedform.rate_theorem1(cfg, phases, n) for n in range(cfg.n_users)])
    scale = 1.0 / (t_count * cfg.n_subcarriers)
    return RateReport(
        rate_mc_exact=rate_exact,
        rate_mc_approx=rate_approx,
        rate_closed_form=closed,
        se_mc_exact=se_exact,
        se_mc_approx=se_approx,
        trials=t_count,
        mean_signal=total["sum_sig"] * scale,
        mean_interference=total["sum_int"] * scale,
        mean_noise=total["sum_noise"] * scale,
        mean_quant=total["sum_quant"] * scale,
    )


def _approx_rates(cfg: SystemConfig, sum_s: np.ndarray, sum_i: np.ndarray) -> np.ndarray:
    """log2(1 + mean S / mean I) summed over subcarriers with the CP prefactor."""
    return np.log2(1.0 + sum_s / sum_i).sum(axis=-1) / (cfg.cp_length + cfg.n_subcarriers)
