"""Scenario construction and sweep execution over system-size / statistics axes.

Scenarios follow the reference geometry: the BS sits 200 m from the RIS and
the users on a 30 m circle around it, path loss 1e-3 * distance^-2.8, five
user-side taps at 2.5 dB steps and four BS-side taps at 5 dB steps.  Sweeps
rebuild the configuration per grid point, optionally optimize the phases, and
evaluate any subset of {mc_exact, mc_approx, closed_form, corollary_limit}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from risofdm import closedform, optimizer, txchain
from risofdm.channel import draw_taps, freq_entries
from risofdm.config import Geometry, SystemConfig, dbm_to_watts, tap_power_profile
from risofdm.txchain import PhaseVector

VERSION_STRING = "risofdm-0.1.0"


@dataclass(frozen=True)
class ScenarioSpec:
    """Experiment-facing knobs; dB/dBm here, converted when building configs."""

    n_bs_antennas: int = 64
    n_ris_elements: int = 16
    n_users: int = 4
    n_subcarriers: int = 32
    cp_length: int = 8
    taps_user_ris: int = 5
    tap_step_user_db: float = 2.5
    taps_ris_bs: int = 4
    tap_step_bs_db: float = 5.0
    bs_ris_distance: float = 200.0
    user_circle_radius: float = 30.0
    user_distance_jitter: float = 0.0
    pathloss_ref: float = 1e-3
    pathloss_exponent: float = 2.8
    rician_user_db: float = 3.0
    rician_bs_db: float = 10.0
    tx_power_dbm: float = 30.0
    noise_power_dbm: float = -104.0
    adc_bits: float = math.inf
    element_spacing_over_wavelength: float = 0.5
    trials: int = 2000
    angle_seed: int = 0
    power_scaling_energy_dbm: float = 50.0
    power_scaling_law: str = "Nb"

    def pathloss(self, distance: float) -> float:
        return self.pathloss_ref * distance ** (-self.pathloss_exponent)


def build_scenario(spec: ScenarioSpec, rng: np.random.Generator | None = None) -> SystemConfig:
    """Draw the geometry and assemble a SystemConfig from a scenario."""
    if spec.bs_ris_distance <= 0.0 or spec.user_circle_radius <= 0.0:
        raise ValueError("distances must be positive")
    rng = rng if rng is not None else np.random.default_rng(spec.angle_seed)
    geometry = Geometry.uniform_random(spec.n_users, rng)
    if spec.user_distance_jitter > 0.0:
        offs = rng.uniform(-spec.user_distance_jitter, spec.user_distance_jitter, size=spec.n_users)
        distances = np.maximum(spec.user_circle_radius + offs, 1e-6)
    else:
        distances = np.full(spec.n_users, spec.user_circle_radius)
    k_user = 10.0 ** (spec.rician_user_db / 10.0)
    return SystemConfig(
        n_bs_antennas=spec.n_bs_antennas,
        n_ris_elements=spec.n_ris_elements,
        n_users=spec.n_users,
        n_subcarriers=spec.n_subcarriers,
        cp_length=spec.cp_length,
        taps_user_ris=spec.taps_user_ris,
        taps_ris_bs=spec.taps_ris_bs,
        rician_user=np.full(spec.n_users, k_user),
        rician_bs=10.0 ** (spec.rician_bs_db / 10.0),
        tap_power_user=np.tile(tap_power_profile(spec.taps_user_ris, spec.tap_step_user_db), (spec.n_users, 1)),
        tap_power_bs=tap_power_profile(spec.taps_ris_bs, spec.tap_step_bs_db),
        pathloss_user=np.array([spec.pathloss(d) for d in distances]),
        pathloss_bs=spec.pathloss(spec.bs_ris_distance),
        tx_power=np.full(spec.n_users, dbm_to_watts(spec.tx_power_dbm)),
        noise_power=dbm_to_watts(spec.noise_power_dbm),
        adc_bits=spec.adc_bits,
        geometry=geometry,
        element_spacing_over_wavelength=spec.element_spacing_over_wavelength,
    )


def non_aligned_phases(cfg: SystemConfig, rng: np.random.Generator, iterations: int = 200) -> PhaseVector:
    """Unit-modulus phases with Phi_{N_r}(n) driven toward zero for every user.

    Alternating projection between the nullspace of the user steering products
    and the unit-modulus constraint.  Used where an asymptotic statement
    assumes the RIS is aligned with no user (bounded steering sums); random
    phases leave |Phi_{N_r}(n)| ~ sqrt(N_r), which does not vanish relative
    to the limit terms.
    """
    dep, arr, _ = closedform._steering(cfg)
    a = (np.conj(dep)[None, :] * arr).conj().T  # (N_r, N_u); Phi sums are a^H w conj'd
    w = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_ris_elements))
    gram_inv = np.linalg.pinv(a.conj().T @ a)
    for _ in range(iterations):
        w = w - a @ (gram_inv @ (a.conj().T @ w))
        mag = np.abs(w)
        mag[mag < 1e-12] = 1.0
        w = w / mag
    return PhaseVector(np.angle(w))


def optimize_phases(
    cfg: SystemConfig,
    rng: np.random.Generator,
    restarts: int = 3,
    params: optimizer.OptimizerParams = optimizer.OptimizerParams(),
) -> tuple[PhaseVector, PhaseVector]:
    """Best phases over random restarts, judged by closed-form min SINR.

    Returns (optimized, first random start).  Every random start is kept as a
    candidate, so the result never falls below the unoptimized baseline.
    """
    best = None
    best_val = -math.inf
    first_start = None
    for _ in range(max(restarts, 1)):
        start = PhaseVector.random(cfg.n_ris_elements, rng)
        if first_start is None:
            first_start = start
        for cand in (start, optimizer.optimize(cfg, start, params)[0]):
            val = min(optimizer.sinr_n(cfg, cand, n) for n in range(cfg.n_users))
            if val > best_val:
                best, best_val = cand, val
    return best, first_start


@dataclass(frozen=True)
class SweepRow:
    grid_value: float
    user: int
    method: str
    rate: float
    stderr: float = math.nan
    note: str = ""


@dataclass
class SweepResult:
    """Tabular outcome of one sweep axis; rows keyed by (grid value, user, method)."""

    axis: str
    grid: list[float]
    optimized: bool
    seed: int
    rows: list[SweepRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def min_rate(self, grid_value: float, method: str) -> float:
        vals = [r.rate for r in self.rows if r.grid_value == grid_value and r.method == method]
        return min(vals) if vals else math.nan

    def rates(self, grid_value: float, method: str) -> np.ndarray:
        return np.array(
            sorted(
                (r.user, r.rate)
                for r in self.rows
                if r.grid_value == grid_value and r.method == method
            )
        )[:, 1]

    def to_csv(self, path) -> None:
        header = json.dumps({"axis": self.axis, "seed": self.seed, "optimized": self.optimized})
        with open(path, "w") as fh:
            fh.write(f"# {header}\n")
            fh.write("grid_value,user,method,rate,stderr,note\n")
            for r in sorted(self.rows, key=lambda r: (r.grid_value, r.method, r.user)):
                fh.write(f"{r.grid_value!r},{r.user},{r.method},{r.rate!r},{r.stderr!r},{r.note}\n")

    def write(self, path) -> None:
        """CSV plus a metadata sidecar echoing the spec, seeds and version."""
        self.to_csv(path)
        sidecar = dict(self.metadata)
        sidecar.update({"axis": self.axis, "grid": list(self.grid), "seed": self.seed,
                        "optimized": self.optimized, "version": VERSION_STRING})
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(sidecar, fh, indent=2, default=str)


_AXES = ("Nb", "Ku", "Kb", "bits", "Nb_with_power_scaling")


def _spec_at(base: ScenarioSpec, axis: str, value: float) -> ScenarioSpec:
    if axis in ("Nb", "Nb_with_power_scaling"):
        return replace(base, n_bs_antennas=int(value))
    if axis == "Ku":
        return replace(base, rician_user_db=10.0 * math.log10(value) if value > 0 else -math.inf)
    if axis == "Kb":
        return replace(base, rician_bs_db=10.0 * math.log10(value) if value > 0 else -math.inf)
    if axis == "bits":
        return replace(base, adc_bits=value)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {_AXES}")


def _scaled_power(base: ScenarioSpec, cfg: SystemConfig) -> np.ndarray:
    energy = dbm_to_watts(base.power_scaling_energy_dbm)
    law = base.power_scaling_law
    if law == "Nb":
        div = cfg.n_bs_antennas
    elif law == "Nb15":
        div = cfg.n_bs_antennas**1.5
    elif law == "NbNr":
        div = cfg.n_bs_antennas * cfg.n_ris_elements
    else:
        raise ValueError(f"unknown power scaling law {law!r}")
    return np.full(cfg.n_users, energy / div)


def run_sweep(
    base: ScenarioSpec,
    axis: str,
    grid: Sequence[float],
    methods: Sequence[str] = ("closed_form",),
    optimize: bool = False,
    seed: int = 0,
    restarts: int = 3,
    n_workers: int = 1,
    phase_policy: str = "random",
) -> SweepResult:
    """Evaluate the requested methods at every grid point of one axis.

    Per point the scenario is rebuilt (fixed angle seed), phases are drawn
    fresh from a per-point child seed (or optimized from them), and failures
    are recorded as rows with an error note rather than aborting the sweep.
    ``phase_policy`` may be "random", "shared" (one phase draw reused across
    the grid, for clean monotonicity comparisons) or "non_aligned".
    """
    if not grid:
        raise ValueError("sweep grid must be nonempty")
    result = SweepResult(axis=axis, grid=list(grid), optimized=optimize, seed=seed)
    result.metadata["scenario"] = {k: str(v) for k, v in vars(base).items()}
    root = np.random.SeedSequence(seed)
    point_seeds = root.spawn(len(grid))
    shared_phase = None

    for idx, value in enumerate(grid):
        rng = np.random.default_rng(point_seeds[idx])
        try:
            spec = _spec_at(base, axis, value)
            cfg = build_scenario(spec)
            if axis == "Nb_with_power_scaling":
                cfg = _with_power(cfg, _scaled_power(base, cfg))
            if optimize:
                phases, _ = optimize_phases(cfg, rng, restarts=restarts)
            elif phase_policy == "non_aligned":
                phases = non_aligned_phases(cfg, rng)
            elif phase_policy == "shared":
                if shared_phase is None:
                    shared_phase = PhaseVector.random(cfg.n_ris_elements, np.random.default_rng(root.spawn(1)[0]))
                phases = shared_phase
            else:
                phases = PhaseVector.random(cfg.n_ris_elements, rng)

            report = None
            if "mc_exact" in methods or "mc_approx" in methods:
                report = txchain.monte_carlo_rate(
                    cfg, phases, trials=base.trials, seed=point_seeds[idx].spawn(1)[0], n_workers=n_workers
                )
            for n in range(cfg.n_users):
                if "closed_form" in methods:
                    result.rows.append(
                        SweepRow(value, n, "closed_form", closedform.rate_theorem1(cfg, phases, n))
                    )
                if "mc_exact" in methods:
                    result.rows.append(
                        SweepRow(value, n, "mc_exact", float(report.rate_mc_exact[n]),
                                 float(report.se_mc_exact[n]))
                    )
                if "mc_approx" in methods:
                    result.rows.append(
                        SweepRow(value, n, "mc_approx", float(report.rate_mc_approx[n]),
                                 float(report.se_mc_approx[n]))
                    )
                if "corollary_limit" in methods:
                    energy = np.full(cfg.n_users, dbm_to_watts(base.power_scaling_energy_dbm))
                    law = base.power_scaling_law if base.power_scaling_law != "Nb15" else "Nb"
                    result.rows.append(
                        SweepRow(value, n, "corollary_limit",
                                 closedform.scaled_rate(cfg, n, law, energy, phases=phases))
                    )
        except Exception as exc:  # noqa: BLE001 - per-point failures recorded, sweep continues
            result.rows.append(SweepRow(value, -1, "error", math.nan, note=repr(exc)))
    return result


def _with_power(cfg: SystemConfig, tx_power: np.ndarray) -> SystemConfig:
    return SystemConfig(
        n_bs_antennas=cfg.n_bs_antennas,
        n_ris_elements=cfg.n_ris_elements,
        n_users=cfg.n_users,
        n_subcarriers=cfg.n_subcarriers,
        cp_length=cfg.cp_length,
        taps_user_ris=cfg.taps_user_ris,
        taps_ris_bs=cfg.taps_ris_bs,
        rician_user=cfg.rician_user,
        rician_bs=cfg.rician_bs,
        tap_power_user=cfg.tap_power_user,
        tap_power_bs=cfg.tap_power_bs,
        pathloss_user=cfg.pathloss_user,
        pathloss_bs=cfg.pathloss_bs,
        tx_power=tx_power,
        noise_power=cfg.noise_power,
        adc_bits=cfg.adc_bits,
        geometry=cfg.geometry,
        element_spacing_over_wavelength=cfg.element_spacing_over_wavelength,
    )


@dataclass(frozen=True)
class ValidationRow:
    name: str
    closed_value: float
    sample_value: float
    error: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class ValidationReport:
    rows: list[ValidationRow] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("name,closed_value,sample_value,error,tolerance,passed,note\n")
            for r in self.rows:
                fh.write(
                    f"{r.name},{r.closed_value!r},{r.sample_value!r},{r.error!r},"
                    f"{r.tolerance!r},{int(r.passed)},{r.note}\n"
                )


def _lemma1_lhs(cfg: SystemConfig, n: int, which: int, t: int = 3) -> complex:
    """Brute-force left-hand sides of the periodic-sum identities (full s-sums)."""
    pu = cfg.tap_power_user[n]
    pb = cfg.tap_power_bs
    l_u, l_b, n_c = cfg.taps_user_ris, cfg.taps_ris_bs, cfg.n_subcarriers
    w = lambda k: np.exp(-2j * np.pi * k / n_c)
    total = 0.0 + 0.0j
    if which == 1:
        for k1 in range(1, l_u):
            for k2 in range(1, l_b):
                total += sum(w((k1 - k2) * (s - t)) for s in range(n_c)) * pu[k1] * pb[k2]
    elif which == 2:
        for k1 in range(1, l_u):
            for k2 in range(1, l_u):
                if k2 == k1:
                    continue
                for k3 in range(1, l_b):
                    total += sum(w((k2 - k1 - k3) * (s - t)) for s in range(n_c)) * pu[k1] * pu[k2] * pb[k3]
    elif which == 3:
        for k1 in range(1, l_b):
            for k2 in range(1, l_b):
                if k2 == k1:
                    continue
                for k3 in range(1, l_u):
                    total += sum(w((k1 - k2 - k3) * (s - t)) for s in range(n_c)) * pb[k1] * pb[k2] * pu[k3]
    elif which == 4:
        for k1 in range(1, l_b):
            for k2 in range(1, l_b):
                if k2 == k1:
                    continue
                for k3 in range(1, l_u):
                    for k4 in range(1, l_u):
                        if k4 == k3:
                            continue
                        total += (
                            sum(w((k1 - k2 + k3 - k4) * (s - t)) for s in range(n_c))
                            * pb[k1] * pb[k2] * pu[k3] * pu[k4]
                        )
    else:
        raise ValueError("identity index must be 1..4")
    return total


def lemma1_residuals(cfg: SystemConfig, n: int = 0) -> np.ndarray:
    """|brute-force LHS - N_c * closed RHS| for the four periodic-sum identities."""
    tsc = closedform.tap_sum_constants(cfg, n)
    n_c = cfg.n_subcarriers
    closed = [tsc.s1, tsc.s2, tsc.s3, 2.0 * tsc.s4]
    return np.array([abs(_lemma1_lhs(cfg, n, i + 1) - n_c * closed[i]) for i in range(4)])


def validate_appendix(
    cfg: SystemConfig,
    draws: int,
    phases: PhaseVector | None = None,
    seed: int = 0,
    moment_tol: float = 0.03,
    lemma_tol: float = 1e-9,
    n_workers: int = 1,
) -> ValidationReport:
    """Empirical check of every closed-form ingredient against sample estimates.

    Lemma rows are deterministic identities (absolute error); moment rows
    compare the closed second moments against ``draws`` channel realizations
    (relative error).  The quantization row is skipped at infinite resolution
    where its weight is exactly zero.
    """
    report = ValidationReport()
    rng = np.random.default_rng(seed)
    phases = phases if phases is not None else PhaseVector.random(cfg.n_ris_elements, rng)

    res = lemma1_residuals(cfg, n=0)
    for i, r in enumerate(res):
        report.rows.append(
            ValidationRow(f"lemma1_identity_{i + 1}", math.nan, math.nan, float(r), lemma_tol, r < lemma_tol)
        )

    sample = _moment_samples(cfg, phases, draws, seed=seed + 1, n_workers=n_workers)
    ctx = closedform.aux_context(cfg, phases)
    alpha = cfg.quantization.alpha
    for n in range(cfg.n_users):
        rel = abs(ctx.varpi[n] - sample["varpi"][n]) / sample["varpi"][n]
        report.rows.append(
            ValidationRow(f"varpi_{n}", float(ctx.varpi[n]), float(sample["varpi"][n]), float(rel),
                          moment_tol, rel < moment_tol)
        )
        rel = abs(ctx.eps[n] - sample["eps"][n]) / sample["eps"][n]
        report.rows.append(
            ValidationRow(f"epsilon_{n}", float(ctx.eps[n]), float(sample["eps"][n]), float(rel),
                          moment_tol, rel < moment_tol)
        )
        for u in range(cfg.n_users):
            if u == n:
                continue
            rel = abs(ctx.eta[n, u] - sample["eta"][n, u]) / sample["eta"][n, u]
            report.rows.append(
                ValidationRow(f"eta_{n}_{u}", float(ctx.eta[n, u]), float(sample["eta"][n, u]), float(rel),
                              moment_tol, rel < moment_tol)
            )
        if alpha < 1.0:
            closed_q = alpha * (1.0 - alpha) * (ctx.xi[n] + cfg.noise_power * ctx.eps[n])
            rel = abs(closed_q - sample["quant"][n]) / sample["quant"][n]
            report.rows.append(
                ValidationRow(f"xi_composite_{n}", float(closed_q), float(sample["quant"][n]), float(rel),
                              moment_tol, rel < moment_tol)
            )
        else:
            report.rows.append(
                ValidationRow(f"xi_composite_{n}", 0.0, 0.0, 0.0, moment_tol, True,
                              note="skipped: alpha=1 multiplies the quantization term by zero")
            )

    for row in _lemma2_rows(cfg, draws=min(draws, 20000), seed=seed + 2, tol=0.05):
        report.rows.append(row)
    return report


def _moment_samples(cfg: SystemConfig, phases: PhaseVector, draws: int, seed: int, n_workers: int = 1):
    """Sample means of the four quadratic forms, averaged over subcarriers."""
    root = np.random.SeedSequence(seed)
    batch = txchain._default_batch(cfg)
    batches = txchain._trial_batches(draws, batch)
    seeds = root.spawn(len(batches))

    def one(i_rows):
        i, rows = i_rows
        taps = draw_taps(cfg, np.random.default_rng(seeds[i]), batch=len(rows))
        c = txchain.cascade(freq_entries(taps, cfg), phases)
        a = np.abs(c) ** 2
        q = a.sum(axis=-3)
        m2 = np.abs(np.einsum("dbnt,dbut->dnut", c.conj(), c)) ** 2
        gamma = np.einsum("dbut,u->db", a, cfg.tx_power) / cfg.n_subcarriers
        quant = cfg.quantization.alpha * (1.0 - cfg.quantization.alpha) * np.einsum(
            "dbnt,db->dnt", a, gamma + cfg.noise_power
        )
        return {
            "varpi": (q**2).sum(axis=(0, 2)),
            "eps": q.sum(axis=(0, 2)),
            "eta": m2.sum(axis=(0, 3)),
            "quant": quant.sum(axis=(0, 2)),
            "count": np.array(len(rows) * cfg.n_subcarriers),
        }

    work = list(enumerate(batches))
    if n_workers > 1 and len(work) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            partials = list(pool.map(one, work))
    else:
        partials = [one(w) for w in work]
    total = txchain._pairwise_reduce(partials, txchain._combine_partials)
    count = float(total["count"])
    return {k: v / count for k, v in total.items() if k != "count"}


def _lemma2_rows(cfg: SystemConfig, draws: int, seed: int, tol: float) -> list[ValidationRow]:
    """Sample checks of the cross-subcarrier covariance and fourth moments."""
    rng = np.random.default_rng(seed)
    taps = draw_taps(cfg, rng, batch=draws)
    freq = freq_entries(taps, cfg)
    s, t = 0, min(3, cfg.n_subcarriers - 1)
    n = 0
    n_c = cfg.n_subcarriers
    rows = []

    gb = freq.g_bs_nlos
    pb = cfg.tap_power_bs
    kb = cfg.rician_bs
    formula_b = cfg.pathloss_bs * (
        pb[0] / (kb + 1.0)
        + sum(np.exp(-2j * np.pi * k * (t - s) / n_c) * pb[k] for k in range(1, cfg.taps_ris_bs))
    )
    sample_b = np.mean(gb[..., s].conj() * gb[..., t])
    err = abs(sample_b - formula_b) / abs(formula_b)
    rows.append(ValidationRow("lemma2_cov_bs", abs(formula_b), abs(sample_b), float(err), tol, err < tol))

    gu = freq.g_user_nlos[:, :, n, :] if freq.g_user_nlos.ndim == 4 else freq.g_user_nlos
    pu = cfg.tap_power_user[n]
    ku = cfg.rician_user[n]
    formula_u = cfg.pathloss_user[n] * (
        pu[0] / (ku + 1.0)
        + sum(np.exp(-2j * np.pi * k * (t - s) / n_c) * pu[k] for k in range(1, cfg.taps_user_ris))
    )
    sample_u = np.mean(gu[..., s].conj() * gu[..., t])
    err = abs(sample_u - formula_u) / abs(formula_u)
    rows.append(ValidationRow("lemma2_cov_user", abs(formula_u), abs(sample_u), float(err), tol, err < tol))

    tsc = closedform.tap_sum_constants(cfg, n)
    quart_b = cfg.pathloss_bs**2 * (
        tsc.tau_b
        + tsc.quartic_bs
        + 2.0 * (pb[0] / (kb + 1.0))
        * sum(np.cos(2.0 * np.pi * k * (s - t) / n_c) * pb[k] for k in range(1, cfg.taps_ris_bs))
        + sum(
            np.exp(-2j * np.pi * (k1 - k2) * (s - t) / n_c) * pb[k1] * pb[k2]
            for k1 in range(1, cfg.taps_ris_bs)
            for k2 in range(1, cfg.taps_ris_bs)
            if k2 != k1
        ).real
    )
    sample_q = np.mean(np.abs(gb[..., s]) ** 2 * np.abs(gb[..., t]) ** 2)
    err = abs(sample_q - quart_b) / abs(quart_b)
    rows.append(ValidationRow("lemma2_fourth_bs", float(quart_b), float(sample_q), float(err), tol, err < tol))

    quart_u = cfg.pathloss_user[n] ** 2 * (
        tsc.tau_u
        + tsc.quartic_user
        + 2.0 * (pu[0] / (ku + 1.0))
        * sum(np.cos(2.0 * np.pi * k * (s - t) / n_c) * pu[k] for k in range(1, cfg.taps_user_ris))
        + sum(
            np.exp(-2j * np.pi * (k1 - k2) * (s - t) / n_c) * pu[k1] * pu[k2]
            for k1 in range(1, cfg.taps_user_ris)
            for k2 in range(1, cfg.taps_user_ris)
            if k2 != k1
        ).real
    )
    sample_q = np.mean(np.abs(gu[..., s]) ** 2 * np.abs(gu[..., t]) ** 2)
    err = abs(sample_q - quart_u) / abs(quart_u)
    rows.append(ValidationRow("lemma2_fourth_user", float(quart_u), float(sample_q), float(err), tol, err < tol))
    return rows
