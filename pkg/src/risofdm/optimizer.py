"""Max-min RIS phase design: smoothed objective, analytic gradient, ascent loop.

The min-SINR objective is smoothed by a log-sum-exp with sharpness mu (error
below min SINR at most ln(N_u)/mu).  The gradient is assembled analytically
from the partial derivatives of the four second moments; correctness is pinned
by finite-difference tests.  The ascent loop is backtracking line search plus
Nesterov extrapolation, with a single momentum restart before a negative
improvement is allowed to stop the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from risofdm.closedform import AuxContext, aux_context, sinr_from_context
from risofdm.config import SystemConfig
from risofdm.txchain import PhaseVector


@dataclass(frozen=True)
class OptimizerParams:
    """Knobs of the gradient-ascent phase design.

    ``mu`` of None selects 10 / median(SINR at the starting point), keeping
    the smoothing error a few percent of a typical SINR.
    """

    mu: float | None = None
    backtrack_alpha: float = 0.3
    backtrack_beta: float = 0.8
    tol: float = 1e-4
    max_iters: int = 500
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.backtrack_alpha <= 0.5:
            raise ValueError("backtrack_alpha must lie in (0, 0.5]")
        if not 0.0 < self.backtrack_beta < 1.0:
            raise ValueError("backtrack_beta must lie in (0, 1)")
        if self.tol <= 0.0 or self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("tol, max_iters and max_backtracks must be positive")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("mu must be positive")


@dataclass
class OptTrace:
    """Per-iteration record of one optimization run."""

    f_theta: list[float] = field(default_factory=list)
    f_x: list[float] = field(default_factory=list)
    min_sinr: list[float] = field(default_factory=list)
    step: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    mu: float = math.nan
    theta_opt: np.ndarray | None = None
    converged: bool = False
    truncated: bool = False
    backtrack_saturations: int = 0
    momentum_restarts: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,f_theta,f_x,min_sinr,step,grad_norm\n")
            for i in range(len(self.f_theta)):
                fh.write(
                    f"{i + 1},{self.f_theta[i]!r},{self.f_x[i]!r},{self.min_sinr[i]!r},"
                    f"{self.step[i]!r},{self.grad_norm[i]!r}\n"
                )


def sinr_n(cfg: SystemConfig, phases, n: int) -> float:
    """Closed-form SINR of user n at the given phases."""
    return sinr_from_context(cfg, aux_context(cfg, phases), n)


def _sinr_all(cfg: SystemConfig, ctx: AuxContext) -> np.ndarray:
    return np.array([sinr_from_context(cfg, ctx, n) for n in range(cfg.n_users)])


def _lse_min(values: np.ndarray, mu: float) -> float:
    """-(1/mu) * ln(sum exp(-mu v)): a smooth lower proxy of min(v)."""
    lo = values.min()
    return lo - math.log(np.exp(-mu * (values - lo)).sum()) / mu


def _lse_weights(values: np.ndarray, mu: float) -> np.ndarray:
    """Softmax weights of -mu*v; concentrated on the minimizing entries."""
    w = np.exp(-mu * (values - values.min()))
    return w / w.sum()


def _resolve_mu(cfg: SystemConfig, phases, params: OptimizerParams) -> float:
    if params.mu is not None:
        return params.mu
    sinr = _sinr_all(cfg, aux_context(cfg, phases))
    med = float(np.median(sinr))
    return 10.0 / med if med > 0.0 else 1.0


def objective_F(cfg: SystemConfig, phases, params: OptimizerParams) -> float:
    """Smoothed max-min objective; within ln(N_u)/mu below the true min SINR."""
    mu = _resolve_mu(cfg, phases, params)
    return _lse_min(_sinr_all(cfg, aux_context(cfg, phases)), mu)


def _moment_partials(cfg: SystemConfig, ctx: AuxContext):
    """d(varpi)/d(theta_i), d(eta)/d(theta_i), d(xi)/d(theta_i), d(eps)/d(theta_i).

    Shapes (N_u, N_r), (N_u, N_u, N_r), (N_u, N_r), (N_u, N_r).  Built from
    c1(n, i) = Im(Phi(n, i) * conj(Phi_sum(n))) and
    c2(n, u, i) = conj(Phi_sum(n)) Phi(u, i) - conj(Phi(n, i)) Phi_sum(u).
    """
    nb, nr = cfg.n_bs_antennas, cfg.n_ris_elements
    su0 = cfg.tap_power_user[:, 0]
    ku = cfg.rician_user
    vu = np.array([c.varsigma_u for c in ctx.tsc])
    bu = cfg.pathloss_user
    sb0 = cfg.tap_power_bs[0]
    kb = cfg.rician_bs
    vb = ctx.tsc[0].varsigma_b
    bb = cfg.pathloss_bs
    p = cfg.tx_power
    phi, phi_sum, phi2 = ctx.phi, ctx.phi_sum, ctx.phi2

    c1 = np.imag(phi * phi_sum.conj()[:, None])  # (N_u, N_r)
    c2 = phi_sum.conj()[:, None, None] * phi[None, :, :] - phi.conj()[:, None, :] * phi_sum[None, :, None]

    d_varpi = (
        (-4.0 * bu**2 * bb**2 * su0 * sb0 * ku * kb * nb / ((ku + 1.0) ** 2 * (kb + 1.0) ** 2))
        * (
            su0 * sb0 * ku * kb * nb * phi2
            + 2.0 * sb0 * vu * kb * nb * nr
            + (su0 * vb * ku + vu * vb) * (nb + 1.0) * nr
            + 2.0 * vu * vb * (nb + 1.0)
        )
    )[:, None] * c1

    pre_eta = (
        -2.0 * bu[:, None] * bu[None, :] * bb**2 * sb0 * kb * nb
        / ((ku[:, None] + 1.0) * (ku[None, :] + 1.0) * (kb + 1.0) ** 2)
    )
    mix_n = ((sb0 * vu * kb * nb + su0 * vb * ku + vu * vb) * nr + 2.0 * vu * vb * nb)  # indexed by the "other" user
    d_eta = pre_eta[:, :, None] * (
        (su0[:, None] * su0[None, :] * sb0 * ku[:, None] * ku[None, :] * kb * nb)[:, :, None]
        * (phi2[None, :, None] * c1[:, None, :] + phi2[:, None, None] * c1[None, :, :])
        + (mix_n[None, :] * su0[:, None] * ku[:, None])[:, :, None] * c1[:, None, :]
        + (mix_n[:, None] * su0[None, :] * ku[None, :])[:, :, None] * c1[None, :, :]
        + (su0[:, None] * su0[None, :] * vb * ku[:, None] * ku[None, :] * nb)[:, :, None]
        * np.imag(c2 * ctx.inner.T[:, :, None])
    )

    a_w = p * bu * su0 * ku / (ku + 1.0)
    b_w = p * bu * vu / (ku + 1.0)
    sum_a, sum_b = a_w.sum(), b_w.sum()
    a_phi2 = float(a_w @ phi2)
    a_c1 = a_w @ c1  # (N_r,)
    # inner.T[n, u] = (hbar^{(., u)})^H hbar^{(., n)}
    im_term = np.imag(np.einsum("u,nui,nu->ni", a_w, c2, ctx.inner.T))
    pre_xi = -2.0 * bu * bb**2 * sb0 * kb * nb / ((ku + 1.0) * (kb + 1.0) ** 2)
    d_xi = pre_xi[:, None] * (
        (p * 2.0 * bu * su0**2 * ku / (ku + 1.0) * (sb0 * kb * nr + sb0 * nr + 2.0 * vb))[:, None] * c1
        + (su0 * sb0 * kb * ku)[:, None] * (a_phi2 * c1 + phi2[:, None] * a_c1[None, :])
        + (su0 * vb * ku * nr + sb0 * vu * kb * nr + vu * vb * nr + 2.0 * sb0 * vu)[:, None] * a_c1[None, :]
        + (su0 * sb0 * ku)[:, None] * im_term
        + (su0 * vb * ku * nr * sum_a)[:, None] * c1
        + (su0 * ku * (vb * nr + 2.0 * sb0 + sb0 * kb * nr) * sum_b)[:, None] * c1
    )

    d_eps = (
        (-2.0 * bu * bb * su0 * sb0 * ku * kb * nb / ((ku + 1.0) * (kb + 1.0)))[:, None] * c1
    )
    return d_varpi, d_eta, d_xi, d_eps


def _sinr_gradients(cfg: SystemConfig, ctx: AuxContext) -> np.ndarray:
    """d(SINR_n)/d(theta), (N_u, N_r), by the quotient rule."""
    alpha = cfg.quantization.alpha
    p = cfg.tx_power
    d_varpi, d_eta, d_xi, d_eps = _moment_partials(cfg, ctx)
    num = alpha**2 * p[:, None] * ctx.varpi[:, None]
    den = (
        alpha**2 * (ctx.eta @ p)
        + alpha * (1.0 - alpha) * ctx.xi
        + cfg.noise_power * alpha * ctx.eps
    )[:, None]
    d_num = alpha**2 * p[:, None] * d_varpi
    mask = 1.0 - np.eye(cfg.n_users)
    d_den = (
        alpha**2 * np.einsum("nui,u,nu->ni", d_eta, p, mask)
        + alpha * (1.0 - alpha) * d_xi
        + cfg.noise_power * alpha * d_eps
    )
    return (d_num * den - num * d_den) / den**2


def grad_F(cfg: SystemConfig, phases, params: OptimizerParams) -> np.ndarray:
    """Analytic gradient of the smoothed objective, length N_r."""
    mu = _resolve_mu(cfg, phases, params)
    ctx = aux_context(cfg, phases)
    weights = _lse_weights(_sinr_all(cfg, ctx), mu)
    return weights @ _sinr_gradients(cfg, ctx)


def optimize(
    cfg: SystemConfig,
    theta0: np.ndarray | PhaseVector,
    params: OptimizerParams = OptimizerParams(),
) -> tuple[PhaseVector, OptTrace]:
    """Accelerated gradient ascent on the smoothed min-SINR objective.

    Backtracking shrinks the step while the sufficient-increase test fails;
    Nesterov extrapolation runs on the accepted points.  Angles are only
    wrapped on output (the objective is 2*pi periodic per coordinate, and
    wrapping mid-run would perturb the momentum bookkeeping).  On a negative
    improvement the momentum is restarted once before the run is allowed to
    stop; ``max_iters`` returns the best point seen, flagged as truncated.
    """
    theta = np.array(_theta_array(theta0), dtype=float)
    if theta.shape != (cfg.n_ris_elements,):
        raise ValueError("theta0 must carry one angle per RIS element")
    mu = _resolve_mu(cfg, theta, params)
    frozen = OptimizerParams(
        mu=mu,
        backtrack_alpha=params.backtrack_alpha,
        backtrack_beta=params.backtrack_beta,
        tol=params.tol,
        max_iters=params.max_iters,
        max_backtracks=params.max_backtracks,
    )
    trace = OptTrace(mu=mu)

    def f_and_min(th):
        ctx = aux_context(cfg, th)
        sinr = _sinr_all(cfg, ctx)
        return _lse_min(sinr, mu), float(sinr.min())

    a_i = 1.0
    x_prev = theta.copy()
    f_theta, min_sinr = f_and_min(theta)
    best_theta, best_f = theta.copy(), f_theta
    restarted = False

    for _ in range(frozen.max_iters):
        grad = grad_F(cfg, theta, frozen)
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            trace.converged = True
            break

        k = 1.0
        f_cand, _ = f_and_min(theta + k * grad)
        backtracks = 0
        while f_cand < f_theta + frozen.backtrack_alpha * k * gnorm2:
            backtracks += 1
            if backtracks > frozen.max_backtracks:
                trace.backtrack_saturations += 1
                break
            k *= frozen.backtrack_beta
            f_cand, _ = f_and_min(theta + k * grad)

        x_next = theta + k * grad
        a_next = (1.0 + math.sqrt(4.0 * a_i**2 + 1.0)) / 2.0
        theta_next = x_next + (a_i - 1.0) * (x_next - x_prev) / a_next
        f_next, min_next = f_and_min(theta_next)

        trace.f_theta.append(f_theta)
        trace.f_x.append(f_cand)
        trace.min_sinr.append(min_next)
        trace.step.append(k)
        trace.grad_norm.append(math.sqrt(gnorm2))
        if f_next > best_f:
            best_theta, best_f = theta_next.copy(), f_next
        if f_cand > best_f:
            best_theta, best_f = x_next.copy(), f_cand

        improvement = f_next - f_theta
        if improvement < frozen.tol:
            if improvement < 0.0 and not restarted:
                # Nesterov overshoot: drop momentum once and continue from
                # the plain ascent point.
                restarted = True
                trace.momentum_restarts += 1
                a_i = 1.0
                x_prev = x_next
                theta, f_theta = x_next, f_cand
                continue
            theta, f_theta = theta_next, f_next
            trace.converged = True
            break
        restarted = False
        a_i = a_next
        x_prev = x_next
        theta, f_theta = theta_next, f_next
    else:
        trace.truncated = True
        theta, f_theta = best_theta, best_f

    result = PhaseVector(theta)
    trace.theta_opt = result.theta
    return result, trace


def _theta_array(phases) -> np.ndarray:
    return np.asarray(getattr(phases, "theta", phases), dtype=float)
