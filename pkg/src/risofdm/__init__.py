"""RIS-aided wideband massive MIMO OFDM uplink with low-resolution ADCs.

Link-level Monte Carlo simulation, closed-form ergodic rate evaluation,
asymptotic / power-scaling limits, and max-min RIS phase-shift design.
"""

from risofdm.config import (
    Geometry,
    QuantizationModel,
    SystemConfig,
    array_response,
    db_to_linear,
    dbm_to_watts,
    rho_for_bits,
    steering_vector,
    tap_power_profile,
)
from risofdm.channel import FreqChannel, TapSet, dft_entry, dft_matrix, draw_taps, freq_entries
from risofdm.txchain import (
    PhaseVector,
    RateReport,
    SinrSample,
    add_cyclic_prefix,
    cyclic_convolve,
    monte_carlo_rate,
    mrc_combine,
    quantize_aqnm,
    simulate_rx,
    sinr_components,
)
from risofdm.closedform import (
    AuxTerms,
    TapSumConstants,
    asymptotic_rate,
    epsilon,
    eta,
    phi_products,
    rate_rayleigh,
    rate_theorem1,
    scaled_rate,
    tap_sum_constants,
    varpi,
    xi,
)
from risofdm.optimizer import OptimizerParams, OptTrace, grad_F, objective_F, optimize, sinr_n
from risofdm.experiments import (
    ScenarioSpec,
    SweepResult,
    build_scenario,
    non_aligned_phases,
    optimize_phases,
    run_sweep,
    validate_appendix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
