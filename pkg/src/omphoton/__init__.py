"""Simulation and analysis toolkit for a heralded optomechanical
single-photon source.

Truncated-Fock-space density-matrix simulations of the pulsed
write/read protocol (heralded phonon creation, thermal noise, lossy
threshold detection), two-photon interference, closed-form device and
calibration models, and coincidence estimators for detector time-tag
streams.
"""

__version__ = "0.1.0"

from .fock import (
    DensityMatrix,
    FockOperator,
    ModeRegister,
    TruncationError,
    coherent_state,
    expectation,
    number_distribution,
    partial_trace,
    resize_single_mode,
    tensor,
    thermal_state,
    vacuum_state,
)
from .channels import (
    ConditioningError,
    amplitude_damp,
    beamsplitter,
    click_project,
    inject_thermal,
    two_mode_squeeze,
)
from .source import (
    SourceParams,
    cross_correlation_model,
    cross_correlation_sim,
    g2_zero,
    simulate_source,
)
from .hom import (
    HOMResult,
    analytic_hom_from_g2,
    hom_visibility,
    lossy_photon_hom,
    simulate_hom,
)
from .device import (
    DeviceParams,
    PulseShape,
    cavity_shift,
    defect_taper,
    extract_g0,
    gamma_om,
    hom_dip_offset,
    nth_from_asymmetry,
    nth_from_counts,
    phonon_decay_fit,
    photon_bandwidth,
    pulse_shape,
    rate_budget,
    scattering_probs,
    snr,
)
from .timetags import (
    CorrelationEstimate,
    GateConfig,
    TimeTagEvent,
    TimeTagFormatError,
    Window,
    cross_g2,
    dark_count_fraction,
    gate_events,
    heralded_g2,
    hom_coincidences,
    parse_timetags,
    write_timetags,
)
