"""Pulsed write/read protocol of a heralded mechanical photon source.

One experimental cycle:

1. the mechanical mode starts in a thermal state of occupancy n_write
   (absorption heating during the write pulse),
2. a weak write pulse two-mode squeezes the mechanical mode with a
   scattered optical mode (pair probability p_s),
3. the scattered photon passes the detection path (efficiency eta) onto
   a threshold detector; a click heralds a phonon added to the mechanics,
4. the phonon waits t_delay, decaying with lifetime tau_m and picking up
   n_read thermal quanta of read-pulse heating,
5. a read pulse converts the phonon to a photon with probability p_as
   (beamsplitter interaction), which passes the same detection
   efficiency eta.

The heralding projector acts on the write optical mode only and commutes
with every later operation (they touch disjoint modes), so the pipeline
below holds at most two modes at a time and branches explicitly on the
write-detector outcome.  This is exactly equivalent to evolving the full
three-mode state and measuring at the end.
"""

from dataclasses import dataclass

import numpy as np

from .fock import (
    TAIL_TOL,
    ModeRegister,
    DensityMatrix,
    partial_trace,
    tensor,
    thermal_state,
    vacuum_state,
    number_distribution,
)
from .channels import (
    CLICK_EPS,
    ConditioningError,
    amplitude_damp,
    beamsplitter,
    click_project,
    click_projector,
    inject_thermal,
    two_mode_squeeze,
)


@dataclass(frozen=True)
class SourceParams:
    """Physical parameters of one write/read cycle.

    p_s        pair (Stokes) scattering probability of the write pulse
    p_as       readout (anti-Stokes) transfer probability of the read pulse
    n_write    thermal phonons present during the write pulse
    n_read     thermal phonons added by read-pulse absorption heating
    t_delay    write-to-read delay in seconds
    tau_m      phonon lifetime in seconds
    eta        detection path efficiency (write and read arms alike)
    trunc      Fock truncation per mode
    tail_tol   bound on estimated probability mass beyond the truncation
    """

    p_s: float
    p_as: float
    n_write: float = 0.0
    n_read: float = 0.0
    t_delay: float = 0.0
    tau_m: float = 1.0
    eta: float = 0.05
    trunc: int = 7
    tail_tol: float = TAIL_TOL

    def __post_init__(self):
        if not 0.0 <= self.p_s < 1.0:
            raise ValueError("p_s must be in [0, 1)")
        for name in ("p_as", "eta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError("%s must be in [0, 1]" % name)
        for name in ("n_write", "n_read", "t_delay"):
            if getattr(self, name) < 0.0:
                raise ValueError("%s must be >= 0" % name)
        if self.tau_m <= 0.0:
            raise ValueError("tau_m must be > 0")
        if self.trunc < 2:
            raise ValueError("trunc must be >= 2")

    @property
    def p_decay(self):
        """Phonon loss probability accumulated over the delay."""
        return 1.0 - float(np.exp(-self.t_delay / self.tau_m))


def _write_stage(params):
    """Run the write pulse and detection.

    Returns (p_click, rho_click, rho_noclick): the write-detector click
    probability and the conditional mechanical states for the two
    outcomes (either may be None when its branch has no support).
    """
    N = params.trunc
    reg = ModeRegister((("w", N), ("m", N)))
    rho = tensor(
        vacuum_state(ModeRegister((("w", N),))),
        thermal_state(ModeRegister((("m", N),)), params.n_write, params.tail_tol),
    )
    rho = two_mode_squeeze(rho, "w", "m", params.p_s, params.tail_tol)
    rho = amplitude_damp(rho, "w", 1.0 - params.eta)
    p, post = click_project(rho, ("w",))
    rho_click = partial_trace(post, ("m",)) if post is not None else None
    # no-click branch: project the write mode onto vacuum
    if 1.0 - p < CLICK_EPS:
        rho_noclick = None
    else:
        Q = np.eye(reg.dim) - click_projector(reg, ("w",))
        nc = DensityMatrix(reg, Q @ rho.data @ Q / (1.0 - p))
        rho_noclick = partial_trace(nc, ("m",))
    return p, rho_click, rho_noclick


def _readout(rho_m, params):
    """Delay, heating, readout and detection loss applied to a
    single-mode mechanical state.  Returns the two-mode (m, r) state."""
    N = params.trunc
    rho = amplitude_damp(rho_m, "m", params.p_decay)
    rho = inject_thermal(rho, "m", params.n_read, params.tail_tol)
    rho = tensor(rho, vacuum_state(ModeRegister((("r", N),))))
    rho = beamsplitter(rho, "m", "r", params.p_as)
    rho = amplitude_damp(rho, "r", 1.0 - params.eta)
    return rho


def simulate_source(params, heralded=True):
    """Simulate one cycle and return (rho_out, herald_prob).

    rho_out is the state of the emitted read-pulse optical mode after
    detection losses; herald_prob is the write-detector click
    probability.  With heralded=True the output is conditioned on the
    click; with heralded=False it is the unconditioned state (the click
    probability is still reported).
    """
    p_w, rho_click, rho_noclick = _write_stage(params)
    if heralded:
        if rho_click is None:
            raise ConditioningError(
                "herald probability %.3e too small to condition on" % p_w
            )
        rho_m = rho_click
    else:
        # unconditioned mixture of the two branches
        if rho_click is None:
            rho_m = rho_noclick
        elif rho_noclick is None:
            rho_m = rho_click
        else:
            data = p_w * rho_click.data + (1.0 - p_w) * rho_noclick.data
            rho_m = DensityMatrix(rho_click.register, data)
    out = partial_trace(_readout(rho_m, params), ("r",))
    return out, p_w


def g2_zero(rho):
    """Zero-delay intensity autocorrelation <a+ a+ a a> / <a+ a>^2 of a
    single-mode state.  Needs only the number distribution."""
    if len(rho.register) != 1:
        raise ValueError("g2_zero needs a single-mode state")
    p = number_distribution(rho, rho.register.names[0])
    n = np.arange(len(p))
    mean = float(n @ p)
    if mean <= 1e-12:
        raise ValueError("zero-intensity state has no defined g2")
    return float((n * (n - 1)) @ p) / mean ** 2


def cross_correlation_sim(params):
    """Write/read cross-correlation of threshold-detector clicks,
    g2 = p_wr / (p_w p_r), from the full pipeline.

    Both write branches are propagated through the readout so p_r is the
    unconditioned read-click probability.
    """
    p_w, rho_click, rho_noclick = _write_stage(params)
    if p_w < CLICK_EPS:
        raise ConditioningError("write click probability vanishes")

    def read_click_prob(rho_m):
        rho = _readout(rho_m, params)
        P = click_projector(rho.register, ("r",))
        return float(np.sum(rho.data.T * P).real)

    p_r_click = read_click_prob(rho_click) if rho_click is not None else 0.0
    p_r_noclick = read_click_prob(rho_noclick) if rho_noclick is not None else 0.0
    p_r = p_w * p_r_click + (1.0 - p_w) * p_r_noclick
    if p_r < CLICK_EPS:
        raise ConditioningError("read click probability vanishes")
    return (p_w * p_r_click) / (p_w * p_r)


def cross_correlation_model(p_s, n_th, t_delay, tau_m):
    """Phenomenological write/read cross-correlation
    1 + exp(-t_delay/tau_m) / (p_s + n_th)."""
    if p_s < 0.0 or n_th < 0.0:
        raise ValueError("p_s and n_th must be >= 0")
    if p_s + n_th <= 0.0:
        raise ValueError("p_s + n_th must be > 0")
    if tau_m <= 0.0:
        raise ValueError("tau_m must be > 0")
    return 1.0 + float(np.exp(-t_delay / tau_m)) / (p_s + n_th)
