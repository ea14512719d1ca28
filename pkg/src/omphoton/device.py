"""Closed-form device physics and calibration models.

Scattering probabilities of the write/read pulses, vacuum coupling
extraction, thermometry from count rates, pump-induced cavity shift,
photon bandwidth, source rate budget, temporal wavepacket shapes with
the interference-dip-vs-offset model, and the crystal taper geometry.

All rates are stored internally in angular units (rad/s).  Config files
carry /2pi values with explicit unit suffixes (e.g. "kappa_over_2pi_hz")
because data sheets mix both conventions.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DeviceParams:
    """Static device rates, all angular (rad/s).

    eta_split holds the two per-detector path efficiencies (eta1, eta2).
    """

    omega_m: float
    kappa: float
    kappa_e: float
    g0: float
    gamma_m: float
    eta_split: tuple = (1.0, 1.0)

    def __post_init__(self):
        for name in ("omega_m", "kappa", "kappa_e", "g0", "gamma_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError("%s must be > 0" % name)
        if self.kappa_e > self.kappa:
            raise ValueError("kappa_e must not exceed kappa")
        e1, e2 = self.eta_split
        if not (0.0 <= e1 <= 1.0 and 0.0 <= e2 <= 1.0):
            raise ValueError("eta_split entries must be in [0, 1]")
        object.__setattr__(self, "eta_split", (float(e1), float(e2)))

    @property
    def resolved_sideband(self):
        """True when the optical linewidth is below the mechanical
        frequency, so the two sidebands can be addressed separately."""
        return self.kappa < self.omega_m

    @classmethod
    def from_config(cls, cfg):
        """Build from a dict with /2pi unit-suffixed keys:
        omega_m_over_2pi_hz, kappa_over_2pi_hz, kappa_e_over_2pi_hz,
        g0_over_2pi_hz, gamma_m_over_2pi_hz, optional eta1, eta2."""
        try:
            return cls(
                omega_m=TWO_PI * float(cfg["omega_m_over_2pi_hz"]),
                kappa=TWO_PI * float(cfg["kappa_over_2pi_hz"]),
                kappa_e=TWO_PI * float(cfg["kappa_e_over_2pi_hz"]),
                g0=TWO_PI * float(cfg["g0_over_2pi_hz"]),
                gamma_m=TWO_PI * float(cfg["gamma_m_over_2pi_hz"]),
                eta_split=(
                    float(cfg.get("eta1", 1.0)),
                    float(cfg.get("eta2", 1.0)),
                ),
            )
        except KeyError as e:
            raise KeyError("device config missing key %s" % e) from None


@dataclass(frozen=True)
class PulseShape:
    """Sampled temporal envelope, unit-normalized by trapezoidal rule."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("samples must be a 1-d array of length >= 2")
        if (s < -1e-12).any():
            raise ValueError("samples must be nonnegative")
        mass = float(np.trapezoid(s, dx=self.dt))
        if abs(mass - 1.0) > 1e-6:
            raise ValueError("samples must integrate to 1 (got %.8f)" % mass)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.samples))


def scattering_probs(dev, detuning, n_pulse_photons, cavity_shift=0.0):
    """Stokes and anti-Stokes scattering probabilities (p_s, p_as) of a
    pulse with n_pulse_photons at the given laser detuning.

    The pump-induced cavity shift moves the resonance, entering as
    detuning - cavity_shift.  The Stokes process has gain (exponential
    growth), the anti-Stokes process is a transfer (saturates at 1).
    """
    if n_pulse_photons < 0:
        raise ValueError("n_pulse_photons must be >= 0")
    d = detuning - cavity_shift
    half2 = dev.kappa ** 2 / 4.0
    drive = dev.kappa_e / (d ** 2 + half2) * dev.g0 ** 2 * dev.kappa * n_pulse_photons
    a_s = drive / ((d - dev.omega_m) ** 2 + half2)
    a_as = drive / ((d + dev.omega_m) ** 2 + half2)
    return float(np.expm1(a_s)), float(-np.expm1(-a_as))


def extract_g0(c_s, eta_total, dev, n_pulse_photons):
    """Vacuum coupling rate from a measured Stokes count rate per pulse,
    inverting the linearized scattering probability at drive detuning
    +omega_m (low power, low occupancy)."""
    if c_s < 0.0:
        raise ValueError("c_s must be >= 0")
    if c_s == 0.0:
        return 0.0
    if eta_total <= 0.0 or n_pulse_photons <= 0:
        raise ValueError("eta_total and n_pulse_photons must be > 0")
    p_s = c_s / eta_total
    return float(
        np.sqrt(
            p_s
            * (dev.omega_m ** 2 + dev.kappa ** 2 / 4.0)
            / (4.0 * n_pulse_photons)
            * dev.kappa
            / dev.kappa_e
        )
    )


def nth_from_counts(c_as, eta_total, p_as):
    """Thermal occupancy from the anti-Stokes count rate:
    n = c_as / (eta_total p_as)."""
    if c_as < 0.0:
        raise ValueError("c_as must be >= 0")
    den = eta_total * p_as
    if den <= 0.0:
        raise ValueError("eta_total * p_as must be > 0")
    return c_as / den


def nth_from_asymmetry(c_s, c_as):
    """Thermal occupancy from the sideband count asymmetry:
    n_th = 1 / (c_s/c_as - 1).  Requires c_s > c_as > 0."""
    if not c_s > c_as > 0.0:
        raise ValueError("need c_s > c_as > 0 (asymmetry must exceed 1)")
    return 1.0 / (c_s / c_as - 1.0)


def snr(p_as, n_th):
    """Readout signal-to-noise ratio xi = p_as / n_th."""
    if n_th <= 0.0:
        raise ValueError("n_th must be > 0")
    if p_as < 0.0:
        raise ValueError("p_as must be >= 0")
    return p_as / n_th


def cavity_shift(n_c, a=0.025, power=0.39):
    """Empirical pump-induced cavity shift a * n_c^power.  The output
    unit follows the unit of the fitted coefficient."""
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    if n_c == 0:
        return 0.0
    return a * n_c ** power


def gamma_om(n_c, dev):
    """Optically broadened mechanical linewidth Gamma_m + 4 n_c g0^2 /
    kappa (rad/s)."""
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    return dev.gamma_m + 4.0 * n_c * dev.g0 ** 2 / dev.kappa


def photon_bandwidth(t_read, n_c, dev):
    """Emitted photon bandwidth in Hz and the limiting mechanism.

    Short pulses are transform-limited to 1/t_read; long pulses are
    limited by the broadened mechanical linewidth.  Crossover at
    t_read * Gamma_om/2pi = 1.
    """
    if t_read <= 0.0:
        raise ValueError("t_read must be > 0")
    g_om_hz = gamma_om(n_c, dev) / TWO_PI
    if t_read * g_om_hz < 1.0:
        return 1.0 / t_read, "pulse-limited"
    return g_om_hz, "om-limited"


def rate_budget(p_s, p_as, eta_cav, eta_fc, eta_filters, eta_spd_herald, t_rep):
    """Source and herald efficiencies and the heralded photon rate.

    eta_source = p_as * eta_cav * eta_fc          (device to fiber)
    eta_herald = p_s * eta_cav * eta_fc * eta_filters * eta_spd_herald
    r_ph = eta_herald * eta_source * eta_filters / t_rep   (before the
    readout detectors, after the readout filter stage)
    """
    for name, v in (
        ("p_s", p_s),
        ("p_as", p_as),
        ("eta_cav", eta_cav),
        ("eta_fc", eta_fc),
        ("eta_filters", eta_filters),
        ("eta_spd_herald", eta_spd_herald),
    ):
        if not 0.0 <= v <= 1.0:
            raise ValueError("%s must be in [0, 1]" % name)
    if t_rep <= 0.0:
        raise ValueError("t_rep must be > 0")
    eta_source = p_as * eta_cav * eta_fc
    eta_herald = p_s * eta_cav * eta_fc * eta_filters * eta_spd_herald
    r_ph = eta_herald * eta_source * eta_filters / t_rep
    return eta_source, eta_herald, r_ph


def pulse_shape(t_read, tau_aom, grid):
    """Square readout pulse of length t_read smoothed by the modulator's
    Lorentzian response of width tau_aom, sampled on grid = (t0, dt, n).

    The convolution has the closed form
    [arctan(t/tau) - arctan((t - t_read)/tau)] / (pi t_read), evaluated
    exactly on the grid.  tau_aom = 0 gives the bare square.  If more
    than 1e-3 of the pulse mass falls outside the grid the grid is too
    narrow and a ValueError is raised.
    """
    t0, dt, n = grid
    n = int(n)
    if t_read <= 0.0:
        raise ValueError("t_read must be > 0")
    if tau_aom < 0.0:
        raise ValueError("tau_aom must be >= 0")
    if dt <= 0.0 or n < 2:
        raise ValueError("grid needs dt > 0 and n >= 2")
    t = t0 + dt * np.arange(n)
    if tau_aom == 0.0:
        raw = ((t >= 0.0) & (t <= t_read)).astype(float) / t_read
    else:
        raw = (np.arctan(t / tau_aom) - np.arctan((t - t_read) / tau_aom)) / (
            np.pi * t_read
        )
    mass = float(np.trapezoid(raw, dx=dt))
    if mass < 1.0 - 1e-3:
        raise ValueError(
            "grid too narrow: %.4f of the pulse mass lies outside" % (1.0 - mass)
        )
    return PulseShape(t0, dt, raw / mass)


def hom_dip_offset(p1, p2, dt_offset, a, b):
    """Normalized coincidence model a (1 - b * overlap) where overlap is
    the wavepacket overlap integral of p1(t) and p2(t - dt_offset).

    The shapes must share the sample spacing (commensurate grids); their
    start times may differ.  b carries units of time since the overlap
    integral has units of 1/time.
    """
    if abs(p1.dt - p2.dt) > 1e-12 * max(p1.dt, p2.dt):
        raise ValueError("pulse shapes have incommensurate grids")
    shifted = np.interp(
        p1.times - dt_offset, p2.times, p2.samples, left=0.0, right=0.0
    )
    overlap = float(np.trapezoid(p1.samples * shifted, dx=p1.dt))
    return a * (1.0 - b * overlap)


def phonon_decay_fit(samples):
    """Exponential lifetime from (t_delay, counts) pairs.

    Least-squares fit of c exp(-t/tau) in the log domain; returns
    (tau, stderr).  Two points interpolate exactly (stderr 0).
    """
    pts = [(float(t), float(c)) for t, c in samples]
    if len(pts) < 2:
        raise ValueError("need at least two samples")
    t = np.array([p[0] for p in pts])
    c = np.array([p[1] for p in pts])
    if (c <= 0.0).any():
        raise ValueError("counts must be > 0 for a decay fit")
    if np.ptp(t) == 0.0:
        raise ValueError("degenerate data: all delays equal")
    y = np.log(c)
    tm = t.mean()
    sxx = float(((t - tm) ** 2).sum())
    slope = float(((t - tm) * (y - y.mean())).sum()) / sxx
    if slope >= 0.0:
        raise ValueError("counts do not decay with delay")
    tau = -1.0 / slope
    m = len(pts)
    if m == 2:
        return tau, 0.0
    resid = y - (y.mean() + slope * (t - tm))
    s2 = float((resid ** 2).sum()) / (m - 2)
    slope_err = np.sqrt(s2 / sxx)
    # delta method: |d tau / d slope| = 1/slope^2
    return tau, float(slope_err / slope ** 2)


def fit_cavity_shift(n_c, shifts):
    """Power-law fit shift = a * n_c^A to calibration data.

    Returns (a, power, a_err, power_err).  Initial guess from a log-log
    linear regression, refined by Levenberg-style least squares at 1e-10
    relative tolerance.
    """
    x = np.asarray(n_c, dtype=float)
    y = np.asarray(shifts, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least three points for a two-parameter fit")
    if (x <= 0.0).any() or (y <= 0.0).any():
        raise ValueError("power-law fit needs positive data")
    lb = np.polyfit(np.log(x), np.log(y), 1)
    p0 = (float(np.exp(lb[1])), float(lb[0]))
    popt, pcov = curve_fit(
        lambda xx, a, p: a * np.power(xx, p),
        x,
        y,
        p0=p0,
        maxfev=10000,
        xtol=1e-10,
        ftol=1e-10,
    )
    errs = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    return float(popt[0]), float(popt[1]), float(errs[0]), float(errs[1])


def defect_taper(n, n_def, y_min, y_max):
    """Unit-cell parameter taper between the mirror and defect regions:
    y_n = y_min + (y_max - y_min) exp(-9 (n - n_def)^2 / (2 n_def^2))
    for cell indices 1 <= n <= n_def."""
    if not 1 <= n <= n_def:
        raise ValueError("cell index n must satisfy 1 <= n <= n_def")
    return y_min + (y_max - y_min) * float(
        np.exp(-9.0 * (n - n_def) ** 2 / (2.0 * n_def ** 2))
    )
