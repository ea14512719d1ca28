"""Two-photon interference of successively emitted photons.

The long (early) and short (late) interferometer arms each carry one
emitted wavepacket in a polarization mode pair (H, V).  Inside each arm
a 50:50 coupler mixes the pair, then the arms meet on a second 50:50
coupler acting per polarization.  Threshold detectors sit on the two
output ports, each seeing both polarizations of its port.

Co-polarized inputs (both photons in H) interfere; cross-polarized
inputs (one H, one V) are fully distinguishable and give the classical
coincidence floor used for normalization.
"""

from collections import namedtuple

import numpy as np

from .fock import DensityMatrix, ModeRegister, resize_single_mode
from .channels import beamsplitter, click_projector

HOMResult = namedtuple("HOMResult", "g2_hom p_d1 p_d2 p_c")


def simulate_hom(rho_long, rho_short, polarization="co", trunc=4, max_cut=1e-4):
    """Interfere two single-mode states and return threshold-detector
    statistics.

    Returns HOMResult(g2_hom, p_d1, p_d2, p_c) with
    g2_hom = p_c / (p_d1 p_d2).  Inputs are resized to the interferometer
    truncation; shrinking is only allowed when it cuts less than max_cut
    probability mass.
    """
    if polarization not in ("co", "cross"):
        raise ValueError("polarization must be 'co' or 'cross'")
    if len(rho_long.register) != 1 or len(rho_short.register) != 1:
        raise ValueError("simulate_hom needs single-mode inputs")
    N = int(trunc)
    if N < 2:
        raise ValueError("trunc must be >= 2")

    # four modes: long/short arm x H/V polarization
    names = ("lh", "lv", "sh", "sv")
    vac = np.zeros((N, N), dtype=complex)
    vac[0, 0] = 1.0
    blocks = {n: vac for n in names}
    blocks["lh"] = resize_single_mode(rho_long, N, max_cut).data
    target = "sh" if polarization == "co" else "sv"
    blocks[target] = resize_single_mode(rho_short, N, max_cut).data

    reg = ModeRegister(tuple((n, N) for n in names))
    data = blocks[names[0]]
    for n in names[1:]:
        data = np.kron(data, blocks[n])
    rho = DensityMatrix(reg, data)

    # polarization mixing inside each arm, then the arms meet per polarization
    rho = beamsplitter(rho, "lh", "lv", 0.5)
    rho = beamsplitter(rho, "sh", "sv", 0.5)
    rho = beamsplitter(rho, "lh", "sh", 0.5)
    rho = beamsplitter(rho, "lv", "sv", 0.5)

    P1 = click_projector(reg, ("lh", "lv"))
    P2 = click_projector(reg, ("sh", "sv"))
    p_d1 = float(np.sum(rho.data.T * P1).real)
    p_d2 = float(np.sum(rho.data.T * P2).real)
    # the port projectors commute (disjoint modes), so P1 P2 projects on
    # "both detectors click"
    p_c = float(np.sum(rho.data.T * (P1 @ P2)).real)
    if p_d1 <= 1e-12 or p_d2 <= 1e-12:
        raise ValueError("vanishing detector intensity, g2_hom undefined")
    return HOMResult(p_c / (p_d1 * p_d2), p_d1, p_d2, p_c)


def analytic_hom_from_g2(g2_0):
    """Expected interference coincidence ratio of the source: half the
    zero-delay autocorrelation of the emitted state."""
    if g2_0 < 0.0:
        raise ValueError("g2_0 must be >= 0")
    return 0.5 * g2_0


def lossy_photon_hom(p1):
    """Cross-polarized (distinguishable) coincidence ratio for two single
    photons each detected with probability p1 per pulse.

    Counting threshold coincidences of two independent attenuated
    photons behind the interferometer gives
    g2 = (p1^2/2) / (p1 - p1^2/4)^2.  Low-loss expansions of this ratio
    are sometimes quoted in forms that diverge as p1 -> 0; the closed
    form here matches the four-mode simulation at machine precision and
    tends to 1/2.
    """
    if not 0.0 < p1 <= 1.0:
        raise ValueError("p1 must be in (0, 1]")
    return 0.5 * p1 ** 2 / (p1 - p1 ** 2 / 4.0) ** 2


def hom_visibility(g2_co, g2_cross, calibration_v=None):
    """Interference visibility v_raw = 1 - g2_co/g2_cross, and the
    calibrated visibility rescaled so a reference measurement with ideal
    visibility 0.5 (weak coherent states) reads 0.5.

    Returns (v_raw, v_corrected); v_corrected is None without a
    calibration value.
    """
    if g2_cross <= 0.0:
        raise ValueError("g2_cross must be > 0")
    if g2_co < 0.0:
        raise ValueError("g2_co must be >= 0")
    v_raw = 1.0 - g2_co / g2_cross
    if calibration_v is None:
        return v_raw, None
    if calibration_v <= 0.0:
        raise ValueError("calibration_v must be > 0")
    return v_raw, v_raw * 0.5 / calibration_v
