import numpy as np
import pytest

from omphoton.fock import ModeRegister, number_distribution, number_state, thermal_state
from omphoton.channels import ConditioningError
from omphoton.source import (
    SourceParams,
    cross_correlation_model,
    cross_correlation_sim,
    g2_zero,
    simulate_source,
)

from oracles import moment_cross_g2, tms_click_g2, tms_herald_prob


OPERATING = dict(p_s=0.013, p_as=0.3, n_write=0.039, t_delay=150e-9,
                 tau_m=1e-6, eta=0.05)


# ------------------------------------------------------------------- params

def test_params_validation():
    with pytest.raises(ValueError):
        SourceParams(p_s=1.0, p_as=0.5)
    with pytest.raises(ValueError):
        SourceParams(p_s=-0.1, p_as=0.5)
    with pytest.raises(ValueError):
        SourceParams(p_s=0.1, p_as=1.2)
    with pytest.raises(ValueError):
        SourceParams(p_s=0.1, p_as=0.5, eta=-0.01)
    with pytest.raises(ValueError):
        SourceParams(p_s=0.1, p_as=0.5, n_write=-1.0)
    with pytest.raises(ValueError):
        SourceParams(p_s=0.1, p_as=0.5, tau_m=0.0)
    with pytest.raises(ValueError):
        SourceParams(p_s=0.1, p_as=0.5, trunc=1)


def test_decay_probability():
    p = SourceParams(p_s=0.1, p_as=0.5, t_delay=1.0, tau_m=1.0)
    assert p.p_decay == pytest.approx(1.0 - np.exp(-1.0))
    assert SourceParams(p_s=0.1, p_as=0.5).p_decay == 0.0


# ----------------------------------------------------------------- simulate

def test_ideal_heralded_single_photon():
    p = SourceParams(p_s=0.001, p_as=1.0, eta=1.0, trunc=6)
    rho, _ = simulate_source(p)
    assert number_distribution(rho, "r")[1] >= 0.997


def test_unheralded_mean_occupancy():
    # through the loss chain the unheralded mean is eta p_as s with
    # s = p_s/(1-p_s), independent of the herald arm entirely
    p = SourceParams(p_s=0.05, p_as=0.7, eta=0.3, trunc=9)
    rho, _ = simulate_source(p, heralded=False)
    pops = number_distribution(rho, "r")
    mean = float(np.arange(len(pops)) @ pops)
    assert abs(mean - 0.3 * 0.7 * 0.05 / 0.95) < 1e-6


def test_herald_probability_closed_form():
    # threshold click through arm efficiency eta on the pair source:
    # p = x/(1+x), x = eta p_s/(1-p_s); the small-eta linear form is the
    # same number to better than 1e-6 at the operating point
    p = SourceParams(p_s=0.013, p_as=0.3, eta=0.05, trunc=7)
    _, p_w = simulate_source(p)
    assert abs(p_w - tms_herald_prob(0.013, 0.05)) < 1e-9
    assert abs(p_w - 0.05 * 0.013 / (1.0 - 0.013)) < 1e-6


def test_heralded_conditioning_error():
    with pytest.raises(ConditioningError):
        simulate_source(SourceParams(p_s=0.0, p_as=0.5, trunc=4))


def test_heralded_output_beats_unheralded_single_photon_fraction():
    p = SourceParams(p_s=0.013, p_as=0.8, eta=0.8, trunc=7)
    her, _ = simulate_source(p, heralded=True)
    unher, _ = simulate_source(p, heralded=False)
    assert number_distribution(her, "r")[1] > number_distribution(unher, "r")[1]


def test_hbt_point_antibunched_over_read_heating_range():
    # calibrated source point; the heralded photon stays in the
    # single-photon regime (g2 < 0.5) up to 0.1 added read quanta
    for n_read in (0.0, 0.05, 0.1):
        p = SourceParams(n_read=n_read, trunc=9, tail_tol=5e-3, **OPERATING)
        rho, _ = simulate_source(p)
        assert g2_zero(rho) < 0.5


# ------------------------------------------------------------------ g2_zero

def test_g2_fock_one():
    reg = ModeRegister((("r", 4),))
    assert g2_zero(number_state(reg, (1,))) == pytest.approx(0.0, abs=1e-12)


def test_g2_thermal_bunching():
    reg = ModeRegister((("r", 30),))
    assert g2_zero(thermal_state(reg, 0.6)) == pytest.approx(2.0, abs=1e-3)


def test_g2_zero_intensity_error():
    from omphoton.fock import vacuum_state

    with pytest.raises(ValueError):
        g2_zero(vacuum_state(ModeRegister((("r", 3),))))


def test_g2_multimode_error():
    from omphoton.fock import vacuum_state

    with pytest.raises(ValueError):
        g2_zero(vacuum_state(ModeRegister((("a", 3), ("b", 3)))))


def test_g2_monotone_in_read_heating():
    vals = []
    for n_read in (0.0, 0.1, 0.2, 0.3):
        p = SourceParams(n_read=n_read, trunc=9, tail_tol=2e-2, **OPERATING)
        rho, _ = simulate_source(p)
        vals.append(g2_zero(rho))
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


# -------------------------------------------------------- cross-correlation

def test_cross_correlation_no_heating_point():
    # no thermal noise: limited purely by higher-order pair events,
    # g2 = 1 + 1/p_s up to threshold-detector corrections
    p = SourceParams(p_s=0.013, p_as=0.3, eta=0.05, trunc=7)
    val = cross_correlation_sim(p)
    assert abs(val / (1.0 + 1.0 / 0.013) - 1.0) < 0.03


def test_cross_correlation_matches_threshold_oracle():
    # with no thermal noise the pipeline reduces to a two-mode squeezed
    # state read out through fixed arm efficiencies; compare against the
    # independent threshold-click closed form
    for p_s, p_as, eta in ((0.013, 0.3, 0.05), (0.05, 0.8, 0.5)):
        p = SourceParams(p_s=p_s, p_as=p_as, eta=eta, trunc=9, tail_tol=5e-3)
        val = cross_correlation_sim(p)
        ref = tms_click_g2(p_s, eta, eta * p_as)
        assert abs(val / ref - 1.0) < 1e-9


def test_cross_correlation_matches_moment_oracle_with_noise():
    # moment-based reference for the full noisy pipeline (write heating
    # folded into the pair statistics, read heating as amplifier noise);
    # sub-percent agreement is all the threshold correction leaves room for
    p = SourceParams(p_s=0.013, p_as=0.3, n_write=0.043, n_read=0.043,
                     t_delay=150e-9, tau_m=1e-6, eta=0.05, trunc=7,
                     tail_tol=2e-2)
    val = cross_correlation_sim(p)
    ref = moment_cross_g2(0.013, 0.043, 0.043, 150e-9, 1e-6)
    assert abs(val / ref - 1.0) < 5e-3


def test_cross_correlation_matches_model_at_calibrated_noise():
    """Simulated cross-correlation against the phenomenological
    1 + e^(-t/tau)/(p_s + n_th) at the calibrated noise point, within 2%.

    KNOWN FAILING: the simulation gives 11.02 against the model's 9.69
    (13.7% apart).  The formula treats phonon decay as dividing the excess
    correlation and thermal noise as an additive denominator term; in the
    pipeline decay is a loss channel (invisible to normally-ordered click
    ratios) and heating is amplifier noise that keeps correlations, so the
    simulation sits consistently above the formula (the moment-based
    reference in the test above confirms the simulator, not the formula).
    """
    p = SourceParams(p_s=0.013, p_as=0.3, n_write=0.039, n_read=0.047,
                     t_delay=150e-9, tau_m=1e-6, eta=0.05, trunc=7,
                     tail_tol=2e-2)
    val = cross_correlation_sim(p)
    ref = cross_correlation_model(0.013, 0.086, 150e-9, 1e-6)
    assert abs(val / ref - 1.0) < 0.02


def test_cross_correlation_grid_agreement_with_model():
    """Model agreement within 2% over p_s x n_th grid.

    KNOWN FAILING: every grid point deviates 14-31% (rising with n_th).
    Two mechanisms, both in the formula: (1) phonon decay over the 150 ns
    delay is a loss channel, which cannot change normally-ordered click
    ratios, yet the formula divides its excess by e^(t/tau) - alone a 16%
    effect at n_th = 0; (2) read heating enters as amplifier noise whose
    gain keeps the correlated part, while the formula folds it into an
    additive denominator term.  The pipeline itself is confirmed to 1e-9
    and 0.5% by the two independent references above.
    """
    worst = 0.0
    for p_s in (0.005, 0.013, 0.05):
        for n_th in (0.0, 0.1, 0.25, 0.5):
            p = SourceParams(p_s=p_s, p_as=0.3, n_write=n_th / 2,
                             n_read=n_th / 2, t_delay=150e-9, tau_m=1e-6,
                             eta=0.05, trunc=7, tail_tol=2e-2)
            val = cross_correlation_sim(p)
            ref = cross_correlation_model(p_s, n_th, 150e-9, 1e-6)
            worst = max(worst, abs(val / ref - 1.0))
    assert worst < 0.02


def test_cross_correlation_thermal_saturation_limit():
    # n_th -> infinity washes out the correlation; with saturated
    # threshold detectors (eta = p_as = 1) the excess g2 - 1 decays as
    # 1/n_read and the linear-in-1/n extrapolation lands on 1
    vals = []
    for n_read, N in ((1.0, 16), (2.0, 21), (4.0, 29)):
        p = SourceParams(p_s=0.013, p_as=1.0, n_read=n_read, eta=1.0,
                         trunc=N, tail_tol=2e-2)
        vals.append(cross_correlation_sim(p))
    ex = [v - 1.0 for v in vals]
    assert ex[0] > ex[1] > ex[2] > 0.0
    assert ex[1] / ex[2] == pytest.approx(2.0, rel=0.1)
    assert abs((2.0 * vals[2] - vals[1]) - 1.0) < 0.02


def test_cross_correlation_vanishing_click_errors():
    with pytest.raises(ConditioningError):
        cross_correlation_sim(SourceParams(p_s=0.0, p_as=0.5, trunc=4))
    with pytest.raises(ConditioningError):
        cross_correlation_sim(SourceParams(p_s=0.1, p_as=0.0, trunc=5))


# ---------------------------------------------------------------- model op

def test_model_calibrated_point():
    val = cross_correlation_model(0.013, 0.086, 150e-9, 1e-6)
    assert val == pytest.approx(1.0 + 0.8607 / 0.099, abs=2e-3)
    assert val == pytest.approx(9.69, abs=5e-3)


def test_model_limits():
    assert cross_correlation_model(0.013, 0.086, 1e3, 1e-6) == pytest.approx(1.0)
    assert cross_correlation_model(0.013, 0.0, 0.0, 1e-6) == pytest.approx(1.0 + 1.0 / 0.013)


def test_model_validation():
    with pytest.raises(ValueError):
        cross_correlation_model(0.0, 0.0, 0.0, 1e-6)
    with pytest.raises(ValueError):
        cross_correlation_model(-0.01, 0.1, 0.0, 1e-6)
    with pytest.raises(ValueError):
        cross_correlation_model(0.01, 0.1, 0.0, 0.0)


# --------------------------------------------------------- eta invariance

def test_ratios_invariant_under_detection_efficiency():
    """Heralded g2 and click cross-correlation at eta in {0.05, 0.5, 1.0}
    must agree within 1e-3 (loss commutes with normally-ordered ratios).

    KNOWN FAILING: the commuting argument covers loss applied to a fixed
    state, but the write-arm efficiency sits before a threshold herald,
    which weights multi-pair events by 1-(1-eta)^n.  The conditional state
    therefore changes with eta: the heralded g2 moves 0.354 -> 0.337 over
    the stated range at the calibrated point (factor ~2 at zero noise) and
    the cross-correlation moves 3.4%.  This is real threshold-detector
    physics, not a truncation artifact.
    """
    g2s, xcs = [], []
    for eta in (0.05, 0.5, 1.0):
        p = SourceParams(p_s=0.013, p_as=0.3, n_write=0.039, n_read=0.05,
                         t_delay=150e-9, tau_m=1e-6, eta=eta, trunc=9,
                         tail_tol=5e-3)
        rho, _ = simulate_source(p)
        g2s.append(g2_zero(rho))
        xcs.append(cross_correlation_sim(p))
    assert max(g2s) - min(g2s) < 1e-3
    assert max(xcs) - min(xcs) < 1e-3


def test_unheralded_g2_invariant_under_detection_efficiency():
    # without the herald there is no conditioning: both arms act as plain
    # loss after state formation and the ratio is exactly invariant
    vals = []
    for eta in (0.05, 0.5, 1.0):
        p = SourceParams(p_s=0.013, p_as=0.3, n_write=0.039, n_read=0.05,
                         t_delay=150e-9, tau_m=1e-6, eta=eta, trunc=9,
                         tail_tol=5e-3)
        rho, _ = simulate_source(p, heralded=False)
        vals.append(g2_zero(rho))
    assert max(vals) - min(vals) < 1e-9
