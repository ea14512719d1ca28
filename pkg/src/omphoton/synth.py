"""Seeded synthetic time-tag streams with known click statistics.

Each generator draws per-period clicks from an explicit probabilistic
model whose correlation functions are known in closed form, so the
estimators in timetags can be tested against ground truth.  Timestamps
are placed uniformly inside the configured windows; all randomness comes
from one numpy Generator seeded by the caller.
"""

import numpy as np

from .timetags import EVENT_DTYPE


def _emit(cfg, click_sets, rng):
    """Build a sorted event array from {(label, channel): bool array
    over periods}.  Each click gets a uniform offset inside its window."""
    chunks = []
    for (label, channel) in sorted(click_sets):
        hit = click_sets[(label, channel)]
        w = cfg.window(label)
        periods = np.nonzero(hit)[0]
        if len(periods) == 0:
            continue
        t = periods.astype(np.uint64) * np.uint64(cfg.t_rep)
        t = t + np.uint64(w.offset) + rng.integers(
            0, w.width, size=len(periods), dtype=np.uint64
        )
        ev = np.empty(len(periods), dtype=EVENT_DTYPE)
        ev["channel"] = channel
        ev["t_ps"] = t
        chunks.append(ev)
    if not chunks:
        return np.empty(0, dtype=EVENT_DTYPE)
    out = np.concatenate(chunks)
    return out[np.argsort(out["t_ps"], kind="stable")]


def _split(rng, hit):
    """Route each hit to channel 0 or 1 with equal probability."""
    toss = rng.random(len(hit)) < 0.5
    return hit & toss, hit & ~toss


def _thermal_clicks(rng, k, eta):
    """Joint threshold clicks of two detectors each catching a photon
    with probability eta/2, for per-period photon numbers k.

    Exact joint law: P(neither) = (1-eta)^k, P(only one) =
    (1-eta/2)^k - (1-eta)^k each, rest both."""
    p_n0 = (1.0 - eta / 2.0) ** k     # P(detector 0 silent)
    p_nn = (1.0 - eta) ** k           # P(both silent)
    u = rng.random(len(k))
    neither = u < p_nn
    only1 = (~neither) & (u < p_n0)
    only0 = (~neither) & (~only1) & (u < 2.0 * p_n0 - p_nn)
    both = (~neither) & (~only1) & (~only0)
    return only0 | both, only1 | both


def gen_ideal(cfg, n_periods, p_herald, p_read, seed):
    """Ideal heralded single photons.

    Each period heralds with probability p_herald (write click on a
    random channel); a heralded period carries exactly one read-window
    photon, detected with probability p_read and routed 50:50.  Heralded
    g2(0) is exactly 0; satellites are 1.
    """
    rng = np.random.default_rng(seed)
    herald = rng.random(n_periods) < p_herald
    w0, w1 = _split(rng, herald)
    detected = herald & (rng.random(n_periods) < p_read)
    r0, r1 = _split(rng, detected)
    return _emit(
        cfg,
        {("write", 0): w0, ("write", 1): w1, ("read", 0): r0, ("read", 1): r1},
        rng,
    )


def gen_thermal(cfg, n_periods, p_herald, n_bar, eta, seed):
    """Thermal read-window light of mean occupancy n_bar split onto two
    detectors (eta/2 each photon), plus independent heralds.  The click
    correlators follow from the geometric generating function:
    P(detector silent) = 1/(1 + n_bar eta/2), P(both silent) =
    1/(1 + n_bar eta)."""
    rng = np.random.default_rng(seed)
    herald = rng.random(n_periods) < p_herald
    w0, w1 = _split(rng, herald)
    # geometric photon number: P(k) = n_bar^k / (1+n_bar)^(k+1)
    k = rng.geometric(1.0 / (1.0 + n_bar), size=n_periods) - 1
    r0, r1 = _thermal_clicks(rng, k, eta)
    return _emit(
        cfg,
        {("write", 0): w0, ("write", 1): w1, ("read", 0): r0, ("read", 1): r1},
        rng,
    )


def gen_pairs(cfg, n_periods, p_pair, eta_w, eta_r, dark_rate_hz, seed):
    """Photon pairs at probability p_pair per period, write member
    detected with eta_w, read member with eta_r, each on a random
    channel.  cross_g2 ground truth is 1/p_pair independent of the
    efficiencies.  A configured dark window clicks at the given rate."""
    rng = np.random.default_rng(seed)
    pair = rng.random(n_periods) < p_pair
    w0, w1 = _split(rng, pair & (rng.random(n_periods) < eta_w))
    r0, r1 = _split(rng, pair & (rng.random(n_periods) < eta_r))
    sets = {
        ("write", 0): w0,
        ("write", 1): w1,
        ("read", 0): r0,
        ("read", 1): r1,
    }
    if cfg.has("dark") and dark_rate_hz > 0.0:
        p_dark = dark_rate_hz * cfg.window("dark").width * 1e-12
        sets[("dark", 0)] = rng.random(n_periods) < p_dark
        sets[("dark", 1)] = rng.random(n_periods) < p_dark
    return _emit(cfg, sets, rng)


def gen_poisson(cfg, n_periods, p_click, seed):
    """Independent clicks: p_click maps (label, channel) to a per-period
    probability.  All correlators are 1 by construction."""
    rng = np.random.default_rng(seed)
    sets = {}
    for (label, channel) in sorted(p_click):
        sets[(label, channel)] = rng.random(n_periods) < p_click[(label, channel)]
    return _emit(cfg, sets, rng)


def gen_hom(cfg, n_periods, p_herald, eta, lam, distinguishable, seed):
    """Two-photon interference stream for the normalized dn histogram.

    Both write channels herald independently with probability p_herald
    per period (fourfold analysis keeps doubly heralded periods,
    threefold singly heralded ones).

    distinguishable=True: the overlap readout bin (read2) carries
    Poisson(lam) photons per period, split 50:50 and detected with eta.
    Poisson thinning makes the two detectors exactly independent, so the
    normalized coincidence histogram is 1 in every bin including dn = 0.

    distinguishable=False: each herald contributes one photon and all of
    a period's photons bunch through one randomly chosen output port
    (ideal interference).  Two detectors can then never click in the
    same period, so the dn = 0 bin is exactly 0 while satellites stay
    finite.
    """
    rng = np.random.default_rng(seed)
    h0 = rng.random(n_periods) < p_herald
    h1 = rng.random(n_periods) < p_herald
    if distinguishable:
        d0 = rng.poisson(lam * eta / 2.0, n_periods) > 0
        d1 = rng.poisson(lam * eta / 2.0, n_periods) > 0
    else:
        k = h0.astype(int) + h1.astype(int)
        seen = rng.random(n_periods) < 1.0 - (1.0 - eta) ** k
        to0 = rng.random(n_periods) < 0.5
        d0 = seen & to0
        d1 = seen & ~to0
    sets = {
        ("write", 0): h0,
        ("write", 1): h1,
        ("read2", 0): d0,
        ("read2", 1): d1,
    }
    if cfg.has("read"):
        z = np.zeros(n_periods, dtype=bool)
        sets[("read", 0)] = z
        sets[("read", 1)] = z
    return _emit(cfg, sets, rng)
