"""Quantum channels on truncated Fock registers.

Unitaries come from exponentiating quadratic generators directly on the
truncated space.  The generators are anti-Hermitian, so the matrices are
exactly unitary at any truncation; truncation error shows up as
distortion of the top levels instead of trace loss.  Channels that can
grow occupancy (squeezing, thermal injection) therefore carry explicit
tail-mass guards.
"""

import threading

import numpy as np
from scipy.linalg import expm
from scipy.special import comb

from .fock import (
    TAIL_TOL,
    DensityMatrix,
    ModeRegister,
    TruncationError,
    embed,
    number_distribution,
    partial_trace,
    tensor,
    vacuum_state,
)

# conditioning on outcomes rarer than this is numerically meaningless
CLICK_EPS = 1e-12


class ConditioningError(RuntimeError):
    """Conditioning on an outcome whose probability vanishes."""


# Matrix cache for repeated channel applications.  Keys quantize the
# continuous parameter at 1e-12, far below any physical resolution here;
# identical keys always map to identical matrices, so a lost insert race
# only repeats work.
_cache = {}
_cache_lock = threading.Lock()


def _ladder(N):
    return np.diag(np.sqrt(np.arange(1.0, N)), 1)


def _two_mode_unitary(kind, Na, Nb, x):
    key = (kind, Na, Nb, round(x * 1e12))
    u = _cache.get(key)
    if u is None:
        a = np.kron(_ladder(Na), np.eye(Nb))
        b = np.kron(np.eye(Na), _ladder(Nb))
        ad, bd = a.conj().T, b.conj().T
        if kind == "tms":
            g = ad @ bd - a @ b
        elif kind == "bs":
            g = ad @ b - a @ bd
        else:
            raise ValueError(kind)
        u = expm(x * g)
        with _cache_lock:
            _cache[key] = u
    return u


def _damp_kraus(N, p_loss):
    key = ("damp", N, round(p_loss * 1e12))
    ks = _cache.get(key)
    if ks is None:
        eta = 1.0 - p_loss
        ks = []
        for k in range(N):
            # <n-k| A_k |n> = sqrt(C(n,k)) eta^((n-k)/2) (1-eta)^(k/2)
            ns = np.arange(k, N)
            amp = np.sqrt(comb(ns, k)) * eta ** ((ns - k) / 2.0) * (1.0 - eta) ** (k / 2.0)
            A = np.zeros((N, N))
            A[ns - k, ns] = amp
            ks.append(A)
        with _cache_lock:
            _cache[key] = ks
    return ks


def _apply_two_mode(rho, mode_a, mode_b, u2):
    U = embed(rho.register, (mode_a, mode_b), u2)
    return DensityMatrix(rho.register, U @ rho.data @ U.conj().T)


def _tail_estimate(pops):
    """Estimated mass above the truncation by geometric extrapolation.

    The decay ratio is read one level below the top: the top level absorbs
    population that could not scatter higher and its ratio is biased toward
    1, which would inflate the estimate by orders of magnitude.  Falls back
    to the raw top population when the distribution is not decaying."""
    top = float(pops[-1])
    prev = float(pops[-2])
    if top <= 0.0:
        return 0.0
    if len(pops) >= 3 and pops[-3] > prev > 0.0:
        r = prev / float(pops[-3])
    elif prev > top:
        r = top / prev
    else:
        return top
    return top * r / (1.0 - r)


def two_mode_squeeze(rho, mode_a, mode_b, p_s, tail_tol=TAIL_TOL):
    """Two-mode squeezing of strength set by the pair probability p_s.

    On vacuum input this produces P(n, n) = (1 - p_s) p_s^n, so the
    squeeze parameter is r = artanh(sqrt(p_s)).  The mass above the
    truncation for vacuum input is p_s^Nmin, checked against tail_tol up
    front; for excited inputs this analytic check is a lower bound on the
    true tail, which the downstream guards then catch.
    """
    if not 0.0 <= p_s < 1.0:
        raise ValueError("p_s must be in [0, 1), got %r" % (p_s,))
    Na = rho.register.dim_of(mode_a)
    Nb = rho.register.dim_of(mode_b)
    if p_s > 0.0 and p_s ** min(Na, Nb) > tail_tol:
        raise TruncationError(
            "pair tail p_s^%d = %.3e exceeds %.1e"
            % (min(Na, Nb), p_s ** min(Na, Nb), tail_tol)
        )
    if p_s == 0.0:
        return rho
    r = np.arctanh(np.sqrt(p_s))
    return _apply_two_mode(rho, mode_a, mode_b, _two_mode_unitary("tms", Na, Nb, r))


def beamsplitter(rho, mode_a, mode_b, transmission):
    """Beamsplitter coupling two modes; transmission is the probability
    that a single quantum initially in mode_a ends in mode_b.
    transmission = 1 swaps the modes, 0 is the identity."""
    if not 0.0 <= transmission <= 1.0:
        raise ValueError("transmission must be in [0, 1], got %r" % (transmission,))
    if transmission == 0.0:
        return rho
    theta = np.arcsin(np.sqrt(transmission))
    Na = rho.register.dim_of(mode_a)
    Nb = rho.register.dim_of(mode_b)
    return _apply_two_mode(rho, mode_a, mode_b, _two_mode_unitary("bs", Na, Nb, theta))


def amplitude_damp(rho, mode, p_loss):
    """Photon loss channel: each quantum independently survives with
    probability 1 - p_loss."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError("p_loss must be in [0, 1], got %r" % (p_loss,))
    if p_loss == 0.0:
        return rho
    N = rho.register.dim_of(mode)
    out = np.zeros_like(rho.data)
    for A in _damp_kraus(N, p_loss):
        Af = embed(rho.register, (mode,), A)
        out += Af @ rho.data @ Af.conj().T
    return DensityMatrix(rho.register, out)


def inject_thermal(rho, mode, n_add, tail_tol=TAIL_TOL):
    """Add n_add mean thermal quanta to a mode.

    Realized by two-mode squeezing (r = arsinh(sqrt(n_add))) against a
    vacuum ancilla that is traced out, i.e. a phase-insensitive amplifier
    of gain 1 + n_add.  After injection the mode's estimated tail mass is
    checked against tail_tol.
    """
    if n_add < 0.0:
        raise ValueError("n_add must be >= 0, got %r" % (n_add,))
    if n_add == 0.0:
        return rho
    N = rho.register.dim_of(mode)
    anc = "_inj"
    while anc in rho.register.names:
        anc += "_"
    ext = tensor(rho, vacuum_state(ModeRegister(((anc, N),))))
    r = np.arcsinh(np.sqrt(n_add))
    ext = _apply_two_mode(ext, mode, anc, _two_mode_unitary("tms", N, N, r))
    out = partial_trace(ext, [n for n in rho.register.names])
    est = _tail_estimate(number_distribution(out, mode))
    if est > tail_tol:
        raise TruncationError(
            "estimated tail mass %.3e on %r after injecting n_add=%g exceeds %.1e"
            % (est, mode, n_add, tail_tol)
        )
    return out


def click_projector(register, modes):
    """Threshold-detector projector I - |0...0><0...0| on the given modes,
    embedded in the register.  Returned as a bare matrix."""
    modes = tuple(modes)
    d = 1
    for m in modes:
        d *= register.dim_of(m)
    P = np.eye(d)
    P[0, 0] = 0.0
    return embed(register, modes, P)


def click_project(rho, modes):
    """Condition on a threshold click (at least one quantum anywhere in
    the listed modes).

    Returns (prob, post_state).  If prob falls below 1e-12 the
    conditional state is undefined and post_state is None.
    """
    modes = tuple(modes)
    if not modes:
        raise ValueError("need at least one mode to project on")
    P = click_projector(rho.register, modes)
    p = float(np.sum(rho.data.T * P).real)
    if p < CLICK_EPS:
        return max(p, 0.0), None
    post = DensityMatrix(rho.register, P @ rho.data @ P.conj().T / p)
    return p, post
