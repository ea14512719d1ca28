"""Truncated Fock-space states and operators for few-mode quantum optics.

Everything is dense: a register of named modes with per-mode truncation
dimensions, density matrices as complex arrays over the tensor-product
basis, and operators embedded by Kronecker products.  Tensor layout is
row-major Kronecker order, so the first mode in the register is the
slowest-varying index.

Truncation is a physical approximation, not a detail: states built here
check that the probability mass beyond the retained levels is below a
tolerance, and raise TruncationError otherwise.
"""

import numpy as np
from dataclasses import dataclass
from scipy.special import factorial
from scipy.stats import poisson

# construction-time validation tolerances
HERM_TOL = 1e-10
TRACE_TOL = 1e-9
EIG_TOL = 1e-9
# default bound on probability mass beyond the truncation
TAIL_TOL = 1e-3


class TruncationError(ValueError):
    """Probability mass beyond the retained Fock levels exceeds tolerance."""


@dataclass(frozen=True)
class ModeRegister:
    """Ordered collection of named modes with per-mode truncation dims.

    modes is a tuple of (name, dim) pairs.  Names must be unique and every
    dim must be at least 2 (a single level cannot hold a photon).
    """

    modes: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "modes", tuple((str(n), int(d)) for n, d in self.modes)
        )
        names = [n for n, _ in self.modes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate mode names in register: %r" % (names,))
        for name, d in self.modes:
            if d < 2:
                raise ValueError("mode %r needs dim >= 2, got %d" % (name, d))

    @property
    def names(self):
        return tuple(n for n, _ in self.modes)

    @property
    def dims(self):
        return tuple(d for _, d in self.modes)

    @property
    def dim(self):
        """Total Hilbert-space dimension (product of mode dims)."""
        d = 1
        for _, dd in self.modes:
            d *= dd
        return d

    def index(self, name):
        for i, (n, _) in enumerate(self.modes):
            if n == name:
                return i
        raise KeyError("no mode named %r in register %r" % (name, self.names))

    def dim_of(self, name):
        return self.modes[self.index(name)][1]

    def extended(self, name, dim):
        """New register with an extra mode appended."""
        return ModeRegister(self.modes + ((name, dim),))

    def __len__(self):
        return len(self.modes)

    def __repr__(self):
        inner = ", ".join("%s:%d" % m for m in self.modes)
        return "ModeRegister(%s)" % inner


class DensityMatrix:
    """Density operator on a mode register.

    Construction validates Hermiticity (tolerance 1e-10) and unit trace
    (1e-9).  Positivity is not checked on every construction because an
    eigendecomposition per channel application would dominate pipeline
    cost; call check_positive() in verification paths.
    """

    def __init__(self, register, data):
        data = np.asarray(data, dtype=complex)
        if data.shape != (register.dim, register.dim):
            raise ValueError(
                "data shape %r does not match register dim %d"
                % (data.shape, register.dim)
            )
        herm = np.abs(data - data.conj().T).max()
        if herm > HERM_TOL:
            raise ValueError("not Hermitian: max asymmetry %.3e" % herm)
        tr = data.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError("trace %r deviates from 1 beyond tolerance" % tr)
        self.register = register
        self.data = data
        self.data.setflags(write=False)

    def check_positive(self, tol=EIG_TOL):
        """Raise if any eigenvalue is below -tol.  Returns self."""
        lo = np.linalg.eigvalsh(self.data)[0]
        if lo < -tol:
            raise ValueError("negative eigenvalue %.3e" % lo)
        return self

    def occupancy(self, mode):
        """Mean photon/phonon number of one mode."""
        p = number_distribution(self, mode)
        return float(np.arange(len(p)) @ p)

    def __repr__(self):
        return "DensityMatrix(%r)" % (self.register,)


@dataclass(frozen=True)
class FockOperator:
    """Operator on a mode register, stored as a dense matrix over the
    full register basis."""

    register: ModeRegister
    data: np.ndarray
    label: str = ""

    def dagger(self):
        return FockOperator(self.register, self.data.conj().T, self.label + "^")


def destroy(register, mode):
    """Annihilation operator of one mode, embedded in the register."""
    N = register.dim_of(mode)
    a = np.diag(np.sqrt(np.arange(1.0, N)), 1)
    return FockOperator(register, embed(register, (mode,), a), "a[%s]" % mode)


def create(register, mode):
    return destroy(register, mode).dagger()


def number(register, mode):
    N = register.dim_of(mode)
    n = np.diag(np.arange(float(N)))
    return FockOperator(register, embed(register, (mode,), n), "n[%s]" % mode)


def embed(register, target_names, mat):
    """Lift an operator acting on the listed modes to the full register.

    mat is given over the tensor product of the target modes in the order
    listed (Kronecker, first name slowest).  The remaining modes get the
    identity.
    """
    k = len(register)
    targets = [register.index(n) for n in target_names]
    rest = [i for i in range(k) if i not in targets]
    dims = register.dims
    d_t = 1
    for i in targets:
        d_t *= dims[i]
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (d_t, d_t):
        raise ValueError("operator shape %r does not match target dims" % (mat.shape,))
    d_rest = 1
    for i in rest:
        d_rest *= dims[i]
    full = np.kron(mat, np.eye(d_rest))
    order = targets + rest
    dims_perm = [dims[i] for i in order]
    t = full.reshape(dims_perm + dims_perm)
    inv = list(np.argsort(order))
    perm = inv + [k + i for i in inv]
    D = register.dim
    return np.ascontiguousarray(t.transpose(perm).reshape(D, D))


def vacuum_state(register):
    """All modes in |0>."""
    D = register.dim
    rho = np.zeros((D, D), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(register, rho)


def number_state(register, occupations):
    """Pure product Fock state |n1, n2, ...> for the given occupations
    (sequence aligned with the register order)."""
    occ = tuple(int(n) for n in occupations)
    if len(occ) != len(register):
        raise ValueError("need one occupation per mode")
    for n, d in zip(occ, register.dims):
        if not 0 <= n < d:
            raise ValueError("occupation %d outside mode dim %d" % (n, d))
    idx = int(np.ravel_multi_index(occ, register.dims))
    D = register.dim
    rho = np.zeros((D, D), dtype=complex)
    rho[idx, idx] = 1.0
    return DensityMatrix(register, rho)


def thermal_state(register, n_bar, tail_tol=TAIL_TOL):
    """Single-mode thermal state of mean occupancy n_bar.

    The mass above the truncation is (n_bar/(1+n_bar))^N exactly; if it
    exceeds tail_tol the truncation cannot represent the state and a
    TruncationError is raised.  The retained levels are renormalized.
    """
    if len(register) != 1:
        raise ValueError("thermal_state needs a single-mode register")
    if n_bar < 0:
        raise ValueError("n_bar must be >= 0")
    N = register.dims[0]
    if n_bar == 0:
        return vacuum_state(register)
    x = n_bar / (1.0 + n_bar)
    tail = x ** N
    if tail > tail_tol:
        raise TruncationError(
            "thermal tail mass %.3e above dim %d exceeds %.1e (n_bar=%g)"
            % (tail, N, tail_tol, n_bar)
        )
    p = (1.0 - x) * x ** np.arange(N)
    p /= p.sum()
    return DensityMatrix(register, np.diag(p).astype(complex))


def coherent_state(register, alpha, tail_tol=TAIL_TOL):
    """Single-mode coherent state |alpha>.

    Tail mass is the Poisson survival function P(n >= N) at mean |alpha|^2.
    """
    if len(register) != 1:
        raise ValueError("coherent_state needs a single-mode register")
    N = register.dims[0]
    mu = abs(alpha) ** 2
    tail = float(poisson.sf(N - 1, mu))
    if tail > tail_tol:
        raise TruncationError(
            "coherent tail mass %.3e above dim %d exceeds %.1e (|alpha|^2=%g)"
            % (tail, N, tail_tol, mu)
        )
    n = np.arange(N)
    amp = np.exp(-mu / 2.0) * np.asarray(alpha, dtype=complex) ** n / np.sqrt(factorial(n))
    amp /= np.linalg.norm(amp)
    return DensityMatrix(register, np.outer(amp, amp.conj()))


def tensor(a, b):
    """Tensor product; b's modes are appended after a's."""
    reg = ModeRegister(a.register.modes + b.register.modes)
    return DensityMatrix(reg, np.kron(a.data, b.data))


def partial_trace(rho, keep):
    """Trace out every mode not named in keep.

    Kept modes retain their original register order regardless of the
    order given.
    """
    reg = rho.register
    keep_idx = sorted(reg.index(n) for n in keep)
    if not keep_idx:
        raise ValueError("must keep at least one mode")
    k = len(reg)
    drop = sorted(set(range(k)) - set(keep_idx), reverse=True)
    t = rho.data.reshape(reg.dims + reg.dims)
    kk = k
    for ax in drop:
        t = np.trace(t, axis1=ax, axis2=ax + kk)
        kk -= 1
    new_reg = ModeRegister(tuple(reg.modes[i] for i in keep_idx))
    d = new_reg.dim
    return DensityMatrix(new_reg, t.reshape(d, d))


def expectation(rho, op):
    """Tr(rho O).  op may be a FockOperator on the same register or a
    bare matrix of matching shape."""
    mat = op.data if isinstance(op, FockOperator) else np.asarray(op)
    if mat.shape != rho.data.shape:
        raise ValueError("operator shape %r does not match state" % (mat.shape,))
    # Tr(rho O) as a contraction, avoiding the full product
    return complex(np.sum(rho.data.T * mat))


def number_distribution(rho, mode):
    """Marginal photon-number distribution of one mode (real, clipped at 0)."""
    reg = rho.register
    i = reg.index(mode)
    k = len(reg)
    t = rho.data.reshape(reg.dims + reg.dims)
    idx = list(range(k))
    p = np.einsum(t, idx + idx, [i]).real
    return np.clip(p, 0.0, None)


def resize_single_mode(rho, new_dim, max_cut=1e-4):
    """Return the same single-mode state at a different truncation.

    Enlarging pads with zeros.  Shrinking discards levels >= new_dim and
    renormalizes; if the discarded mass exceeds max_cut the resize would
    misrepresent the state and a TruncationError is raised.
    """
    if len(rho.register) != 1:
        raise ValueError("resize_single_mode needs a single-mode state")
    name, N = rho.register.modes[0]
    new_dim = int(new_dim)
    if new_dim < 2:
        raise ValueError("new_dim must be >= 2")
    new_reg = ModeRegister(((name, new_dim),))
    if new_dim == N:
        return rho
    if new_dim > N:
        out = np.zeros((new_dim, new_dim), dtype=complex)
        out[:N, :N] = rho.data
        return DensityMatrix(new_reg, out)
    cut = float(np.trace(rho.data[new_dim:, new_dim:]).real)
    if cut > max_cut:
        raise TruncationError(
            "resizing to dim %d would cut %.3e probability mass (> %.1e)"
            % (new_dim, cut, max_cut)
        )
    out = rho.data[:new_dim, :new_dim] / (1.0 - cut)
    return DensityMatrix(new_reg, out)
