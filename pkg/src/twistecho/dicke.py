"""Exact Dicke-basis representation of a symmetric N-atom two-mode ensemble.

States live in the joint eigenbasis of J^2 and J_z for the maximal spin
sector j = N/2.  Basis ordering is fixed globally: index 0 is mu = +N/2
(all atoms in mode a), index i carries the J_z eigenvalue mu_i = j - i,
descending down to -N/2 at index N.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import DimensionMismatchError
from .expmv import expm_multiply_hermitian

# Largest basis dimension evolved through a cached dense eigendecomposition;
# above this the Lanczos propagator takes over.
DENSE_EVOLUTION_MAX_DIM = 4097

SPIN_COMPONENTS = ("jx", "jy", "jz", "jplus", "jminus")
TWIST_KINDS = ("tact", "oat")


@dataclass(frozen=True)
class SpinSystem:
    """N-atom symmetric ensemble with total spin j = N/2."""

    n_atoms: int

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")

    @property
    def two_j(self) -> int:
        """2j stored exactly as an integer (equals N)."""
        return self.n_atoms

    @property
    def j(self) -> float:
        return self.n_atoms / 2.0

    @property
    def dim(self) -> int:
        return self.n_atoms + 1

    def jz_eigenvalues(self) -> np.ndarray:
        """mu_i = j - i, descending from +j at index 0."""
        return self.j - np.arange(self.dim, dtype=float)


@dataclass
class DickeState:
    """Complex amplitude vector over the J_z eigenbasis of `system`.

    The container itself does not enforce normalization: protocol code also
    routes derivative vectors (which are not unit norm) through the same
    linear maps.  Physical states satisfy abs(norm()**2 - 1) < 1e-10.
    """

    system: SpinSystem
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.system.dim,):
            raise DimensionMismatchError(
                f"amplitude vector of length {self.amplitudes.shape} does not match "
                f"basis dimension {self.system.dim}"
            )

    def copy(self) -> "DickeState":
        return DickeState(self.system, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "DickeState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "DickeState") -> float:
        """|<self|other>|^2, insensitive to global phase."""
        return float(abs(self.overlap(other)) ** 2)


class BandedOperator:
    """Banded operator over the Dicke basis.

    `bands[k]` holds the matrix elements with row - column = k, i.e.
    bands[k][t] = M[t + k, t] for k >= 0 and M[t, t - k] for k < 0, each an
    array of length dim - |k|.  Hermiticity then reads
    bands[-k] == conj(bands[k]) element-wise.
    """

    def __init__(self, system: SpinSystem, bands: dict[int, np.ndarray]):
        self.system = system
        self.bands = {
            int(k): np.asarray(v, dtype=complex) for k, v in bands.items() if len(v)
        }
        for k, v in self.bands.items():
            if v.shape != (system.dim - abs(k),):
                raise ValueError(f"band {k} has length {v.shape}, expected {system.dim - abs(k)}")
        self._lock = threading.Lock()
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.system.dim

    def band(self, k: int) -> np.ndarray:
        return self.bands.get(k, np.zeros(self.dim - abs(k), dtype=complex))

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        offsets = {abs(k) for k in self.bands}
        for k in offsets:
            if not np.allclose(self.band(k), np.conj(self.band(-k)), atol=tol, rtol=0.0):
                return False
        return True

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, v in self.bands.items():
            out += np.diag(v, -k)
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.dim, dtype=complex)
        for k, v in self.bands.items():
            if k >= 0:
                y[k:] += v * x[: self.dim - k]
            else:
                y[: self.dim + k] += v * x[-k:]
        return y

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x)

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached (eigenvalues, eigenvectors); requires Hermiticity."""
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    bw = max(self.bands) if self.bands else 0
                    a_band = np.zeros((bw + 1, self.dim), dtype=complex)
                    for k in range(bw + 1):
                        a_band[k, : self.dim - k] = self.band(k)
                    w, v = scipy.linalg.eig_banded(a_band, lower=True)
                    self._eig = (w, v)
        return self._eig


def build_spin_operator(system: SpinSystem, which: str) -> BandedOperator:
    """Collective spin component as a banded operator.

    Ladder algebra: J_+|j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>, J_z|j,m> = m|j,m>,
    J_x = (J_+ + J_-)/2 and J_y = (J_+ - J_-)/(2i).  With the fixed ordering,
    J_+ occupies band -1 and J_- band +1.
    """
    return _spin_operator(system, which.lower())


@lru_cache(maxsize=None)
def _spin_operator(system: SpinSystem, which: str) -> BandedOperator:
    if which not in SPIN_COMPONENTS:
        raise ValueError(f"unknown spin component {which!r}")
    dim = system.dim
    if which == "jz":
        return BandedOperator(system, {0: system.jz_eigenvalues().astype(complex)})
    # c[t] couples |mu_{t+1}> to |mu_t|; with m = j-(t+1) the ladder factor is
    # sqrt((j-m)(j+m+1)) = sqrt((t+1)(2j-t)).
    t = np.arange(dim - 1, dtype=float)
    c = np.sqrt((t + 1.0) * (system.two_j - t))
    if which == "jplus":
        return BandedOperator(system, {-1: c.astype(complex)})
    if which == "jminus":
        return BandedOperator(system, {+1: c.astype(complex)})
    if which == "jx":
        half = (c / 2.0).astype(complex)
        return BandedOperator(system, {-1: half, +1: half})
    # jy
    return BandedOperator(system, {-1: -0.5j * c, +1: +0.5j * c})


def build_twisting_hamiltonian(system: SpinSystem, kind: str) -> BandedOperator:
    """Twisting Hamiltonian with the coupling chi factored out.

    tact: -(J_+^2 - J_-^2)/(2i) = -(J_x J_y + J_y J_x), purely imaginary on
    bands +-2 with zero diagonal.  oat: J_x^2, occupying bands {0, +-2}.
    Evolution supplies the dimensionless product t*chi as the scale.
    """
    return _twisting_hamiltonian(system, kind.lower())


@lru_cache(maxsize=None)
def _twisting_hamiltonian(system: SpinSystem, kind: str) -> BandedOperator:
    if kind not in TWIST_KINDS:
        raise ValueError(f"unknown twisting kind {kind!r}")
    dim = system.dim
    t = np.arange(dim - 1, dtype=float)
    c = np.sqrt((t + 1.0) * (system.two_j - t))
    d = c[:-1] * c[1:] if dim >= 3 else np.zeros(0)
    if kind == "tact":
        # -(J_+^2 - J_-^2)/(2i) = (i/2)(J_+^2 - J_-^2); J_+^2 sits on band -2.
        return BandedOperator(system, {-2: 0.5j * d, +2: -0.5j * d})
    # oat: J_x^2 = (J_+^2 + J_-^2)/4 + (J_+J_- + J_-J_+)/4; the cross terms are
    # diagonal and sum to 2(j(j+1) - m^2).
    mu = system.jz_eigenvalues()
    j = system.j
    diag = (j * (j + 1.0) - mu**2) / 2.0
    return BandedOperator(system, {0: diag.astype(complex), -2: (d / 4.0).astype(complex), +2: (d / 4.0).astype(complex)})


def evolve(state: DickeState, h: BandedOperator, scale: float) -> DickeState:
    """Return exp(-i * scale * h)|state>.

    Dense eigendecomposition (cached on the operator) up to
    DENSE_EVOLUTION_MAX_DIM, Lanczos propagation above.  Negative `scale`
    expresses inverse evolution; the Hamiltonian object is never negated.
    """
    if h.system != state.system:
        raise DimensionMismatchError("state and operator built for different systems")
    if scale == 0.0:
        return state.copy()
    amps = evolve_vector(state.amplitudes, h, scale)
    return DickeState(state.system, amps)


def evolve_vector(vec: np.ndarray, h: BandedOperator, scale: float) -> np.ndarray:
    """Vector-level exp(-i * scale * h) @ vec (no state bookkeeping)."""
    if scale == 0.0:
        return np.array(vec, dtype=complex, copy=True)
    if h.dim <= DENSE_EVOLUTION_MAX_DIM:
        w, v = h.eigensystem()
        return v @ (np.exp(-1j * scale * w) * (v.conj().T @ vec))
    return expm_multiply_hermitian(h.matvec, vec, scale)


def rotate(state: DickeState, axis: str, angle: float) -> DickeState:
    """Rotation exp(-i * angle * J_axis) about x, y or z."""
    axis = axis.lower()
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    return evolve(state, build_spin_operator(state.system, "j" + axis), angle)


def rotate_vector(vec: np.ndarray, system: SpinSystem, axis: str, angle: float) -> np.ndarray:
    return evolve_vector(vec, build_spin_operator(system, "j" + axis.lower()), angle)


def pole_state(system: SpinSystem) -> DickeState:
    """Coherent spin state at the +J_z pole (all atoms in mode a)."""
    amps = np.zeros(system.dim, dtype=complex)
    amps[0] = 1.0
    return DickeState(system, amps)


def coherent_state(system: SpinSystem, polar: float, azimuth: float) -> DickeState:
    """CSS pointing along (polar, azimuth) on the Bloch sphere.

    Amplitudes <mu = j-k|CSS> = sqrt(C(N,k)) cos(polar/2)^(N-k)
    sin(polar/2)^k exp(-i k azimuth), evaluated in the log domain so that
    large N does not overflow the binomial coefficients.
    """
    amps = coherent_amplitudes(system.n_atoms, polar)
    k = np.arange(system.dim)
    return DickeState(system, amps * np.exp(-1j * k * azimuth))


def coherent_amplitudes(n_atoms: int, polar: float) -> np.ndarray:
    """Real CSS amplitude profile sqrt(C(N,k)) cos^(N-k) sin^k at azimuth 0."""
    n = n_atoms
    k = np.arange(n + 1, dtype=float)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    c, s = np.cos(polar / 2.0), np.sin(polar / 2.0)
    with np.errstate(divide="ignore"):
        log_c = np.where(c != 0.0, np.log(np.abs(c)), -np.inf)
        log_s = np.where(s != 0.0, np.log(np.abs(s)), -np.inf)
    # 0 * (-inf) would be nan; an exponent of zero contributes exactly 0
    term_c = np.where(n - k == 0.0, 0.0, (n - k) * log_c)
    term_s = np.where(k == 0.0, 0.0, k * log_s)
    amp = np.exp(0.5 * log_binom + term_c + term_s)
    # restore signs lost by the log transform
    if c < 0.0:
        amp *= np.where((n - k.astype(int)) % 2 == 0, 1.0, -1.0)
    if s < 0.0:
        amp *= np.where(k.astype(int) % 2 == 0, 1.0, -1.0)
    return amp


def expectation(state: DickeState, op: BandedOperator) -> float:
    """<psi|O|psi> for Hermitian O (real part returned)."""
    return float(np.real(np.vdot(state.amplitudes, op.matvec(state.amplitudes))))


def variance(state: DickeState, op: BandedOperator) -> float:
    ov = op.matvec(state.amplitudes)
    mean = np.real(np.vdot(state.amplitudes, ov))
    second = np.real(np.vdot(ov, ov))
    return float(max(second - mean**2, 0.0))


def covariance(state: DickeState, a: BandedOperator, b: BandedOperator) -> float:
    """Symmetrized covariance (1/2)<AB + BA> - <A><B> for Hermitian A, B."""
    av = a.matvec(state.amplitudes)
    bv = b.matvec(state.amplitudes)
    mean_a = np.real(np.vdot(state.amplitudes, av))
    mean_b = np.real(np.vdot(state.amplitudes, bv))
    return float(np.real(np.vdot(av, bv)) - mean_a * mean_b)


def spin_moments(state: DickeState) -> dict[str, float]:
    """First and second moments of (J_x, J_y, J_z) used all over the protocols."""
    sys_ = state.system
    ops = {a: build_spin_operator(sys_, "j" + a) for a in ("x", "y", "z")}
    vecs = {a: op.matvec(state.amplitudes) for a, op in ops.items()}
    out: dict[str, float] = {}
    for a in ("x", "y", "z"):
        out["m" + a] = float(np.real(np.vdot(state.amplitudes, vecs[a])))
    for a in ("x", "y", "z"):
        for b in ("x", "y", "z"):
            if a <= b:
                out["c" + a + b] = float(
                    np.real(np.vdot(vecs[a], vecs[b])) - out["m" + a] * out["m" + b]
                )
    return out
