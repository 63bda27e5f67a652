"""Echo protocol sequences and protocol-level observables.

A protocol run starts from the CSS at the +J_z pole, twists with strength
t_chi, imprints the interferometer phase about J_y, inverts the twisting
for time r * t_chi, and finally rotates by pi/2 into the counting basis
(about J_y for the tact echo, about J_x for the oat echo).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.optimize

from . import dicke
from .dicke import BandedOperator, DickeState, SpinSystem
from .errors import CalibrationError, DegenerateStateError, UndefinedSignalError

PROTOCOLS = ("tact", "oat")

# the pi/2 readout rotation maps this quadrature onto J_z for counting;
# the oat echo magnifies the imprinted signal into the perpendicular one
READOUT_AXIS = {"tact": "y", "oat": "x"}
SIGNAL_COMPONENT = {"tact": "jx", "oat": "jy"}


@dataclass(frozen=True)
class EchoSpec:
    """Full description of one echo protocol run."""

    protocol: str
    n_atoms: int
    t_chi: float
    echo_ratio: float = 1.0
    theta: float = 0.0
    pre_imprint_rotation: tuple[str, float] | None = None
    pre_readout_rotation: tuple[str, float] | None = None
    readout_rotation: str = "standard"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.t_chi < 0.0:
            raise ValueError("t_chi must be >= 0 (inverse evolution goes through echo_ratio)")
        if self.echo_ratio < 0.0:
            raise ValueError("echo_ratio must be >= 0")
        if self.readout_rotation not in ("standard", "none"):
            raise ValueError("readout_rotation must be 'standard' or 'none'")

    @property
    def system(self) -> SpinSystem:
        return SpinSystem(self.n_atoms)


@dataclass
class StageSnapshot:
    label: str  # prepared | imprinted | echoed | readout
    state: DickeState


def _hamiltonian(spec: EchoSpec) -> BandedOperator:
    return dicke.build_twisting_hamiltonian(spec.system, spec.protocol)


def run_echo(spec: EchoSpec) -> list[StageSnapshot]:
    """Execute the sequence and return snapshots of every stage.

    Stages: `prepared` after the twisting (and optional pre-imprint
    rotation), `imprinted` after exp(-i theta J_y), `echoed` after the
    inverse twisting (and optional pre-readout rotation), `readout` after
    the pi/2 mid-fringe rotation when readout_rotation == 'standard'.
    """
    h = _hamiltonian(spec)
    state = dicke.evolve(dicke.pole_state(spec.system), h, spec.t_chi)
    if spec.pre_imprint_rotation is not None:
        axis, angle = spec.pre_imprint_rotation
        state = dicke.rotate(state, axis, angle)
    snapshots = [StageSnapshot("prepared", state)]

    state = dicke.rotate(state, "y", spec.theta)
    snapshots.append(StageSnapshot("imprinted", state))

    state = dicke.evolve(state, h, -spec.echo_ratio * spec.t_chi)
    if spec.pre_readout_rotation is not None:
        axis, angle = spec.pre_readout_rotation
        state = dicke.rotate(state, axis, angle)
    snapshots.append(StageSnapshot("echoed", state))

    if spec.readout_rotation == "standard":
        state = dicke.rotate(state, READOUT_AXIS[spec.protocol], math.pi / 2.0)
    snapshots.append(StageSnapshot("readout", state))
    return snapshots


def stage_state(snapshots: list[StageSnapshot], label: str) -> DickeState:
    for snap in snapshots:
        if snap.label == label:
            return snap.state
    raise KeyError(label)


def post_imprint_state(spec: EchoSpec) -> DickeState:
    """State right after the phase imprint (entry point for derivatives)."""
    return stage_state(run_echo(spec), "imprinted")


def downstream_map(spec: EchoSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Linear map from the post-imprint state to the measured state.

    Applies the echo, the optional pre-readout rotation and the mid-fringe
    readout rotation to a raw amplitude vector; used to propagate exact
    theta-derivatives through the rest of the sequence.
    """
    h = _hamiltonian(spec)
    system = spec.system

    def apply(vec: np.ndarray) -> np.ndarray:
        out = dicke.evolve_vector(vec, h, -spec.echo_ratio * spec.t_chi)
        if spec.pre_readout_rotation is not None:
            axis, angle = spec.pre_readout_rotation
            out = dicke.rotate_vector(out, system, axis, angle)
        if spec.readout_rotation == "standard":
            out = dicke.rotate_vector(out, system, READOUT_AXIS[spec.protocol], math.pi / 2.0)
        return out

    return apply


def _signal(state: DickeState, protocol: str) -> float:
    op = dicke.build_spin_operator(state.system, SIGNAL_COMPONENT[protocol])
    return dicke.expectation(state, op)


def magnification_factor(spec: EchoSpec) -> float:
    """Signal ratio after/before the echo.

    The pre-echo signal always sits in J_x (the imprint tilts the polarized
    state toward x); the post-echo signal is read in the protocol's readout
    quadrature (J_x for tact, J_y for oat).
    """
    snaps = run_echo(spec)
    imprinted = stage_state(snaps, "imprinted")
    echoed = stage_state(snaps, "echoed")
    before = dicke.expectation(imprinted, dicke.build_spin_operator(spec.system, "jx"))
    if abs(before) < 1e-12:
        raise UndefinedSignalError(
            f"pre-echo signal <J_x> = {before:.3e} vanishes; magnification undefined"
        )
    return _signal(echoed, spec.protocol) / before


def signal_to_noise(spec: EchoSpec) -> float:
    """<S>/Delta(S) of the echoed state in the readout quadrature S."""
    echoed = stage_state(run_echo(spec), "echoed")
    op = dicke.build_spin_operator(spec.system, SIGNAL_COMPONENT[spec.protocol])
    mean = dicke.expectation(echoed, op)
    var = dicke.variance(echoed, op)
    if var <= 1e-24:
        raise DegenerateStateError("echoed state has no noise in the readout quadrature")
    return mean / math.sqrt(var)


@dataclass(frozen=True)
class SqueezingValue:
    linear: float
    db: float


def squeezing_parameter(state: DickeState) -> SqueezingValue:
    """xi_R^2 = N Var(J_x) / <J_z>^2, in linear and dB form.

    The convention matches a mean spin along J_z with the phase generated
    by J_y, so the noise quadrature is J_x as written.
    """
    mz = dicke.expectation(state, dicke.build_spin_operator(state.system, "jz"))
    if abs(mz) < 1e-12:
        raise DegenerateStateError("state is not polarized along J_z; xi_R^2 undefined")
    var_x = dicke.variance(state, dicke.build_spin_operator(state.system, "jx"))
    linear = state.system.n_atoms * var_x / mz**2
    return SqueezingValue(linear=linear, db=10.0 * math.log10(linear))


def _min_quadrature_variance(state: DickeState) -> float:
    """Minimum of Var(cos(a) J_x + sin(a) J_y) over the quadrature angle a."""
    m = dicke.spin_moments(state)
    vxx, vyy, vxy = m["cxx"], m["cyy"], m["cxy"]
    half_sum = 0.5 * (vxx + vyy)
    half_diff = 0.5 * (vxx - vyy)
    return max(half_sum - math.hypot(half_diff, vxy), 0.0)


def _squeezing_db_at(system: SpinSystem, kind: str, t_chi: float) -> float:
    state = dicke.evolve(dicke.pole_state(system), dicke.build_twisting_hamiltonian(system, kind), t_chi)
    mz = dicke.expectation(state, dicke.build_spin_operator(system, "jz"))
    if abs(mz) < 1e-12:
        return math.inf
    if kind == "oat":
        # the oat squeezing axis rotates with time; calibrate on the best quadrature
        var = _min_quadrature_variance(state)
    else:
        var = dicke.variance(state, dicke.build_spin_operator(system, "jx"))
    if var <= 0.0:
        return -math.inf
    return 10.0 * math.log10(system.n_atoms * var / mz**2)


def calibrate_twisting(
    system: SpinSystem,
    kind: str,
    target_db: float,
    tol_db: float = 0.01,
) -> float:
    """Smallest t_chi > 0 with squeezing equal to target_db (bisection).

    Scans the initial squeezing branch first; an unreachable target raises
    CalibrationError carrying the achievable minimum.
    """
    if target_db == 0.0:
        return 0.0
    if target_db > 0.0:
        raise CalibrationError(f"target must be <= 0 dB, got {target_db}")
    n = system.n_atoms
    # generous first-window upper bounds; extended if the minimum sits beyond
    t_max = math.log(2.0 * math.pi * n) / n if kind == "tact" else 2.0 * n ** (-2.0 / 3.0)
    for _ in range(6):
        grid = np.linspace(0.0, t_max, 400)
        values = np.array([_squeezing_db_at(system, kind, t) for t in grid])
        i_min = int(np.argmin(values))
        if i_min < len(grid) - 1:
            break
        t_max *= 2.0
    achievable = float(values[i_min])
    if target_db < achievable:
        raise CalibrationError(
            f"{target_db} dB unreachable for N={n} {kind}; minimum on the initial "
            f"branch is {achievable:.2f} dB",
            achievable_db=achievable,
        )
    lo, hi = 0.0, float(grid[i_min])
    f_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = _squeezing_db_at(system, kind, mid)
        if abs(f_mid - target_db) < tol_db:
            return mid
        if f_mid > target_db:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"bisection failed to reach {target_db} dB within {tol_db} dB")


def initial_branch_squeezing_scan(
    system: SpinSystem, kind: str, n_points: int = 120
) -> tuple[np.ndarray, np.ndarray]:
    """(t_chi grid, xi_R^2 dB) over the initial squeezing branch, for tests."""
    n = system.n_atoms
    t_max = math.log(2.0 * math.pi * n) / n if kind == "tact" else 2.0 * n ** (-2.0 / 3.0)
    grid = np.linspace(0.0, t_max, n_points)
    values = np.array([_squeezing_db_at(system, kind, t) for t in grid])
    i_min = int(np.argmin(values))
    return grid[: i_min + 1], values[: i_min + 1]


def _overlap_row(state: DickeState, polar: float, n_azimuth: int) -> np.ndarray:
    """<CSS(polar, phi_m)|psi> for all phi_m = 2 pi m / n_azimuth at once.

    The overlap is sum_k c_k exp(+i k phi); on a uniform azimuth grid the k
    index can be folded mod n_azimuth, turning each polar row into one FFT.
    """
    profile = dicke.coherent_amplitudes(state.system.n_atoms, polar)
    coeff = profile * state.amplitudes
    folded = np.zeros(n_azimuth, dtype=complex)
    np.add.at(folded, np.arange(coeff.size) % n_azimuth, coeff)
    return n_azimuth * np.fft.ifft(folded)


def husimi(state: DickeState, grid: tuple[int, int] = (90, 180)) -> np.ndarray:
    """Q(polar, azimuth) = |<CSS|psi>|^2 on a regular spherical grid.

    Rows run over polar angles linspace(0, pi, n_polar); columns over
    azimuths linspace(0, 2 pi, n_azimuth, endpoint=False).
    """
    n_polar, n_azimuth = grid
    if n_polar < 2 or n_azimuth < 2:
        raise ValueError("grid sizes must be >= 2")
    polars = np.linspace(0.0, math.pi, n_polar)
    out = np.empty((n_polar, n_azimuth))
    for i, polar in enumerate(polars):
        out[i] = np.abs(_overlap_row(state, polar, n_azimuth)) ** 2
    return out


def _husimi_point(state: DickeState, polar: float, azimuth: float) -> float:
    css = dicke.coherent_state(state.system, polar, azimuth)
    return state.fidelity(css)


def css_fidelity(state: DickeState) -> tuple[float, tuple[float, float]]:
    """Maximum CSS overlap over the sphere and the maximizing direction.

    Coarse 90 x 180 grid search followed by local simplex refinement down
    to 1e-6 in the angles.
    """
    q = husimi(state, (90, 180))
    i, m = np.unravel_index(int(np.argmax(q)), q.shape)
    polar0 = math.pi * i / 89.0
    azimuth0 = 2.0 * math.pi * m / 180.0

    def neg_q(x):
        return -_husimi_point(state, x[0], x[1])

    res = scipy.optimize.minimize(
        neg_q,
        x0=np.array([polar0, azimuth0]),
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-14, "maxiter": 400},
    )
    polar = float(res.x[0]) % (2.0 * math.pi)
    azimuth = float(res.x[1]) % (2.0 * math.pi)
    if polar > math.pi:  # fold back onto the sphere
        polar = 2.0 * math.pi - polar
        azimuth = (azimuth + math.pi) % (2.0 * math.pi)
    best = max(-float(res.fun), float(q[i, m]))
    return best, (polar, azimuth)


def optimal_theta_seed(n_atoms: int) -> float:
    """Analytic seed ln(2 pi N) / (2 N) for the sensitivity-optimal twisting."""
    return math.log(2.0 * math.pi * n_atoms) / (2.0 * n_atoms)


def with_theta(spec: EchoSpec, theta: float) -> EchoSpec:
    return replace(spec, theta=theta)
