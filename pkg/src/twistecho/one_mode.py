"""Closed-form one-mode (quadrature) model of the twisting echo.

Valid near the pole of the Bloch sphere: the twisting acts as quadrature
squeezing with strength gamma = t_chi * N and the phase imprint as a
displacement phi = theta * sqrt(N) / 2.  These formulas serve as oracles
for the exact two-mode engine inside their validity window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfWindowError

# cosh/sinh arguments beyond this leave the physically meaningful window
# (and head toward overflow); callers get an explicit error, never inf.
MAX_EXPONENT = 20.0


@dataclass(frozen=True)
class OneModeParams:
    """Dimensionless parameters of the quadrature model."""

    n_atoms: int
    gamma: float
    phi: float = 0.0
    echo_ratio: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")

    @classmethod
    def from_two_mode(
        cls,
        n_atoms: int,
        t_chi: float,
        theta: float = 0.0,
        echo_ratio: float = 1.0,
        sigma: float = 0.0,
    ) -> "OneModeParams":
        """Map two-mode parameters: gamma = t_chi*N, phi = theta*sqrt(N)/2."""
        return cls(
            n_atoms=n_atoms,
            gamma=t_chi * n_atoms,
            phi=theta * math.sqrt(n_atoms) / 2.0,
            echo_ratio=echo_ratio,
            sigma=sigma,
        )


def _check_window(p: OneModeParams) -> None:
    if max(abs(p.gamma), abs(p.echo_ratio * p.gamma)) > MAX_EXPONENT:
        raise OutOfWindowError(
            f"gamma={p.gamma}, r*gamma={p.echo_ratio * p.gamma}: outside the "
            f"one-mode window (|exponent| <= {MAX_EXPONENT})"
        )


def ideal_phase_variance(p: OneModeParams) -> float:
    """(Delta theta)^2 = exp(-2 gamma)/N, independent of the echo ratio."""
    _check_window(p)
    return math.exp(-2.0 * p.gamma) / p.n_atoms


def noisy_phase_variance(p: OneModeParams) -> float:
    """exp(-2 gamma)/N + 4 sigma^2 / (N^2 exp(2 r gamma))."""
    _check_window(p)
    magnification = math.exp(p.echo_ratio * p.gamma)
    return ideal_phase_variance(p) + 4.0 * p.sigma**2 / (p.n_atoms**2 * magnification**2)


def one_mode_magnification(p: OneModeParams) -> float:
    """Signal ratio after/before the echo: exp(r gamma)."""
    _check_window(p)
    return math.exp(p.echo_ratio * p.gamma)


def one_mode_snr(p: OneModeParams) -> float:
    """SNR = 2 phi exp(gamma), independent of the echo ratio."""
    _check_window(p)
    return 2.0 * p.phi * math.exp(p.gamma)


@dataclass(frozen=True)
class QuadratureMoments:
    """Expectation values of the post-echo mode b."""

    mean_bdag: float
    n_b: float
    bdag_sq: float


def appendix_moments(p: OneModeParams) -> QuadratureMoments:
    """Moments of the output state S^-1(r gamma) D(phi) S(gamma)|0>.

    With mu1 = cosh(gamma), nu1 = sinh(gamma), mu2 = cosh(r gamma),
    nu2 = sinh(r gamma):
      <b+>    = phi exp(r gamma)
      <b+ b>  = (mu1 nu2 - nu1 mu2)^2 + phi^2 (mu2 + nu2)^2
      <b+^2>  = (phi^2 - mu1 nu1)(mu2^2 + nu2^2) + (mu1^2 + nu1^2 + 2 phi^2) mu2 nu2
    and <b^2> = <b+^2>.
    """
    _check_window(p)
    g, r, phi = p.gamma, p.echo_ratio, p.phi
    mu1, nu1 = math.cosh(g), math.sinh(g)
    mu2, nu2 = math.cosh(r * g), math.sinh(r * g)
    mean_bdag = phi * math.exp(r * g)
    n_b = (mu1 * nu2 - nu1 * mu2) ** 2 + phi**2 * (mu2 + nu2) ** 2
    bdag_sq = (phi**2 - mu1 * nu1) * (mu2**2 + nu2**2) + (mu1**2 + nu1**2 + 2.0 * phi**2) * mu2 * nu2
    return QuadratureMoments(mean_bdag=mean_bdag, n_b=n_b, bdag_sq=bdag_sq)


def phase_variance_from_moments(p: OneModeParams) -> float:
    """Assemble (Delta theta)^2 from the raw output moments.

    Long form: [<b+^2 + b^2 + 2 b+b + 1> - <b+ + b>^2] / N exp(2 r gamma);
    algebraically this collapses to exp(-2 gamma)/N for every (gamma, phi, r).
    """
    m = appendix_moments(p)
    numerator = 2.0 * m.bdag_sq + 2.0 * m.n_b + 1.0 - (2.0 * m.mean_bdag) ** 2
    denominator = p.n_atoms * math.exp(2.0 * p.echo_ratio * p.gamma)
    return numerator / denominator
