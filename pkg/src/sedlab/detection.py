"""Photodetector model: low-light linearization and amplitude-proportional signal.

A detector facing a source of amplification beta sees total amplitude
E = beta * E0 sitting on the stochastic baseline E0.  Near darkness
(beta ~ 1) any smooth response f becomes linear in (beta - 1), and the
photocell signal E^2 - E0^2 = E0^2 (beta^2 - 1) ~ 2 E0^2 (beta - 1) is
proportional to the amplitude excess, not to the intensity.

Response curves are polynomials (exact derivatives, no numerical
differentiation enters any contract).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ValidationError


class InvalidAmplitude(ValidationError):
    """Amplitude factor outside [-1, 1]."""


class Regime(str, enum.Enum):
    """Detector operating regime: amplitude-linear (low light) or intensity."""

    AMPLITUDE = "amplitude"
    INTENSITY = "intensity"


@dataclass(frozen=True)
class ResponseCurve:
    """Differentiable scalar response f(E) as ascending polynomial coefficients."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) == 0:
            raise ValidationError("response curve needs at least a constant coefficient")
        if not all(np.isfinite(c) for c in coeffs):
            raise ValidationError("response coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, e: float) -> float:
        return float(Polynomial(self.coefficients)(e))

    def derivative(self, e: float) -> float:
        return float(Polynomial(self.coefficients).deriv()(e))


@dataclass(frozen=True)
class Photodetector:
    """A cell with stochastic baseline E0, operating regime, and gain."""

    baseline_e0: float
    regime: Regime = Regime.AMPLITUDE
    gain: float = 1.0

    def __post_init__(self):
        if not (self.baseline_e0 > 0 and np.isfinite(self.baseline_e0)):
            raise ValidationError("baseline_e0 must be positive")
        if not (self.gain > 0 and np.isfinite(self.gain)):
            raise ValidationError("gain must be positive")
        object.__setattr__(self, "regime", Regime(self.regime))

    def signal(self, beta: float, low_light_approx: bool = False) -> float:
        return photocell_signal(self.baseline_e0, beta, low_light_approx, gain=self.gain)

    def response(self, amplitude_factor: float) -> float:
        return detection_response(amplitude_factor, self.regime, gain=self.gain)


def linearized_response(f: ResponseCurve, e0: float, beta: float,
                        scale_derivative: bool = True) -> tuple[float, float, float]:
    """First-order expansion of f(E0*beta) around beta = 1.

    Returns (approx, exact, abs_error) with exact = f(E0*beta).  The default
    expansion follows the chain rule in beta:

        approx = f(E0) + (beta - 1) * E0 * f'(E0).

    With ``scale_derivative=False`` the E0 factor on the derivative term is
    dropped, i.e. approx = f(E0) + (beta - 1) * f'(E0); that variant is only
    consistent for responses whose argument is already scaled by E0, and is
    kept for side-by-side comparison.
    """
    if not (e0 > 0 and np.isfinite(e0)):
        raise ValidationError("e0 must be positive")
    slope = f.derivative(e0) * (e0 if scale_derivative else 1.0)
    approx = f(e0) + (beta - 1.0) * slope
    exact = f(e0 * beta)
    return approx, exact, abs(approx - exact)


def photocell_signal(e0: float, beta: float, low_light_approx: bool = False,
                     gain: float = 1.0) -> float:
    """Available energy above the restored baseline: gain * (E^2 - E0^2).

    Exact branch: gain * E0^2 * (beta^2 - 1).  Low-light branch:
    gain * 2 * E0^2 * (beta - 1), linear in the amplitude.  Negative values
    (beta < 1, absorption below baseline) are allowed.
    """
    if not (e0 > 0 and np.isfinite(e0)):
        raise ValidationError("e0 must be positive")
    if not (beta >= 0 and np.isfinite(beta)):
        raise ValidationError("beta must be >= 0")
    if low_light_approx:
        return gain * 2.0 * e0 * e0 * (beta - 1.0)
    return gain * e0 * e0 * (beta * beta - 1.0)


def photocell_signal_error_bound(e0: float, beta: float, gain: float = 1.0) -> float:
    """Exact gap between the two branches: gain * E0^2 * (beta - 1)^2."""
    return gain * e0 * e0 * (beta - 1.0) ** 2


def detection_response(amplitude_factor: float, regime: Regime | str,
                       gain: float = 1.0) -> float:
    """Detector output for a normalized amplitude factor in [-1, 1].

    Amplitude regime responds to |factor|, intensity regime to factor^2,
    both scaled by gain.
    """
    if not (np.isfinite(amplitude_factor) and abs(amplitude_factor) <= 1.0):
        raise InvalidAmplitude(f"amplitude factor {amplitude_factor!r} outside [-1, 1]")
    if Regime(regime) is Regime.AMPLITUDE:
        return gain * abs(amplitude_factor)
    return gain * amplitude_factor * amplitude_factor
