"""Electromagnetic mode bookkeeping and the stochastic field baseline.

A mode is represented by its tabulated spectral energy density w(nu) on a
strictly increasing frequency grid.  Normalization fixes the quadrature of
w(nu)/nu over the grid to the Planck constant; all quadratures in this module
are trapezoid rules on the supplied grid (order 2, so refinement tests have a
predictable convergence rate).

Field amplitudes are kept in normalized units: the stochastic baseline E0 is
defined so that its ensemble mean-square energy per mode equals h*nu/2, and a
source is described by the amplification factor beta with total amplitude
E = beta * E0 (beta = 1 is darkness).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .constants import BOLTZMANN_CONSTANT, PLANCK_CONSTANT
from .errors import ValidationError
from .seeding import as_generator

NORMALIZATION_RTOL = 1e-9

# Largest exponent fed to expm1 before the thermal occupation underflows
# below any representable energy; beyond it the thermal term is exactly 0.
_EXP_CUTOFF = 700.0


class InvalidGrid(ValidationError):
    """Frequency grid is unusable (non-increasing, nonpositive, too short)."""


class NotNormalizable(ValidationError):
    """Density is empty or identically zero; no scale can fix the integral."""


class GridMismatch(ValidationError):
    """Two modes live on different grids and resampling was not allowed."""


@dataclass(frozen=True)
class SpectralMode:
    """Tabulated spectral energy density w(nu), optionally with phases.

    Parameters
    ----------
    frequency_hz : array, strictly increasing frequencies.
    density_j_per_hz : array, same length, w(nu) >= 0.
    normalized : claims integral of w/nu over the grid equals h (checked).
    phase_rad : optional per-frequency phase of the mode amplitude; None
        means all-zero phases.
    """

    frequency_hz: np.ndarray
    density_j_per_hz: np.ndarray
    normalized: bool = False
    phase_rad: np.ndarray | None = None

    def __post_init__(self):
        freq = np.asarray(self.frequency_hz, dtype=float)
        dens = np.asarray(self.density_j_per_hz, dtype=float)
        object.__setattr__(self, "frequency_hz", freq)
        object.__setattr__(self, "density_j_per_hz", dens)
        if freq.ndim != 1 or dens.ndim != 1 or freq.size != dens.size:
            raise InvalidGrid("frequency and density must be 1-D arrays of equal length")
        if freq.size == 0:
            raise InvalidGrid("empty frequency grid")
        if not np.all(np.isfinite(freq)) or not np.all(np.isfinite(dens)):
            raise InvalidGrid("non-finite grid or density values")
        if freq.size > 1 and not np.all(np.diff(freq) > 0):
            raise InvalidGrid("frequency grid must be strictly increasing")
        if np.any(dens < 0):
            raise ValidationError("spectral density must be nonnegative")
        if self.phase_rad is not None:
            phase = np.asarray(self.phase_rad, dtype=float)
            if phase.shape != freq.shape:
                raise ValidationError("phase array must match the frequency grid")
            object.__setattr__(self, "phase_rad", phase)
        if self.normalized:
            integral = _per_frequency_quadrature(self)
            if not np.isclose(integral, PLANCK_CONSTANT, rtol=NORMALIZATION_RTOL, atol=0.0):
                raise NotNormalizable(
                    f"mode flagged normalized but integral w/nu = {integral!r}, "
                    f"expected {PLANCK_CONSTANT!r}"
                )

    @property
    def phases(self) -> np.ndarray:
        return self.phase_rad if self.phase_rad is not None else np.zeros_like(self.frequency_hz)


@dataclass(frozen=True)
class ThermalState:
    """Blackbody environment at a fixed temperature."""

    temperature_k: float

    def __post_init__(self):
        if not np.isfinite(self.temperature_k) or self.temperature_k < 0:
            raise ValidationError("temperature must be finite and >= 0")


@dataclass(frozen=True)
class FieldAmplitude:
    """One field sample decomposed as E = beta * E0.

    E0 is the stochastic baseline magnitude in normalized units (its ensemble
    mean-square equals h*nu/2); beta is the source amplification, with
    beta = 1 the pure stochastic field.
    """

    baseline_e0: float
    amplification_beta: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not (self.baseline_e0 > 0 and np.isfinite(self.baseline_e0)):
            raise ValidationError("baseline_e0 must be positive and finite")
        if not (self.amplification_beta >= 0 and np.isfinite(self.amplification_beta)):
            raise ValidationError("amplification_beta must be >= 0 and finite")
        if not (0.0 <= self.phase < 2 * np.pi):
            raise ValidationError("phase must lie in [0, 2*pi)")

    @property
    def total(self) -> float:
        """Total amplitude magnitude E = beta * E0."""
        return self.amplification_beta * self.baseline_e0

    @property
    def energy(self) -> float:
        """Energy of the sample in normalized units (amplitude squared)."""
        return self.total**2


def _per_frequency_quadrature(mode: SpectralMode) -> float:
    if mode.frequency_hz.size < 2:
        raise InvalidGrid("normalization quadrature needs at least 2 grid points")
    if np.any(mode.frequency_hz <= 0):
        raise InvalidGrid("normalization requires strictly positive frequencies")
    return float(np.trapezoid(mode.density_j_per_hz / mode.frequency_hz, mode.frequency_hz))


def normalize_mode(mode: SpectralMode) -> tuple[SpectralMode, float]:
    """Scale the density so the trapezoid integral of w(nu)/nu equals h.

    Returns the normalized mode and the applied scale factor.  Raises
    ``NotNormalizable`` for an identically zero density and ``InvalidGrid``
    for grids the quadrature cannot use.
    """
    integral = _per_frequency_quadrature(mode)
    if integral <= 0.0:
        raise NotNormalizable("density integrates to zero; cannot scale to h")
    scale = PLANCK_CONSTANT / integral
    normalized = replace(mode, density_j_per_hz=mode.density_j_per_hz * scale, normalized=True)
    return normalized, scale


def mode_energy(mode: SpectralMode) -> float:
    """Total energy: trapezoid integral of w(nu) over the grid, in joules."""
    if mode.frequency_hz.size == 1:
        return 0.0
    return float(np.trapezoid(mode.density_j_per_hz, mode.frequency_hz))


def _complex_amplitude(mode: SpectralMode) -> np.ndarray:
    return np.sqrt(mode.density_j_per_hz) * np.exp(1j * mode.phases)


def superpose(a: SpectralMode, b: SpectralMode, resample: bool = False) -> SpectralMode:
    """Coherent sum of two modes.

    On a shared grid the complex amplitudes sqrt(w)*exp(i*phase) add
    pointwise.  For distinct grids, ``resample=True`` linearly interpolates
    both complex amplitudes onto the union grid (zero outside each mode's own
    span); otherwise ``GridMismatch`` is raised.
    """
    if np.array_equal(a.frequency_hz, b.frequency_hz):
        grid = a.frequency_hz
        amp = _complex_amplitude(a) + _complex_amplitude(b)
    elif not resample:
        raise GridMismatch("modes live on different frequency grids (resample=False)")
    else:
        grid = np.union1d(a.frequency_hz, b.frequency_hz)
        amp = _resampled_amplitude(a, grid) + _resampled_amplitude(b, grid)
    density = np.abs(amp) ** 2
    phase = np.mod(np.angle(amp), 2 * np.pi)
    return SpectralMode(grid, density, normalized=False, phase_rad=phase)


def _resampled_amplitude(mode: SpectralMode, grid: np.ndarray) -> np.ndarray:
    amp = _complex_amplitude(mode)
    re = np.interp(grid, mode.frequency_hz, amp.real, left=0.0, right=0.0)
    im = np.interp(grid, mode.frequency_hz, amp.imag, left=0.0, right=0.0)
    return re + 1j * im


def is_orthogonal(a: SpectralMode, b: SpectralMode, tol: float = 1e-9,
                  resample: bool = False) -> bool:
    """True iff the energy of the superposition is additive within tol.

    The criterion is |E(a+b) - E(a) - E(b)| <= tol * (E(a) + E(b)), i.e. the
    interference cross term is negligible relative to the total energy.
    """
    e_a = mode_energy(a)
    e_b = mode_energy(b)
    e_ab = mode_energy(superpose(a, b, resample=resample))
    return abs(e_ab - e_a - e_b) <= tol * (e_a + e_b)


def planck_mean_energy(nu_hz: float, state: ThermalState) -> float:
    """Thermal mean energy of a mode: h*nu / (exp(h*nu/kT) - 1).

    T = 0 returns 0 (documented limit); exponents above 700 underflow to 0.
    """
    if not (nu_hz > 0 and np.isfinite(nu_hz)):
        raise ValidationError("frequency must be positive and finite")
    if state.temperature_k == 0.0:
        return 0.0
    x = PLANCK_CONSTANT * nu_hz / (BOLTZMANN_CONSTANT * state.temperature_k)
    if x > _EXP_CUTOFF:
        return 0.0
    return PLANCK_CONSTANT * nu_hz / np.expm1(x)


def planck_mean_energy_with_zero_point(nu_hz: float, state: ThermalState) -> float:
    """Mean energy including the stochastic term: thermal part + h*nu/2."""
    if not (nu_hz > 0 and np.isfinite(nu_hz)):
        raise ValidationError("frequency must be positive and finite")
    return planck_mean_energy(nu_hz, state) + 0.5 * PLANCK_CONSTANT * nu_hz


def sample_stochastic_amplitude(source: int | np.random.Generator,
                                nu_hz: float) -> FieldAmplitude:
    """Draw one zero-point baseline sample for a mode at ``nu_hz``.

    The amplitude is circular-Gaussian: two independent normal quadratures,
    scaled so the ensemble mean energy |E0|^2 equals h*nu/2, with the phase
    uniform on [0, 2*pi) and beta fixed at 1.
    """
    magnitude, phase = sample_stochastic_ensemble(source, nu_hz, 1)
    return FieldAmplitude(float(magnitude[0]), 1.0, float(phase[0]))


def sample_stochastic_ensemble(source: int | np.random.Generator, nu_hz: float,
                               n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized zero-point sampling: (magnitudes, phases) arrays of length n."""
    if not (nu_hz > 0 and np.isfinite(nu_hz)):
        raise ValidationError("frequency must be positive and finite")
    if n < 1:
        raise ValidationError("sample count must be >= 1")
    rng = as_generator(source)
    # Per-quadrature variance h*nu/4 so that E[x^2 + y^2] = h*nu/2.
    sigma = np.sqrt(PLANCK_CONSTANT * nu_hz / 4.0)
    x = rng.normal(0.0, sigma, size=n)
    y = rng.normal(0.0, sigma, size=n)
    magnitude = np.hypot(x, y)
    phase = np.mod(np.arctan2(y, x), 2 * np.pi)
    return magnitude, phase


def mode_to_csv(mode: SpectralMode, path: str | Path) -> None:
    """Write the mode as two-column CSV (frequency_hz, density_j_per_hz)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frequency_hz", "density_j_per_hz"])
        for nu, w in zip(mode.frequency_hz, mode.density_j_per_hz):
            writer.writerow([repr(float(nu)), repr(float(w))])


def mode_from_csv(path: str | Path) -> SpectralMode:
    """Read a two-column (frequency_hz, density_j_per_hz) CSV with header."""
    freqs: list[float] = []
    dens: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["frequency_hz", "density_j_per_hz"]:
            raise ValidationError(f"{path}: expected header frequency_hz,density_j_per_hz")
        for row in reader:
            if not row:
                continue
            freqs.append(float(row[0]))
            dens.append(float(row[1]))
    return SpectralMode(np.asarray(freqs), np.asarray(dens))
