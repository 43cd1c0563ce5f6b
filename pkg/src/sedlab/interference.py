"""Two-source coincidence interference and fringe visibility.

Two small incoherent monochromatic sources with fast-drifting relative phase
phi illuminate two cells; cell j sees the amplitude factor
cos(pi*delta_j/lambda + phi/2) set by its optical path difference delta_j.
The coincidence signal is the product of the per-cell responses, averaged
over phi uniform on [0, 2*pi).

In the amplitude (low-light) regime the signed product is averaged, which
makes the mean vanish at delta_1 - delta_2 = lambda/2; visibility is then
taken over magnitudes, giving 1.  In the intensity regime the squared
responses average to a fringe of visibility 1/2.

Closed forms (exact phi integrals, Delta = delta_1 - delta_2):

    amplitude:  (1/2) cos(pi * Delta / lambda)
    intensity:  1/4 + (1/8) cos(2*pi * Delta / lambda)

Monte-Carlo estimates draw phi per trial.  Trials are split into fixed-size
blocks; block b of scan point i draws from substream (seed, i, b), and block
partials are combined with exact fsum in block order, so outputs are
bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .detection import Regime, detection_response
from .errors import ComputationError, ValidationError
from .seeding import substream

TRIAL_BLOCK = 1 << 16


class UndefinedVisibility(ComputationError):
    """All scan values are zero; (max-min)/(max+min) is 0/0."""


@dataclass(frozen=True)
class TwoSourceSetup:
    """Geometry and sampling budget of one coincidence experiment."""

    wavelength_m: float
    delta1_m: float = 0.0
    delta2_m: float = 0.0
    regime: Regime = Regime.AMPLITUDE
    trials: int = 100_000

    def __post_init__(self):
        if not (self.wavelength_m > 0 and np.isfinite(self.wavelength_m)):
            raise ValidationError("wavelength must be positive")
        if not (np.isfinite(self.delta1_m) and np.isfinite(self.delta2_m)):
            raise ValidationError("path differences must be finite")
        if int(self.trials) < 1:
            raise ValidationError("trials must be >= 1")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "regime", Regime(self.regime))


@dataclass(frozen=True)
class ScanTable:
    """Fringe scan (Delta, mean coincidence), with the scan's wavelength kept
    so visibility can check period coverage."""

    delta_m: np.ndarray
    mean_coincidence: np.ndarray
    wavelength_m: float

    def __post_init__(self):
        d = np.asarray(self.delta_m, dtype=float)
        v = np.asarray(self.mean_coincidence, dtype=float)
        if d.ndim != 1 or d.shape != v.shape or d.size == 0:
            raise ValidationError("scan table needs matching nonempty 1-D columns")
        object.__setattr__(self, "delta_m", d)
        object.__setattr__(self, "mean_coincidence", v)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["delta_m", "mean_coincidence"])
            for d, v in zip(self.delta_m, self.mean_coincidence):
                writer.writerow([repr(float(d)), repr(float(v))])


def _signed_product(setup: TwoSourceSetup, phi: np.ndarray) -> np.ndarray:
    c1 = np.cos(np.pi * setup.delta1_m / setup.wavelength_m + phi / 2.0)
    c2 = np.cos(np.pi * setup.delta2_m / setup.wavelength_m + phi / 2.0)
    if setup.regime is Regime.AMPLITUDE:
        # Signed product: magnitudes through the detector response, with the
        # product sign kept so the phi average can cancel.
        return np.sign(c1 * c2) * np.abs(c1) * np.abs(c2)
    return c1 * c1 * c2 * c2


def coincidence_rate(setup: TwoSourceSetup, phi: float) -> float:
    """Instantaneous coincidence signal at relative source phase phi.

    Both cosine amplitude factors pass through the per-regime detector
    response; in the amplitude regime the sign of the product is retained so
    that phi averaging is meaningful.
    """
    c1 = math.cos(math.pi * setup.delta1_m / setup.wavelength_m + phi / 2.0)
    c2 = math.cos(math.pi * setup.delta2_m / setup.wavelength_m + phi / 2.0)
    r1 = detection_response(c1, setup.regime)
    r2 = detection_response(c2, setup.regime)
    if setup.regime is Regime.AMPLITUDE:
        sign = math.copysign(1.0, c1) * math.copysign(1.0, c2)
        return sign * r1 * r2
    return r1 * r2


def mean_coincidence(setup: TwoSourceSetup, method: str = "closed_form",
                     seed: int | tuple[int, ...] | None = None) -> float:
    """Coincidence signal averaged over phi uniform on [0, 2*pi).

    ``method="closed_form"`` evaluates the exact integral; ``"monte_carlo"``
    draws ``setup.trials`` phases from the stream labelled by ``seed`` (an
    int or tuple of ints).
    """
    if method == "closed_form":
        delta = setup.delta1_m - setup.delta2_m
        if setup.regime is Regime.AMPLITUDE:
            return 0.5 * math.cos(math.pi * delta / setup.wavelength_m)
        return 0.25 + 0.125 * math.cos(2.0 * math.pi * delta / setup.wavelength_m)
    if method != "monte_carlo":
        raise ValidationError(f"unknown method {method!r}")
    if seed is None:
        raise ValidationError("monte_carlo method requires a seed")
    path = seed if isinstance(seed, tuple) else (seed,)
    partials = [
        _block_sum(setup, path, block, n)
        for block, n in enumerate(_block_sizes(setup.trials))
    ]
    return math.fsum(partials) / setup.trials


def _block_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, TRIAL_BLOCK)
    return [TRIAL_BLOCK] * full + ([rest] if rest else [])


def _block_sum(setup: TwoSourceSetup, path: tuple[int, ...], block: int, n: int) -> float:
    rng = substream(*path, block)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return float(np.sum(_signed_product(setup, phi)))


def scan_fringes(setup: TwoSourceSetup, delta_range, method: str = "closed_form",
                 seed: int | None = None, workers: int = 1) -> ScanTable:
    """Mean coincidence versus Delta = delta_1 - delta_2, with delta_2 = 0.

    Scan point i draws from substream (seed, i), so the table is independent
    of the worker count.
    """
    deltas = np.asarray(list(delta_range), dtype=float)
    if deltas.size == 0:
        raise ValidationError("delta range must be nonempty")

    def point(i: int) -> float:
        point_setup = replace(setup, delta1_m=float(deltas[i]), delta2_m=0.0)
        point_seed = None if seed is None else (seed, i)
        return mean_coincidence(point_setup, method=method, seed=point_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(point, range(deltas.size)))
    else:
        values = [point(i) for i in range(deltas.size)]
    return ScanTable(deltas, np.asarray(values), setup.wavelength_m)


def visibility(table: ScanTable) -> float:
    """Fringe visibility (max - min)/(max + min) over |mean coincidence|.

    Requires the scan to span at least one fringe period (lambda under the
    magnitude convention, for either regime).
    """
    span = float(table.delta_m.max() - table.delta_m.min())
    if span < table.wavelength_m * (1.0 - 1e-9):
        raise ValidationError(
            f"scan span {span!r} m shorter than one fringe period "
            f"{table.wavelength_m!r} m"
        )
    magnitudes = np.abs(table.mean_coincidence)
    vmax = float(magnitudes.max())
    vmin = float(magnitudes.min())
    if vmax == 0.0:
        raise UndefinedVisibility("all scan values are zero")
    return (vmax - vmin) / (vmax + vmin)
