"""Frequency grids, optical-depth profiles and linear-response conversions.

All frequencies in this package are detunings (Hz) from a single laser
reference; absolute optical frequencies never enter any computation.
Optical depth follows the Beer-Lambert convention: intensity transmission
through the bare medium is exp(-od).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import hilbert

from .errors import GridMismatchError, InvalidSpectrumError, ResolutionError

__all__ = [
    "FrequencyGrid",
    "SpectralProfile",
    "ComplexResponse",
    "OdExtraction",
    "beer_lambert_transmission",
    "extract_od",
    "kramers_kronig_phase",
    "load_spectrum_csv",
    "save_spectrum_csv",
]


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of frequency detunings.

    Parameters
    ----------
    center_offset : float
        Detuning of the grid center from the laser reference (Hz).
    span : float
        Full width covered by the grid (Hz).
    n_points : int
        Number of samples, >= 2. Spacing is span/(n_points - 1).
    """

    center_offset: float
    span: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not (self.span > 0) or not np.isfinite(self.span):
            raise ValueError(f"span must be positive and finite, got {self.span}")
        if not np.isfinite(self.center_offset):
            raise ValueError("center_offset must be finite")

    @property
    def spacing(self) -> float:
        return self.span / (self.n_points - 1)

    @property
    def values(self) -> np.ndarray:
        """Grid detunings in Hz, strictly increasing."""
        return self.center_offset + np.linspace(
            -self.span / 2, self.span / 2, self.n_points
        )


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Optical depth d(nu) >= 0 sampled on a frequency grid."""

    grid: FrequencyGrid
    od: np.ndarray

    def __post_init__(self):
        od = _frozen_array(self.od, float)
        if od.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"od has {od.shape[0] if od.ndim == 1 else od.shape} samples "
                f"for a {self.grid.n_points}-point grid"
            )
        if not np.all(np.isfinite(od)):
            raise InvalidSpectrumError("optical depth contains non-finite values")
        if np.any(od < 0):
            raise InvalidSpectrumError("optical depth contains negative values")
        object.__setattr__(self, "od", od)


@dataclass(frozen=True, eq=False)
class ComplexResponse:
    """Complex amplitude transfer of a passive medium, |t(nu)| <= 1."""

    grid: FrequencyGrid
    amplitude_transfer: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.amplitude_transfer, complex)
        if t.shape != (self.grid.n_points,):
            raise GridMismatchError("amplitude_transfer length does not match grid")
        if not np.all(np.isfinite(t)):
            raise InvalidSpectrumError("amplitude_transfer contains non-finite values")
        if np.any(np.abs(t) > 1 + 1e-12):
            raise InvalidSpectrumError("passive medium requires |transfer| <= 1")
        object.__setattr__(self, "amplitude_transfer", t)


class OdExtraction(NamedTuple):
    profile: SpectralProfile
    clamped_points: int


def beer_lambert_transmission(profile: SpectralProfile, loss_factor: float = 1.0) -> np.ndarray:
    """Per-point intensity transmission loss_factor * exp(-od).

    ``loss_factor`` lumps every frequency-independent loss (splices,
    connectors, mode mismatch) into a single constant in (0, 1].
    """
    if not (0 < loss_factor <= 1):
        raise ValueError(f"loss_factor must be in (0, 1], got {loss_factor}")
    od = profile.od
    if not np.all(np.isfinite(od)):
        raise InvalidSpectrumError("optical depth contains non-finite values")
    return loss_factor * np.exp(-od)


def extract_od(i_in: np.ndarray, i_out: np.ndarray, loss_factor: float = 1.0,
               grid: FrequencyGrid | None = None) -> OdExtraction:
    """Invert Beer-Lambert: od = -ln(i_out / (loss_factor * i_in)).

    Small negative ODs from measurement noise are clamped to zero; the
    number of clamped points is reported instead of hiding the clamp.

    Returns
    -------
    OdExtraction
        ``profile`` (on ``grid``; a unit grid is fabricated when omitted)
        and ``clamped_points``.
    """
    i_in = np.asarray(i_in, float)
    i_out = np.asarray(i_out, float)
    if i_in.shape != i_out.shape:
        raise GridMismatchError("input and output spectra have different lengths")
    if not (0 < loss_factor <= 1):
        raise ValueError(f"loss_factor must be in (0, 1], got {loss_factor}")
    if np.any(i_in <= 0) or not np.all(np.isfinite(i_in)):
        raise InvalidSpectrumError("reference spectrum must be positive and finite")
    if np.any(i_out <= 0) or not np.all(np.isfinite(i_out)):
        raise InvalidSpectrumError("transmitted spectrum must be positive and finite")

    od = -np.log(i_out / (loss_factor * i_in))
    clamped = int(np.count_nonzero(od < 0))
    od = np.maximum(od, 0.0)
    if grid is None:
        grid = FrequencyGrid(0.0, float(len(od) - 1) if len(od) > 1 else 1.0, len(od))
    return OdExtraction(SpectralProfile(grid, od), clamped)


def _narrowest_feature_points(od: np.ndarray) -> int | None:
    """Length in samples of the narrowest spectral feature, or None if flat.

    A feature is a maximal run of points on one side of the mid level
    between min and max OD; runs touching the array ends are background.
    """
    lo, hi = float(np.min(od)), float(np.max(od))
    if hi - lo <= 1e-12 * max(1.0, hi):
        return None
    above = od > (lo + hi) / 2
    # run-length encode
    change = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [len(od)]))
    widths = [e - s for s, e in zip(starts, ends) if s != 0 and e != len(od)]
    if not widths:
        return None
    return int(min(widths))


def kramers_kronig_phase(profile: SpectralProfile) -> ComplexResponse:
    """Complex transfer exp(-d/2 + i*phi) with phi from a numerical Hilbert transform.

    The phase is computed as the Hilbert transform of -d(nu)/2, which ties
    dispersion to absorption for a causal medium; echoes produced by
    propagation through the result arrive at positive delay. The FFT-based
    transform uses reflective edge padding so combs are not biased by
    windowing, and the padded length is at least 4x the profile length.

    Raises
    ------
    ResolutionError
        If the narrowest spectral feature spans fewer than 4 grid points.
    """
    od = profile.od
    n = len(od)
    narrow = _narrowest_feature_points(od)
    if narrow is not None and narrow < 4:
        raise ResolutionError(
            f"narrowest feature spans {narrow} grid points; >= 4 required"
        )

    half = -0.5 * od
    # reflect once on each side (~3x), then edge-pad to a power of two >= 4x
    pad = n - 1
    ext = np.pad(half, pad, mode="reflect")
    total = 1 << int(np.ceil(np.log2(max(4 * n, len(ext)))))
    extra = total - len(ext)
    left = extra // 2
    ext = np.pad(ext, (left, extra - left), mode="edge")

    phi = np.imag(hilbert(ext))[pad + left : pad + left + n]
    transfer = np.exp(half) * np.exp(1j * phi)
    return ComplexResponse(profile.grid, transfer)


def load_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column spectrum CSV: frequency_hz_detuning, intensity.

    A header row is required; values use '.' as decimal separator.
    """
    freqs, vals = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise InvalidSpectrumError(f"{path}: missing two-column header row")
        for row in reader:
            if not row:
                continue
            try:
                freqs.append(float(row[0]))
                vals.append(float(row[1]))
            except ValueError as exc:
                raise InvalidSpectrumError(f"{path}: bad row {row!r}") from exc
    return np.asarray(freqs), np.asarray(vals)


def save_spectrum_csv(path, freqs_hz: np.ndarray, intensity: np.ndarray,
                      value_name: str = "intensity") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_hz_detuning", value_name])
        for f, v in zip(freqs_hz, intensity):
            writer.writerow([repr(float(f)), repr(float(v))])
