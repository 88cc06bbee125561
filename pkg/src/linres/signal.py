"""Damping, Fourier transforms, division by the drive spectrum, and peak finding.

Transform convention: ``A(w) = sum_t A(t) e^{+i w t} dt`` on a zero-padded
FFT grid, returned with ascending frequencies.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import find_peaks, peak_widths


@dataclass(frozen=True)
class ResponseTrace:
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        if t.shape != v.shape:
            raise ValueError(f"{t.shape[0]} times but {v.shape[0]} values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return _uniform_step(self.times)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cplx = np.iscomplexobj(self.values)
        w.writerow(["t", "value"] + (["value_im"] if cplx else []))
        for t, v in zip(self.times, self.values):
            row = [repr(float(t)), repr(float(np.real(v)))]
            if cplx:
                row.append(repr(float(np.imag(v))))
            w.writerow(row)
        return buf.getvalue()


@dataclass(frozen=True)
class Spectrum:
    omegas: np.ndarray
    values: np.ndarray
    valid_mask: np.ndarray | None = None

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        mask = np.ones(om.shape, bool) if self.valid_mask is None else np.asarray(self.valid_mask, bool)
        if not (om.shape == vals.shape == mask.shape):
            raise ValueError("omegas, values and valid_mask must have equal length")
        if om.size > 2:
            _uniform_step(om)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def d_omega(self) -> float:
        return _uniform_step(self.omegas)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "re", "im", "abs2", "valid"])
        for om, v, ok in zip(self.omegas, self.values, self.valid_mask):
            if ok:
                w.writerow([repr(float(om)), repr(v.real), repr(v.imag), repr(abs(v) ** 2), 1])
            else:
                w.writerow([repr(float(om)), "", "", "", 0])
        return buf.getvalue()


def _uniform_step(grid):
    d = np.diff(grid)
    if d.size == 0:
        raise ValueError("grid needs at least two points")
    if np.abs(d - d[0]).max() > 1e-9 * max(1.0, abs(d[0])):
        raise ValueError("grid is not uniform")
    return float(d[0])


def apply_damping(trace: ResponseTrace, tau: float) -> ResponseTrace:
    if not tau > 0:
        raise ValueError("tau must be positive")
    g = np.exp(-trace.times / tau) if np.isfinite(tau) else 1.0
    return replace(trace, values=trace.values * g, metadata={**trace.metadata, "tau": tau})


def fft_grid(n_times: int, dt: float, pad: int = 4) -> np.ndarray:
    if pad < 1:
        raise ValueError("pad must be >= 1")
    n = pad * n_times
    return np.fft.fftshift(2 * np.pi * np.fft.fftfreq(n, dt))


def fourier_transform(trace: ResponseTrace, pad: int = 4) -> Spectrum:
    """Zero-padded one-sided transform. Times must start at ``t = 0``."""
    dt = trace.dt
    if abs(trace.times[0]) > 1e-12:
        raise ValueError("trace must start at t = 0")
    n = pad * trace.times.size
    x = np.zeros(n, dtype=complex)
    x[: trace.times.size] = trace.values
    vals = np.fft.fftshift(np.fft.ifft(x)) * (n * dt)
    return Spectrum(fft_grid(trace.times.size, dt, pad), vals)


def drive_spectrum(field_, omegas, tau: float | None = None) -> Spectrum:
    """``h(w + i/tau)``, the divisor that matches a response damped by ``exp(-t/tau)``."""
    w = np.asarray(omegas, dtype=float)
    z = w + (1j / tau if tau is not None and np.isfinite(tau) else 0.0)
    return Spectrum(w, field_.spectrum(z))


class NoSupportError(ValueError):
    pass


def functional_division(a_spec: Spectrum, h_spec: Spectrum, rel_threshold: float = 1e-3) -> Spectrum:
    """``chi = A / h`` where ``|h|^2 >= rel_threshold * max |h|^2``; other bins are NaN and invalid."""
    if a_spec.omegas.shape != h_spec.omegas.shape or np.abs(a_spec.omegas - h_spec.omegas).max() > 1e-9:
        raise ValueError("spectra live on different grids")
    p = np.abs(h_spec.values) ** 2
    mask = p >= rel_threshold * p.max() if p.max() > 0 else np.zeros(p.shape, bool)
    mask &= a_spec.valid_mask
    if not mask.any():
        raise NoSupportError("drive has no support on requested band")
    vals = np.full(a_spec.values.shape, np.nan + 1j * np.nan)
    vals[mask] = a_spec.values[mask] / h_spec.values[mask]
    return Spectrum(a_spec.omegas, vals, mask)


def mask_bounds(spec: Spectrum) -> list[tuple[float, float]]:
    """Contiguous valid frequency intervals (dashed-line bounds)."""
    out, start = [], None
    for om, ok in zip(spec.omegas, spec.valid_mask):
        if ok and start is None:
            start = om
        if not ok and start is not None:
            out.append((float(start), float(prev)))
            start = None
        prev = om
    if start is not None:
        out.append((float(start), float(prev)))
    return out


@dataclass(frozen=True)
class Peak:
    omega: float
    height: float
    width: float


def power_spectrum(spec: Spectrum) -> np.ndarray:
    """``|values|^2`` normalized to max 1 over valid bins; invalid bins are NaN."""
    p = np.where(spec.valid_mask, np.abs(np.nan_to_num(spec.values)) ** 2, np.nan)
    top = np.nanmax(p) if np.any(spec.valid_mask) else 0.0
    return p / top if top > 0 else p


def power_spectrum_and_peaks(spec: Spectrum, prominence: float = 0.05,
                             positive_only: bool = False) -> list[Peak]:
    """Local maxima of the normalized power, refined by a 3-point parabola.

    ``width`` is the full width at half maximum (frequency units). Peaks are
    sorted by decreasing height.
    """
    p = power_spectrum(spec)
    work = np.nan_to_num(p, nan=0.0)
    idx, _ = find_peaks(work, prominence=prominence)
    if idx.size == 0:
        return []
    widths = peak_widths(work, idx, rel_height=0.5)[0]
    dw = spec.d_omega
    peaks = []
    for i, wbins in zip(idx, widths):
        om, h = float(spec.omegas[i]), float(work[i])
        if 0 < i < work.size - 1:
            y0, y1, y2 = work[i - 1], work[i], work[i + 1]
            den = y0 - 2 * y1 + y2
            if den < 0:
                off = 0.5 * (y0 - y2) / den
                om += off * dw
                h = y1 - 0.25 * (y0 - y2) * off
        if positive_only and om < 0:
            continue
        peaks.append(Peak(om, h, float(wbins * dw)))
    return sorted(peaks, key=lambda pk: -pk.height)


def lk_from_greens(g_of_omega: np.ndarray) -> np.ndarray:
    """``G(w) + G(-w)^*`` on a grid symmetric about zero (mirror index ``-i``)."""
    g = np.asarray(g_of_omega)
    return g + np.conj(g[::-1])
