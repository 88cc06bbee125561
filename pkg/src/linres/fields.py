"""Time profiles ``h(t)`` of the perturbing field and their transforms.

Transforms use ``h(w) = integral h(t) e^{i w t} dt`` and accept complex
``w``: with damping ``exp(-t/tau)`` on the response, the right divisor is
``h(w + i/tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DeltaPulse:
    """Instantaneous kick of area ``eta`` at ``t = 0``."""

    eta: float

    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def spectrum(self, omegas):
        return np.full(np.shape(omegas), complex(self.eta))


@dataclass(frozen=True)
class GaussianSinusoid:
    """``amplitude * exp(-(t-t0)^2 / 2 sigma^2) * cos(omega0 (t-t0))``."""

    amplitude: float
    omega0: float
    sigma: float
    t0: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def centered(cls, amplitude, omega0, sigma, n_sigma=6.0):
        return cls(amplitude, omega0, sigma, n_sigma * sigma)

    def __call__(self, t):
        s = np.asarray(t, dtype=float) - self.t0
        return self.amplitude * np.exp(-(s**2) / (2 * self.sigma**2)) * np.cos(self.omega0 * s)

    def spectrum(self, omegas):
        w = np.asarray(omegas, dtype=complex)
        s2 = self.sigma**2
        env = 0.5 * (np.exp(-s2 * (w - self.omega0) ** 2 / 2) + np.exp(-s2 * (w + self.omega0) ** 2 / 2))
        return self.amplitude * self.sigma * np.sqrt(2 * np.pi) * np.exp(1j * w * self.t0) * env


@dataclass(frozen=True)
class Sampled:
    """Piecewise-constant samples, ``values[j]`` on ``[j dt, (j+1) dt)``."""

    values: tuple
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.floor(t / self.dt).astype(int)
        vals = np.asarray(self.values)
        ok = (idx >= 0) & (idx < len(vals))
        return np.where(ok, vals[np.clip(idx, 0, len(vals) - 1)], 0.0)

    def spectrum(self, omegas):
        w = np.asarray(omegas, dtype=complex)[..., None]
        mid = (np.arange(len(self.values)) + 0.5) * self.dt
        x = w[..., 0] * self.dt / 2
        safe = np.where(x == 0, 1.0, x)
        window = np.where(x == 0, 1.0, np.sin(safe) / safe)  # exact for piecewise-constant h
        return (np.asarray(self.values) * np.exp(1j * w * mid)).sum(axis=-1) * self.dt * window


DriveField = DeltaPulse | GaussianSinusoid | Sampled
