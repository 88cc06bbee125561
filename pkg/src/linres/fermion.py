"""Jordan-Wigner operators on an n-site chain.

Sites are 0-based and the Jordan-Wigner string of site ``r`` sits on the
sites strictly below it, so ``c_r = Z_0 ... Z_{r-1} (X_r + i Y_r) / 2`` and

    X~_r = Z_0 ... Z_{r-1} X_r = c_r + c_r^dagger
    Y~_r = Z_0 ... Z_{r-1} Y_r = i (c_r^dagger - c_r)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .statevector import PauliString


@dataclass(frozen=True)
class FermionMode:
    site: int
    create: bool


@dataclass(frozen=True)
class DriveOperator:
    """Hermitian sum ``sum_j coeff_j * string_j`` kept unreduced."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), s) for c, s in self.terms))
        ns = {s.n_qubits for _, s in self.terms}
        if len(ns) > 1:
            raise ValueError("drive terms act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    def pairwise_anticommuting(self) -> bool:
        strings = [s for c, s in self.terms if c != 0.0]
        return all(
            not a.commutes_with(b)
            for i, a in enumerate(strings)
            for b in strings[i + 1:]
        )

    def is_quadratic_density(self) -> bool:
        """True when every string is diagonal (I/Z only), i.e. a site potential."""
        return all(set(s.letters) <= {"I", "Z"} for _, s in self.terms)

    def to_matrix(self) -> np.ndarray:
        return sum(c * s.to_matrix() for c, s in self.terms)


def _check_site(site, n):
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside chain of {n} sites")


def jw_x_tilde(site: int, n: int) -> PauliString:
    _check_site(site, n)
    return PauliString("Z" * site + "X" + "I" * (n - site - 1))


def jw_y_tilde(site: int, n: int) -> PauliString:
    _check_site(site, n)
    return PauliString("Z" * site + "Y" + "I" * (n - site - 1))


def parity_operator(n: int) -> PauliString:
    if n < 1:
        raise ValueError("n must be >= 1")
    return PauliString("Z" * n)


def allowed_momenta(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def momentum_drive(k: float, n: int) -> DriveOperator:
    """``B = sum_r 2 cos(k r) X~_r``."""
    grid = allowed_momenta(n)
    dist = np.abs(np.angle(np.exp(1j * (grid - k))))
    if dist.min() > 1e-9:
        warnings.warn(f"k={k} is not on the 2*pi*j/{n} grid", stacklevel=2)
    return DriveOperator(tuple((2.0 * math.cos(k * r), jw_x_tilde(r, n)) for r in range(n)))


def position_drive(site: int, n: int) -> DriveOperator:
    """``B = X~_site``."""
    return DriveOperator(((1.0, jw_x_tilde(site, n)),))


def density_operator(site: int, n: int) -> DriveOperator:
    """``n_r = (I - Z_r) / 2``."""
    _check_site(site, n)
    z = ["I"] * n
    z[site] = "Z"
    return DriveOperator(((0.5, PauliString("I" * n)), (-0.5, PauliString("".join(z)))))


def annihilation_matrix(site: int, n: int) -> np.ndarray:
    """Dense ``c_site`` built directly from the Jordan-Wigner definition."""
    _check_site(site, n)
    x = jw_x_tilde(site, n).to_matrix()
    y = jw_y_tilde(site, n).to_matrix()
    return 0.5 * (x + 1j * y)


def number_operator_diag(n: int) -> np.ndarray:
    """Diagonal of the total particle number (Hamming weight)."""
    return np.bitwise_count(np.arange(1 << n)).astype(float)
