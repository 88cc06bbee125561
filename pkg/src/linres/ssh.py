"""SSH chain: Pauli decomposition, single-particle matrix and Trotter steps.

    H0 = - sum_i t_i (c_i^dagger c_{i+1} + h.c.) - mu_sign * mu * sum_i n_i,
    t_i = v_nn + (-1)**i * delta / 2.

Under Jordan-Wigner, a hopping between sites ``i < j`` maps to
``-t/2 (X_i Z...Z X_j + Y_i Z...Z Y_j)`` with Z's strictly between the two
sites; nearest neighbours carry no string. ``n_i = (1 - Z_i)/2``, and the
constant this produces is dropped (global phase only).

Open chains are the default. ``boundary="periodic"`` adds the wrap-around
bond as a genuine fermionic hopping (its Pauli form carries the full
parity string); it is supported by the statevector and oracle paths but not
by the block compressor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .fermion import DriveOperator
from .statevector import PauliRotation, PauliString


@dataclass(frozen=True)
class SSHParams:
    n: int
    v_nn: float = 1.0
    delta: float = 0.0
    mu: float = 0.0
    boundary: str = "open"
    mu_sign: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("SSH chain needs n >= 2")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "periodic" and self.n < 3:
            raise ValueError("periodic chain needs n >= 3")
        if self.mu_sign not in (1.0, -1.0):
            raise ValueError("mu_sign must be +1 or -1")

    def bonds(self) -> list[tuple[int, int, float]]:
        """``(i, j, t)`` for every bond, ``i < j``."""
        out = [
            (i, i + 1, self.v_nn + (-1) ** i * self.delta / 2.0)
            for i in range(self.n - 1)
        ]
        if self.boundary == "periodic":
            i = self.n - 1
            out.append((0, i, self.v_nn + (-1) ** i * self.delta / 2.0))
        return out

    @property
    def onsite(self) -> float:
        """Diagonal single-particle energy."""
        return -self.mu_sign * self.mu


@dataclass(frozen=True)
class TrotterPlan:
    dt: float
    rotations: tuple[PauliRotation, ...]


def _hop_strings(i, j, n):
    xs = ["I"] * n
    ys = ["I"] * n
    xs[i] = xs[j] = "X"
    ys[i] = ys[j] = "Y"
    for s in range(i + 1, j):
        xs[s] = ys[s] = "Z"
    return PauliString("".join(xs)), PauliString("".join(ys))


def _z_string(i, n):
    z = ["I"] * n
    z[i] = "Z"
    return PauliString("".join(z))


def single_particle_matrix(params: SSHParams) -> np.ndarray:
    n = params.n
    m = np.zeros((n, n))
    for i, j, t in params.bonds():
        m[i, j] = m[j, i] = -t
    m[np.diag_indices(n)] = params.onsite
    return m


def build_ssh(params: SSHParams):
    """Return ``(pauli_terms, single_particle_matrix)``."""
    n = params.n
    terms: list[tuple[float, PauliString]] = []
    for i, j, t in params.bonds():
        xx, yy = _hop_strings(i, j, n)
        terms.append((-t / 2.0, xx))
        terms.append((-t / 2.0, yy))
    if params.onsite != 0.0:
        # onsite * n_i = onsite/2 - onsite/2 Z_i
        for i in range(n):
            terms.append((-params.onsite / 2.0, _z_string(i, n)))
    return terms, single_particle_matrix(params)


def hamiltonian_matrix(params: SSHParams) -> np.ndarray:
    """Dense many-body H0 from the Pauli terms (constant dropped)."""
    terms, _ = build_ssh(params)
    dim = 1 << params.n
    h = np.zeros((dim, dim), dtype=complex)
    for c, s in terms:
        h += c * s.to_matrix()
    return h


def _bond_groups(params: SSHParams):
    bonds = params.bonds()
    groups: list[list[tuple[int, int, float]]] = [[], [], []]
    for b, bond in enumerate(bonds):
        i, j, _ = bond
        if b == len(bonds) - 1 and params.boundary == "periodic":
            # wrap bond: joins the odd group when it shares no site with it
            groups[1 if params.n % 2 == 0 else 2].append(bond)
        else:
            groups[i % 2].append(bond)
    return [g for g in groups if g]


def trotter_step(params: SSHParams, dt: float) -> TrotterPlan:
    """First-order step: even bonds, odd bonds, then on-site Z rotations."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = params.n
    rots: list[PauliRotation] = []
    for group in _bond_groups(params):
        for i, j, t in group:
            xx, yy = _hop_strings(i, j, n)
            rots.append(PauliRotation(xx, -t * dt / 2.0))
            rots.append(PauliRotation(yy, -t * dt / 2.0))
    if params.onsite != 0.0:
        for i in range(n):
            rots.append(PauliRotation(_z_string(i, n), -params.onsite * dt / 2.0))
    return TrotterPlan(dt, tuple(rots))


def drive_step(drive: DriveOperator, h_value: float, dt: float) -> list[PauliRotation]:
    """One rotation per drive term with angle ``h * dt * coeff``."""
    area = h_value * dt
    peak = abs(area) * max((abs(c) for c, _ in drive.terms), default=0.0)
    if peak > 0.1:
        warnings.warn(
            f"drive rotation angle {peak:.3g} is large; linear response may not hold",
            stacklevel=2,
        )
    return [PauliRotation(s, area * c) for c, s in drive.terms]


def plan_unitary(plan: TrotterPlan, n: int) -> np.ndarray:
    """Dense unitary of one Trotter step (oracle use, small n)."""
    dim = 1 << n
    u = np.eye(dim, dtype=complex)
    for rot in plan.rotations:
        p = rot.string.to_matrix()
        u = (np.cos(rot.angle) * np.eye(dim) - 1j * np.sin(rot.angle) * p) @ u
    return u


@lru_cache(maxsize=64)
def _eigh_cached(params: SSHParams):
    return np.linalg.eigh(hamiltonian_matrix(params))


def exact_propagator(params: SSHParams, t: float) -> np.ndarray:
    """Dense ``exp(-i H0 t)`` via cached diagonalization."""
    w, v = _eigh_cached(params)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def dense_expm(h: np.ndarray, t: float) -> np.ndarray:
    return sla.expm(-1j * t * h)
