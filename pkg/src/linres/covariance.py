"""Gaussian-state backend: evolve ``C_ij = <c_i^+ c_j>`` under quadratic Hamiltonians.

With ``H = sum_ij c_i^+ M_ij c_j`` the Heisenberg operators obey
``c(t) = u c`` where ``u = exp(-i M t)``, hence ``C(t) = u^* C u^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class CorrelationMatrix:
    C: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def densities(self) -> np.ndarray:
        return self.C.diagonal().real.copy()

    def particle_number(self) -> float:
        return float(np.trace(self.C).real)

    def energy(self, m: np.ndarray) -> float:
        """``<sum_ij c_i^+ M_ij c_j> = sum_ij M_ij C_ij``."""
        return float(np.sum(m * self.C).real)


def _check_real_symmetric(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("single-particle matrix must be square")
    if np.iscomplexobj(m) and np.abs(m.imag).max() > 0:
        raise ValueError("single-particle matrix must be real")
    if np.abs(m - m.T).max() > 1e-12:
        raise ValueError("single-particle matrix must be symmetric")
    return np.asarray(m.real, dtype=float)


def ground_state_correlations(m: np.ndarray, mu_already_included: bool = True,
                              mu: float = 0.0) -> CorrelationMatrix:
    """Fill every orbital with negative energy.

    When ``mu_already_included`` is false, ``mu`` is subtracted from the
    diagonal first. Zero modes are ambiguous: half of the zero subspace is
    filled, using vectors obtained by orthogonalizing the projections of the
    site basis vectors taken in increasing site order. The result is
    reproducible and independent of the eigensolver's arbitrary basis.
    """
    m = _check_real_symmetric(m)
    if not mu_already_included:
        m = m - mu * np.eye(m.shape[0])
    e, v = np.linalg.eigh(m)
    tol = 1e-12 * max(1.0, np.abs(e).max())
    occ = [v[:, i] for i in np.flatnonzero(e < -tol)]
    zero = np.flatnonzero(np.abs(e) <= tol)
    if zero.size:
        # Gram-Schmidt of the projected site vectors, lowest site first
        proj = v[:, zero] @ v[:, zero].T
        chosen: list[np.ndarray] = []
        for s in range(m.shape[0]):
            if len(chosen) == zero.size // 2:
                break
            vec = proj[:, s].copy()
            for b in chosen:
                vec -= (b @ vec) * b
            norm = np.linalg.norm(vec)
            if norm > 1e-8:
                chosen.append(vec / norm)
        occ.extend(chosen)
    c = np.zeros(m.shape, dtype=complex)
    for phi in occ:
        c += np.outer(phi.conj(), phi)
    return CorrelationMatrix(c)


def single_particle_step(m: np.ndarray, dt: float) -> np.ndarray:
    e, v = np.linalg.eigh(m)
    return (v * np.exp(-1j * e * dt)) @ v.conj().T


def _conjugate(c, u):
    return u.conj() @ c @ u.T


def evolve_correlations(corr: CorrelationMatrix, m: np.ndarray, dt: float, steps: int,
                        field: Callable[[float], float] | None = None,
                        site: int | None = None, kick: float = 0.0,
                        record: Callable[[CorrelationMatrix], object] | None = None,
                        profile: np.ndarray | None = None):
    """Evolve ``steps`` steps of size ``dt`` and return recorded values.

    The drive must be a site potential ``h(t) sum_r v_r n_r`` with
    ``v = profile`` (or the unit vector on ``site``): ``field(t)`` is sampled
    at step midpoints and ``h v`` is added to the diagonal of ``M``. ``kick``
    is an instantaneous area applied before the first step (a delta pulse).
    ``record`` is called on the initial state and after every step; the
    default records densities.
    """
    m = _check_real_symmetric(m)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if profile is None and site is not None:
        profile = np.zeros(m.shape[0])
        profile[site] = 1.0
    if (field is not None or kick) and profile is None:
        raise ValueError("a site-potential drive needs a site or a profile")
    rec = record or (lambda cm: cm.densities())
    c = corr.C.astype(complex, copy=True)
    if kick:
        c = _conjugate(c, np.diag(np.exp(-1j * kick * profile)))
    e, v = np.linalg.eigh(m)
    out = [rec(CorrelationMatrix(c))]
    # Static stretches are evaluated in the eigenbasis from the start of the
    # stretch, C~(s) = C~(0) * exp(i (e_a - e_b) s); nothing accumulates.
    anchor, anchor_step = None, 0
    for j in range(steps):
        h = 0.0 if field is None else float(field((j + 0.5) * dt))
        if h == 0.0:
            if anchor is None:
                anchor, anchor_step = v.T @ c @ v, j
            s = (j + 1 - anchor_step) * dt
            c = v @ (anchor * np.exp(1j * np.subtract.outer(e, e) * s)) @ v.T
        else:
            anchor = None
            c = _conjugate(c, single_particle_step(m + np.diag(h * profile), dt))
        out.append(rec(CorrelationMatrix(c)))
    return out


def from_statevector(psi: np.ndarray, n: int) -> CorrelationMatrix:
    """``<c_i^+ c_j>`` of a statevector (oracle helper, small n)."""
    from .fermion import annihilation_matrix

    cs = [annihilation_matrix(i, n) for i in range(n)]
    c = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            c[i, j] = np.vdot(psi, cs[i].conj().T @ (cs[j] @ psi))
    return CorrelationMatrix(c)
