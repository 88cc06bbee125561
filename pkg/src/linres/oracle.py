"""Closed-form and exact-diagonalization references.

Nothing here touches the time-stepping code: Green's functions come from the
single-particle eigendecomposition, and the many-body route builds dense
fermion operators from the Jordan-Wigner definitions and sums the Lehmann
series directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fermion import annihilation_matrix
from .ssh import SSHParams, hamiltonian_matrix, single_particle_matrix


@dataclass(frozen=True)
class LehmannData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_hermitian(cls, h: np.ndarray) -> "LehmannData":
        w, v = np.linalg.eigh(h)
        resid = np.abs(h @ v - v * w).max()
        if resid > 1e-10 * max(1.0, np.abs(h).max()):
            raise ArithmeticError(f"eigendecomposition residual {resid:.2e}")
        return cls(w, v)

    def propagator(self, t: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T


def _times(tgrid):
    return np.atleast_1d(np.asarray(tgrid, dtype=float))


def exact_retarded_gf(params: SSHParams, tgrid, i: int = 0, j: int = 0) -> np.ndarray:
    """``G^R_ij(t) = -i theta(t) [exp(-i M t)]_ij``.

    For a quadratic Hamiltonian the anticommutator is a c-number, so the same
    expression holds for the vacuum and for any filled sea. ``t = 0`` is read
    as ``0+``.
    """
    data = LehmannData.from_hermitian(single_particle_matrix(params))
    t = _times(tgrid)
    v = data.eigenvectors
    phases = np.exp(-1j * np.outer(t, data.eigenvalues))
    g = -1j * (phases * (v[i] * v[j].conj())).sum(axis=1)
    g[t < 0] = 0.0
    return g


def momentum_weights(k: float, n: int) -> np.ndarray:
    return np.cos(k * np.arange(n))


def lk_oracle(params: SSHParams, k: float, tgrid) -> np.ndarray:
    """Reference ``L_k(t) = 2 sum_r cos(k r) Re G^R_{0r}(t)``.

    This is the combination the momentum drive ``sum_r 2 cos(k r) X~_r``
    probes when ``X_0`` is measured and the signal is divided by ``2 eta``.
    """
    w = momentum_weights(k, params.n)
    total = np.zeros(_times(tgrid).shape)
    for r in range(params.n):
        if abs(w[r]) > 1e-15:
            total += w[r] * exact_retarded_gf(params, tgrid, 0, r).real
    return 2.0 * total


def lk_modes(params: SSHParams, k: float) -> list[tuple[float, float]]:
    """``(energy, amplitude a)`` with ``L_k(t) = -2 sum a sin(e t)``; degenerate levels merged."""
    data = LehmannData.from_hermitian(single_particle_matrix(params))
    v = data.eigenvectors
    amp = v[0] * (momentum_weights(k, params.n) @ v)
    merged: list[list[float]] = []
    for e, a in zip(data.eigenvalues, amp):
        if merged and abs(e - merged[-1][0]) < 1e-9:
            merged[-1][1] += a
        else:
            merged.append([float(e), float(a)])
    return [(e, a) for e, a in merged]


def dominant_energy(params: SSHParams, k: float) -> float:
    """Positive-frequency location of the strongest ``|L_k(w)|^2`` peak."""
    e, _ = max(lk_modes(params, k), key=lambda m: abs(m[1]))
    return abs(e)


def significant_energies(params: SSHParams, k: float, rel: float = 0.1) -> list[float]:
    """Energies whose ``|L_k(w)|^2`` weight is at least ``rel`` of the strongest.

    Several modes can carry equal weight (e.g. both SSH branches at
    ``k = pi/2``), so a single "dominant" energy is not always well defined.
    """
    modes = lk_modes(params, k)
    top = max(a * a for _, a in modes)
    return sorted(abs(e) for e, a in modes if a * a >= rel * top)


def many_body_retarded_gf(params: SSHParams, tgrid, i: int, j: int,
                          psi0: np.ndarray | None = None) -> np.ndarray:
    """Lehmann sum over the full 2**n spectrum; ``psi0`` must be an eigenstate.

    Defaults to the vacuum.
    """
    n = params.n
    h = hamiltonian_matrix(params)
    data = LehmannData.from_hermitian(h)
    if psi0 is None:
        psi0 = np.zeros(1 << n, dtype=complex)
        psi0[0] = 1.0
    e0 = float(np.vdot(psi0, h @ psi0).real)
    if np.linalg.norm(h @ psi0 - e0 * psi0) > 1e-9:
        raise ValueError("psi0 is not an eigenstate of H")
    v = data.eigenvectors
    ci = annihilation_matrix(i, n)
    cj_dag = annihilation_matrix(j, n).conj().T
    psi_e = v.conj().T @ psi0
    # <0| c_i |m><m| c_j^+ |0>  and  <0| c_j^+ |m><m| c_i |0>
    a = (psi_e.conj() @ (v.conj().T @ ci @ v)) * ((v.conj().T @ cj_dag @ v) @ psi_e)
    b = (psi_e.conj() @ (v.conj().T @ cj_dag @ v)) * ((v.conj().T @ ci @ v) @ psi_e)
    t = _times(tgrid)
    de = data.eigenvalues - e0
    g = -1j * (np.exp(-1j * np.outer(t, de)) @ a + np.exp(1j * np.outer(t, de)) @ b)
    g[t < 0] = 0.0
    return g


@dataclass(frozen=True)
class GapReport:
    bulk: float
    finite: float


def band_gap(params: SSHParams) -> GapReport:
    """Bulk two-band gap ``2|t_even - t_odd| = 2|delta|`` and the finite-chain middle splitting.

    The finite value is ``e[n/2] - e[n/2 - 1]`` of the single-particle
    spectrum, i.e. the splitting around the band centre.
    """
    if params.delta < 0:
        raise ValueError("delta must be >= 0")
    bulk = 2.0 * abs(params.delta)
    e = np.linalg.eigvalsh(single_particle_matrix(params))
    mid = params.n // 2
    finite = float(e[mid] - e[mid - 1]) if params.n % 2 == 0 else float(
        min(e[mid + 1] - e[mid], e[mid] - e[mid - 1])
    )
    return GapReport(bulk, finite)


def periodic_band(params: SSHParams, k) -> tuple[np.ndarray, np.ndarray]:
    """Two branches ``onsite +- sqrt(4 v^2 cos^2 k + delta^2 sin^2 k)`` on the one-site zone."""
    k = np.asarray(k, dtype=float)
    root = np.sqrt(4 * params.v_nn**2 * np.cos(k) ** 2 + params.delta**2 * np.sin(k) ** 2)
    return params.onsite - root, params.onsite + root


def ground_state_orbitals(params: SSHParams):
    """``(energies, orbitals, n_filled)``; orbitals with energy < 0 are occupied."""
    data = LehmannData.from_hermitian(single_particle_matrix(params))
    filled = int(np.count_nonzero(data.eigenvalues < 0))
    return data.eigenvalues, data.eigenvectors, filled


def _ph_kernel(omegas, de, eta):
    z = np.asarray(omegas, dtype=complex)[:, None] + 1j * eta
    return 1.0 / (z - de[None, :]) - 1.0 / (z + de[None, :])


def lindhard_polarizability(params: SSHParams, qgrid, omegas, eta_broadening: float,
                            site: int | None = None) -> np.ndarray:
    """Particle-hole sum for the density response, shape ``(len(qgrid), len(omegas))``.

    ``site=None`` gives the translation-averaged form with weights
    ``|<m|e^{iqr}|l>|^2 / n``. With ``site=r'`` it gives
    ``sum_r e^{-iq(r-r')} chi(r, r', w)``, the quantity produced by driving the
    density on ``r'`` and Fourier transforming the response over ``r``.
    """
    e, v, nf = ground_state_orbitals(params)
    occ, unocc = v[:, :nf], v[:, nf:]
    de = (e[nf:][None, :] - e[:nf][:, None]).ravel()
    kern = _ph_kernel(omegas, de, eta_broadening)
    r = np.arange(params.n)
    out = np.empty((len(qgrid), len(omegas)), dtype=complex)
    for iq, q in enumerate(qgrid):
        if site is None:
            m = (unocc.T * np.exp(1j * q * r)) @ occ  # <m|e^{iqr}|l>
            w = (np.abs(m.T) ** 2).ravel() / params.n
        else:
            phase = np.exp(-1j * q * (r - site))
            left = (occ.T * phase) @ unocc  # sum_r e^{-iq(r-r')} phi_l(r) phi_m(r)
            right = occ[site][:, None] * unocc[site][None, :]
            w = (left * right).ravel()
        out[iq] = kern @ w
    return out
