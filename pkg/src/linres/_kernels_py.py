"""Pure-numpy statevector kernels.

Every kernel acts in place on a C-contiguous ``complex128`` array of shape
``(batch, 2**n)``. Qubit 0 is the least-significant bit of the amplitude
index. A Pauli string is passed as ``(x_mask, z_mask, n_y)`` with
``P|b> = i**n_y * (-1)**popcount(b & z_mask) |b ^ x_mask>``.
"""

from functools import lru_cache

import numpy as np

_I_POW = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


@lru_cache(maxsize=512)
def _pauli_tables(dim, x_mask, z_mask):
    idx = np.arange(dim, dtype=np.int64)
    src = idx ^ x_mask
    sign = 1.0 - 2.0 * (np.bitwise_count(src & z_mask) & 1)
    src.setflags(write=False)
    sign.setflags(write=False)
    return src, sign


def _apply_pauli_rows(psi, x_mask, z_mask, n_y):
    src, sign = _pauli_tables(psi.shape[1], x_mask, z_mask)
    return (_I_POW[n_y % 4] * sign) * psi[:, src]


def pauli_rotation(psi, x_mask, z_mask, n_y, angles):
    """psi[b] <- cos(a_b) psi[b] - i sin(a_b) (P psi)[b] for each row b."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1, 1)
    ppsi = _apply_pauli_rows(psi, x_mask, z_mask, n_y)
    psi *= np.cos(angles)
    psi -= (1j * np.sin(angles)) * ppsi


def apply_pauli(psi, x_masks, z_masks, n_ys):
    """Apply a (possibly different) Pauli string to every row."""
    dim = psi.shape[1]
    for row in range(psi.shape[0]):
        x, z = int(x_masks[row]), int(z_masks[row])
        if x == 0 and z == 0:
            continue
        src, sign = _pauli_tables(dim, x, z)
        psi[row] = (_I_POW[int(n_ys[row]) % 4] * sign) * psi[row, src]


def pauli_expectation(psi, x_mask, z_mask, n_y):
    """Return Re <psi|P|psi> per row."""
    ppsi = _apply_pauli_rows(psi, x_mask, z_mask, n_y)
    return np.einsum("bi,bi->b", psi.conj(), ppsi).real


def two_qubit_gate(psi, qubit, gates):
    """Apply per-row 4x4 ``gates`` to qubits (qubit, qubit+1).

    Local gate index is ``b_q + 2 * b_{q+1}``.
    """
    batch, dim = psi.shape
    low = 1 << qubit
    view = psi.reshape(batch, dim // (4 * low), 2, 2, low)
    # axes: (batch, high, b_{q+1}, b_q, low)
    local = view.reshape(batch, dim // (4 * low), 4, low)
    g = np.asarray(gates)
    if g.ndim == 2:
        g = np.broadcast_to(g, (batch, 4, 4))
    out = np.einsum("bij,bhjl->bhil", g, local)
    psi[...] = out.reshape(batch, dim)


def single_qubit_gate(psi, qubit, gates):
    """Apply per-row 2x2 ``gates`` to ``qubit``."""
    batch, dim = psi.shape
    low = 1 << qubit
    view = psi.reshape(batch, dim // (2 * low), 2, low)
    g = np.asarray(gates)
    if g.ndim == 2:
        g = np.broadcast_to(g, (batch, 2, 2))
    psi[...] = np.einsum("bij,bhjl->bhil", g, view).reshape(batch, dim)
