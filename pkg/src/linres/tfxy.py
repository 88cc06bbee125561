"""Algebraic compression of free-fermion (TFXY) block circuits on an open chain.

A block on sites ``(i, i+1)`` is

    B_i(theta) = e^{-i t1 Z_i} e^{-i t2 Z_{i+1}} e^{-i t3 X_i X_{i+1}}
                 e^{-i t4 Y_i Y_{i+1}} e^{-i t5 Z_i} e^{-i t6 Z_{i+1}}

(rightmost factor acts first). Blocks are exactly the two-qubit matchgates
modulo global phase: on the even-parity pair ``(|00>, |11>)`` a block acts as
the SU(2) element ``Rz(t1+t2) Rx(t3-t4) Rz(t5+t6)`` and on the odd pair
``(|b_i=1>, |b_{i+1}=1>)`` as ``Rz(t2-t1) Rx(t3+t4) Rz(t6-t5)``, where
``Rz(a) = exp(-i a sz)``. Fusion multiplies those SU(2) pairs and reads the
angles back with a ZXZ Euler decomposition.

Turnover works on the Majorana representation: a parity-preserving gate
``U`` on k qubits induces ``R in SO(2k)`` with ``U g_p U^+ = sum_q R_qp g_q``
and ``g_{2j} = Z..Z X_j``, ``g_{2j+1} = Z..Z Y_j``. Three-qubit products live
in SO(6), which is re-factorised as SO(4)[2:6] * SO(4)[0:4] * SO(4)[2:6] with
two QR steps and no iteration.

All circuit lists are in time order (element 0 acts first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_ZI = np.kron(_I2, _Z)  # Z on the low site of a block
_IZ = np.kron(_Z, _I2)  # Z on the high site
_XX = np.kron(_X, _X)
_YY = np.kron(_Y, _Y)
_EVEN = (0, 3)
_ODD = (1, 2)


@dataclass(frozen=True)
class TFXYBlock:
    site: int
    angles: tuple[float, float, float, float, float, float] = (0.0,) * 6

    def __post_init__(self):
        if len(self.angles) != 6:
            raise ValueError("a TFXY block has exactly six angles")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    @classmethod
    def identity(cls, site: int) -> "TFXYBlock":
        return cls(site)


@dataclass
class BlockCircuit:
    n: int
    blocks: list[TFXYBlock] = field(default_factory=list)

    def __post_init__(self):
        for b in self.blocks:
            _check_site(b.site, self.n)

    def __len__(self):
        return len(self.blocks)

    @property
    def cnot_count(self) -> int:
        """Two CNOT-class entanglers per block."""
        return 2 * len(self.blocks)


def _check_site(site, n):
    if not 0 <= site < n - 1:
        raise ValueError(f"block site {site} is not an adjacent pair on a {n}-qubit chain")


def _rot(theta, p):
    return np.cos(theta) * np.eye(p.shape[0]) - 1j * np.sin(theta) * p


def block_unitary(b: TFXYBlock) -> np.ndarray:
    """4x4 unitary; local index ``b_i + 2 b_{i+1}``."""
    t1, t2, t3, t4, t5, t6 = b.angles
    return (
        _rot(t1, _ZI) @ _rot(t2, _IZ) @ _rot(t3, _XX) @ _rot(t4, _YY)
        @ _rot(t5, _ZI) @ _rot(t6, _IZ)
    )


def _zxz(v):
    """Angles ``(a, b, c)`` with ``v = Rz(a) Rx(b) Rz(c)`` for ``v`` in SU(2)."""
    b = np.arctan2(abs(v[1, 0]), abs(v[0, 0]))
    s_plus = -np.angle(v[0, 0]) if abs(v[0, 0]) > 1e-300 else 0.0
    s_minus = np.angle(v[1, 0]) + np.pi / 2 if abs(v[1, 0]) > 1e-300 else 0.0
    return (s_plus + s_minus) / 2, b, (s_plus - s_minus) / 2


def _normalize(theta):
    # e^{-i pi P} = -1, so each angle is defined modulo pi
    out = np.mod(theta, np.pi)
    out[np.isclose(out, np.pi, atol=1e-13, rtol=0)] = 0.0
    return out


def angles_from_unitary(u: np.ndarray) -> tuple[float, ...]:
    """Six block angles reproducing a 4x4 matchgate up to global phase."""
    ue = u[np.ix_(_EVEN, _EVEN)]
    uo = u[np.ix_(_ODD, _ODD)]
    phase = np.exp(-0.5j * np.angle(np.linalg.det(ue)))
    ae, be, ce = _zxz(ue * phase)
    ao, bo, co = _zxz(uo * phase)
    theta = np.array([
        (ae - ao) / 2, (ae + ao) / 2,
        (be + bo) / 2, (bo - be) / 2,
        (ce - co) / 2, (ce + co) / 2,
    ])
    return tuple(_normalize(theta))


def equal_up_to_phase(u: np.ndarray, v: np.ndarray) -> float:
    """``min_phi ||u - e^{i phi} v||_max``."""
    overlap = np.vdot(v, u)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.abs(u - phase * v).max())


def fuse(a: TFXYBlock, b: TFXYBlock) -> TFXYBlock:
    """Block equal to ``B(a) B(b)`` (``b`` acts first)."""
    if a.site != b.site:
        raise ValueError(f"cannot fuse blocks on sites {a.site} and {b.site}")
    return TFXYBlock(a.site, angles_from_unitary(block_unitary(a) @ block_unitary(b)))


# --- Majorana representation -------------------------------------------------

def _majoranas(k):
    out = []
    for j in range(k):
        for p in (_X, _Y):
            ops = [_Z] * j + [p] + [_I2] * (k - j - 1)
            m = np.array([[1.0 + 0j]])
            for op in ops:
                m = np.kron(op, m)
            out.append(m)
    return out


_MAJ2 = _majoranas(2)
_MAJ3 = _majoranas(3)


def so_matrix(u: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` with ``u g_p u^+ = sum_q R_qp g_q``."""
    k = int(np.log2(u.shape[0]))
    gam = np.asarray(_MAJ2 if k == 2 else _MAJ3 if k == 3 else _majoranas(k))
    conj = u @ gam @ u.conj().T
    return np.einsum("qij,pji->qp", gam, conj).real / u.shape[0]


# column-major vec: vec(U g) = (g^T kron I) vec U and vec(g' U) = (I kron g') vec U
_VEC_RIGHT = np.array([np.kron(g.T, np.eye(4)) for g in _MAJ2])
_VEC_LEFT = np.array([np.kron(np.eye(4), g) for g in _MAJ2])


def _unitary_from_so4(r: np.ndarray) -> np.ndarray:
    """The 4x4 parity-preserving unitary (up to phase) inducing ``r``: null vector of ``U g_p = g'_p U``."""
    stack = _VEC_RIGHT - np.einsum("qp,qij->pij", r, _VEC_LEFT)
    _, _, vh = np.linalg.svd(stack.reshape(64, 16))
    u = vh[-1].conj().reshape(4, 4, order="F")
    return u / np.sqrt(np.trace(u.conj().T @ u).real / 4)


def _block_from_so4(site: int, r: np.ndarray) -> TFXYBlock:
    return TFXYBlock(site, angles_from_unitary(_unitary_from_so4(r)))


def _complete_so(cols: np.ndarray) -> np.ndarray:
    """Proper rotation whose leading columns are the orthonormal ``cols``."""
    q, _ = np.linalg.qr(cols, mode="complete")
    q[:, : cols.shape[1]] = cols
    if np.linalg.det(q) < 0:
        q[:, -1] *= -1
    return q


def turnover(a: TFXYBlock, b: TFXYBlock, c: TFXYBlock):
    """Rewrite ``B_i(a) B_{i+1}(b) B_i(c)`` as ``B_{i+1}(a') B_i(b') B_{i+1}(c')``.

    Returns ``(a', b', c')``; ``c'`` acts first.
    """
    i = a.site
    if c.site != i or b.site != i + 1:
        raise ValueError(
            f"turnover needs sites (i, i+1, i); got ({a.site}, {b.site}, {c.site})"
        )
    lo = lambda blk: np.kron(_I2, block_unitary(blk))  # noqa: E731
    hi = lambda blk: np.kron(block_unitary(blk), _I2)  # noqa: E731
    r = so_matrix(lo(a) @ hi(b) @ lo(c))

    # left factor on Majoranas 2..5 maps the image of e0, e1 into span(e0..e3)
    q, _ = np.linalg.qr(r[2:6, 0:2], mode="complete")
    if np.linalg.det(q) < 0:
        q[:, -1] *= -1
    left = np.eye(6)
    left[2:6, 2:6] = q
    rest = left.T @ r
    mid = np.eye(6)
    mid[0:4, 0:4] = _complete_so(rest[0:4, 0:2])
    right = mid.T @ rest
    return (
        _block_from_so4(i + 1, left[2:6, 2:6]),
        _block_from_so4(i, mid[0:4, 0:4]),
        _block_from_so4(i + 1, right[2:6, 2:6]),
    )


# --- circuits ---------------------------------------------------------------

def circuit_unitary(circuit: BlockCircuit) -> np.ndarray:
    """Dense unitary of a block circuit (small n only)."""
    dim = 1 << circuit.n
    u = np.eye(dim, dtype=complex)
    for blk in circuit.blocks:
        u = embed_block(blk, circuit.n) @ u
    return u


def embed_block(blk: TFXYBlock, n: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(1 << (n - blk.site - 2)), block_unitary(blk)),
                   np.eye(1 << blk.site))


def triangle_sites(n: int) -> list[int]:
    """Time-ordered site pattern of the triangle: ascending staircases of growing length."""
    m = n - 1
    return [s for level in range(m) for s in range(m - 1 - level, m)]


class Triangle:
    """Mutable triangle that absorbs blocks appended after it."""

    def __init__(self, n: int, blocks: list[TFXYBlock] | None = None):
        if n < 2:
            raise ValueError("need at least two qubits")
        self.n = n
        m = n - 1
        if blocks is None:
            self.stairs = [
                [TFXYBlock.identity(s) for s in range(m - 1 - level, m)]
                for level in range(m)
            ]
        else:
            if [b.site for b in blocks] != triangle_sites(n):
                raise ValueError("blocks are not in triangle form")
            it = iter(blocks)
            self.stairs = [[next(it) for _ in range(level + 1)] for level in range(m)]

    def absorb(self, blk: TFXYBlock):
        _check_site(blk.site, self.n)
        m = self.n - 1
        level = m - 1
        j = blk.site
        while True:
            stair = self.stairs[level]
            lo = m - 1 - level
            if j == m - 1:
                stair[-1] = fuse(blk, stair[-1])
                return
            # time order [old_j, old_{j+1}, new_j] -> [c'@j+1, b'@j, a'@j+1]
            a2, b2, c2 = turnover(blk, stair[j + 1 - lo], stair[j - lo])
            stair[j - lo] = b2
            stair[j + 1 - lo] = a2
            # c' commutes with sites < j and drops into the staircase before
            blk, j, level = c2, j + 1, level - 1

    def circuit(self) -> BlockCircuit:
        return BlockCircuit(self.n, [b for stair in self.stairs for b in stair])


def compress(circuit: BlockCircuit) -> BlockCircuit:
    """Absorb every block into an n(n-1)/2-block triangle."""
    tri = Triangle(circuit.n)
    for blk in circuit.blocks:
        tri.absorb(blk)
    return tri.circuit()


def is_triangle(circuit: BlockCircuit) -> bool:
    return [b.site for b in circuit.blocks] == triangle_sites(circuit.n)


def lightcone_prune(triangle: BlockCircuit, measured_qubit: int = 0) -> BlockCircuit:
    """Keep the blocks in the backward causal cone of ``measured_qubit``.

    Dropped blocks act after every kept block that shares a qubit with them,
    so they commute past the measurement. Because blocks conserve particle
    number, Hamming-weight statistics survive the pruning as well.
    """
    if measured_qubit != 0:
        raise ValueError("only measurement on qubit 0 is supported")
    if not is_triangle(triangle):
        raise ValueError("lightcone_prune expects a triangle-form circuit")
    cone = {measured_qubit}
    kept = []
    for blk in reversed(triangle.blocks):
        pair = {blk.site, blk.site + 1}
        if pair & cone:
            kept.append(blk)
            cone |= pair
    return BlockCircuit(triangle.n, kept[::-1])


def trotter_blocks(params, dt: float, steps: int = 1) -> BlockCircuit:
    """First-order SSH Trotter steps as blocks (open chain only).

    Each step is even-bond hops, odd-bond hops, then on-site Z rotations; the
    Z layer is folded into the last-acting Z factors of the odd-bond blocks,
    and into the even-bond blocks for sites no odd bond touches.
    """
    if params.boundary != "open":
        raise ValueError("block compression supports open chains only")
    n = params.n
    zang = -params.onsite * dt / 2.0
    hop = {i: t for i, _, t in params.bonds()}
    odd_sites = {s for i in range(1, n - 1, 2) for s in (i, i + 1)}
    step = []
    for parity in (0, 1):
        for i in range(parity, n - 1, 2):
            th = -hop[i] * dt / 2.0
            t1 = zang if (parity == 1 or i not in odd_sites) else 0.0
            t2 = zang if (parity == 1 or i + 1 not in odd_sites) else 0.0
            step.append(TFXYBlock(i, (t1, t2, th, th, 0.0, 0.0)))
    return BlockCircuit(n, step * steps)


def apply_blocks(psi_rows: np.ndarray, circuit: BlockCircuit):
    """Apply a block circuit in place to a ``(batch, 2**n)`` array."""
    from . import kernels

    for blk in circuit.blocks:
        kernels.two_qubit_gate(psi_rows, blk.site, block_unitary(blk))


def dump_circuit(circuit: BlockCircuit) -> str:
    lines = [f"tfxy n={circuit.n}"]
    for b in circuit.blocks:
        lines.append(" ".join([str(b.site)] + [format(a, ".17g") for a in b.angles]))
    return "\n".join(lines) + "\n"


def load_circuit(text: str) -> BlockCircuit:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 2 or head[0] != "tfxy" or not head[1].startswith("n="):
        raise ValueError(f"bad circuit header {lines[0]!r}")
    n = int(head[1][2:])
    blocks = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 7:
            raise ValueError(f"bad block line {ln!r}")
        blocks.append(TFXYBlock(int(parts[0]), tuple(float(p) for p in parts[1:])))
    return BlockCircuit(n, blocks)
