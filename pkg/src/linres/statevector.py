"""Dense n-qubit statevector with Pauli-string rotations and measurements.

Qubit 0 is the least-significant bit of the amplitude index, so the basis
state ``|b_{n-1} ... b_1 b_0>`` sits at index ``sum_i b_i 2**i``. Bitstrings
returned by :func:`sample_z_basis` are printed most-significant qubit first
(``"01"`` means qubit 0 is set).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels

_LETTERS = "IXYZ"


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis.

    ``letters[i]`` acts on qubit ``i``.
    """

    letters: str
    coefficient: complex = 1.0

    def __post_init__(self):
        letters = self.letters.upper()
        if any(ch not in _LETTERS for ch in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def from_sparse(cls, n, ops, coefficient=1.0):
        """Build from a ``{qubit: letter}`` mapping."""
        letters = ["I"] * n
        for q, ch in ops.items():
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for n={n}")
            letters[q] = ch
        return cls("".join(letters), coefficient)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.letters)

    @property
    def is_hermitian(self) -> bool:
        return abs(complex(self.coefficient).imag) < 1e-14

    @cached_property
    def masks(self) -> tuple[int, int, int]:
        """``(x_mask, z_mask, n_y)`` in the kernel convention."""
        x = z = ny = 0
        for q, ch in enumerate(self.letters):
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
            if ch == "Y":
                ny += 1
        return x, z, ny

    def support(self) -> list[int]:
        return [q for q, ch in enumerate(self.letters) if ch != "I"]

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n_qubits != other.n_qubits:
            raise ValueError("Pauli strings act on different qubit counts")
        phase = complex(self.coefficient) * complex(other.coefficient)
        out = []
        for a, b in zip(self.letters, other.letters):
            p, ch = _single_product(a, b)
            phase *= p
            out.append(ch)
        return PauliString("".join(out), phase)

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(
            1
            for a, b in zip(self.letters, other.letters)
            if a != "I" and b != "I" and a != b
        )
        return anti % 2 == 0

    def to_matrix(self) -> np.ndarray:
        """Dense matrix (small n only); used by the oracles."""
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[1.0 + 0j]])
        for ch in self.letters:
            out = np.kron(mats[ch], out)
        return complex(self.coefficient) * out

    def __str__(self):
        body = "".join(f"{ch}{q}" for q, ch in enumerate(self.letters) if ch != "I")
        return f"({self.coefficient})*{body or 'I'}"


def _single_product(a, b):
    if a == "I":
        return 1, b
    if b == "I" or a == b:
        return 1, ("I" if a == b else a)
    table = {
        ("X", "Y"): (1j, "Z"),
        ("Y", "Z"): (1j, "X"),
        ("Z", "X"): (1j, "Y"),
        ("Y", "X"): (-1j, "Z"),
        ("Z", "Y"): (-1j, "X"),
        ("X", "Z"): (-1j, "Y"),
    }
    return table[(a, b)]


@dataclass(frozen=True)
class PauliRotation:
    """``exp(-i * angle * string)`` for a unit-coefficient Hermitian string."""

    string: PauliString
    angle: float


class StateVector:
    """Mutable dense state of ``n_qubits`` qubits."""

    def __init__(self, n_qubits: int, amplitudes=None):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        dim = 1 << n_qubits
        if amplitudes is None:
            amps = np.zeros(dim, dtype=np.complex128)
            amps[0] = 1.0
        else:
            amps = np.array(amplitudes, dtype=np.complex128).ravel()
            if amps.shape != (dim,):
                raise ValueError(f"expected {dim} amplitudes, got {amps.shape[0]}")
        self.amplitudes = np.ascontiguousarray(amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        state = cls(n_qubits)
        state.amplitudes[0] = 0.0
        state.amplitudes[index] = 1.0
        return state

    @classmethod
    def random(cls, n_qubits: int, rng: np.random.Generator) -> "StateVector":
        dim = 1 << n_qubits
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return cls(n_qubits, v / np.linalg.norm(v))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def _rows(self):
        return self.amplitudes.reshape(1, -1)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _check_string(state: StateVector, string: PauliString):
    if string.n_qubits != state.n_qubits:
        raise ValueError(
            f"Pauli string on {string.n_qubits} qubits applied to {state.n_qubits}-qubit state"
        )


def apply_pauli_rotation(state: StateVector, rot: PauliRotation) -> StateVector:
    """In place: ``|psi> <- cos(a)|psi> - i sin(a) P|psi>``."""
    _check_string(state, rot.string)
    if abs(complex(rot.string.coefficient) - 1.0) > 1e-14:
        raise ValueError("rotation generator must be a unit-coefficient Hermitian string")
    x, z, ny = rot.string.masks
    kernels.pauli_rotation(state._rows, x, z, ny, [float(rot.angle)])
    return state


def apply_pauli(state: StateVector, string: PauliString) -> StateVector:
    """In place ``|psi> <- P|psi>`` including the coefficient."""
    _check_string(state, string)
    x, z, ny = string.masks
    kernels.apply_pauli(state._rows, [x], [z], [ny])
    if string.coefficient != 1:
        state.amplitudes *= complex(string.coefficient)
    return state


def expectation(state: StateVector, obs: PauliString) -> float:
    _check_string(state, obs)
    if not obs.is_hermitian:
        raise ValueError("observable must have a real coefficient")
    x, z, ny = obs.masks
    val = kernels.pauli_expectation(state._rows, x, z, ny)[0]
    return float(complex(obs.coefficient).real * val)


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide generator: numpy PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_z_basis(state: StateVector, shots: int, seed: int) -> dict[str, int]:
    """Sample computational-basis outcomes; keys are MSB-first bitstrings."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    indices = sample_indices(state.probabilities(), shots, seed)
    uniq, counts = np.unique(indices, return_counts=True)
    n = state.n_qubits
    return {format(int(i), f"0{n}b"): int(c) for i, c in zip(uniq, counts)}


def sample_indices(probs: np.ndarray, shots: int, seed: int) -> np.ndarray:
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    counts = make_rng(seed).multinomial(shots, p)
    return np.repeat(np.arange(p.size), counts)
