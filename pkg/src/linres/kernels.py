"""Kernel selection: the compiled extension when it is importable, numpy otherwise.

Set ``LINRES_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("LINRES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

pauli_rotation = _impl.pauli_rotation
apply_pauli = _impl.apply_pauli
pauli_expectation = _impl.pauli_expectation
two_qubit_gate = _impl.two_qubit_gate
single_qubit_gate = _impl.single_qubit_gate

__all__ = [
    "BACKEND",
    "pauli_rotation",
    "apply_pauli",
    "pauli_expectation",
    "two_qubit_gate",
    "single_qubit_gate",
]
