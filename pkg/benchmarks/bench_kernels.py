"""Compiled vs numpy statevector kernels.

Times each kernel on identical random inputs with both implementations,
checks that they agree, then times one end-to-end Trotter trace in a
subprocess per backend (the backend is chosen at import time through
``LINRES_PURE_PYTHON``).

    python benchmarks/bench_kernels.py [--qubits 10] [--batch 8] [--repeat 5]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from linres import _kernels_py

try:
    from linres import _kernels as _kernels_cy
except ImportError:  # pragma: no cover
    _kernels_cy = None

END_TO_END = """
import time
from linres import kernels
from linres.engine import ExperimentPlan, greens_via_parity
from linres.fermion import momentum_drive
from linres.fields import DeltaPulse
from linres.ssh import SSHParams
plan = ExperimentPlan(SSHParams(8, 1.0, 0.4, 5.0), momentum_drive(0.7853981633974483, 8),
                      DeltaPulse(0.04), t_max=20.0, dt=0.05)
t = time.perf_counter(); greens_via_parity(plan); dt = time.perf_counter() - t
print(kernels.BACKEND, dt)
"""


def workloads(n: int, batch: int, rng: np.random.Generator):
    dim = 1 << n
    psi = rng.normal(size=(batch, dim)) + 1j * rng.normal(size=(batch, dim))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    x, z = int(rng.integers(1, dim)), int(rng.integers(0, dim))
    ny = bin(x & z).count("1")
    angles = rng.uniform(-1, 1, batch)
    g2 = np.linalg.qr(rng.normal(size=(batch, 4, 4)) + 1j * rng.normal(size=(batch, 4, 4)))[0]
    g1 = np.linalg.qr(rng.normal(size=(batch, 2, 2)) + 1j * rng.normal(size=(batch, 2, 2)))[0]
    xs, zs, nys = [x] * batch, [z] * batch, [ny] * batch
    return psi, {
        "pauli_rotation": lambda m, p: m.pauli_rotation(p, x, z, ny, angles),
        "apply_pauli": lambda m, p: m.apply_pauli(p, xs, zs, nys),
        "pauli_expectation": lambda m, p: m.pauli_expectation(p, x, z, ny),
        "two_qubit_gate": lambda m, p: m.two_qubit_gate(p, n // 2, np.ascontiguousarray(g2)),
        "single_qubit_gate": lambda m, p: m.single_qubit_gate(p, n // 2, np.ascontiguousarray(g1)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=10)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if _kernels_cy is None:
        print("compiled extension not built; only the numpy kernels are available")
        return 1
    psi0, kernels = workloads(args.qubits, args.batch, np.random.default_rng(7))
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}   max |diff|")
    for name, call in kernels.items():
        outs, times = [], []
        for mod in (_kernels_py, _kernels_cy):
            p = psi0.copy()
            r = call(mod, p)
            outs.append(p if r is None else np.asarray(r))
            t = min(timeit.repeat(lambda: call(mod, psi0.copy()), number=3, repeat=args.repeat)) / 3
            times.append(t)
        diff = float(np.abs(outs[0] - outs[1]).max())
        print(f"{name:<20}{1e3 * times[0]:12.3f}{1e3 * times[1]:13.3f}"
              f"{times[0] / times[1]:10.1f}   {diff:.1e}")
    if not args.no_end_to_end:
        print("\nend-to-end: n=8 auxiliary-parity trace, 400 Trotter steps")
        for flag in ("1", "0"):
            env = {**os.environ, "LINRES_PURE_PYTHON": flag}
            out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True,
                                 capture_output=True, text=True).stdout.split()
            print(f"  {out[0]:<8}{float(out[1]):8.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
