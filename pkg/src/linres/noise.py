"""Depolarizing gate noise on a line of qubits.

Circuits are flat lists of operations. Unitary gates carry no noise of their
own; noise appears as explicit ``Depolarize`` events that the circuit
builders place after the gates they belong to. A 1q event replaces the state
of one qubit by a uniformly random non-identity Pauli with probability
``p1``; a 2q event does the same on a pair with one of the 15 non-identity
two-qubit Paulis and probability ``p2``. Two-qubit events must act on
neighbours of the device line.

Two simulators share that IR:

* ``run_trajectories``: stochastic Pauli insertion on a batch of
  statevectors, one row per trajectory.
* ``run_channel``: the exact channel on the vectorized density matrix
  (``vec[a + 2**N b] = rho[a, b]``); dense, so only for small ``N`` or for
  computing a noisy mean once and reusing it.

Because every measured shot of a noisy circuit is an independent noise
realization followed by a projective measurement, sampling shots from the
exact channel mean reproduces the statistics of running one trajectory per
shot. ``noisy_run`` offers both routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .engine import PlanError, compressed_circuits
from .fermion import jw_x_tilde
from .fields import DeltaPulse
from .signal import ResponseTrace, apply_damping, fourier_transform
from .statevector import PauliString, make_rng
from .tfxy import block_unitary

# --- noise model --------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    p1: float
    p2: float

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0


# The appendix rate for single-qubit errors (0.1%) and the figure caption's
# (1%) disagree, so both are provided.
NOISE_PRESETS = {
    "noiseless": NoiseModel(0.0, 0.0),
    "p1=0.1%,p2=10%": NoiseModel(0.001, 0.10),
    "p1=0.1%,p2=20%": NoiseModel(0.001, 0.20),
    "p1=1%,p2=10%": NoiseModel(0.01, 0.10),
    "p1=1%,p2=20%": NoiseModel(0.01, 0.20),
}


def noise_preset(name: str) -> NoiseModel:
    try:
        return NOISE_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown noise preset {name!r}; known: {sorted(NOISE_PRESETS)}") from None


# --- circuit IR ---------------------------------------------------------------


@dataclass(frozen=True)
class Gate1:
    qubit: int
    matrix: np.ndarray


@dataclass(frozen=True)
class Gate2:
    """4x4 gate on ``(site, site + 1)``, local index ``b_site + 2 b_{site+1}``."""

    site: int
    matrix: np.ndarray


@dataclass(frozen=True)
class ControlledPauli:
    """Apply ``P`` where ``control`` is 1; ``control`` must exceed every qubit ``P`` touches."""

    control: int
    string: PauliString


@dataclass(frozen=True)
class Depolarize:
    qubits: tuple


@dataclass
class NoisyCircuit:
    n_qubits: int
    line: tuple = ()
    ops: list = field(default_factory=list)

    def __post_init__(self):
        if not self.line:
            self.line = tuple(range(self.n_qubits))
        if sorted(self.line) != list(range(self.n_qubits)):
            raise ValueError("line must be a permutation of the qubits")
        self._pos = {q: i for i, q in enumerate(self.line)}

    def adjacent(self, a: int, b: int) -> bool:
        return abs(self._pos[a] - self._pos[b]) == 1

    def gate1(self, q: int, u: np.ndarray, noisy: bool = True):
        self.ops.append(Gate1(q, np.asarray(u, dtype=complex)))
        if noisy:
            self.noise(q)

    def gate2(self, site: int, u: np.ndarray):
        self._check_pair(site, site + 1)
        self.ops.append(Gate2(site, np.asarray(u, dtype=complex)))

    def controlled_pauli(self, control: int, string: PauliString):
        if string.n_qubits != self.n_qubits:
            raise ValueError("Pauli string width differs from the circuit")
        if any(q >= control for q in string.support()):
            raise ValueError("the control qubit must be above the controlled string")
        self.ops.append(ControlledPauli(control, string))

    def noise(self, *qubits: int):
        if len(qubits) == 2:
            self._check_pair(*qubits)
        elif len(qubits) != 1:
            raise ValueError("noise events act on one or two qubits")
        self.ops.append(Depolarize(tuple(qubits)))

    def _check_pair(self, a, b):
        if not self.adjacent(a, b):
            raise PlanError(f"two-qubit gate on ({a}, {b}) is not adjacent on the line {self.line}")

    def gate_counts(self) -> dict:
        """Number of 1q and 2q noise locations."""
        one = sum(1 for op in self.ops if isinstance(op, Depolarize) and len(op.qubits) == 1)
        two = sum(1 for op in self.ops if isinstance(op, Depolarize) and len(op.qubits) == 2)
        return {"1q": one, "2q": two}


def block_ops(circ: NoisyCircuit, blk):
    """A TFXY block: Z layer, XX+YY core (two entanglers), Z layer.

    Each Z layer is two 1q gates. Depolarizing noise is covariant under
    unitaries on the qubits it acts on, so the noise of the first Z layer may
    be placed before the block and the 2q noise of the core after the second
    Z layer; the channel is unchanged.
    """
    i = blk.site
    circ.noise(i)
    circ.noise(i + 1)
    circ.gate2(i, block_unitary(blk))
    circ.noise(i, i + 1)
    circ.noise(i, i + 1)
    circ.noise(i)
    circ.noise(i + 1)


# --- Pauli helpers ---------------------------------------------------------------

@lru_cache(maxsize=256)
def _controlled_tables(dim: int, control: int, x: int, z: int):
    idx = np.flatnonzero((np.arange(dim) >> control) & 1)
    src = idx ^ x
    sign = 1.0 - 2.0 * (np.bitwise_count(src & z) & 1)
    return idx, src, sign


def _apply_controlled(rows, control, x, z, ny):
    idx, src, sign = _controlled_tables(rows.shape[1], control, x, z)
    rows[:, idx] = ((1j) ** (ny % 4) * sign) * rows[:, src]


def _pauli_masks(codes, qubits):
    """Per-row masks for Pauli codes (0..3 per qubit) on ``qubits``."""
    xs = np.zeros(codes.shape[0], dtype=np.int64)
    zs = np.zeros_like(xs)
    nys = np.zeros_like(xs)
    for j, q in enumerate(qubits):
        c = codes[:, j]
        bx = (c == 1) | (c == 2)
        bz = (c == 2) | (c == 3)
        xs |= bx.astype(np.int64) << q
        zs |= bz.astype(np.int64) << q
        nys += c == 2
    return xs, zs, nys


# --- trajectories -------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryResult:
    values: np.ndarray  # exact observable per trajectory
    insertions: np.ndarray  # Pauli errors inserted per trajectory

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def stderr(self) -> float:
        n = self.values.size
        return float(self.values.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")


def _initial_rows(psi0, n_qubits, batch):
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (1 << n_qubits,):
        raise ValueError("initial state has the wrong length")
    return np.ascontiguousarray(np.repeat(psi[None, :], batch, axis=0))


def run_trajectories(circ: NoisyCircuit, observable: PauliString, noise: NoiseModel,
                     trajectories: int, rng: np.random.Generator, psi0) -> TrajectoryResult:
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    rows = _initial_rows(psi0, circ.n_qubits, trajectories)
    inserted = np.zeros(trajectories, dtype=np.int64)
    for op in circ.ops:
        if isinstance(op, Gate1):
            kernels.single_qubit_gate(rows, op.qubit, op.matrix)
        elif isinstance(op, Gate2):
            kernels.two_qubit_gate(rows, op.site, op.matrix)
        elif isinstance(op, ControlledPauli):
            _apply_controlled(rows, op.control, *op.string.masks)
        else:
            k = len(op.qubits)
            p = noise.p1 if k == 1 else noise.p2
            hit = rng.random(trajectories) < p
            if not hit.any():
                continue
            # uniform over the 4**k - 1 non-identity Paulis, base-4 digits per qubit
            draw = rng.integers(1, 4**k, size=trajectories)
            draw[~hit] = 0
            codes = np.stack([(draw >> (2 * j)) & 3 for j in range(k)], axis=1)
            xs, zs, nys = _pauli_masks(codes, op.qubits)
            kernels.apply_pauli(rows, xs, zs, nys)
            inserted += hit
    x, z, ny = observable.masks
    vals = complex(observable.coefficient).real * kernels.pauli_expectation(rows, x, z, ny)
    return TrajectoryResult(np.asarray(vals), inserted)


# --- exact channel ------------------------------------------------------------------


def _depolarize_vec(vec, n, qubits, lam):
    """``rho <- (1 - lam) rho + lam (I/d) (x) Tr_qubits(rho)`` in place on the vectorized matrix.

    Row bits of ``rho[a, b]`` are ``0..n-1`` and column bits ``n..2n-1``. The
    flat vector is reshaped so that every involved bit gets its own axis,
    which keeps all the slicing below as views.
    """
    bits = list(qubits) + [q + n for q in qubits]
    order = sorted(bits, reverse=True)
    shape, prev = [], 2 * n
    for b in order:
        shape += [1 << (prev - b - 1), 2]
        prev = b
    shape.append(1 << prev)
    t = vec.reshape(shape)
    axis = {b: 2 * i + 1 for i, b in enumerate(order)}
    d = 1 << len(qubits)
    diag = []
    for a in range(d):
        idx = [slice(None)] * len(shape)
        for j, q in enumerate(qubits):
            idx[axis[q]] = idx[axis[q + n]] = (a >> j) & 1
        diag.append(t[tuple(idx)])
    tr = sum(diag)
    vec *= 1.0 - lam
    for blockv in diag:
        blockv += (lam / d) * tr


def _apply_vec(vec, n, op, noise: NoiseModel, adjoint: bool = False):
    """One operation on a ``(1, 4**n)`` vectorized matrix; ``adjoint`` gives the Heisenberg map."""
    if isinstance(op, (Gate1, Gate2)):
        m = op.matrix.conj().T if adjoint else op.matrix
        apply = kernels.single_qubit_gate if isinstance(op, Gate1) else kernels.two_qubit_gate
        q = op.qubit if isinstance(op, Gate1) else op.site
        apply(vec, q, m)
        apply(vec, q + n, m.conj())
    elif isinstance(op, ControlledPauli):
        # Hermitian and self-inverse, so the adjoint map is the same
        x, z, ny = op.string.masks
        _apply_controlled(vec, op.control, x, z, ny)
        _apply_controlled(vec, op.control + n, x << n, z << n, (-ny) % 4)
    else:
        # Pauli channels are self-adjoint
        k = len(op.qubits)
        p = noise.p1 if k == 1 else noise.p2
        if p:
            _depolarize_vec(vec[0], n, op.qubits, p * 4**k / (4**k - 1))


def evolve_vec(vec: np.ndarray, circ: NoisyCircuit, noise: NoiseModel, adjoint: bool = False):
    """Run ``circ`` on a vectorized operator in place (reversed and adjointed if ``adjoint``)."""
    ops = reversed(circ.ops) if adjoint else circ.ops
    for op in ops:
        _apply_vec(vec, circ.n_qubits, op, noise, adjoint)
    return vec


def state_vec(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi.conj(), psi).reshape(1, -1)


def observable_vec(obs: PauliString) -> np.ndarray:
    """``O[a, b]`` at ``a + 2**n b``: ``O[b ^ x, b] = phase(b)``."""
    n = obs.n_qubits
    x, z, ny = obs.masks
    b = np.arange(1 << n)
    phase = complex(obs.coefficient) * (1j) ** (ny % 4) * (1.0 - 2.0 * (np.bitwise_count(b & z) & 1))
    vec = np.zeros((1, 1 << (2 * n)), dtype=complex)
    vec[0, (b ^ x) + (b << n)] = phase
    return vec


def trace_product(o_vec: np.ndarray, rho_vec: np.ndarray, n: int) -> float:
    """``Tr(O rho)`` from two vectorized matrices."""
    d = 1 << n
    return float(np.sum(o_vec.reshape(d, d) * rho_vec.reshape(d, d).T).real)


def run_channel(circ: NoisyCircuit, observable: PauliString, noise: NoiseModel, psi0) -> float:
    """Exact noisy expectation, Schroedinger picture."""
    if np.shape(psi0) != (1 << circ.n_qubits,):
        raise ValueError("initial state has the wrong length")
    rho = evolve_vec(state_vec(psi0), circ, noise)
    return trace_product(observable_vec(observable), rho, circ.n_qubits)


def dense_channel_oracle(circ: NoisyCircuit, observable: PauliString, noise: NoiseModel,
                         psi0) -> float:
    """Independent reference: explicit Kraus sums on the full density matrix (small N)."""
    n = circ.n_qubits
    dim = 1 << n
    psi = np.asarray(psi0, dtype=complex)
    rho = np.outer(psi, psi.conj())
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
              np.diag([1.0, -1.0])]

    def embed(ops: dict) -> np.ndarray:
        m = np.ones((1, 1))
        for q in reversed(range(n)):
            m = np.kron(m, ops.get(q, np.eye(2)))
        return m

    for op in circ.ops:
        if isinstance(op, Gate1):
            u = embed({op.qubit: op.matrix})
            rho = u @ rho @ u.conj().T
        elif isinstance(op, Gate2):
            u = _two_site_dense(op.matrix, op.site, n)
            rho = u @ rho @ u.conj().T
        elif isinstance(op, ControlledPauli):
            p = op.string.to_matrix()
            proj1 = embed({op.control: np.diag([0.0, 1.0])})
            u = (np.eye(dim) - proj1) + proj1 @ p
            rho = u @ rho @ u.conj().T
        else:
            k = len(op.qubits)
            p = noise.p1 if k == 1 else noise.p2
            acc = (1 - p) * rho
            for code in range(1, 4**k):
                ops = {q: paulis[(code >> (2 * j)) & 3] for j, q in enumerate(op.qubits)}
                m = embed(ops)
                acc = acc + (p / (4**k - 1)) * (m @ rho @ m.conj().T)
            rho = acc
    return float(np.trace(observable.to_matrix() @ rho).real)


def _two_site_dense(u4, site, n):
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    local = ((idx >> site) & 1) + 2 * ((idx >> (site + 1)) & 1)
    rest = idx & ~(3 << site)
    for a in range(4):
        for b in range(4):
            rows = rest | (((a & 1) << site) | ((a >> 1) << (site + 1)))
            cols_mask = local == b
            out[rows[cols_mask], idx[cols_mask]] = u4[a, b]
    return out


# --- method circuits -----------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_H_SDG = np.array([[1, -1j], [1, 1j]], dtype=complex) / math.sqrt(2)  # V^+ Z V = Y


def _rx(theta):
    return np.array([[math.cos(theta), -1j * math.sin(theta)],
                     [-1j * math.sin(theta), math.cos(theta)]], dtype=complex)


def _drive_weights(plan) -> np.ndarray:
    """``w_r`` with ``B = sum_r 2 w_r X~_r`` (``w_r = cos k r`` for the momentum drive)."""
    n = plan.model.n
    w = np.zeros(n)
    for c, s in plan.drive_operator.terms:
        match = [r for r in range(n) if s.letters == jw_x_tilde(r, n).letters]
        if len(match) != 1:
            raise PlanError("noisy runs need a drive built from X~_r terms")
        w[match[0]] += c / 2.0
    return w


def _check_plan(plan):
    if not (isinstance(plan.psi0, str) and plan.psi0 == "vacuum"):
        raise PlanError("noisy method circuits start from the vacuum")
    if not isinstance(plan.drive_field, DeltaPulse):
        raise PlanError("noisy method circuits need a delta-pulse drive")
    if plan.model.boundary != "open":
        raise PlanError("noisy method circuits use compressed open-chain evolution")


@dataclass
class MethodCircuits:
    """Per-variant preparation circuits plus per-time evolution-and-readout circuits.

    The circuit for variant ``v`` at recorded time ``j`` is ``preps[v]``
    followed by ``suffixes[j]``.
    """

    preps: list
    suffixes: list
    observable: PauliString

    def full(self, v: int, j: int) -> NoisyCircuit:
        pre, suf = self.preps[v], self.suffixes[j]
        return NoisyCircuit(pre.n_qubits, pre.line, pre.ops + suf.ops)


def method_parts(plan, method: str, momenta=None) -> MethodCircuits:
    """Noisy circuits of one method for every recorded time.

    * ``momentum``: one variant; the drive is one X rotation per qubit with
      angle ``2 eta w_r`` (on the vacuum the Jordan-Wigner strings act
      trivially to linear order); ``X_0`` is measured.
    * ``position``: one variant per site ``r`` with a single X rotation.
    * ``hadamard``: one variant per site; the ancilla is qubit ``n``, wired
      next to qubit 0. The controlled ``X~_r`` is routed along the line and
      charged ``2r + 1`` two-qubit gates; the closing controlled ``X_0`` is
      one more. The ancilla is read out in the Y basis.

    Evolution is the light-cone-pruned compressed circuit of each time.
    With ``momenta`` the momentum method gets one variant per listed ``k``
    (drive weights ``cos k r``) instead of the plan's own drive.
    """
    _check_plan(plan)
    if method not in ("momentum", "position", "hadamard"):
        raise PlanError(f"unknown noisy method {method!r}")
    n, eta = plan.model.n, plan.eta
    circuits = compressed_circuits(plan.model, plan.dt, plan.steps, plan.sample_every)
    preps, suffixes = [], []
    if method == "hadamard":
        anc = n
        line = (anc,) + tuple(range(n))
        for r in range(n):
            c = NoisyCircuit(n + 1, line)
            c.gate1(anc, _H)
            c.controlled_pauli(anc, _widen(jw_x_tilde(r, n)))
            c.noise(anc, 0)
            for q in range(r):
                c.noise(q, q + 1)
                c.noise(q, q + 1)
            preps.append(c)
        for tri in circuits:
            c = NoisyCircuit(n + 1, line)
            for b in tri.blocks:
                block_ops(c, b)
            c.controlled_pauli(anc, _widen(PauliString("X" + "I" * (n - 1))))
            c.noise(anc, 0)
            c.gate1(anc, _H_SDG)
            suffixes.append(c)
        return MethodCircuits(preps, suffixes, PauliString("I" * n + "Z"))
    if method == "momentum":
        if momenta is None:
            weight_sets = [_drive_weights(plan)]
        else:
            weight_sets = [np.cos(k * np.arange(n)) for k in momenta]
        for weights in weight_sets:
            c = NoisyCircuit(n)
            for r, w in enumerate(weights):
                if abs(w) > 1e-12:
                    c.gate1(r, _rx(2.0 * eta * w))
            preps.append(c)
    else:
        for r in range(n):
            c = NoisyCircuit(n)
            c.gate1(r, _rx(eta))
            preps.append(c)
    for tri in circuits:
        c = NoisyCircuit(n)
        for b in tri.blocks:
            block_ops(c, b)
        suffixes.append(c)
    return MethodCircuits(preps, suffixes, PauliString("X" + "I" * (n - 1)))


def method_circuits(plan, method: str, j: int) -> list[tuple[NoisyCircuit, PauliString]]:
    """Complete circuits and the observable at recorded time ``j``."""
    parts = method_parts(plan, method)
    return [(parts.full(v, j), parts.observable) for v in range(len(parts.preps))]


def _widen(s: PauliString) -> PauliString:
    return PauliString(s.letters + "I", s.coefficient)


def _combine(method: str, plan, values: np.ndarray) -> np.ndarray:
    """Per-circuit expectations ``(circuits, times)`` to ``L(t)``."""
    eta = plan.eta
    if method == "momentum":
        return values[0] / (2.0 * eta)
    w = _drive_weights(plan)
    if method == "position":
        return w @ (values / eta)
    # <Y_anc> = 2 Im <u|v> = Im C_r; the commutator part is 2 Im C_r
    return w @ (2.0 * values)


def _vacuum(n_qubits):
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def channel_means(plan, method: str, noise: NoiseModel, momenta=None) -> np.ndarray:
    """Exact noisy ``<O>`` per variant and recorded time, shape ``(variants, times)``.

    Variants differ only in their preparation, so the observable is carried
    backwards through each time's shared suffix once and contracted with
    every prepared state.
    """
    parts = method_parts(plan, method, momenta)
    nq = parts.preps[0].n_qubits
    rhos = [evolve_vec(state_vec(_vacuum(nq)), c, noise) for c in parts.preps]
    o0 = observable_vec(parts.observable)
    out = np.empty((len(rhos), len(parts.suffixes)))
    for j, suf in enumerate(parts.suffixes):
        o = evolve_vec(o0.copy(), suf, noise, adjoint=True)
        for v, rho in enumerate(rhos):
            out[v, j] = trace_product(o, rho, nq)
    return out


def sample_shots(means: np.ndarray, shots: int, rng: np.random.Generator,
                 batches: int = 1) -> np.ndarray:
    """Estimate each ``<P>`` in [-1, 1] from ``batches x shots`` single-shot outcomes."""
    p = np.clip((1.0 + np.asarray(means)) / 2.0, 0.0, 1.0)
    ups = sum(rng.binomial(shots, p) for _ in range(batches))
    return 2.0 * ups / (shots * batches) - 1.0


@dataclass(frozen=True)
class NoisyTrace:
    trace: ResponseTrace
    variance: np.ndarray


def noisy_run(plan, noise: NoiseModel, trajectories: int | None, shots_per_traj: int,
              seed: int, method: str = "momentum", batches: int = 1) -> NoisyTrace:
    """Noisy ``L_k(t)`` for one method.

    With ``trajectories`` set, each circuit runs as that many Pauli
    trajectories, each sampled ``batches x shots_per_traj`` times (``0``
    keeps exact per-trajectory expectations). With ``trajectories=None`` the
    exact channel mean is sampled with ``batches x shots_per_traj`` single
    shots, i.e. one fresh noise realization per shot.
    """
    rng = make_rng(seed)
    total = shots_per_traj * batches
    if trajectories is None:
        means = channel_means(plan, method, noise)
        if total:
            values = sample_shots(means, shots_per_traj, rng, batches)
            variances = (1.0 - means**2) / total
        else:
            values, variances = means, np.zeros_like(means)
    else:
        parts = method_parts(plan, method)
        nv, nt = len(parts.preps), len(parts.suffixes)
        values, variances = np.empty((nv, nt)), np.empty((nv, nt))
        for j in range(nt):
            for v in range(nv):
                circ = parts.full(v, j)
                res = run_trajectories(circ, parts.observable, noise, trajectories, rng,
                                       _vacuum(circ.n_qubits))
                x = res.values
                if total:
                    x = sample_shots(x, shots_per_traj, rng, batches)
                values[v, j] = x.mean()
                variances[v, j] = x.var(ddof=1) / x.size if x.size > 1 else 0.0
    lk = _combine(method, plan, values)
    if method == "momentum":
        lk_var = variances[0] / (2.0 * plan.eta) ** 2
    else:
        w = _drive_weights(plan)
        scale = 1.0 / plan.eta if method == "position" else 2.0
        lk_var = (w**2 * scale**2) @ variances
    meta = {"method": method, "p1": noise.p1, "p2": noise.p2, "seed": seed,
            "trajectories": trajectories, "shots": total}
    return NoisyTrace(ResponseTrace(plan.times, lk, meta), lk_var)


# --- metrics -------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralMetrics:
    snr: dict
    leakage: dict

    @property
    def median_snr(self) -> float:
        return float(np.median(list(self.snr.values())))

    @property
    def median_leakage(self) -> float:
        return float(np.median(list(self.leakage.values())))


def _value_near(omegas, mag, freqs, window):
    best = 0.0
    for f in freqs:
        sel = np.abs(omegas - f) <= window
        if sel.any():
            best = max(best, float(mag[sel].max()))
    return best


def snr_and_leakage_metrics(spectra: dict, peaks: dict, window: float,
                            band: tuple[float, float] | None = None) -> SpectralMetrics:
    """SNR and cross-momentum leakage per momentum.

    ``spectra[k]`` is a ``Spectrum`` of ``L_k(w)``; ``peaks[k]`` lists the known
    peak frequencies of momentum ``k``. Magnitudes ``|L_k(w)|`` are used.

    * SNR: largest magnitude within ``window`` of an own peak divided by the
      median magnitude over the band with every own-peak window removed.
    * leakage: sum over other momenta of the magnitude found at their peak
      frequencies, divided by the own peak magnitude. Frequencies within
      ``window`` of an own peak are skipped (e.g. ``k`` and ``-k``).
    """
    snr, leak = {}, {}
    for k, spec in spectra.items():
        om = spec.omegas
        mag = np.abs(np.nan_to_num(spec.values))
        inband = spec.valid_mask.copy()
        if band is not None:
            inband &= (om >= band[0]) & (om <= band[1])
        own = list(peaks[k])
        peak = _value_near(om[inband], mag[inband], own, window)
        off = inband.copy()
        for f in own:
            off &= np.abs(om - f) > window
        floor = float(np.median(mag[off])) if off.any() else 0.0
        snr[k] = peak / floor if floor > 0 else float("inf")
        others = []
        for k2, fs in peaks.items():
            if k2 == k:
                continue
            for f in fs:
                if all(abs(f - g) > window for g in own) and all(abs(f - g) > 1e-9 for g in others):
                    others.append(f)
        total = sum(_value_near(om[inband], mag[inband], [f], window / 2) for f in others)
        leak[k] = total / peak if peak > 0 else float("inf")
    return SpectralMetrics(snr, leak)


# --- method comparison -------------------------------------------------------------

METHODS = ("momentum", "position", "hadamard")


def comparison_means(plans: dict, noise: NoiseModel) -> dict:
    """Exact noisy circuit means for all three methods.

    ``plans`` maps each momentum ``k`` to its plan (same model and time grid).
    Position and Hadamard circuits do not depend on ``k``; they are run once
    and recombined per momentum later.
    """
    ks = list(plans)
    base = plans[ks[0]]
    return {"momentum": channel_means(base, "momentum", noise, momenta=ks),
            "position": channel_means(base, "position", noise),
            "hadamard": channel_means(base, "hadamard", noise)}


@dataclass
class MethodComparison:
    seeds: list
    metrics: list  # one {method: SpectralMetrics} per seed

    def median_snr(self, method: str) -> list:
        return [m[method].median_snr for m in self.metrics]

    def median_leakage(self, method: str) -> list:
        return [m[method].median_leakage for m in self.metrics]

    def ordering_fraction(self, order=METHODS) -> float:
        """Share of seeds whose median SNRs strictly decrease along ``order``."""
        hits = 0
        for m in self.metrics:
            vals = [m[x].median_snr for x in order]
            hits += all(a > b for a, b in zip(vals, vals[1:]))
        return hits / len(self.metrics)

    def leakage_fraction(self, worse: str = "hadamard", better: str = "momentum") -> float:
        hits = sum(m[worse].median_leakage > m[better].median_leakage for m in self.metrics)
        return hits / len(self.metrics)


def compare_methods(plans: dict, means: dict, peaks: dict, shots: int, batches: int,
                    seeds, tau: float, window: float, band=None, pad: int = 4) -> MethodComparison:
    """Sample shots from ``means`` once per seed and score every method's spectra."""
    ks = list(plans)
    out = []
    for seed in seeds:
        rng = make_rng(seed)
        per = {}
        for method in METHODS:
            vals = sample_shots(means[method], shots, rng, batches)
            specs = {}
            for i, k in enumerate(ks):
                plan = plans[k]
                v = vals[i:i + 1] if method == "momentum" else vals
                trace = ResponseTrace(plan.times, _combine(method, plan, v))
                specs[k] = fourier_transform(apply_damping(trace, tau), pad=pad)
            per[method] = snr_and_leakage_metrics(specs, peaks, window, band)
        out.append(per)
    return MethodComparison(list(seeds), out)
