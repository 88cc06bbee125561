"""Drive, evolve, measure.

Every method here follows the same loop: prepare ``psi0``, apply the
perturbation ``h(t) B``, evolve under ``H0`` and record an observable on a
uniform time grid. Runs are batched: each row of a ``(batch, 2**n)`` array is
an independent experiment, which is how the static baseline, the
per-site runs of the position-selective method and the Hadamard-test
circuits share one pass over the time grid.

Normalizations used throughout (``eta`` is the kick area):

* ``greens_via_parity`` returns ``A(t) / (2 eta s)``. For the momentum
  drive ``B = sum_r 2 cos(k r) X~_r`` this is
  ``L_k(t) = sum_r cos(k r) 2 Re G^R_{0r}(t)``.
* ``position_selective_greens`` returns ``L(r, t) = A_r(t) / eta`` for
  ``B = X~_r``, so ``L_k = sum_r cos(k r) L(r, t)``.
* ``hadamard_test_greens`` returns ``C_r(t) = <X_0(t) X~_r>``; the
  commutator part is ``2 Im C_r``.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .covariance import CorrelationMatrix, evolve_correlations, ground_state_correlations
from .fermion import DriveOperator, jw_x_tilde, position_drive
from .fields import DeltaPulse, GaussianSinusoid, Sampled
from .signal import ResponseTrace
from .ssh import SSHParams, build_ssh, exact_propagator, hamiltonian_matrix, trotter_step
from .statevector import PauliString, make_rng
from .tfxy import BlockCircuit, Triangle, apply_blocks, lightcone_prune, trotter_blocks

METHODS = ("bosonic", "auxiliary_parity", "post_selection", "hadamard_test", "position_selective")
BACKENDS = ("statevector", "compressed", "covariance")
PROPAGATORS = ("trotter", "exact")


class PlanError(ValueError):
    """The plan cannot be run as configured."""


@dataclass(frozen=True)
class ExperimentPlan:
    model: SSHParams
    drive_operator: DriveOperator
    drive_field: DeltaPulse | GaussianSinusoid | Sampled
    observable: PauliString | None = None
    t_max: float = 10.0
    dt: float = 0.05
    psi0: object = "vacuum"
    method: str = "bosonic"
    backend: str = "statevector"
    propagator: str = "trotter"
    exact_drive: bool = False
    shots: int = 0
    seed: int = 0
    sample_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise PlanError(f"unknown method {self.method!r}")
        if self.backend not in BACKENDS:
            raise PlanError(f"unknown backend {self.backend!r}")
        if self.propagator not in PROPAGATORS:
            raise PlanError(f"unknown propagator {self.propagator!r}")
        if self.dt <= 0 or self.t_max < 0:
            raise PlanError("need dt > 0 and t_max >= 0")
        if abs(self.t_max / self.dt - round(self.t_max / self.dt)) > 1e-9:
            raise PlanError(f"t_max={self.t_max} is not a multiple of dt={self.dt}")
        if self.sample_every < 1 or self.steps % self.sample_every:
            raise PlanError("sample_every must divide the number of steps")
        if self.shots < 0:
            raise PlanError("shots must be >= 0")
        if self.drive_operator.n_qubits != self.model.n:
            raise PlanError("drive operator and model act on different qubit counts")

    @property
    def steps(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(0, self.steps + 1, self.sample_every)

    @property
    def eta(self) -> float:
        if isinstance(self.drive_field, DeltaPulse):
            return self.drive_field.eta
        raise PlanError("this quantity needs a delta-pulse drive")

    def with_(self, **kw) -> "ExperimentPlan":
        return replace(self, **kw)

    def scaled(self, s: float) -> "ExperimentPlan":
        return replace(self, drive_field=scale_field(self.drive_field, s))

    def plan_hash(self) -> str:
        text = "|".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def scale_field(f, s: float):
    if isinstance(f, DeltaPulse):
        return DeltaPulse(f.eta * s)
    if isinstance(f, GaussianSinusoid):
        return replace(f, amplitude=f.amplitude * s)
    return Sampled(tuple(v * s for v in f.values), f.dt)


# --- initial states ----------------------------------------------------------

def slater_state(n: int, orbitals: np.ndarray) -> np.ndarray:
    """``prod_l (sum_r phi_l(r) c_r^+) |0>`` as a dense statevector."""
    from .fermion import annihilation_matrix

    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    cdag = [annihilation_matrix(r, n).conj().T for r in range(n)]
    for phi in np.asarray(orbitals).T:
        psi = sum(phi[r] * (cdag[r] @ psi) for r in range(n))
    return psi / np.linalg.norm(psi)


def initial_state(params: SSHParams, spec) -> np.ndarray:
    n = params.n
    if isinstance(spec, str):
        if spec == "vacuum":
            psi = np.zeros(1 << n, dtype=complex)
            psi[0] = 1.0
            return psi
        if spec == "ground":
            from .oracle import ground_state_orbitals

            _, v, nf = ground_state_orbitals(params)
            return slater_state(n, v[:, :nf])
        raise PlanError(f"unknown initial state {spec!r}")
    if isinstance(spec, (int, np.integer)):
        if not 0 <= spec < 1 << n:
            raise PlanError(f"basis index {spec} out of range")
        psi = np.zeros(1 << n, dtype=complex)
        psi[spec] = 1.0
        return psi
    psi = np.asarray(spec, dtype=complex).ravel()
    if psi.shape != (1 << n,):
        raise PlanError("initial amplitudes have the wrong length")
    return psi / np.linalg.norm(psi)


def initial_correlations(params: SSHParams, spec) -> CorrelationMatrix:
    from .ssh import single_particle_matrix

    n = params.n
    if spec == "vacuum":
        return CorrelationMatrix(np.zeros((n, n), dtype=complex))
    if spec == "ground":
        return ground_state_correlations(single_particle_matrix(params))
    if isinstance(spec, (int, np.integer)):
        occ = [(int(spec) >> r) & 1 for r in range(n)]
        return CorrelationMatrix(np.diag(np.array(occ, dtype=complex)))
    raise PlanError("covariance backend needs vacuum, ground or a basis index")


# --- statevector dynamics ----------------------------------------------------

class _Dynamics:
    """One ``dt`` of ``H0`` on rows of width ``2**(n + extra)``."""

    def __init__(self, params: SSHParams, dt: float, propagator: str, extra: int = 0):
        self.params, self.dt, self.propagator, self.extra = params, dt, propagator, extra
        if propagator == "trotter":
            self.rots = [(*r.string.masks, r.angle) for r in trotter_step(params, dt).rotations]
        else:
            u = exact_propagator(params, dt)
            if extra:
                u = np.kron(np.eye(1 << extra), u)
            self.ut = np.ascontiguousarray(u.T)

    def step(self, rows):
        if self.propagator == "trotter":
            for x, z, ny, a in self.rots:
                kernels.pauli_rotation(rows, x, z, ny, [a])
        else:
            rows[...] = rows @ self.ut


def apply_drive(rows, drive: DriveOperator, area: float, exact: bool = False):
    """``exp(-i area B)`` on every row.

    With ``exact=False`` the terms are applied as successive rotations of
    angle ``area * coeff`` (a single lumped Trotter step). With
    ``exact=True`` pairwise-anticommuting terms use
    ``exp(-i a B) = cos(a|c|) - i sin(a|c|) B / |c|``, and commuting
    terms need no splitting at all.
    """
    if area == 0.0:
        return
    coeffs = drive.coefficients
    if exact and len(drive.terms) > 1 and drive.pairwise_anticommuting():
        norm = float(np.sqrt(np.sum(coeffs**2)))
        bpsi = np.zeros_like(rows)
        for c, s in drive.terms:
            if c == 0.0:
                continue
            tmp = rows.copy()
            x, z, ny = s.masks
            kernels.apply_pauli(tmp, [x] * len(tmp), [z] * len(tmp), [ny] * len(tmp))
            bpsi += c * tmp
        rows *= math.cos(area * norm)
        rows -= (1j * math.sin(area * norm) / norm) * bpsi
        return
    for c, s in drive.terms:
        if c != 0.0:
            x, z, ny = s.masks
            kernels.pauli_rotation(rows, x, z, ny, [area * c])


def _field_area(field_, t_mid: float, dt: float) -> float:
    return float(field_(t_mid)) * dt


def _joint_step(params, drive, h):
    """Dense ``exp(-i (H0 + h B) dt)``-generator pieces, cached per model."""
    return hamiltonian_matrix(params) + h * drive.to_matrix()


def _run_rows(plan: ExperimentPlan, rows: np.ndarray, drives: list, measure, extra: int = 0,
              pre_evolve=None):
    """Drive and evolve every row; call ``measure(rows)`` at each recorded time.

    ``drives[i]`` is the drive operator of row ``i`` or ``None`` (undriven).
    """
    dyn = _Dynamics(plan.model, plan.dt, plan.propagator, extra)
    f = plan.drive_field
    if isinstance(f, DeltaPulse):
        for i, d in enumerate(drives):
            if d is not None:
                apply_drive(rows[i:i + 1], d, f.eta, plan.exact_drive)
    if pre_evolve is not None:
        pre_evolve(rows)
    out = [measure(rows)]
    timed = not isinstance(f, DeltaPulse)
    if timed and plan.propagator == "exact" and extra:
        raise PlanError("time-dependent drives with ancillas need the trotter propagator")
    for j in range(plan.steps):
        if timed:
            area = _field_area(f, (j + 0.5) * plan.dt, plan.dt)
            if plan.propagator == "exact":
                for i, d in enumerate(drives):
                    h = area / plan.dt if d is not None else 0.0
                    u = _expm_h(plan.model, d, h, plan.dt)
                    rows[i] = u @ rows[i]
            else:
                for i, d in enumerate(drives):
                    if d is not None:
                        apply_drive(rows[i:i + 1], d, area, plan.exact_drive)
                dyn.step(rows)
        else:
            dyn.step(rows)
        if (j + 1) % plan.sample_every == 0:
            out.append(measure(rows))
    return np.array(out)


def _expm_h(params, drive, h, dt):
    if drive is None or h == 0.0:
        return exact_propagator(params, dt)
    w, v = np.linalg.eigh(_joint_step(params, drive, h))
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _measure_pauli(obs: PauliString):
    x, z, ny = obs.masks
    coef = complex(obs.coefficient).real

    def measure(rows):
        return coef * kernels.pauli_expectation(rows, x, z, ny)

    return measure


def _shot_estimate(values: np.ndarray, shots: int, rng) -> np.ndarray:
    """Replace exact Pauli expectations in [-1, 1] by ``shots``-sample means."""
    p = np.clip((1.0 + values) / 2.0, 0.0, 1.0)
    return 2.0 * rng.binomial(shots, p) / shots - 1.0


# --- compressed backend -------------------------------------------------------

@lru_cache(maxsize=8)
def compressed_circuits(params: SSHParams, dt: float, steps: int, sample_every: int):
    """Pruned triangles for ``U(t_j)``, one per recorded time."""
    if params.boundary != "open":
        raise PlanError("the compressed backend supports open chains only")
    tri = Triangle(params.n)
    step = trotter_blocks(params, dt).blocks
    out = [BlockCircuit(params.n, [])]
    for j in range(steps):
        for blk in step:
            tri.absorb(blk)
        if (j + 1) % sample_every == 0:
            out.append(lightcone_prune(tri.circuit()))
    return tuple(out)


def _run_rows_compressed(plan, rows, drives, measure):
    if not isinstance(plan.drive_field, DeltaPulse):
        raise PlanError("the compressed backend needs a delta-pulse drive")
    for i, d in enumerate(drives):
        if d is not None:
            apply_drive(rows[i:i + 1], d, plan.drive_field.eta, plan.exact_drive)
    circuits = compressed_circuits(plan.model, plan.dt, plan.steps, plan.sample_every)
    out = []
    for circ in circuits:
        work = rows.copy()
        apply_blocks(work, circ)
        out.append(measure(work))
    return np.array(out)


def _run(plan, rows, drives, measure):
    if plan.backend == "compressed":
        return _run_rows_compressed(plan, rows, drives, measure)
    return _run_rows(plan, rows, drives, measure)


# --- bosonic -----------------------------------------------------------------

def evolve_and_measure(plan: ExperimentPlan) -> ResponseTrace:
    """``<A(t)>`` minus the undriven baseline."""
    if plan.backend == "covariance":
        return _evolve_covariance(plan)
    if plan.observable is None:
        raise PlanError("evolve_and_measure needs an observable")
    psi = initial_state(plan.model, plan.psi0)
    rows = np.ascontiguousarray(np.stack([psi, psi]))
    vals = _run(plan, rows, [plan.drive_operator, None], _measure_pauli(plan.observable))
    driven, base = vals[:, 0], vals[:, 1]
    if plan.shots:
        rng = make_rng(plan.seed)
        driven = _shot_estimate(driven / _obs_scale(plan.observable), plan.shots, rng) * _obs_scale(
            plan.observable
        )
    return ResponseTrace(plan.times, driven - base, _meta(plan))


def evolve_and_measure_many(plan: ExperimentPlan, observables) -> np.ndarray:
    """Baseline-subtracted ``<A_j(t)>`` for several observables in one pass.

    Returns shape ``(times, len(observables))``. Exact expectations only.
    """
    if plan.backend == "covariance":
        raise PlanError("use covariance_densities for the covariance backend")
    obs = list(observables)
    if not obs:
        raise PlanError("no observables given")
    measures = [_measure_pauli(o) for o in obs]
    psi = initial_state(plan.model, plan.psi0)
    rows = np.ascontiguousarray(np.stack([psi, psi]))
    vals = _run(plan, rows, [plan.drive_operator, None],
                lambda r: np.stack([m(r) for m in measures], axis=-1))
    return vals[:, 0, :] - vals[:, 1, :]


def _obs_scale(obs):
    return abs(complex(obs.coefficient).real) or 1.0


def _meta(plan, **extra):
    return {"plan_hash": plan.plan_hash(), "shots": plan.shots, **extra}


def _density_profile(drive: DriveOperator, n: int) -> np.ndarray:
    """Site potential ``v`` with ``B = const + sum_r v_r n_r``."""
    if not drive.is_quadratic_density():
        raise PlanError(
            "the covariance backend accepts only site-potential (I/Z) drives; "
            "use the statevector backend for drives linear in fermion operators"
        )
    v = np.zeros(n)
    for c, s in drive.terms:
        zs = [q for q, ch in enumerate(s.letters) if ch == "Z"]
        if len(zs) > 1:
            raise PlanError("covariance backend drives must be single-site Z terms")
        if zs:
            v[zs[0]] += -2.0 * c  # Z_r = 1 - 2 n_r
    return v


def _evolve_covariance(plan: ExperimentPlan) -> ResponseTrace:
    obs = plan.observable
    if obs is None or set(obs.letters) - {"I", "Z"} or obs.weight != 1:
        raise PlanError("covariance backend measures single-site Z observables")
    site = obs.support()[0]
    coef = complex(obs.coefficient).real
    dens = covariance_densities(plan)
    base = covariance_densities(plan.scaled(0.0))
    vals = coef * (-2.0) * (dens[:, site] - base[:, site])
    return ResponseTrace(plan.times, vals, _meta(plan))


def covariance_densities(plan: ExperimentPlan) -> np.ndarray:
    """``<n_r(t)>`` on the plan's time grid, shape ``(times, n)``."""
    from .ssh import single_particle_matrix

    n = plan.model.n
    profile = _density_profile(plan.drive_operator, n)
    m = single_particle_matrix(plan.model)
    corr = initial_correlations(plan.model, plan.psi0)
    f = plan.drive_field
    if isinstance(f, DeltaPulse):
        recs = evolve_correlations(corr, m, plan.dt, plan.steps, profile=profile, kick=f.eta)
    else:
        recs = evolve_correlations(corr, m, plan.dt, plan.steps, field=f, profile=profile)
    return np.array(recs)[:: plan.sample_every]


def statevector_densities(plan: ExperimentPlan) -> np.ndarray:
    """Same quantity from the statevector backend (for cross-validation)."""
    psi = initial_state(plan.model, plan.psi0)
    rows = np.ascontiguousarray(psi[None, :])
    n = plan.model.n
    occ = np.array([(np.arange(1 << n) >> r) & 1 for r in range(n)], dtype=float)

    def measure(r):
        return occ @ (np.abs(r[0]) ** 2)

    return _run_rows(plan, rows, [plan.drive_operator], measure)


# --- fermionic methods ------------------------------------------------------

def _check_parity(plan) -> int:
    terms, _ = build_ssh(plan.model)
    parity = PauliString("Z" * plan.model.n)
    if not all(s.commutes_with(parity) for _, s in terms):
        raise PlanError("H0 does not conserve fermion parity")
    psi = initial_state(plan.model, plan.psi0)
    x, z, ny = parity.masks
    s = float(kernels.pauli_expectation(np.ascontiguousarray(psi[None, :]), x, z, ny)[0])
    if abs(abs(s) - 1.0) > 1e-9:
        raise PlanError("initial state has no definite parity (s = 0)")
    return int(round(s))


def _is_vacuum(plan):
    return isinstance(plan.psi0, str) and plan.psi0 == "vacuum"


def greens_via_parity(plan: ExperimentPlan, measure_y: bool = False) -> ResponseTrace:
    """``L(t) = A(t) / (2 eta s)``.

    ``X_0 P = -i Y_0 Z_1...Z_{n-1}``, so the parity-dressed observable is the
    Hermitian string ``X_0 Z_1 ... Z_{n-1}`` (from ``Y_0 P``). On the vacuum
    the tail string acts trivially to the order kept, and plain ``X_0`` is
    measured. With ``measure_y`` the ``Y_0`` channel is added as the
    imaginary part.
    """
    s = _check_parity(plan)
    n = plan.model.n
    tail = "" if _is_vacuum(plan) else "Z" * (n - 1)
    pad = "" if tail else "I" * (n - 1)
    traces = []
    for letter in ("X", "Y") if measure_y else ("X",):
        obs = PauliString(letter + (tail or pad))
        tr = evolve_and_measure(replace(plan, observable=obs, method="bosonic"))
        traces.append(tr.values / (2.0 * plan.eta * s))
    vals = traces[0] if not measure_y else traces[0] + 1j * traces[1]
    return ResponseTrace(plan.times, vals, _meta(plan, method="auxiliary_parity", parity=s))


@dataclass(frozen=True)
class PostSelectionRecord:
    """Sector probabilities after the basis rotation, one entry per time."""

    times: np.ndarray
    n_particles: int
    p_minus: np.ndarray
    p_same: np.ndarray
    p_plus: np.ndarray
    n1_same: np.ndarray
    axis: str

    @property
    def combo_a(self) -> np.ndarray:
        """``P_{N-1} + P_{N+1}``."""
        return self.p_minus + self.p_plus

    @property
    def combo_b(self) -> np.ndarray:
        """``<n_1>_N + P_{N+1}``."""
        return self.n1_same + self.p_plus


def _definite_number(psi, n):
    w = np.bitwise_count(np.arange(1 << n))
    p = np.abs(psi) ** 2
    sectors = np.bincount(w, weights=p, minlength=n + 1)
    big = np.flatnonzero(sectors > 1e-12)
    if big.size != 1 or abs(sectors[big[0]] - 1) > 1e-9:
        raise PlanError("initial state has no definite particle number")
    return int(big[0])


def greens_via_postselection(plan: ExperimentPlan, rotation_axis: str = "y") -> PostSelectionRecord:
    """Partial norms of the fixed-number sectors after a pi/4 rotation of qubit 0.

    For the y axis ``exp(-i pi/4 Y_0)`` is applied, for the x axis
    ``exp(+i pi/4 X_0)``. Probabilities are exact when ``shots == 0`` and
    otherwise estimated from sampled bitstrings.
    """
    if rotation_axis not in ("x", "y"):
        raise PlanError("rotation_axis must be 'x' or 'y'")
    n = plan.model.n
    if not _conserves_number(build_ssh(plan.model)[0]):
        raise PlanError("H0 does not conserve particle number")
    psi = initial_state(plan.model, plan.psi0)
    nn = _definite_number(psi, n)
    weight = np.bitwise_count(np.arange(1 << n))
    bit0 = (np.arange(1 << n) & 1).astype(bool)
    rot = PauliString(("Y" if rotation_axis == "y" else "X") + "I" * (n - 1))
    angle = math.pi / 4 if rotation_axis == "y" else -math.pi / 4
    rx, rz, rny = rot.masks
    rng = make_rng(plan.seed)

    def measure(rows):
        work = rows.copy()
        kernels.pauli_rotation(work, rx, rz, rny, [angle])
        p = np.abs(work[0]) ** 2
        if plan.shots:
            from .statevector import sample_indices

            idx = sample_indices(p, plan.shots, int(rng.integers(2**63)))
            p = np.bincount(idx, minlength=p.size) / plan.shots
        return np.array([
            p[weight == nn - 1].sum() if nn > 0 else 0.0,
            p[weight == nn].sum(),
            p[weight == nn + 1].sum(),
            p[(weight == nn) & bit0].sum(),
        ])

    vals = _run(plan, np.ascontiguousarray(psi[None, :]), [plan.drive_operator], measure)
    return PostSelectionRecord(plan.times, nn, vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3],
                               rotation_axis)


def _conserves_number(terms) -> bool:
    """Z-only strings, plus XX/YY hopping strings that come in equal-weight pairs."""
    pending: dict[tuple, float] = {}
    for c, s in terms:
        if set(s.letters) <= {"I", "Z"}:
            continue
        core = s.letters.strip("I")
        if len(core) < 2 or core[0] != core[-1] or core[0] not in "XY" or set(core[1:-1]) - {"Z"}:
            return False
        key = (s.letters.replace("Y", "X"),)
        pending[key] = pending.get(key, 0.0) + (c if core[0] == "X" else -c)
    return all(abs(v) < 1e-12 for v in pending.values())


@dataclass(frozen=True)
class RecoveredGreens:
    retarded: np.ndarray
    greater: np.ndarray
    lesser: np.ndarray


def solve_greens(rec: PostSelectionRecord, eta: float) -> RecoveredGreens:
    """Linear solve of the sector combinations for one quadrature of G^R, G>, G<.

    The y-axis record yields real parts and the x-axis record imaginary
    parts, each contracted with the drive coefficients ``sum_m a_m G_{0m}``.
    """
    a = rec.combo_a - 0.5
    b = rec.combo_b - 0.5
    return RecoveredGreens(a / eta, (a + b) / (2 * eta), (b - a) / (2 * eta))


def lk_from_postselection(plan: ExperimentPlan) -> np.ndarray:
    """``L_k(t)`` recovered from the y-axis sector norms: ``(combo_a - 1/2) / eta``."""
    rec = greens_via_postselection(plan, "y")
    return solve_greens(rec, plan.eta).retarded


def position_selective_greens(plan: ExperimentPlan) -> np.ndarray:
    """``L(r, t) = A_r(t) / eta`` with ``B = X~_r``; shape ``(n, times)``."""
    n = plan.model.n
    psi = initial_state(plan.model, plan.psi0)
    rows = np.ascontiguousarray(np.repeat(psi[None, :], n + 1, axis=0))
    drives = [position_drive(r, n) for r in range(n)] + [None]
    obs = PauliString("X" + "I" * (n - 1))
    vals = _run(plan, rows, drives, _measure_pauli(obs))
    driven, base = vals[:, :n], vals[:, n:]
    if plan.shots:
        rng = make_rng(plan.seed)
        driven = _shot_estimate(driven, plan.shots, rng)
    return ((driven - base) / plan.eta).T


def fourier_combine(l_rt: np.ndarray, k: float) -> np.ndarray:
    """``sum_r cos(k r) L(r, t)``."""
    n = l_rt.shape[0]
    return np.cos(k * np.arange(n)) @ l_rt


def hadamard_test_greens(plan: ExperimentPlan) -> np.ndarray:
    """``C_r(t) = <X_0(t) X~_r>`` from the ancilla, shape ``(n, times)`` complex.

    The ancilla is qubit ``n``. It starts in ``|+>``, controls ``X~_r``
    before the evolution and ``X_0`` after it; ``<X_anc> + i <Y_anc>``
    equals the correlator. The evolution itself is uncontrolled.
    """
    n = plan.model.n
    if plan.backend == "covariance":
        raise PlanError("the Hadamard test needs a statevector backend")
    psi = initial_state(plan.model, plan.psi0)
    dim = 1 << n
    rows = np.zeros((n, 2 * dim), dtype=complex)
    for r in range(n):
        rows[r, :dim] = psi / math.sqrt(2)
        x, z, ny = jw_x_tilde(r, n).masks
        tmp = np.ascontiguousarray(psi[None, :].copy())
        kernels.apply_pauli(tmp, [x], [z], [ny])
        rows[r, dim:] = tmp[0] / math.sqrt(2)
    x0 = PauliString("X" + "I" * n).masks

    def measure(rws):
        work = rws.copy()
        half = np.ascontiguousarray(work[:, dim:])
        kernels.apply_pauli(half, [x0[0]] * n, [0] * n, [0] * n)
        u, v = work[:, :dim], half
        return 2.0 * np.einsum("ri,ri->r", u.conj(), v)

    if plan.backend == "compressed":
        circuits = compressed_circuits(plan.model, plan.dt, plan.steps, plan.sample_every)
        out = []
        for circ in circuits:
            w = np.ascontiguousarray(rows.reshape(2 * n, dim).copy())
            apply_blocks(w, circ)
            out.append(measure(w.reshape(n, 2 * dim)))
        vals = np.array(out)
    else:
        plan0 = replace(plan, drive_field=DeltaPulse(0.0))
        vals = _run_rows(plan0, rows, [None] * n, measure, extra=1)
    if plan.shots:
        rng = make_rng(plan.seed)
        re = _shot_estimate(vals.real, plan.shots, rng)
        im = _shot_estimate(vals.imag, plan.shots, rng)
        vals = re + 1j * im
    return vals.T


def lk_from_hadamard(c_rt: np.ndarray, k: float) -> np.ndarray:
    return fourier_combine(2.0 * c_rt.imag, k)


# --- linearity ---------------------------------------------------------------

@dataclass(frozen=True)
class LinearityReport:
    scales: tuple
    nonlinearity: dict
    max_nonlinearity: float
    threshold: float
    passed: bool


def linearity_check(plan: ExperimentPlan, scales, threshold: float = 0.02,
                    runner=None) -> LinearityReport:
    """Compare ``A_s(t)`` with ``s A_1(t)``; relative to ``max |A_s|``."""
    scales = tuple(float(s) for s in scales)
    if len(scales) < 2:
        raise PlanError("need at least two scales")
    run = runner or (lambda p: evolve_and_measure(p).values)
    ref_s = scales[0]
    ref = run(plan.scaled(ref_s)) / ref_s
    nonlin = {}
    for s in scales[1:]:
        a = run(plan.scaled(s))
        top = np.abs(a).max()
        nonlin[s] = float(np.abs(a - s * ref).max() / top) if top > 0 else 0.0
    worst = max(nonlin.values())
    return LinearityReport(scales, nonlin, worst, threshold, worst < threshold)


def linearity_threshold(plan: ExperimentPlan, lo: float, hi: float, threshold: float = 0.02,
                        iterations: int = 30, runner=None) -> float:
    """Bisect the kick area at which scales ``{1, 2}`` cross ``threshold``."""

    def bad(eta):
        p = replace(plan, drive_field=DeltaPulse(eta))
        return not linearity_check(p, (1.0, 2.0), threshold, runner).passed

    if bad(lo) or not bad(hi):
        raise PlanError("threshold is not bracketed by [lo, hi]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if bad(mid) else (mid, hi)
    return 0.5 * (lo + hi)


# --- polarizability -----------------------------------------------------------

def polarizability_run(params: SSHParams, site: int, drive_field, t_max: float, dt: float,
                       backend: str = "covariance", psi0="ground",
                       odd_part: bool = False) -> ResponseTrace:
    """``delta n(r, t)`` for all sites after driving the density on ``site``.

    The full ``(times, n)`` array is in ``metadata['delta_n']``; the trace
    values hold the driven site. With ``odd_part`` the response is
    ``(n[+h] - n[-h]) / 2``, which cancels every even order in the field and
    leaves the linear term with a cubic remainder.
    """
    from .fermion import density_operator

    if params.delta != 0.0:
        warnings.warn("polarizability runs are intended for delta = 0", stacklevel=2)
    plan = ExperimentPlan(params, density_operator(site, params.n), drive_field,
                          PauliString("I" * site + "Z" + "I" * (params.n - site - 1)),
                          t_max=t_max, dt=dt, psi0=psi0, backend=backend,
                          propagator="exact")
    dens = covariance_densities if backend == "covariance" else statevector_densities
    if odd_part:
        dn = 0.5 * (dens(plan) - dens(plan.scaled(-1.0)))
    else:
        dn = dens(plan) - dens(plan.scaled(0.0))
    return ResponseTrace(plan.times, dn[:, site], {"delta_n": dn, "site": site,
                                                   "odd_part": odd_part,
                                                   "plan_hash": plan.plan_hash()})


def charge_structure(delta_n: np.ndarray, site: int, q: float) -> np.ndarray:
    """``sum_r e^{-iq(r - r')} delta n(r, t)``."""
    r = np.arange(delta_n.shape[1])
    return delta_n @ np.exp(-1j * q * (r - site))
