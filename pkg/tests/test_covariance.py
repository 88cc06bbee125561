import numpy as np
import pytest

from linres.covariance import (
    CorrelationMatrix,
    evolve_correlations,
    from_statevector,
    ground_state_correlations,
)
from linres.engine import ExperimentPlan, covariance_densities, initial_state, statevector_densities
from linres.fermion import density_operator
from linres.fields import GaussianSinusoid
from linres.ssh import SSHParams, exact_propagator, single_particle_matrix
from linres.statevector import PauliString


def test_empty_band_gives_zero_correlations():
    m = single_particle_matrix(SSHParams(6, 1.0, 0.3, -50.0))  # onsite +50
    assert np.all(ground_state_correlations(m).C == 0)


@pytest.mark.parametrize("hop", [1.0, -1.0])
def test_single_bond_half_filling(hop):
    m = np.array([[0.0, -hop], [-hop, 0.0]])
    c = ground_state_correlations(m).C
    s = np.sign(hop) * 0.5
    np.testing.assert_allclose(c, [[0.5, s], [s, 0.5]], atol=1e-14)


def test_trace_counts_negative_levels(rng):
    a = rng.normal(size=(7, 7))
    m = a + a.T
    cm = ground_state_correlations(m)
    assert cm.particle_number() == pytest.approx(np.count_nonzero(np.linalg.eigvalsh(m) < 0))


def test_mu_shift_matches_explicit_diagonal():
    m = single_particle_matrix(SSHParams(8, 1.0, 0.2, 0.0))
    a = ground_state_correlations(m - 0.7 * np.eye(8)).C
    b = ground_state_correlations(m, mu_already_included=False, mu=0.7).C
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_zero_modes_are_filled_reproducibly():
    # open 3-site chain with no onsite term has an exact zero mode
    m = single_particle_matrix(SSHParams(3, 1.0, 0.0, 0.0))
    a = ground_state_correlations(m).C
    b = ground_state_correlations(m.copy()).C
    np.testing.assert_array_equal(a, b)
    assert np.trace(a).real == pytest.approx(1.0)


def test_rejects_non_symmetric_matrix():
    with pytest.raises(ValueError):
        ground_state_correlations(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_stationary_without_drive():
    m = single_particle_matrix(SSHParams(10, 1.0, 0.3, 0.5, boundary="periodic"))
    cm = ground_state_correlations(m)
    dens = np.array(evolve_correlations(cm, m, 0.1, 200))
    assert np.abs(dens - dens[0]).max() < 1e-12


def test_full_matrix_matches_statevector_convention():
    p = SSHParams(4, 1.0, 0.3, 0.2)
    psi0 = initial_state(p, 0b0101)
    m = single_particle_matrix(p)
    recs = evolve_correlations(from_statevector(psi0, 4), m, 0.25, 8,
                               record=lambda cm: cm.C.copy())
    for j, c in enumerate(recs):
        psi = exact_propagator(p, 0.25 * j) @ psi0
        assert np.abs(c - from_statevector(psi, 4).C).max() < 1e-12


def test_driven_densities_match_statevector():
    p = SSHParams(4, 1.0, 0.2, 0.4)
    field = GaussianSinusoid.centered(0.3, 1.5, 0.625)
    plan = ExperimentPlan(p, density_operator(1, 4), field, PauliString("IZII"),
                          t_max=6.0, dt=0.05, psi0=0b0011, propagator="exact")
    a = covariance_densities(plan)
    b = statevector_densities(plan)
    assert np.abs(a - b).max() < 1e-8
    assert np.abs(a - a[0]).max() > 1e-3


def test_hermiticity_and_spectrum_survive_many_steps():
    p = SSHParams(8, 1.0, 0.3, 0.5)
    m = single_particle_matrix(p)
    field = GaussianSinusoid(0.2, 1.0, 1e6, 0.0)  # effectively a slow cosine, never zero
    recs = evolve_correlations(ground_state_correlations(m), m, 0.01, 10_000, field=field,
                               site=3, record=lambda cm: cm.C.copy())
    c = recs[-1]
    assert np.abs(c - c.conj().T).max() < 1e-10
    ev = np.linalg.eigvalsh(c)
    assert ev.min() > -1e-10 and ev.max() < 1 + 1e-10
    assert np.trace(c).real == pytest.approx(np.trace(recs[0]).real, abs=1e-10)


def test_particle_number_and_energy_conserved():
    p = SSHParams(12, 1.0, 0.4, 0.3, boundary="periodic")
    m = single_particle_matrix(p)
    start = CorrelationMatrix(np.diag(np.tile([1.0, 0.0, 0.0], 4)).astype(complex))
    recs = evolve_correlations(start, m, 0.05, 400,
                               record=lambda cm: (cm.particle_number(), cm.energy(m)))
    n, e = np.array(recs).T
    assert np.abs(n - n[0]).max() < 1e-12
    assert np.abs(e - e[0]).max() < 1e-10


def test_kick_needs_a_site():
    m = single_particle_matrix(SSHParams(4, 1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        evolve_correlations(ground_state_correlations(m), m, 0.1, 3, kick=0.1)
