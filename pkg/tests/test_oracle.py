import numpy as np
import pytest

from linres.engine import charge_structure, initial_state, polarizability_run
from linres.fields import DeltaPulse
from linres.oracle import (
    LehmannData,
    band_gap,
    exact_retarded_gf,
    ground_state_orbitals,
    lindhard_polarizability,
    lk_modes,
    lk_oracle,
    many_body_retarded_gf,
    periodic_band,
    significant_energies,
)
from linres.signal import ResponseTrace, apply_damping, drive_spectrum, fourier_transform, functional_division
from linres.ssh import SSHParams, single_particle_matrix

T = np.linspace(0.0, 8.0, 161)


def test_equal_time_diagonal_gf_is_minus_i():
    p = SSHParams(6, 1.0, 0.4, 2.0)
    for i in range(6):
        assert exact_retarded_gf(p, 0.0, i, i)[0] == pytest.approx(-1j, abs=1e-14)
    assert exact_retarded_gf(p, 0.0, 0, 3)[0] == pytest.approx(0.0, abs=1e-14)


def test_gf_vanishes_for_negative_times():
    g = exact_retarded_gf(SSHParams(4, 1.0, 0.0, 1.0), [-1.0, -0.1, 0.5], 0, 1)
    assert np.all(g[:2] == 0) and g[2] != 0


@pytest.mark.parametrize("v,mu", [(1.0, 0.0), (0.7, 1.3)])
def test_two_site_closed_form(v, mu):
    p = SSHParams(2, v, 0.0, mu)
    expected = -1j * np.cos(v * T) * np.exp(-1j * p.onsite * T)
    np.testing.assert_allclose(exact_retarded_gf(p, T, 0, 0), expected, atol=1e-13)


@pytest.mark.parametrize("boundary", ["open", "periodic"])
def test_single_particle_gf_matches_many_body_lehmann_on_vacuum(boundary):
    p = SSHParams(4, 1.0, 0.3, 0.8, boundary=boundary)
    for i, j in [(0, 0), (0, 1), (1, 3), (2, 0)]:
        a = exact_retarded_gf(p, T, i, j)
        b = many_body_retarded_gf(p, T, i, j)
        assert np.abs(a - b).max() < 1e-10


def test_single_particle_gf_matches_many_body_lehmann_on_filled_sea():
    # the anticommutator of free fermions is a c-number, so the filling is irrelevant
    p = SSHParams(4, 1.0, 0.3, 0.4)
    psi = initial_state(p, "ground")
    assert ground_state_orbitals(p)[2] > 0
    for i, j in [(0, 0), (0, 2), (3, 1)]:
        assert np.abs(exact_retarded_gf(p, T, i, j)
                      - many_body_retarded_gf(p, T, i, j, psi0=psi)).max() < 1e-10


def test_many_body_gf_requires_eigenstate():
    p = SSHParams(3, 1.0, 0.0, 0.0)
    psi = np.zeros(8, dtype=complex)
    psi[1] = 1.0  # one particle on site 0, not stationary
    with pytest.raises(ValueError, match="eigenstate"):
        many_body_retarded_gf(p, T, 0, 0, psi0=psi)


def test_lehmann_data_checks_its_residual():
    with pytest.raises(ArithmeticError):
        LehmannData.from_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("k", [0.0, np.pi / 4, np.pi / 2])
def test_mode_sum_reproduces_lk_trace(k):
    p = SSHParams(8, 1.0, 0.4, 5.0)
    recon = -2 * sum(a * np.sin(e * T) for e, a in lk_modes(p, k))
    np.testing.assert_allclose(recon, lk_oracle(p, k, T), atol=1e-12)


def test_zone_boundary_peaks_are_split_by_the_gap():
    p = SSHParams(8, 1.0, 0.8, 5.0, boundary="periodic")
    lo, hi = significant_energies(p, np.pi / 2)
    assert hi - lo == pytest.approx(band_gap(p).bulk, abs=1e-10)
    assert hi - lo == pytest.approx(band_gap(p).finite, abs=1e-10)


def test_gap_closes_without_dimerization():
    gap = band_gap(SSHParams(8, 1.0, 0.0, 5.0, boundary="periodic"))
    assert gap.bulk == 0.0
    assert gap.finite == pytest.approx(0.0, abs=1e-12)


def test_gap_is_proportional_to_delta():
    ratios = [band_gap(SSHParams(8, 1.0, d, 5.0)).bulk / d for d in (0.2, 0.4, 0.8)]
    assert max(ratios) / min(ratios) < 1.05


def test_finite_gap_for_delta_04():
    p = SSHParams(8, 1.0, 0.4, 0.0, boundary="periodic")
    e = np.linalg.eigvalsh(single_particle_matrix(p))
    assert band_gap(p).finite == pytest.approx(e[4] - e[3], abs=1e-14)
    assert band_gap(p).finite == pytest.approx(0.8, abs=1e-10)


def test_band_gap_rejects_negative_delta():
    with pytest.raises(ValueError):
        band_gap(SSHParams(8, 1.0, -0.4, 0.0))


def test_periodic_band_matches_diagonalization():
    p = SSHParams(8, 1.0, 0.4, 1.0, boundary="periodic")
    ks = 2 * np.pi * np.arange(4) / 8
    lo, hi = periodic_band(p, ks)
    np.testing.assert_allclose(np.sort(np.r_[lo, hi]),
                               np.linalg.eigvalsh(single_particle_matrix(p)), atol=1e-12)


# --- polarizability -----------------------------------------------------------

P24 = SSHParams(24, 1.0, 0.0, 0.9, boundary="periodic")
Q24 = 2 * np.pi * np.arange(13) / 24


def test_no_absorption_at_zero_momentum():
    chi = lindhard_polarizability(P24, [0.0], np.linspace(-5, 5, 201), 0.05)
    assert np.abs(chi.imag).max() < 1e-12


def test_response_decays_at_high_frequency():
    om = np.array([1.0, 1e4])
    chi = lindhard_polarizability(P24, Q24[1:], om, 0.05)
    assert np.all(np.abs(chi[:, 1]) < 1e-3 * np.abs(chi[:, 0]))


def test_site_resolved_form_equals_average_for_periodic_chain():
    om = np.linspace(-4, 4, 81)
    a = lindhard_polarizability(P24, Q24, om, 0.1)
    b = lindhard_polarizability(P24, Q24, om, 0.1, site=5)
    assert np.abs(a - b).max() < 1e-10


def test_continuum_edge_has_minimum_at_two_kf():
    _, _, filled = ground_state_orbitals(P24)
    kf = np.pi * filled / 24
    two_kf = 2 * np.pi - 2 * kf if 2 * kf > np.pi else 2 * kf
    om = np.linspace(0, 6, 3001)
    chi = lindhard_polarizability(P24, Q24, om, 0.02)
    edge = []
    for c in chi[1:]:
        im = np.abs(c.imag)
        edge.append(om[np.argmax(im > 0.05 * im.max())])
    edge = np.array(edge)
    qs = Q24[1:]
    interior = np.flatnonzero((edge[1:-1] < edge[:-2]) & (edge[1:-1] < edge[2:])) + 1
    assert len(interior) == 1
    assert qs[interior[0]] == pytest.approx(two_kf, abs=1e-12)


def test_lindhard_matches_covariance_extraction():
    p = SSHParams(12, 1.0, 0.0, 0.9, boundary="periodic")
    tau, site = 20.0, 0
    tr = polarizability_run(p, site, DeltaPulse(0.005), t_max=120.0, dt=0.05, odd_part=True)
    dn = tr.metadata["delta_n"]
    worst = 0.0
    for q in 2 * np.pi * np.arange(1, 7) / 12:
        a = fourier_transform(apply_damping(ResponseTrace(tr.times, charge_structure(dn, site, q)), tau))
        chi = functional_division(a, drive_spectrum(DeltaPulse(0.005), a.omegas, tau))
        ref = lindhard_polarizability(p, [q], chi.omegas, 1 / tau, site=site)[0]
        worst = max(worst, np.abs(chi.values - ref).max() / np.abs(ref).max())
    assert worst < 0.03
