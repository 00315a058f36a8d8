import numpy as np
import pytest
import scipy.linalg

from skinlab import (
    BandModel,
    NoiseStream,
    ParameterError,
    bloch_trajectory,
    build_liouvillian,
    build_obc,
    bulk_evolve,
    localized_bulk_state,
    bulk_wannier_density,
    make_cosine_model,
    propagate_master,
    propagate_semiclassical,
    run_ensemble,
    run_trajectory,
    stroboscopic_loop,
    trajectory_step,
    DensityMatrix,
)


class ZeroStream:
    """Forced all-zero noise, for deterministic-limit checks."""

    def standard_normal(self, size=None):
        return np.zeros(size) if size is not None else 0.0

    def wiener_increments(self, n_steps, dt):
        return np.zeros(n_steps)


@pytest.fixture(scope="module")
def skew11():
    return build_obc(make_cosine_model(1, 0, 1, np.pi / 2), 11)


@pytest.fixture(scope="module")
def center11():
    psi0 = np.zeros(11, complex)
    psi0[5] = 1.0
    return psi0


def test_noise_streams_are_reproducible_and_distinct():
    a = NoiseStream(123, 4).standard_normal(10)
    b = NoiseStream(123, 4).standard_normal(10)
    c = NoiseStream(123, 5).standard_normal(10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_step_without_noise_is_hamiltonian_evolution(skew11, center11):
    out = trajectory_step(skew11, center11, 0.01, 0.0)
    expect = scipy.linalg.expm(-1j * skew11.H * 0.01) @ center11
    assert np.abs(out - expect).max() < 1e-12


def test_step_with_diagonal_jump_operator():
    p = np.array([0.3, 1.1, 2.2])
    P = np.diag(p).astype(complex)
    from skinlab.lattice_ops import Construction, LatticeOperators

    ops = LatticeOperators(3, np.zeros((3, 3), complex), P, P @ P,
                           -0.5j * P @ P, Construction.TRUNCATE_P)
    psi = np.array([1.0, 1.0, 1.0], complex) / np.sqrt(3)
    out = trajectory_step(ops, psi, 0.01, 0.5)
    expect = psi * np.exp(-1j * p * 0.5)
    assert np.abs(out - expect).max() < 1e-12
    assert abs(np.linalg.norm(out) - 1) < 1e-12


def test_pathwise_norm_conservation_long_run(skew11, center11):
    # 1e4 unitary steps must accumulate < 1e-9 norm drift
    psi = run_trajectory(skew11, center11, 50.0, 0.005, NoiseStream(2, 0))
    assert abs(np.linalg.norm(psi) - 1) < 1e-9


def test_zero_noise_trajectory_is_semiclassical_without_decay(skew11, center11):
    # P = 0 lattice: every stream gives the deterministic unitary evolution
    ops = build_obc(BandModel({1: 1.0, -1: 1.0}, {}), 11)
    psi_a = run_trajectory(ops, center11, 1.0, 0.005, NoiseStream(0, 0))
    psi_b = run_trajectory(ops, center11, 1.0, 0.005, NoiseStream(9, 3))
    exact = propagate_semiclassical(ops, center11, 1.0).psi
    assert np.abs(psi_a - psi_b).max() < 1e-12
    assert np.abs(psi_a - exact).max() < 1e-9


def test_trajectory_validates_step_size(skew11, center11):
    with pytest.raises(ParameterError):
        run_trajectory(skew11, center11, 1.0, 0.02, NoiseStream(0, 0))
    with pytest.raises(ParameterError):
        run_trajectory(skew11, center11, 1.00371, 0.01, NoiseStream(0, 0))


def test_trajectory_path_output(skew11, center11):
    path = run_trajectory(skew11, center11, 0.05, 0.01, NoiseStream(5, 1), return_path=True)
    assert path.shape == (6, 11)
    assert np.abs(np.linalg.norm(path, axis=1) - 1).max() < 1e-12


def test_ensemble_reproducibility_across_thread_counts(skew11, center11):
    base = run_ensemble(skew11, center11, 1.0, 0.005, 600, master_seed=7, n_threads=1)
    for n_threads in (2, 4):
        other = run_ensemble(skew11, center11, 1.0, 0.005, 600, master_seed=7,
                             n_threads=n_threads)
        assert np.array_equal(base.rho_estimate, other.rho_estimate)
        assert base.standard_error == other.standard_error
        assert np.array_equal(base.psi_mean, other.psi_mean)


def test_ensemble_estimate_properties(skew11, center11):
    ens = run_ensemble(skew11, center11, 1.0, 0.005, 500, master_seed=3)
    assert np.abs(ens.rho_estimate - ens.rho_estimate.conj().T).max() < 1e-12
    assert abs(np.trace(ens.rho_estimate) - 1) < 1e-10
    assert np.abs(ens.norms - 1).max() < 1e-9
    with pytest.raises(ParameterError):
        run_ensemble(skew11, center11, 1.0, 0.005, 1, master_seed=3)


def test_ensemble_matches_master_solution(skew11, center11):
    ens = run_ensemble(skew11, center11, 1.5, 0.005, 2000, master_seed=21)
    rho_master = propagate_master(build_liouvillian(skew11),
                                  DensityMatrix.site(11, 6), 1.5)
    err = np.linalg.norm(ens.rho_estimate - rho_master.rho)
    assert err < 5 * ens.standard_error


def test_ensemble_mean_wavefunction_is_semiclassical(skew11, center11):
    ens = run_ensemble(skew11, center11, 1.5, 0.005, 2000, master_seed=21)
    exact = propagate_semiclassical(skew11, center11, 1.5).psi
    assert np.all(np.abs(ens.psi_mean - exact) <= 4 * ens.psi_mean_se)


def test_ensemble_error_scales_with_sqrt_m(skew11, center11):
    rho_master = propagate_master(build_liouvillian(skew11),
                                  DensityMatrix.site(11, 6), 1.0).rho
    scaled = []
    ses = {}
    for n_traj in (500, 2000, 8000):
        ens = run_ensemble(skew11, center11, 1.0, 0.005, n_traj, master_seed=77)
        scaled.append(np.linalg.norm(ens.rho_estimate - rho_master) * np.sqrt(n_traj))
        ses[n_traj] = ens.standard_error
    assert max(scaled) / min(scaled) < 3
    assert 1.6 <= ses[500] / ses[2000] <= 2.6


def test_halving_dt_does_not_shift_estimate(skew11, center11):
    coarse = run_ensemble(skew11, center11, 1.0, 0.01, 2000, master_seed=5)
    fine = run_ensemble(skew11, center11, 1.0, 0.005, 2000, master_seed=5)
    shift = np.linalg.norm(coarse.rho_estimate - fine.rho_estimate)
    assert shift <= 2 * np.hypot(coarse.standard_error, fine.standard_error)


def test_bloch_trajectory_basics():
    model = make_cosine_model(1, 0, 1, np.pi / 2)
    psi0 = np.full(32, 1 / np.sqrt(2 * np.pi), complex)
    k, psi = bloch_trajectory(model, psi0, 0.0, NoiseStream(1, 0))
    assert np.abs(psi - psi0).max() < 1e-15
    for j in range(5):
        _, psi = bloch_trajectory(model, psi0, 2.0, NoiseStream(1, j))
        assert np.abs(np.abs(psi) - np.abs(psi0)).max() < 1e-14


def test_bloch_ensemble_reproduces_multiplier_solution():
    model = make_cosine_model(1, 0, 1, np.pi / 2)
    M, draws, t = 64, 5000, 1.5
    psi0 = np.full(M, 1 / np.sqrt(2 * np.pi), complex)
    acc = np.zeros((M, M), complex)
    for j in range(draws):
        _, psi = bloch_trajectory(model, psi0, t, NoiseStream(99, j))
        acc += np.outer(psi, psi.conj())
    acc /= draws
    exact = bulk_evolve(model, localized_bulk_state(M), t).rho_kk
    rel = np.abs(acc - exact).max() / np.abs(exact).max()
    assert rel < 4 / np.sqrt(draws)


def test_stroboscopic_forced_zero_noise():
    model = make_cosine_model(1, 0, 1, np.pi / 2)
    psi0 = np.full(32, 1 / np.sqrt(2 * np.pi), complex)
    path = stroboscopic_loop(model, psi0, 3, ZeroStream())
    from skinlab import momentum_grid

    k = momentum_grid(32)
    expect = psi0 * np.exp(-1j * np.real(model.h(k)) * 3)
    assert np.abs(path.psi_k[3] - expect).max() < 1e-12


def test_stroboscopic_noise_variance():
    model = make_cosine_model(1, 0, 1, 0)
    psi0 = np.full(8, 1 / np.sqrt(2 * np.pi), complex)
    totals = np.array([
        stroboscopic_loop(model, psi0, 25, NoiseStream(7, j)).noise.sum()
        for j in range(10000)
    ])
    assert abs(totals.var() / 25.0 - 1) < 0.03


def test_stroboscopic_coherence_matches_continuous_solution():
    # discrete-time loop at integer t coincides with the continuous solution
    model = make_cosine_model(1, 0, 1, np.pi / 2)
    M, draws, t = 128, 10000, 10
    psi0 = np.full(M, 1 / np.sqrt(2 * np.pi), complex)
    acc = np.zeros((M, M), complex)
    for j in range(draws):
        path = stroboscopic_loop(model, psi0, t, NoiseStream(123, j))
        psi_n = path.psi_sites[t]
        acc += np.outer(psi_n, psi_n.conj())
    # comb amplitudes integrate without the 1/sqrt(2 pi) basis factor, so the
    # mutual coherence carries 2 pi relative to the density matrix
    acc /= draws * 2 * np.pi
    wd = bulk_wannier_density(model, M, float(t))
    scale = np.abs(wd.rho).max()
    assert np.abs(acc - wd.rho).max() < 4 * scale / np.sqrt(draws)
