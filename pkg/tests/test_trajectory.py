import numpy as np
import pytest

from qsslab.model import two_qubit_both, two_qubit_site1
from qsslab.structure import restrict
from qsslab.qss import extract_qss, real_eigen_candidates
from qsslab.trajectory import (
    TrajectoryError,
    build_kernel,
    jump_statistics,
    measure_weight,
    nojump_survival,
    sample_trajectories,
    sample_trajectory,
    sector_sum,
    truncated_exp_mean,
)
from test_structure import raising_model


def both_sites_qss():
    restr = restrict(two_qubit_both(1.0))
    result = extract_qss(real_eigen_candidates(restr))
    return result.families[0].anchor.nu


def test_build_kernel_requires_subharmonic():
    with pytest.raises(TrajectoryError, match="subharmonic"):
        build_kernel(raising_model())


def test_tilde_generator_preserves_trace():
    kernel = build_kernel(two_qubit_both(1.0))
    rng = np.random.default_rng(7)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    for t in (0.3, 1.0, 4.0):
        from qsslab.model import apply_semigroup

        evolved = apply_semigroup(kernel.gen_tilde, t, rho)
        assert abs(np.trace(evolved).real - 1.0) < 1e-10


def test_nojump_survival_exponential_identity():
    # from the QSS, the detector-weighted survival is exactly exp(-(1+alpha) t)
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    for t in np.linspace(0.0, 6.0, 61):
        _, perp = nojump_survival(kernel, nu, t)
        assert abs(perp - np.exp(-2.0 * t)) < 1e-8
    with pytest.raises(ValueError):
        nojump_survival(kernel, nu, -1.0)


def test_sampling_determinism_and_stream_split():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    rec_a = sample_trajectory(kernel, nu, 6.0, seed=42, stream=3)
    rec_b = sample_trajectory(kernel, nu, 6.0, seed=42, stream=3)
    assert rec_a.jump_times == rec_b.jump_times
    assert rec_a.final_weight == rec_b.final_weight
    rec_c = sample_trajectory(kernel, nu, 6.0, seed=42, stream=4)
    assert rec_a.jump_times != rec_c.jump_times or rec_a.final_weight != rec_c.final_weight


def test_record_invariants():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    records = sample_trajectories(kernel, nu, 6.0, seed=1, n=50)
    for rec in records:
        times = list(rec.jump_times)
        assert times == sorted(times)
        assert all(0 <= t <= rec.horizon for t in times)
        assert rec.n_jumps == len(rec.post_jump_states)
        assert rec.censored == (rec.final_weight > 0 and len(times) == 0) or rec.n_jumps > 0
        for state in rec.post_jump_states:
            assert abs(np.trace(state).real - 1.0) < 1e-10


def test_post_jump_states_return_to_qss():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    records = sample_trajectories(kernel, nu, 6.0, seed=9, n=100)
    stats = jump_statistics(records, alpha=1.0, nu=nu)
    assert stats.post_jump_max_deviation < 1e-7
    assert stats.rate == 2.0


def test_jump_statistics_small_run():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    records = sample_trajectories(kernel, nu, 6.0, seed=5, n=300)
    stats = jump_statistics(records, alpha=1.0, nu=nu)
    assert stats.n_trajectories == 300
    # crude sanity on the exponential law; tight bounds live in acceptance
    target = truncated_exp_mean(2.0, 6.0)
    assert abs(stats.empirical_mean - target) < 0.1
    assert stats.ks_statistic < 0.1
    assert 0.3 < stats.censoring_fraction < 0.7


def test_jump_statistics_requires_jumps():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    rec = sample_trajectory(kernel, nu, 1e-4, seed=0)
    with pytest.raises(TrajectoryError, match="no jumps"):
        jump_statistics([rec], alpha=1.0)


def test_truncated_exp_mean_against_quadrature():
    import scipy.integrate

    for rate, window in ((2.0, 6.0), (0.7, 3.0)):
        num, _ = scipy.integrate.quad(
            lambda x: x * rate * np.exp(-rate * x), 0.0, window
        )
        z = 1.0 - np.exp(-rate * window)
        assert abs(truncated_exp_mean(rate, window) - num / z) < 1e-12


def test_measure_weight_matches_survival():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    total, _ = nojump_survival(kernel, nu, 2.5)
    assert abs(measure_weight(kernel, (), 2.5, nu) - total) < 1e-12
    with pytest.raises(ValueError, match="ordered"):
        measure_weight(kernel, (1.0, 0.5), 2.5, nu)
    with pytest.raises(ValueError):
        measure_weight(kernel, (3.0,), 2.5, nu)


def test_sector_sum_normalization():
    nu = both_sites_qss()
    for spec, rho0 in (
        (two_qubit_both(1.0), nu),
        (two_qubit_site1(1.0), np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex)),
    ):
        kernel = build_kernel(spec)
        assert abs(sector_sum(kernel, rho0, 2.0) - 1.0) < 1e-6


def test_sampler_input_validation():
    kernel = build_kernel(two_qubit_both(1.0))
    nu = both_sites_qss()
    with pytest.raises(ValueError, match="horizon"):
        sample_trajectory(kernel, nu, 0.0, seed=1)
