import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qcollide import model, tilted
from qcollide.channel import apply_channel, build_kraus_fast, stationary_state
from qcollide.errors import NumericalConsistencyError
from qcollide.model import ModelParams
from qcollide.observables import ensemble_activity, outcome_marginals
from qcollide.tilted import (
    apply_tilted,
    apply_tilted_dual,
    brute_force_partition_function,
    build_biased_kraus,
    dominant_eigenpair,
    log_partition_function,
    partition_function,
    phase_diagram_sweep,
    s_ensemble_order_parameters,
    tilted_dual_superoperator,
)
from qcollide.trajectory import zero_state

FIG1 = dict(dt=1.25, v=5.875, gamma=3.0)
FIG1_ACTIVITY = 0.5447141872182351


@pytest.fixture(scope="module")
def kf1():
    return build_kraus_fast(ModelParams(L=1, v=0.0, dt=1.25, gamma=3.0))


@pytest.fixture(scope="module")
def kf2():
    return build_kraus_fast(ModelParams(L=2, **FIG1))


def test_dual_at_s_zero_preserves_identity(kf2):
    out = apply_tilted_dual(kf2, 0.0, np.eye(4, dtype=complex))
    assert np.abs(out - np.eye(4)).max() <= 1e-12


def test_dual_large_s_keeps_only_quiet_outcome(kf2):
    X = np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex)
    out = apply_tilted_dual(kf2, 50.0, X)
    only_zero = kf2.ops[0].conj().T @ X @ kf2.ops[0]
    assert np.abs(out - 0.5 * (only_zero + only_zero.conj().T)).max() <= 1e-12


def test_dual_gamma_zero_is_unitary_conjugation():
    params = ModelParams(L=2, gamma=0.0)
    kf = build_kraus_fast(params)
    U = scipy.linalg.expm(-1j * model.build_system_hamiltonian(params) * params.dt)
    X = np.diag([0.5, 1.5, -0.5, 2.0]).astype(complex)
    out = apply_tilted_dual(kf, 0.7, X)
    assert np.abs(out - U.conj().T @ X @ U).max() <= 1e-12


def test_eigenpair_s_zero_immediate(kf2):
    lam, l_s, iters, res = dominant_eigenpair(kf2, 0.0)
    assert lam == pytest.approx(1.0, abs=1e-12)
    assert np.abs(l_s - np.eye(4)).max() <= 1e-12
    assert res <= 1e-10


def test_eigenpair_against_dense_superoperator(kf1):
    s = 0.2
    lam, l_s, iters, res = dominant_eigenpair(kf1, s)
    S = tilted_dual_superoperator(kf1, s)
    evals = np.linalg.eigvals(S)
    lam_dense = float(np.max(evals.real))
    assert lam == pytest.approx(lam_dense, abs=1e-10)
    assert 0.0 < lam < 1.0
    # eigen-residual at convergence
    assert np.abs(apply_tilted_dual(kf1, s, l_s) - lam * l_s).max() / lam <= 1e-10


def test_eigenpair_dense_oracle_l2(kf2):
    for s in (-0.3, 0.15, 0.4):
        lam, l_s, _, res = dominant_eigenpair(kf2, s)
        evals = np.linalg.eigvals(tilted_dual_superoperator(kf2, s))
        assert lam == pytest.approx(float(np.max(evals.real)), abs=1e-9)
        assert res <= 1e-10


def test_log_lambda_slope_is_minus_total_activity(kf1):
    # d log Lambda / ds at s=0 equals -L times the stationary activity
    h = 1e-4
    lam_p = dominant_eigenpair(kf1, h)[0]
    lam_m = dominant_eigenpair(kf1, -h)[0]
    slope = (np.log(lam_p) - np.log(lam_m)) / (2 * h)
    assert slope == pytest.approx(-1 * FIG1_ACTIVITY, rel=1e-6)


def test_biased_family_reduces_at_s_zero(kf2):
    lam, l_s, _, _ = dominant_eigenpair(kf2, 0.0)
    biased = build_biased_kraus(kf2, 0.0, lam, l_s)
    assert np.abs(biased.ops - kf2.ops).max() <= 1e-12


@pytest.mark.parametrize("s", [-0.4, -0.1, 0.2, 0.5])
def test_biased_family_is_trace_preserving(kf2, s):
    lam, l_s, _, _ = dominant_eigenpair(kf2, s)
    biased = build_biased_kraus(kf2, s, lam, l_s)
    assert biased.completeness_defect() <= 1e-10


def test_biased_positive_s_suppresses_activity(kf1):
    sol = tilted.solve(kf1, 0.3)
    p = outcome_marginals(sol.biased, sol.biased_stationary)
    assert p[1] < FIG1_ACTIVITY


def test_biased_rejects_indefinite_l():
    kf = build_kraus_fast(ModelParams(L=1, v=0.0))
    bad = np.diag([1.0, -1e-3]).astype(complex)
    with pytest.raises(NumericalConsistencyError):
        build_biased_kraus(kf, 0.1, 1.0, bad)


def test_s_ensemble_zero_matches_unbiased(kf2):
    point = s_ensemble_order_parameters(kf2, 0.0, offsets=[(0, 1)])
    rho = np.eye(4) / 4
    from qcollide.observables import ensemble_correlation

    assert point.activity == pytest.approx(ensemble_activity(kf2, rho), abs=1e-8)
    assert point.correlations[(0, 1)] == pytest.approx(
        ensemble_correlation(kf2, rho, (0, 1)), abs=1e-8
    )
    assert point.lambda_s == pytest.approx(1.0, abs=1e-12)


def test_hellmann_feynman_consistency(kf2):
    # -d log Lambda/ds / L equals the biased stationary activity; sampled away
    # from the deep-inactive regime where the pinned-h central difference's
    # truncation error would dominate the tiny activity
    h = 1e-4
    for s in (-0.35, -0.2, 0.1):
        point = s_ensemble_order_parameters(kf2, s)
        lam_p = dominant_eigenpair(kf2, s + h)[0]
        lam_m = dominant_eigenpair(kf2, s - h)[0]
        fd = -(np.log(lam_p) - np.log(lam_m)) / (2 * h) / kf2.params.L
        assert abs(fd - point.activity) / abs(fd) <= 1e-5


def test_activity_monotone_in_s(kf2):
    s_values = np.linspace(-0.5, 0.5, 21)
    acts = [s_ensemble_order_parameters(kf2, float(s)).activity for s in s_values]
    assert all(a >= b - 1e-9 for a, b in zip(acts, acts[1:]))


def test_partition_function_s_zero(kf2):
    assert partition_function(kf2, 0.0, np.eye(4) / 4, T=20) == pytest.approx(1.0, abs=1e-12)


def test_partition_function_long_time_rate(kf1):
    s = 0.2
    lam = dominant_eigenpair(kf1, s)[0]
    log_z = log_partition_function(kf1, s, np.eye(2) / 2, T=50)
    assert abs(log_z / 50 - np.log(lam)) <= 1e-3


def test_partition_function_exhaustive_l2(kf2):
    # iterated tilted map equals the explicit sum over all 3-step paths
    s = 0.1
    psi0 = zero_state(2)
    rho0 = np.outer(psi0, psi0.conj())
    z_iter = partition_function(kf2, s, rho0, T=3)
    z_sum = brute_force_partition_function(kf2, psi0, s, T=3)
    assert z_iter == pytest.approx(z_sum, abs=1e-12)


def test_tilted_primal_dual_adjoint(kf2):
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    A = A + A.conj().T
    B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    B = B + B.conj().T
    s = 0.17
    lhs = np.trace(B @ apply_tilted(kf2, s, A))
    rhs = np.trace(apply_tilted_dual(kf2, s, B) @ A)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_phase_diagram_rows_and_flags():
    params = ModelParams(L=2, **FIG1)
    rows = phase_diagram_sweep([1.0, 5.875], [-0.2, 0.0, 0.2], params)
    assert len(rows) == 6
    assert [r["V"] for r in rows] == [1.0, 1.0, 1.0, 5.875, 5.875, 5.875]
    at_zero = [r for r in rows if r["s"] == 0.0]
    for row in at_zero:
        assert row["converged"]
        assert row["lam"] == pytest.approx(1.0, abs=1e-12)
        assert np.isfinite(row["c_0_1"])


@pytest.mark.slow
def test_phase_diagram_workers_do_not_change_rows():
    params = ModelParams(L=2, **FIG1)
    serial = phase_diagram_sweep([0.5, 2.0, 4.0], [0.0, 0.25], params, workers=1)
    parallel = phase_diagram_sweep([0.5, 2.0, 4.0], [0.0, 0.25], params, workers=3)
    for a, b in zip(serial, parallel):
        assert a == b


def test_biased_stationary_is_fixed_point(kf1):
    sol = tilted.solve(kf1, 1.0)
    after = apply_channel(sol.biased, sol.biased_stationary)
    increment = 0.5 * np.abs(np.linalg.eigvalsh(after - sol.biased_stationary)).sum()
    assert increment < 1e-9
    assert abs(np.trace(sol.biased_stationary).real - 1.0) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(s=st.floats(-1.0, 1.0, allow_nan=False))
def test_dual_output_hermitian_property(s):
    kf = build_kraus_fast(ModelParams(L=2, dt=0.9, v=2.0, gamma=1.5))
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    X = X + X.conj().T
    out = apply_tilted_dual(kf, s, X)
    assert np.abs(out - out.conj().T).max() <= 1e-12
