import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcollide import model
from qcollide.errors import ResourceLimitError
from qcollide.model import ModelParams


def adjacent_pairs_bruteforce(state: int, L: int, pbc: bool) -> int:
    """Count adjacent 11 pairs by looping over the literal interaction sum."""
    bits = [(state >> (L - 1 - i)) & 1 for i in range(L)]
    n_terms = L if pbc else L - 1
    return sum(bits[i] * bits[(i + 1) % L] for i in range(n_terms))


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(L=0)
    with pytest.raises(ValueError):
        ModelParams(L=2, dt=0.0)
    with pytest.raises(ValueError):
        ModelParams(L=2, gamma=-1.0)
    with pytest.raises(ValueError):
        ModelParams(L=2, v=np.inf)


def test_l_cap_is_resource_error():
    with pytest.raises(ResourceLimitError):
        model.build_system_hamiltonian(ModelParams(L=9))


def test_single_site_has_no_interaction_term():
    H = model.build_system_hamiltonian(ModelParams(L=1, v=123.0, omega=1.0, delta=0.0))
    assert np.array_equal(H, np.array([[0, 1], [1, 0]], dtype=complex))


def test_l2_pbc_counts_both_orderings():
    # basis order 00, 01, 10, 11; the single bond enters twice under PBC
    H = model.build_system_hamiltonian(ModelParams(L=2, omega=0.0, v=1.0, pbc=True))
    assert np.allclose(H, np.diag([0.0, 0.0, 0.0, 2.0]))
    H_open = model.build_system_hamiltonian(ModelParams(L=2, omega=0.0, v=1.0, pbc=False))
    assert np.allclose(H_open, np.diag([0.0, 0.0, 0.0, 1.0]))


def test_l6_diagonal_counts_adjacent_pairs():
    params = ModelParams(L=6, omega=1.0, v=5.875)
    H = model.build_system_hamiltonian(params)
    assert model.hermiticity_defect(H) <= 1e-12
    for b in range(64):
        expected = 5.875 * adjacent_pairs_bruteforce(b, 6, True)
        assert H[b, b].real == pytest.approx(expected, abs=1e-12)


def test_detuning_term():
    H = model.build_system_hamiltonian(ModelParams(L=2, omega=0.0, v=0.0, delta=0.5))
    assert np.allclose(np.diag(H), [0.0, 0.5, 0.5, 1.0])


def test_global_x_flip_commutes_at_zero_v_and_delta():
    params = ModelParams(L=4, v=0.0, delta=0.0)
    H = model.build_system_hamiltonian(params)
    X_all = model.single_site_op(model.SIGMA_X, 0, 1)
    for _ in range(3):
        X_all = np.kron(X_all, model.SIGMA_X)
    assert np.array_equal(H @ X_all, X_all @ H)


def test_collision_block_gamma_zero_equals_system():
    params = ModelParams(L=3, gamma=0.0)
    H_S = model.build_system_hamiltonian(params)
    H_m = model.build_collision_block(params, np.array([1, -1, 1]))
    assert np.array_equal(H_m, H_S)


def test_collision_block_single_site():
    params = ModelParams(L=1, omega=0.0, gamma=3.0, dt=1.25)
    H = model.build_collision_block(params, np.array([1]))
    g = np.sqrt(3.0 / 1.25)
    assert np.allclose(H, np.diag([g, 0.0]))


def test_collision_block_sign_linearity():
    params = ModelParams(L=3)
    H_S = model.build_system_hamiltonian(params)
    plus = model.build_collision_block(params, np.array([1, 1, 1]))
    minus = model.build_collision_block(params, np.array([-1, -1, -1]))
    assert np.allclose(plus - H_S, -(minus - H_S), atol=1e-14)


def test_collision_block_diagonals_match_explicit():
    params = ModelParams(L=3, gamma=2.0, dt=0.7)
    diags = model.collision_block_diagonals(params)
    for m_int in range(8):
        signs = np.array([1 - 2 * ((m_int >> (2 - i)) & 1) for i in range(3)])
        H_m = model.build_collision_block(params, signs)
        H_S = model.build_system_hamiltonian(params)
        assert np.allclose(np.diag(H_m - H_S).real, diags[m_int], atol=1e-14)


def count_blockade_free(L: int, pbc: bool) -> int:
    return sum(
        1
        for b in range(2 ** L)
        if all(
            not (((b >> (L - 1 - i)) & 1) and ((b >> (L - 1 - (i + 1) % L)) & 1))
            for i in (range(L) if pbc else range(L - 1))
        )
    )


@pytest.mark.parametrize("L", range(2, 9))
@pytest.mark.parametrize("pbc", [True, False])
def test_pxp_projector_rank_matches_combinatorics(L, pbc):
    P = model.build_pxp_projector(L, pbc)
    assert np.abs(P @ P - P).max() <= 1e-12
    assert np.abs(P - P.conj().T).max() == 0.0
    assert int(np.trace(P).real) == count_blockade_free(L, pbc)


def test_pxp_projector_reference_counts():
    # Lucas numbers for rings, Fibonacci counts for open chains
    assert int(np.trace(model.build_pxp_projector(6, True)).real) == 18
    assert int(np.trace(model.build_pxp_projector(2, True)).real) == 3
    assert int(np.trace(model.build_pxp_projector(6, False)).real) == 21


def test_pxp_projector_l2_image():
    P = model.build_pxp_projector(2, True)
    assert np.allclose(np.diag(P), [1, 1, 1, 0])


def test_all_ones_state_annihilated():
    for L in range(2, 7):
        P = model.build_pxp_projector(L, True)
        assert P[-1, -1] == 0


def test_pxp_hamiltonian_l3():
    H = model.build_pxp_hamiltonian(3, True)
    assert model.hermiticity_defect(H) <= 1e-12
    # |000> couples to each single-flip state with unit amplitude
    assert H[4, 0] == 1.0 and H[2, 0] == 1.0 and H[1, 0] == 1.0
    # flipping next to an occupied site is blocked: <110|H|010> = 0
    assert H[6, 2] == 0.0


def test_pxp_hamiltonian_commutes_with_projector():
    for L in (3, 4, 5, 6):
        H = model.build_pxp_hamiltonian(L, True)
        P = model.build_pxp_projector(L, True)
        assert np.abs(H @ P - P @ H).max() <= 1e-12


def test_pxp_hamiltonian_connects_only_blockade_states():
    L = 4
    H = model.build_pxp_hamiltonian(L, True)
    P = np.diag(model.build_pxp_projector(L, True)).real
    for a in range(16):
        for b in range(16):
            if H[a, b] != 0:
                assert bin(a ^ b).count("1") == 1
                assert P[a] == 1 and P[b] == 1


@settings(max_examples=25, deadline=None)
@given(
    L=st.integers(min_value=1, max_value=5),
    omega=st.floats(-2, 2, allow_nan=False),
    v=st.floats(-8, 8, allow_nan=False),
    gamma=st.floats(0, 5, allow_nan=False),
    dt=st.floats(0.05, 3, allow_nan=False),
    delta=st.floats(-3, 3, allow_nan=False),
)
def test_hamiltonians_hermitian_property(L, omega, v, gamma, dt, delta):
    params = ModelParams(L=L, omega=omega, v=v, gamma=gamma, dt=dt, delta=delta)
    assert model.hermiticity_defect(model.build_system_hamiltonian(params)) <= 1e-12
    m = np.where(np.arange(L) % 2 == 0, 1, -1)
    assert model.hermiticity_defect(model.build_collision_block(params, m)) <= 1e-12
