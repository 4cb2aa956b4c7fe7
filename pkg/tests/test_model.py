import numpy as np
import pytest

from hybridlg.errors import TrajectoryExtinguishedError
from hybridlg.model import (
    BlochState,
    IDENTITY,
    INITIAL_STATE,
    ModelParams,
    PROJECTOR_MINUS,
    PROJECTOR_PLUS,
    SIGMA_PLUS,
    bloch_compose,
    bloch_decompose,
    check_density_matrix,
    hamiltonian,
    normalize,
    symmetrize,
)


def random_density(rng, normalized=False):
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = A @ A.conj().T
    if normalized:
        rho = rho / np.trace(rho).real
    return rho


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(gamma=-0.1, q=0.5)
    with pytest.raises(ValueError):
        ModelParams(gamma=0.1, q=1.5)
    with pytest.raises(ValueError):
        ModelParams(gamma=0.1, q=0.5, J=-1.0)
    with pytest.raises(ValueError):
        ModelParams(gamma=0.1, q=0.5, theta=7.0)
    assert ModelParams(gamma=0.0, q=0.0).ratio == 0.0


def test_jump_operator_convention():
    # single nonzero entry at (0, 1); L^dag L projects on the ground state
    assert SIGMA_PLUS[0, 1] == 1.0
    assert np.count_nonzero(SIGMA_PLUS) == 1
    assert np.allclose(SIGMA_PLUS.conj().T @ SIGMA_PLUS, np.diag([0.0, 1.0]))


def test_initial_state_decomposes_to_plus_y():
    assert bloch_decompose(INITIAL_STATE) == BlochState(1.0, 0.0, 1.0, 0.0)


def test_decompose_projectors_and_mixed_state():
    assert bloch_decompose(PROJECTOR_PLUS) == BlochState(1.0, 0.0, 1.0, 0.0)
    assert bloch_decompose(IDENTITY / 2) == BlochState(1.0, 0.0, 0.0, 0.0)


def test_compose_reference_states():
    north = bloch_compose(BlochState(1.0, 0.0, 0.0, 1.0))
    assert np.allclose(north, np.diag([1.0, 0.0]))
    assert np.allclose(bloch_compose(BlochState(1.0, 0.0, -1.0, 0.0)),
                       PROJECTOR_MINUS)
    assert np.allclose(bloch_compose(BlochState(2.0, 0.0, 0.0, 0.0)), IDENTITY)


def test_bloch_roundtrip_is_identity():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        rho = random_density(rng)
        back = bloch_compose(bloch_decompose(rho))
        assert np.max(np.abs(back - rho)) <= 1e-12 * max(1.0, np.abs(rho).max())


def test_normalize_rescales_and_is_idempotent():
    assert np.allclose(normalize(2.0 * PROJECTOR_PLUS), PROJECTOR_PLUS)
    assert np.allclose(normalize(IDENTITY), IDENTITY / 2)
    rng = np.random.default_rng(5)
    for _ in range(50):
        rho = normalize(random_density(rng))
        assert abs(np.trace(rho).real - 1.0) <= 1e-12
        assert np.max(np.abs(normalize(rho) - rho)) <= 1e-12


def test_normalize_guards_vanishing_trace():
    with pytest.raises(TrajectoryExtinguishedError) as err:
        normalize(1e-15 * PROJECTOR_PLUS)
    assert err.value.trace == pytest.approx(1e-15)


def test_symmetrize_reports_defect():
    rho = np.array([[1.0, 0.2 + 0.1j], [0.2 - 0.3j, 0.5]])
    sym, defect = symmetrize(rho)
    assert np.allclose(sym, sym.conj().T)
    assert defect == pytest.approx(0.1, rel=1e-12)


def test_check_density_matrix_rejects_bad_states():
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[1.0, 0.5], [0.1, 1.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.0, -0.5]))  # not positive
    check_density_matrix(3.0 * PROJECTOR_PLUS)  # unnormalized trace is fine


def test_hamiltonian_orientation():
    H = hamiltonian(ModelParams(gamma=0.0, q=1.0, J=2.0, theta=np.pi / 2))
    assert np.allclose(H, -np.array([[0.0, 1.0], [1.0, 0.0]]))
    Hz = hamiltonian(ModelParams(gamma=0.0, q=1.0, J=2.0, theta=0.0))
    assert np.allclose(Hz, -np.diag([1.0, -1.0]))
