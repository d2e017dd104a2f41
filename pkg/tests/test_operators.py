import numpy as np
import pytest

from disqme.operators import (
    ContractViolationError,
    DimensionError,
    bloch_state,
    check_density_matrix,
    choi_matrix,
    commutator_superop,
    conjugation_superop,
    devectorize,
    expand_in_basis,
    gell_mann_basis,
    random_density_matrix,
    random_unitary,
    vectorize,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def test_gell_mann_d2_is_normalized_pauli():
    b = gell_mann_basis(2)
    np.testing.assert_allclose(b.ops[0], np.eye(2) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(b.ops[1], SX / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(b.ops[2], SY / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(b.ops[3], SZ / np.sqrt(2), atol=1e-15)


def test_gell_mann_d3_diagonal_members():
    b = gell_mann_basis(3)
    diag = b.ops[b.diagonal_indices]
    assert len(diag) == 2
    for g in diag:
        assert abs(np.trace(g)) < 1e-12
        assert abs(np.trace(g @ g) - 1.0) < 1e-12
        assert np.max(np.abs(g - np.diag(np.diag(g)))) == 0.0


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_gell_mann_orthonormality_and_tags(d):
    b = gell_mann_basis(d)
    gram = np.einsum("mij,nji->mn", b.ops, b.ops)
    np.testing.assert_allclose(gram, np.eye(d * d), atol=1e-12)
    for op in b.ops[1:]:
        assert abs(np.trace(op)) < 1e-12
    assert sum(t == "diagonal" for t in b.tags) == d - 1
    assert len(b.ops) == d * d


def test_gell_mann_invalid_dimension():
    with pytest.raises(DimensionError):
        gell_mann_basis(1)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_basis_completeness(d):
    rng = np.random.default_rng(11)
    b = gell_mann_basis(d)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    x = g + g.conj().T
    coeffs = expand_in_basis(x, b)
    np.testing.assert_allclose(np.einsum("m,mij->ij", coeffs, b.ops), x, atol=1e-10)


def test_vectorize_maximally_mixed():
    np.testing.assert_array_equal(vectorize(np.eye(2) / 2), [0.5, 0, 0, 0.5])


def test_vectorize_round_trip_exact():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = g + g.conj().T
    assert np.array_equal(devectorize(vectorize(x)), x)


def test_vectorize_length_mismatch():
    with pytest.raises(DimensionError):
        devectorize(np.zeros(5))


def test_vectorize_respects_conjugation_superop():
    rng = np.random.default_rng(1)
    for d in (2, 3):
        u = random_unitary(d, rng)
        rho = random_density_matrix(d, rng)
        lhs = conjugation_superop(u) @ vectorize(rho)
        np.testing.assert_allclose(lhs, vectorize(u @ rho @ u.conj().T), atol=1e-12)


def test_conjugation_identity_and_bit_flip():
    np.testing.assert_allclose(conjugation_superop(np.eye(2)), np.eye(4), atol=1e-15)
    ket0 = np.zeros((2, 2), dtype=complex)
    ket0[0, 0] = 1.0
    out = devectorize(conjugation_superop(SX) @ vectorize(ket0))
    expect = np.zeros((2, 2), dtype=complex)
    expect[1, 1] = 1.0
    np.testing.assert_allclose(out, expect, atol=1e-15)


def test_conjugation_rejects_non_unitary():
    with pytest.raises(ContractViolationError):
        conjugation_superop(np.diag([1.0, 0.5]))


def test_superop_composition_matches_map_composition():
    rng = np.random.default_rng(2)
    d = 3
    u1, u2 = random_unitary(d, rng), random_unitary(d, rng)
    lhs = conjugation_superop(u2 @ u1)
    rhs = conjugation_superop(u2) @ conjugation_superop(u1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_superop_preserves_vectorized_identity_trace_behavior():
    rng = np.random.default_rng(3)
    for d in (2, 4):
        u = random_unitary(d, rng)
        s = conjugation_superop(u)
        np.testing.assert_allclose(devectorize(s @ vectorize(np.eye(d))), np.eye(d), atol=1e-12)


def test_commutator_superop_action():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = h + h.conj().T
    rho = random_density_matrix(3, rng)
    lhs = devectorize(commutator_superop(h) @ vectorize(rho))
    np.testing.assert_allclose(lhs, -1j * (h @ rho - rho @ h), atol=1e-12)


def test_choi_identity_map():
    for d in (2, 3):
        c = choi_matrix(np.eye(d * d))
        evals = np.linalg.eigvalsh(c)
        np.testing.assert_allclose(sorted(evals)[-1], d, atol=1e-12)
        np.testing.assert_allclose(evals[:-1], 0.0, atol=1e-12)
        # d times the maximally entangled projector
        omega = np.eye(d).reshape(-1) / np.sqrt(d)
        np.testing.assert_allclose(c, d * np.outer(omega, omega.conj()), atol=1e-12)


def test_choi_of_unitary_is_rank_one():
    rng = np.random.default_rng(5)
    u = random_unitary(3, rng)
    evals = np.linalg.eigvalsh(choi_matrix(conjugation_superop(u)))
    assert abs(evals[-1] - 3.0) < 1e-10
    np.testing.assert_allclose(evals[:-1], 0.0, atol=1e-10)


def test_choi_depolarization_is_psd():
    d, a = 2, 0.5
    eye = np.eye(d * d, dtype=complex)
    vec_id = np.eye(d).reshape(-1)
    f = a * eye + (1 - a) / d * np.outer(vec_id, vec_id)
    assert np.linalg.eigvalsh(choi_matrix(f)).min() >= -1e-12


def test_choi_convex_combination_psd():
    rng = np.random.default_rng(6)
    d = 3
    w = rng.dirichlet(np.ones(4))
    f = sum(wi * conjugation_superop(random_unitary(d, rng)) for wi in w)
    assert np.linalg.eigvalsh(choi_matrix(f)).min() >= -1e-10
    assert np.max(np.abs(choi_matrix(f) - choi_matrix(f).conj().T)) < 1e-12


def test_density_matrix_validation():
    check_density_matrix(np.eye(2) / 2)
    with pytest.raises(ContractViolationError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))  # not Hermitian
    with pytest.raises(ContractViolationError):
        check_density_matrix(np.eye(2))  # trace 2
    with pytest.raises(ContractViolationError):
        check_density_matrix(np.diag([1.5, -0.5]))  # negative eigenvalue


def test_bloch_state():
    rho = bloch_state((0.4, 0.8, 1 / 3))
    check_density_matrix(rho)
    assert abs(rho[0, 1] - (0.2 - 0.4j)) < 1e-15
    with pytest.raises(ContractViolationError):
        bloch_state((1, 1, 1))
