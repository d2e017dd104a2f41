"""Operator algebra shared by every other module.

Conventions used throughout the package:

* hbar = 1.  Energies and rates are measured against the characteristic
  frequency omega0 carried by the ensembles.
* Density matrices are plain complex ndarrays of shape (d, d).
* Vectorization is row-major: the double index (j, k) flattens to j*d + k,
  so ``vectorize(rho)[j*d + k] == rho[j, k]``.  With this convention the
  superoperator of ``rho -> X rho Y`` is ``kron(X, Y.T)``.
* Hermitian operator bases are ordered: normalized identity first, then the
  symmetric Gell-Mann matrices in lexicographic (j, k) order, then the
  antisymmetric ones, then the d-1 diagonal ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = -1e-10
UNITARITY_TOL = 1e-10


class DimensionError(ValueError):
    """Inconsistent or invalid operator dimensions."""


class ContractViolationError(ValueError):
    """An input failed a documented precondition (unitarity, positivity, ...)."""


def check_density_matrix(rho: np.ndarray, *, psd_tol: float = POSITIVITY_TOL) -> np.ndarray:
    """Validate a density matrix and return it as a complex array.

    Checks hermiticity (1e-12 elementwise), unit trace (1e-12) and positive
    semidefiniteness (smallest eigenvalue >= psd_tol).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise ContractViolationError("density matrix is not Hermitian within 1e-12")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise ContractViolationError("density matrix trace differs from 1 beyond 1e-12")
    if np.linalg.eigvalsh(rho).min() < psd_tol:
        raise ContractViolationError("density matrix has an eigenvalue below the PSD tolerance")
    return rho


def bloch_state(b) -> np.ndarray:
    """Qubit density matrix (1 + b . sigma)/2 for a Bloch vector b, |b| <= 1."""
    bx, by, bz = (float(x) for x in b)
    if bx * bx + by * by + bz * bz > 1.0 + 1e-12:
        raise ContractViolationError("Bloch vector must have norm <= 1")
    return 0.5 * np.array([[1.0 + bz, bx - 1j * by], [bx + 1j * by, 1.0 - bz]], dtype=complex)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre factor, full rank by default."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR of a complex Ginibre matrix, phase-fixed R)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    return q * ph[None, :]


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal Hermitian operator basis {A_m}, A_0 = 1/sqrt(d).

    ``ops`` has shape (d*d, d, d) with Tr[A_m A_n] = delta_mn; ``tags`` labels
    each member as identity / symmetric / antisymmetric / diagonal.
    """

    dim: int
    ops: np.ndarray = field(repr=False)
    tags: tuple[str, ...]

    @property
    def traceless(self) -> np.ndarray:
        """The d^2 - 1 traceless members (everything past A_0)."""
        return self.ops[1:]

    @property
    def diagonal_indices(self) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.tags) if t == "diagonal"])


def gell_mann_basis(d: int) -> HermitianBasis:
    """Generalized Gell-Mann basis for dimension d, normalized to Tr[A_m A_n] = delta_mn.

    Ordering: A_0 = 1/sqrt(d), then (|j><k| + |k><j|)/sqrt(2) for j < k in
    lexicographic order, then the antisymmetric partners, then the d-1
    diagonal matrices G_l = (sum_{j<=l} |j><j| - l |l+1><l+1|)/sqrt(l(l+1)).
    For d = 2 this is {1, sigma_x, sigma_y, sigma_z}/sqrt(2).
    """
    if d < 2:
        raise DimensionError("Gell-Mann basis requires dimension d >= 2")
    ops = [np.eye(d, dtype=complex) / np.sqrt(d)]
    tags = ["identity"]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0 / np.sqrt(2.0)
            ops.append(m)
            tags.append("symmetric")
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2.0)
            m[k, j] = 1j / np.sqrt(2.0)
            ops.append(m)
            tags.append("antisymmetric")
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1.0
        m[l, l] = -l
        ops.append(m / np.sqrt(l * (l + 1)))
        tags.append("diagonal")
    return HermitianBasis(dim=d, ops=np.array(ops), tags=tuple(tags))


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Row-major vectorization: component (j, k) lands at index j*d + k."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1)


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec, dtype=complex)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise DimensionError(f"vector of length {vec.size} is not a flattened square matrix")
    return vec.reshape(d, d)


def conjugation_superop(u: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> U rho U^dagger for a unitary U.

    Satisfies ``conjugation_superop(U) @ vectorize(rho) == vectorize(U rho U^dagger)``.
    """
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d):
        raise DimensionError(f"expected a square matrix, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > UNITARITY_TOL:
        raise ContractViolationError("input is not unitary within 1e-10")
    return np.kron(u, u.conj())


def left_right_superop(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> X rho Y in the row-major convention."""
    return np.kron(np.asarray(x, dtype=complex), np.asarray(y, dtype=complex).T)


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i [H, rho] (hbar = 1)."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Choi matrix of a map given as a superoperator.

    Reshuffles F_{(jk),(rs)} into C_{(rj),(sk)} = F_{(jk),(rs)}, i.e.
    C = sum_{rs} |r><s| (x) F[|r><s|].  The map is completely positive iff
    the result is positive semidefinite; for the identity map the Choi
    matrix is d times the maximally entangled projector.
    """
    f = np.asarray(superop, dtype=complex)
    d = int(round(np.sqrt(f.shape[0])))
    if f.shape != (d * d, d * d):
        raise DimensionError(f"expected a d^2 x d^2 matrix, got shape {f.shape}")
    c = f.reshape(d, d, d, d).transpose(2, 0, 3, 1)
    return c.reshape(d * d, d * d)


def expand_in_basis(x: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Coefficients c_m = Tr[A_m X] so that X = sum_m c_m A_m for Hermitian X."""
    return np.einsum("mij,ji->m", basis.ops, np.asarray(x, dtype=complex))
