"""Disordered Hamiltonian ensembles and their level-spacing statistics.

Six kinds are supported:

* ``spectral-general``     H = omega0 * sum_j lambda_j |j><j| in a fixed basis,
  with correlated eigenvalues built as lambda_j = offset_j + sum_a M_ja xi_a
  from independent scalar laws xi_a and a mixing matrix M.
* ``spectral-global``      H = lambda * H0 with a single scalar law
  (mixing = single column omega_j^0 / omega0).
* ``spectral-uncorrelated`` independent per-level laws (mixing = identity).
* ``unitarily-invariant-pe``  Haar eigenvectors, i.i.d. box eigenvalues
  ("Poissonian ensemble").
* ``unitarily-invariant-gue`` Gaussian unitary ensemble normalized so that
  <|H_jk|^2> / omega0^2 = 1/d for every entry.
* ``finite-list``          explicit (H_i, p_i) pairs.

All Hamiltonians are returned in energy units with hbar = 1, i.e. H carries
one factor of omega0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import ScalarDistribution
from .gue_kernel import chi_bar_gue, chi_bar_gue_deriv, chi_bar_gue_large_d, chi_bar_gue_large_d_deriv

SPECTRAL_KINDS = ("spectral-general", "spectral-global", "spectral-uncorrelated")
UNITARILY_INVARIANT_KINDS = ("unitarily-invariant-pe", "unitarily-invariant-gue")
ALL_KINDS = SPECTRAL_KINDS + UNITARILY_INVARIANT_KINDS + ("finite-list",)

HERMITICITY_TOL = 1e-12


class UnsupportedForKindError(ValueError):
    """The requested quantity is not defined for this ensemble kind."""


@dataclass(frozen=True)
class Realization:
    """A single member of the disorder ensemble."""

    hamiltonian: np.ndarray
    weight: float = 1.0


@dataclass(frozen=True)
class DisorderEnsemble:
    kind: str
    dim: int
    omega0: float
    laws: tuple[ScalarDistribution, ...] = ()
    mixing: np.ndarray | None = field(default=None, repr=False)
    offsets: np.ndarray | None = field(default=None, repr=False)
    hamiltonians: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_spectral(self) -> bool:
        return self.kind in SPECTRAL_KINDS

    @property
    def is_unitarily_invariant(self) -> bool:
        return self.kind in UNITARILY_INVARIANT_KINDS

    def sigma_scale(self) -> float:
        """Characteristic dimensionless disorder width, used for default grids."""
        if self.kind == "unitarily-invariant-pe":
            return self.laws[0].scale
        if self.kind == "unitarily-invariant-gue":
            return 4.0  # semicircle support width at the <|H_jk|^2> = 1/d normalization
        if self.is_spectral:
            scales = np.array([law.scale if law.kind != "point-mass" else 0.0 for law in self.laws])
            width = 0.0
            d = self.dim
            for j in range(d):
                for k in range(j + 1, d):
                    w = np.abs(self.mixing[j] - self.mixing[k]) @ scales
                    width = max(width, w + abs(self.offsets[j] - self.offsets[k]))
            return width if width > 0 else 1.0
        lam = np.linalg.eigvalsh(self.hamiltonians) / self.omega0
        spread = float(lam.max() - lam.min())
        return spread if spread > 0 else 1.0


def spectral_general(omega0: float, laws, mixing, offsets=None) -> DisorderEnsemble:
    """Correlated spectral disorder lambda_j = offset_j + sum_a M_ja xi_a."""
    laws = tuple(laws)
    mixing = np.atleast_2d(np.asarray(mixing, dtype=float))
    d = mixing.shape[0]
    if d < 2:
        raise ValueError("spectral ensembles need dimension d >= 2")
    if mixing.shape[1] != len(laws):
        raise ValueError("mixing matrix columns must match the number of scalar laws")
    offsets = np.zeros(d) if offsets is None else np.asarray(offsets, dtype=float)
    if offsets.shape != (d,):
        raise ValueError("offsets must have one entry per level")
    return DisorderEnsemble(kind="spectral-general", dim=d, omega0=float(omega0),
                            laws=laws, mixing=mixing, offsets=offsets)


def spectral_global(omega0: float, law: ScalarDistribution, ref_spectrum) -> DisorderEnsemble:
    """Global spectral disorder H = lambda * H0, H0 = diag(ref_spectrum) (energy, hbar = 1)."""
    ref = np.asarray(ref_spectrum, dtype=float)
    ens = spectral_general(omega0, (law,), (ref / omega0)[:, None])
    return DisorderEnsemble(kind="spectral-global", dim=ens.dim, omega0=ens.omega0,
                            laws=ens.laws, mixing=ens.mixing, offsets=ens.offsets)


def spectral_uncorrelated(omega0: float, laws) -> DisorderEnsemble:
    """Independent per-level eigenvalue laws in a fixed common eigenbasis."""
    laws = tuple(laws)
    ens = spectral_general(omega0, laws, np.eye(len(laws)))
    return DisorderEnsemble(kind="spectral-uncorrelated", dim=ens.dim, omega0=ens.omega0,
                            laws=ens.laws, mixing=ens.mixing, offsets=ens.offsets)


def qubit_spectral(omega0: float, law: ScalarDistribution) -> DisorderEnsemble:
    """Single qubit with H = lambda * omega0 * sigma_z / 2 (spacing lambda_1 - lambda_2 = lambda)."""
    return spectral_general(omega0, (law,), np.array([[0.5], [-0.5]]))


def poisson_ensemble(dim: int, omega0: float, width: float, location: float = 0.0) -> DisorderEnsemble:
    """Haar eigenvectors with i.i.d. box eigenvalues of the given width.

    The location offset shifts every level identically in distribution and
    therefore cancels from all level-spacing quantities (chi_bar, rates).
    """
    if dim < 2:
        raise ValueError("need dimension d >= 2")
    box = ScalarDistribution("uniform-box", location=location, scale=width)
    return DisorderEnsemble(kind="unitarily-invariant-pe", dim=dim, omega0=float(omega0), laws=(box,))


def gue_ensemble(dim: int, omega0: float) -> DisorderEnsemble:
    """GUE with <|H_jk|^2>/omega0^2 = 1/d (eigenvalue density ~ exp(-(d/2) sum lambda^2))."""
    if dim < 2:
        raise ValueError("need dimension d >= 2")
    return DisorderEnsemble(kind="unitarily-invariant-gue", dim=dim, omega0=float(omega0))


def finite_list_ensemble(omega0: float, hamiltonians, weights) -> DisorderEnsemble:
    """Explicit ensemble of (H_i, p_i) pairs; H_i in energy units (hbar = 1)."""
    hams = np.asarray(hamiltonians, dtype=complex)
    w = np.asarray(weights, dtype=float)
    if hams.ndim != 3 or hams.shape[1] != hams.shape[2]:
        raise ValueError("hamiltonians must have shape (n, d, d)")
    if w.shape != (hams.shape[0],) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a probability vector matching the Hamiltonian list")
    if np.max(np.abs(hams - hams.conj().transpose(0, 2, 1))) > HERMITICITY_TOL:
        raise ValueError("all Hamiltonians must be Hermitian within 1e-12")
    return DisorderEnsemble(kind="finite-list", dim=hams.shape[1], omega0=float(omega0),
                            hamiltonians=hams, weights=w)


# ---------------------------------------------------------------------------
# sampling

def haar_unitary(d: int, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Haar-random unitaries via QR of complex Ginibre matrices with the
    R-diagonal phase fix; shape (d, d) or (n, d, d)."""
    if d < 2:
        raise ValueError("need dimension d >= 2")
    shape = (d, d) if n is None else (n, d, d)
    g = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    q, r = np.linalg.qr(g)
    ph = np.diagonal(r, axis1=-2, axis2=-1).copy()
    ph /= np.abs(ph)
    return q * ph[..., None, :]


def sample_gue_matrices(dim: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Dimensionless GUE matrices M = H/omega0 with <|M_jk|^2> = 1/d."""
    g = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    return (g + g.conj().transpose(0, 2, 1)) / (2.0 * np.sqrt(dim))


def sample_spectra(ens: DisorderEnsemble, rng: np.random.Generator, n: int):
    """Batch of eigen-decompositions (lams, vecs) of H/omega0.

    lams has shape (n, d); vecs has shape (n, d, d) with columns as
    eigenvectors, or None for spectral kinds (fixed computational basis).
    """
    d = ens.dim
    if ens.is_spectral:
        xi = np.column_stack([law.sample(rng, n) for law in ens.laws])
        lams = ens.offsets[None, :] + xi @ ens.mixing.T
        return lams, None
    if ens.kind == "unitarily-invariant-pe":
        lams = ens.laws[0].sample(rng, n * d).reshape(n, d)
        vecs = haar_unitary(d, rng, n)
        return lams, vecs
    if ens.kind == "unitarily-invariant-gue":
        m = sample_gue_matrices(d, rng, n)
        lams, vecs = np.linalg.eigh(m)
        return lams, vecs
    raise UnsupportedForKindError("finite-list ensembles enumerate realizations instead of sampling spectra")


def sample_realization(ens: DisorderEnsemble, rng: np.random.Generator) -> Realization:
    """Draw a single Hamiltonian (energy units, hbar = 1) from the ensemble."""
    if ens.kind == "finite-list":
        idx = rng.choice(len(ens.weights), p=ens.weights)
        return Realization(hamiltonian=ens.hamiltonians[idx], weight=float(ens.weights[idx]))
    lams, vecs = sample_spectra(ens, rng, 1)
    if vecs is None:
        h = np.diag(lams[0]).astype(complex)
    else:
        w = vecs[0]
        h = (w * lams[0][None, :]) @ w.conj().T
    return Realization(hamiltonian=ens.omega0 * h)


def realizations(ens: DisorderEnsemble):
    """The explicit (H_i, p_i) list of a finite-list ensemble."""
    if ens.kind != "finite-list":
        raise UnsupportedForKindError("only finite-list ensembles enumerate realizations")
    return [Realization(hamiltonian=h, weight=float(p)) for h, p in zip(ens.hamiltonians, ens.weights)]


# ---------------------------------------------------------------------------
# level-spacing characteristic functions

def _spacing_weights(ens: DisorderEnsemble, j: int, k: int):
    """Mixing-row difference and offset difference entering lambda_j - lambda_k."""
    return ens.mixing[j] - ens.mixing[k], ens.offsets[j] - ens.offsets[k]


def level_spacing_cf(ens: DisorderEnsemble, j: int, k: int, t):
    """phi_jk(omega0 t) = <exp(i (lambda_j - lambda_k) omega0 t)>, vectorized over t.

    Factorizes over the independent scalar laws for spectral kinds and the
    Poissonian ensemble; the GUE has correlated eigenvalues and is handled
    through :func:`chi_bar` instead.
    """
    t = np.asarray(t, dtype=float)
    u = ens.omega0 * t
    if ens.is_spectral:
        dw, doff = _spacing_weights(ens, j, k)
        out = np.exp(1j * doff * u).astype(complex)
        for w, law in zip(dw, ens.laws):
            if w != 0.0:
                out = out * law.char_fn(w * u)
        return out
    if ens.kind == "unitarily-invariant-pe":
        if j == k:
            return np.ones_like(u, dtype=complex)
        phi = ens.laws[0].char_fn(u)
        return phi * np.conj(phi)
    raise UnsupportedForKindError(
        "per-pair spacing characteristic functions are not available for this kind; "
        "use chi_bar for the GUE")


def level_spacing_cf_deriv(ens: DisorderEnsemble, j: int, k: int, t):
    """Exact d/dt of :func:`level_spacing_cf` (product rule over the factors)."""
    t = np.asarray(t, dtype=float)
    u = ens.omega0 * t
    if ens.is_spectral:
        dw, doff = _spacing_weights(ens, j, k)
        active = [(w, law) for w, law in zip(dw, ens.laws) if w != 0.0]
        vals = [law.char_fn(w * u) for w, law in active]
        derivs = [w * law.char_fn_deriv(w * u, zero_side=w) for w, law in active]
        phase = np.exp(1j * doff * u)
        total = 1j * doff * phase * np.prod(vals, axis=0) if vals else 1j * doff * phase
        for a in range(len(active)):
            term = derivs[a]
            for b in range(len(active)):
                if b != a:
                    term = term * vals[b]
            total = total + phase * term
        return ens.omega0 * total
    if ens.kind == "unitarily-invariant-pe":
        if j == k:
            return np.zeros_like(u, dtype=complex)
        law = ens.laws[0]
        phi, dphi = law.char_fn(u), law.char_fn_deriv(u)
        return ens.omega0 * (dphi * np.conj(phi) + phi * np.conj(dphi))
    raise UnsupportedForKindError("exact spacing derivatives are not available for this kind")


def spacing_cf_matrix(ens: DisorderEnsemble, t):
    """All pairwise phi_jk(omega0 t); shape (T, d, d) (T omitted for scalar t)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    d = ens.dim
    out = np.empty((t_arr.size, d, d), dtype=complex)
    for j in range(d):
        out[:, j, j] = 1.0
        for k in range(j + 1, d):
            phi = level_spacing_cf(ens, j, k, t_arr)
            out[:, j, k] = phi
            out[:, k, j] = np.conj(phi)
    return out if np.ndim(t) else out[0]


def spacing_cf_matrix_deriv(ens: DisorderEnsemble, t):
    """All pairwise d phi_jk / dt; shape as in :func:`spacing_cf_matrix`."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    d = ens.dim
    out = np.empty((t_arr.size, d, d), dtype=complex)
    for j in range(d):
        out[:, j, j] = 0.0
        for k in range(j + 1, d):
            dphi = level_spacing_cf_deriv(ens, j, k, t_arr)
            out[:, j, k] = dphi
            out[:, k, j] = np.conj(dphi)
    return out if np.ndim(t) else out[0]


# ---------------------------------------------------------------------------
# averaged spacing statistics for unitarily invariant kinds

def chi_bar(ens: DisorderEnsemble, t, *, large_d: bool = False):
    """chi_bar(t) = (1/d^2) sum_jk conj(phi_jk(omega0 t)).

    Poissonian ensemble: 1/d + ((d-1)/d) sinc^2(sigma omega0 t / 2) in closed
    form (location offsets cancel).  GUE: determinantal two-point function via
    Hermite-pair Fourier integrals; ``large_d`` switches to the
    (J_1(2 omega0 t)/(omega0 t))^2 limit.
    """
    if not ens.is_unitarily_invariant:
        raise UnsupportedForKindError("chi_bar is defined for unitarily invariant kinds")
    t = np.asarray(t, dtype=float)
    u = ens.omega0 * t
    d = ens.dim
    if large_d:
        if ens.kind == "unitarily-invariant-pe":
            x = ens.laws[0].scale * u / 2.0
            return np.sinc(x / np.pi) ** 2
        return chi_bar_gue_large_d(u)
    if ens.kind == "unitarily-invariant-pe":
        x = ens.laws[0].scale * u / 2.0
        return 1.0 / d + (d - 1.0) / d * np.sinc(x / np.pi) ** 2
    return chi_bar_gue(d, u)


def chi_bar_deriv(ens: DisorderEnsemble, t, *, large_d: bool = False):
    """Exact d chi_bar / dt."""
    if not ens.is_unitarily_invariant:
        raise UnsupportedForKindError("chi_bar is defined for unitarily invariant kinds")
    t = np.asarray(t, dtype=float)
    u = ens.omega0 * t
    d = ens.dim
    if ens.kind == "unitarily-invariant-pe":
        sig = ens.laws[0].scale
        x = sig * u / 2.0
        s = np.sinc(x / np.pi)
        from .distributions import _sinc_prime
        pref = 1.0 if large_d else (d - 1.0) / d
        return pref * 2.0 * s * _sinc_prime(x) * (sig * ens.omega0 / 2.0)
    if large_d:
        return chi_bar_gue_large_d_deriv(u) * ens.omega0
    return chi_bar_gue_deriv(d, u) * ens.omega0


# ---------------------------------------------------------------------------
# Haar-measure moment identities (Weingarten calculus), used to certify the sampler

def haar_second_moment(x: np.ndarray) -> np.ndarray:
    """Closed form of the Haar average of W X W^dagger: Tr[X]/d times the identity."""
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    return np.trace(x) / d * np.eye(d, dtype=complex)


def haar_fourth_moment(x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
    """Closed form of the Haar average of W X1 W^dagger X2 W X3 W^dagger."""
    x1, x2, x3 = (np.asarray(x, dtype=complex) for x in (x1, x2, x3))
    d = x1.shape[0]
    t13, t1, t3 = np.trace(x1 @ x3), np.trace(x1), np.trace(x3)
    c_eye = (d * t13 - t1 * t3) / (d * (d * d - 1.0)) * np.trace(x2)
    c_x2 = (d * t1 * t3 - t13) / (d * (d * d - 1.0))
    return c_eye * np.eye(d, dtype=complex) + c_x2 * x2
