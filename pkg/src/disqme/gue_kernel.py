"""Level-spacing statistics of the Gaussian unitary ensemble.

The joint eigenvalue density at the normalization <|H_jk|^2> = 1/d (in units
of the characteristic energy) is proportional to exp(-(d/2) sum lambda_j^2)
times the squared Vandermonde factor.  Its two-point correlation function is
determinantal in the harmonic-oscillator kernel built from the orthonormal
functions

    phi_n(x) = (d/2)^(1/4) (2^n n! sqrt(pi))^(-1/2) exp(-d x^2/4) H_n(sqrt(d/2) x),

so the averaged sum of level-spacing characteristic functions reduces to 1-D
Fourier integrals of Hermite-function pairs.  Those integrals have the closed
form of displacement-operator matrix elements,

    <n| e^{iky} |m> = e^{-k^2/4} sqrt(n!/m!) (ik/sqrt(2))^(m-n) L_n^(m-n)(k^2/2),

for m >= n, which is what this module evaluates (plus the exact k-derivative
via the ladder relation).  The large-d limit is (J_1(2u)/u)^2.
"""

from __future__ import annotations

import numpy as np
from scipy.special import eval_genlaguerre, gammaln, j0, j1, jn_zeros


def pair_fourier_matrix(n_max: int, k: float) -> np.ndarray:
    """Matrix M[n, m] = <n| exp(i k y) |m> for harmonic-oscillator functions,
    0 <= n, m < n_max."""
    if k == 0.0:
        return np.eye(n_max, dtype=complex)
    n, m = np.meshgrid(np.arange(n_max), np.arange(n_max), indexing="ij")
    lo, hi = np.minimum(n, m), np.maximum(n, m)
    diff = hi - lo
    log_mag = -k * k / 4.0 + 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + diff * np.log(abs(k) / np.sqrt(2.0))
    lag = eval_genlaguerre(lo, diff, k * k / 2.0)
    return np.exp(log_mag) * lag * (1j * np.sign(k)) ** diff


def pair_fourier_matrix_deriv(n_max: int, k: float) -> np.ndarray:
    """d/dk of :func:`pair_fourier_matrix`, via y|m> = sqrt((m+1)/2)|m+1> + sqrt(m/2)|m-1>."""
    big = pair_fourier_matrix(n_max + 1, k)[:n_max]
    m = np.arange(n_max)
    up = big[:, 1:n_max + 1] * np.sqrt((m + 1) / 2.0)[None, :]
    down = np.zeros((n_max, n_max), dtype=complex)
    down[:, 1:] = big[:, :n_max - 1][:, :] * np.sqrt(m[1:] / 2.0)[None, :]
    return 1j * (up + down)


def chi_bar_gue(dim: int, u):
    """chi_bar(u) = (1/d^2) sum_jk <e^{-i (lambda_j - lambda_k) u}> for the GUE.

    u is omega0 * t (vectorized).  Uses the determinantal two-point function:
    chi_bar = 1/d + (|sum_n G_nn|^2 - sum_nm |G_nm|^2)/d^2 with the Fourier
    pair integrals G evaluated at k = u sqrt(2/d).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape)
    scale = np.sqrt(2.0 / dim)
    for i, ui in enumerate(u):
        m = pair_fourier_matrix(dim, ui * scale)
        out[i] = 1.0 / dim + (abs(np.trace(m)) ** 2 - np.sum(np.abs(m) ** 2)) / dim**2
    return out if out.size > 1 else out[0]


def chi_bar_gue_deriv(dim: int, u):
    """d/du of :func:`chi_bar_gue` (exact, via the ladder relation)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape)
    scale = np.sqrt(2.0 / dim)
    for i, ui in enumerate(u):
        k = ui * scale
        m = pair_fourier_matrix(dim, k)
        dm = pair_fourier_matrix_deriv(dim, k) * scale
        tr, dtr = np.trace(m), np.trace(dm)
        term1 = 2.0 * np.real(np.conj(tr) * dtr)
        term2 = 2.0 * np.sum(np.real(np.conj(m) * dm))
        out[i] = (term1 - term2) / dim**2
    return out if out.size > 1 else out[0]


def chi_bar_gue_large_d(u):
    """Large-dimension limit chi_bar(u) ~ (J_1(2u)/u)^2, with the value 1 at u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-8
    us = np.where(small, 1.0, u)
    val = (j1(2.0 * us) / us) ** 2
    return np.where(small, 1.0, val)


def chi_bar_gue_large_d_deriv(u):
    """d/du of the large-d form, using J_1' (x) = J_0(x) - J_1(x)/x."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-6
    us = np.where(small, 1.0, u)
    f = j1(2.0 * us) / us
    fp = 2.0 * j0(2.0 * us) / us - 2.0 * f / us
    # series: (J1(2u)/u)^2 = 1 - u^2 + 5 u^4/12 + ..., derivative -2u + 5u^3/3
    return np.where(small, -2.0 * u, 2.0 * f * fp)


def gue_large_d_singular_times(omega0: float, t_max: float) -> np.ndarray:
    """Times where the large-d mixing probability vanishes: zeros of J_1(2 omega0 t)."""
    zeros = []
    n = 8
    while True:
        cand = jn_zeros(1, n) / (2.0 * omega0)
        zeros = cand[cand <= t_max]
        if len(zeros) < n or cand[-1] > t_max:
            return np.asarray(zeros)
        n *= 2


def hermite_functions(n_max: int, y) -> np.ndarray:
    """Orthonormal harmonic-oscillator functions psi_0..psi_{n_max-1} at points y.

    Stable three-term recurrence on the normalized functions:
    psi_{n+1} = y sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1}.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros((n_max, y.size))
    out[0] = np.pi ** (-0.25) * np.exp(-y * y / 2.0)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * y * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = y * np.sqrt(2.0 / (n + 1)) * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out
