"""Closed-form master-equation ingredients.

Covers the qubit dephasing rates and energy functions for the four disorder
laws, the d-dimensional spectral (dephasing) master equation, the
depolarization laws of the unitarily invariant ensembles, purity dynamics and
asymptotics, the short-time Lindblad construction, and the short-time
validity horizon.  hbar = 1 everywhere; energies are angular frequencies.

Sign conventions worth stating once: for the Levy law the characteristic
function with the principal square root gives the energy function
omega0*lambda0/2 + (1/4) sqrt(sigma omega0 / t); its time-dependent part is
positive (the phase of the coherence winds faster than the location-only
precession at all times).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .distributions import CumulantVector, ScalarDistribution, UnsupportedDistributionError, _sinc
from .ensembles import (
    DisorderEnsemble,
    UnsupportedForKindError,
    chi_bar,
    chi_bar_deriv,
    level_spacing_cf,
    level_spacing_cf_deriv,
)
from .extraction import MasterEquationSeries, build_map_analytic, diagonalize_gamma, lindblad_operators
from .gue_kernel import gue_large_d_singular_times
from .operators import HermitianBasis, gell_mann_basis

SINGULARITY_RCOND = 1e-8


class NoAverageHamiltonianError(ValueError):
    """The ensemble has no finite average Hamiltonian (heavy-tailed laws)."""


class InvalidPurityError(ValueError):
    """Initial purity outside [1/d, 1]."""


# ---------------------------------------------------------------------------
# single qubit with spectral disorder

@dataclass(frozen=True)
class QubitRatePair:
    """Energy function phi(t) and decoherence rate gamma(t) of the qubit
    dephasing master equation for one scalar disorder law.

    The master equation is
    drho/dt = -i [phi(t) sigma_z, rho] + gamma(t) (sigma_z rho sigma_z - rho).
    """

    distribution: ScalarDistribution
    omega0: float

    def energy_fn(self, t):
        """phi(t) = (1/2) Im d/dt ln phi_cf(omega0 t), closed form."""
        t = np.asarray(t, dtype=float)
        lam0, sig, w0 = self.distribution.location, self.distribution.scale, self.omega0
        base = np.full_like(t, 0.5 * w0 * lam0)
        if self.distribution.kind != "levy":
            return base
        with np.errstate(divide="ignore"):
            return base + 0.25 * np.sqrt(sig * w0 / t)

    def rate_fn(self, t):
        """gamma(t) = -(1/2) Re d/dt ln phi_cf(omega0 t), closed form.

        The uniform-box rate diverges at tau_n = 2 pi n / (sigma omega0);
        evaluation exactly there returns +inf (the left-limit sign).
        """
        t = np.asarray(t, dtype=float)
        kind = self.distribution.kind
        sig, w0 = self.distribution.scale, self.omega0
        if kind == "point-mass":
            return np.zeros_like(t)
        if kind == "cauchy-lorentz":
            return np.full_like(t, 0.5 * w0 * sig)
        if kind == "gaussian":
            return 0.5 * (w0 * sig) ** 2 * t
        if kind == "levy":
            with np.errstate(divide="ignore"):
                return 0.25 * np.sqrt(sig * w0 / t)
        x = 0.5 * sig * w0 * t
        small = np.abs(x) < 1e-4
        xs = np.where(small, 1.0, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = 1.0 / xs - np.cos(xs) / np.sin(xs)
        series = x / 3.0 + x**3 / 45.0
        core = np.where(small, series, core)
        # at (numerically) exactly tau_n return the signed-infinity marker of
        # the left limit instead of a large float
        n = np.round(x / np.pi)
        at_tau = (n >= 1) & (np.abs(x - n * np.pi) <= 1e-12 * np.maximum(1.0, np.abs(x)))
        core = np.where(at_tau | ~np.isfinite(core), np.inf, core)
        return 0.25 * sig * w0 * core

    def singular_times(self, t_max: float) -> np.ndarray:
        """Rate singularities in (0, t_max]; empty except for the uniform box
        (tau_n = 2 pi n / (sigma omega0)) and the levy law (t = 0 excluded)."""
        if self.distribution.kind != "uniform-box":
            return np.array([])
        tau1 = 2.0 * np.pi / (self.distribution.scale * self.omega0)
        n = int(np.floor(t_max / tau1 + 1e-12))
        return tau1 * np.arange(1, n + 1)

    def integrated_rate(self, t):
        """int_0^t gamma dt', closed form (finite at all t except box tau_n)."""
        t = np.asarray(t, dtype=float)
        kind = self.distribution.kind
        sig, w0 = self.distribution.scale, self.omega0
        if kind == "point-mass":
            return np.zeros_like(t)
        if kind == "cauchy-lorentz":
            return 0.5 * w0 * sig * t
        if kind == "gaussian":
            return 0.25 * (w0 * sig * t) ** 2
        if kind == "levy":
            return 0.5 * np.sqrt(sig * w0 * t)
        with np.errstate(divide="ignore"):
            return -0.5 * np.log(np.abs(_sinc(0.5 * sig * w0 * t)))


def qubit_rates(dist: ScalarDistribution, omega0: float) -> QubitRatePair:
    """Energy function and decoherence rate for qubit spectral disorder."""
    return QubitRatePair(distribution=dist, omega0=float(omega0))


def qubit_coherence(rho12_0: complex, pair: QubitRatePair, t):
    """Off-diagonal element rho12(t) = rho12(0) exp(-2 int_0^t (i phi + gamma) dt').

    Evaluated as rho12(0) * conj(phi_cf(omega0 t)), the closed form of the
    integral that also carries the coherence sign through the rate
    singularities of compactly supported laws.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("coherence evolution is defined for t >= 0")
    return rho12_0 * np.conj(pair.distribution.char_fn(pair.omega0 * t))


# ---------------------------------------------------------------------------
# d-dimensional spectral disorder: closed-form dephasing master equation

def _log_derivative_matrix(ens: DisorderEnsemble, t: float) -> np.ndarray:
    """w_jk(t) = d/dt ln conj(phi_jk(omega0 t)) for all pairs.

    Only the upper triangle is evaluated; w_kj = conj(w_jk) since
    phi_kj = conj(phi_jk).
    """
    d = ens.dim
    w = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(j + 1, d):
            phi = level_spacing_cf(ens, j, k, t)
            dphi = level_spacing_cf_deriv(ens, j, k, t)
            w[j, k] = np.conj(dphi) / np.conj(phi)
            w[k, j] = np.conj(w[j, k])
    return w


def _spectral_h_gamma(ens: DisorderEnsemble, basis: HermitianBasis, t: float):
    w = _log_derivative_matrix(ens, t)
    d = ens.dim
    diag_a = np.real(np.einsum("mjj->mj", basis.ops))  # A_{m,jj}, real for Hermitian ops
    # H_eff = -(1/d) sum_jk Im(w_jk) Pi_j, traceless because Im w is antisymmetric
    h_diag = -np.sum(np.imag(w), axis=1) / d
    h_eff = np.diag(h_diag).astype(complex)
    gamma = np.einsum("jk,mj,nk->mn", w, diag_a[1:], diag_a[1:])
    gamma = 0.5 * (gamma + gamma.conj().T)
    return h_eff, gamma


def spectral_master_equation(ens: DisorderEnsemble, times,
                             basis: HermitianBasis | None = None) -> MasterEquationSeries:
    """Closed-form master equation for spectral disorder (dephasing).

    The decoherence matrix lives on the d-1 diagonal basis operators only, so
    every Lindblad operator is diagonal in the common eigenbasis; the
    effective Hamiltonian is diagonal too.  Grid times where some coherence
    vanishes (|phi_jk| below the singularity threshold) or where the log
    derivative diverges are flagged.
    """
    if not ens.is_spectral:
        raise UnsupportedForKindError("closed-form dephasing requires a spectral ensemble kind")
    basis = gell_mann_basis(ens.dim) if basis is None else basis
    times = np.asarray(times, dtype=float)
    d = ens.dim
    k = d * d - 1
    n = times.size
    h_eff = np.full((n, d, d), np.nan, dtype=complex)
    gammas = np.full((n, k, k), np.nan, dtype=complex)
    flags = np.zeros(n, dtype=bool)
    from .ensembles import spacing_cf_matrix
    for i, t in enumerate(times):
        phi = spacing_cf_matrix(ens, t)
        if np.min(np.abs(phi)) < SINGULARITY_RCOND:
            flags[i] = True
            continue
        h, g = _spectral_h_gamma(ens, basis, t)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            flags[i] = True
            continue
        h_eff[i], gammas[i] = h, g
    rates, vecs = diagonalize_gamma(gammas, flags)
    linds = np.full((n, k, d, d), np.nan, dtype=complex)
    ok = ~flags
    if ok.any():
        linds[ok] = lindblad_operators(vecs[ok], basis)

    def exact(t, _ens=ens, _basis=basis):
        return _spectral_h_gamma(_ens, _basis, t)

    maps = build_map_analytic(ens, times)
    return MasterEquationSeries(times=times, h_eff=h_eff, gamma=gammas, rates=rates,
                                lindblads=linds, flags=flags, basis=basis,
                                omega0=ens.omega0, provenance="analytic",
                                exact_generator=exact, maps=maps)


# ---------------------------------------------------------------------------
# unitarily invariant disorder: depolarization channel

@dataclass(frozen=True)
class DepolarizationLaw:
    """Mixing probability a(t) and depolarization rate gamma(t) = -d/dt ln a(t).

    The Lindblad operators are fixed by the isotropic eigenvector
    distribution alone: L_0 = 1/d and L_j = G_j / sqrt(d) for the d^2 - 1
    Gell-Mann matrices G_j, which satisfy sum_j L_j rho L_j^dag = 1/d and
    sum_j L_j^dag L_j = 1 exactly.
    """

    ensemble: DisorderEnsemble
    large_d: bool = False

    @property
    def dim(self) -> int:
        return self.ensemble.dim

    @property
    def kind(self) -> str:
        tag = "pe" if self.ensemble.kind == "unitarily-invariant-pe" else "gue"
        return tag + ("-large-d" if self.large_d else "")

    def mixing(self, t):
        """a(t) = (d^2 chi_bar(t) - 1)/(d^2 - 1); its large-d limit is chi_bar."""
        if self.large_d:
            return chi_bar(self.ensemble, t, large_d=True)
        d = self.dim
        return (d * d * chi_bar(self.ensemble, t) - 1.0) / (d * d - 1.0)

    def mixing_deriv(self, t):
        if self.large_d:
            return chi_bar_deriv(self.ensemble, t, large_d=True)
        d = self.dim
        return d * d * chi_bar_deriv(self.ensemble, t) / (d * d - 1.0)

    def rate(self, t):
        """gamma(t) = -a'(t)/a(t); +-inf exactly at zeros of a."""
        a = np.asarray(self.mixing(t), dtype=float)
        da = np.asarray(self.mixing_deriv(t), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -da / a
        return out

    def singular_times(self, t_max: float) -> np.ndarray:
        """Zeros of the mixing probability in (0, t_max] (flagged times)."""
        ens, w0 = self.ensemble, self.ensemble.omega0
        if self.kind == "pe":
            return np.array([])  # a >= 1/(1+d) > 0
        if self.kind == "pe-large-d":
            tau1 = 2.0 * np.pi / (ens.laws[0].scale * w0)
            return tau1 * np.arange(1, int(np.floor(t_max / tau1 + 1e-12)) + 1)
        if self.kind == "gue-large-d":
            return gue_large_d_singular_times(w0, t_max)
        # finite-d GUE: scan for sign changes of a(t)
        grid = np.linspace(0.0, t_max, 2048)
        vals = np.asarray(self.mixing(grid))
        roots = []
        for i in range(len(grid) - 1):
            if vals[i] == 0.0:
                roots.append(grid[i])
            elif vals[i] * vals[i + 1] < 0:
                roots.append(brentq(lambda s: float(self.mixing(s)), grid[i], grid[i + 1]))
        return np.asarray([r for r in roots if r > 0.0])

    def lindblad_operators(self) -> np.ndarray:
        basis = gell_mann_basis(self.dim)
        ops = np.concatenate([np.eye(self.dim, dtype=complex)[None] / self.dim,
                              basis.traceless / np.sqrt(self.dim)])
        return ops


def depolarization_law(ens: DisorderEnsemble, *, large_d: bool = False) -> DepolarizationLaw:
    """Depolarization mixing probability and rate for unitarily invariant kinds."""
    if not ens.is_unitarily_invariant:
        raise UnsupportedForKindError("depolarization laws require a unitarily invariant ensemble")
    return DepolarizationLaw(ensemble=ens, large_d=large_d)


def pe_rate_closed_form(dim: int, omega0: float, width: float, t):
    """Printed closed form of the Poissonian-ensemble depolarization rate,

    gamma_P = -d ((x/2) sin x + cos x - 1) / (d t sin^2(x/2) + t^3 (sigma w0/2)^2),

    with x = sigma omega0 t.  Equal to -a'/a of the mixing probability; kept
    as an independent expression for cross-checks.
    """
    t = np.asarray(t, dtype=float)
    x = width * omega0 * t
    with np.errstate(divide="ignore", invalid="ignore"):
        num = -dim * ((x / 2.0) * np.sin(x) + np.cos(x) - 1.0)
        den = dim * t * np.sin(x / 2.0) ** 2 + t**3 * (width * omega0 / 2.0) ** 2
        out = num / den
    return np.where(t == 0.0, 0.0, out)


def gue_rate_d2(omega0: float, t):
    """Printed closed form of the GUE depolarization rate at d = 2:
    -2 w^2 t (w^2 t^2 - 3) / (exp(w^2 t^2 / 2) + 2 - 2 w^2 t^2)."""
    t = np.asarray(t, dtype=float)
    x = (omega0 * t) ** 2
    return -2.0 * omega0**2 * t * (x - 3.0) / (np.exp(x / 2.0) + 2.0 - 2.0 * x)


def pe_rate_large_d(omega0: float, width: float, t):
    """Large-d limit of the PE rate: 2/t - sigma omega0 cot(sigma omega0 t / 2)."""
    t = np.asarray(t, dtype=float)
    x = width * omega0 * t / 2.0
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        core = 1.0 / xs - np.cos(xs) / np.sin(xs)
    core = np.where(small, x / 3.0 + x**3 / 45.0, core)
    return width * omega0 * core


def purity_evolution(law: DepolarizationLaw, p0: float, t):
    """Tr[rho^2](t) = a(t)^2 (P0 - 1/d) + 1/d for the depolarization channel."""
    d = law.dim
    if not (1.0 / d - 1e-12 <= p0 <= 1.0 + 1e-12):
        raise InvalidPurityError(f"initial purity must lie in [1/{d}, 1]")
    a = np.asarray(law.mixing(t), dtype=float)
    offset = 0.0 if law.large_d else 1.0 / d
    return a * a * (p0 - offset) + offset


def asymptotic_purity(dim: int, p0: float) -> float:
    """Long-time purity (d + 2 + P0)/(1 + d)^2 for absolutely integrable
    eigenvalue laws (Riemann-Lebesgue)."""
    if not (1.0 / dim - 1e-12 <= p0 <= 1.0 + 1e-12):
        raise InvalidPurityError(f"initial purity must lie in [1/{dim}, 1]")
    return (dim + 2.0 + p0) / (1.0 + dim) ** 2


# ---------------------------------------------------------------------------
# short-time master equation

@dataclass(frozen=True)
class ShortTimeModel:
    """Short-time Lindblad description: time-independent operators, rates linear in t.

    Per realization, L = (H - H_avg)/omega0 with rate 2 p omega0^2 t.  After
    the ensemble integral the decoherence matrix in the canonical Hermitian
    basis is Gamma(t) = t * gamma_dot0 with
    gamma_dot0_mn = 2 omega0^2 Cov(Tr[A_m H/omega0], Tr[A_n H/omega0]).
    """

    ensemble: DisorderEnsemble
    h_avg: np.ndarray
    gamma_dot0: np.ndarray
    basis: HermitianBasis = field(repr=False)

    @property
    def omega0(self) -> float:
        return self.ensemble.omega0

    def realization_lindblad(self, h: np.ndarray) -> np.ndarray:
        """L = (H - H_avg)/omega0 for one realization Hamiltonian."""
        return (np.asarray(h, dtype=complex) - self.h_avg) / self.omega0

    def rate_coefficient(self) -> float:
        """gamma_lambda(t) = 2 p_lambda omega0^2 t; the coefficient 2 omega0^2."""
        return 2.0 * self.omega0**2

    def generator_at(self, t: float):
        """(H_eff, Gamma(t)) pair; H_eff is the traceless part of H_avg."""
        h = self.h_avg - np.trace(self.h_avg) / self.basis.dim * np.eye(self.basis.dim)
        return h, t * self.gamma_dot0


def short_time_lindblad(ens: DisorderEnsemble, basis: HermitianBasis | None = None) -> ShortTimeModel:
    """Short-time Lindblad model of the ensemble average.

    Requires a finite average Hamiltonian: heavy-tailed eigenvalue laws
    (cauchy-lorentz, levy) are rejected.  Specializations:

    * qubit spectral disorder: single sigma_z channel, rate
      (omega0^2 t/2)(<lambda^2> - <lambda>^2) on the unnormalized sigma_z;
    * d-dimensional spectral disorder: Gamma on the diagonal operators with
      the eigenvalue covariance matrix;
    * unitarily invariant: d^2 - 1 equal rates, coefficient
      (2 omega0^2/(d^2-1)) (d sum_j <lambda_j^2> - sum_jk <lambda_j lambda_k>)
      on L_j = G_j/sqrt(d);
    * exact at all times iff the underlying laws are gaussian.
    """
    d = ens.dim
    basis = gell_mann_basis(d) if basis is None else basis
    w0 = ens.omega0
    k = d * d - 1
    if ens.is_spectral:
        for law in ens.laws:
            if not law.has_moments:
                raise NoAverageHamiltonianError(f"{law.kind} law has no finite mean")
        means = np.array([law.mean() for law in ens.laws])
        variances = np.array([law.variance() for law in ens.laws])
        lam_mean = ens.offsets + ens.mixing @ means
        cov = ens.mixing @ np.diag(variances) @ ens.mixing.T
        h_avg = w0 * np.diag(lam_mean).astype(complex)
        diag_a = np.real(np.einsum("mjj->mj", basis.ops))[1:]
        gdot = 2.0 * w0**2 * np.einsum("jk,mj,nk->mn", cov, diag_a, diag_a).astype(complex)
    elif ens.kind == "unitarily-invariant-pe":
        law = ens.laws[0]
        mean, var = law.mean(), law.variance()
        h_avg = w0 * mean * np.eye(d, dtype=complex)
        gdot = (2.0 * w0**2 * var / (d + 1.0)) * np.eye(k, dtype=complex)
    elif ens.kind == "unitarily-invariant-gue":
        h_avg = np.zeros((d, d), dtype=complex)
        gdot = (2.0 * w0**2 / d) * np.eye(k, dtype=complex)
    else:  # finite-list
        h_avg = np.einsum("i,iab->ab", ens.weights, ens.hamiltonians)
        dev = ens.hamiltonians - h_avg[None]
        c = np.real(np.einsum("mab,iba->im", basis.traceless, dev)) / w0
        gdot = 2.0 * w0**2 * np.einsum("i,im,in->mn", ens.weights, c, c).astype(complex)
    return ShortTimeModel(ensemble=ens, h_avg=h_avg, gamma_dot0=gdot, basis=basis)


# ---------------------------------------------------------------------------
# validity horizon of the short-time description

def validity_horizon_from_cumulants(kappa: CumulantVector, omega0: float) -> float:
    """|2 gamma'(0)/gamma'''(0)|^(1/2) from the cumulant series: sqrt(2 k2/|k4|)/omega0.

    Gaussian laws (k4 = 0) return inf: the short-time equation is exact at
    all times.
    """
    if kappa.order < 4:
        raise ValueError("need cumulants up to order 4")
    if not kappa.finite[:4].all():
        raise UnsupportedDistributionError("cumulants of order <= 4 must be finite")
    k2, k4 = kappa.values[1], kappa.values[3]
    if k4 == 0.0:
        return np.inf
    return float(np.sqrt(abs(2.0 * k2 / k4)) / omega0)


def validity_horizon(rate_fn: Callable, t_scale: float) -> float:
    """Numeric |2 gamma'(t)/gamma'''(t)|^(1/2) at t -> 0+.

    Fits gamma(t) ~ c1 t + c3 t^3 on a small-t sample (t_scale sets "small");
    returns inf when the cubic term is negligible.
    """
    ts = t_scale * np.array([0.01, 0.02, 0.03, 0.04, 0.05, 0.06])
    vals = np.asarray([float(rate_fn(t)) for t in ts])
    design = np.column_stack([ts, ts**3])
    (c1, c3), *_ = np.linalg.lstsq(design, vals, rcond=None)
    if abs(c3) * t_scale**2 < 1e-12 * abs(c1):
        return np.inf
    return float(np.sqrt(abs(c1 / (3.0 * c3))))
