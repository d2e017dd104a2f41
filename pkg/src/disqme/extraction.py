"""Average dynamical maps and the master equations they generate.

Pipeline: build the d^2 x d^2 average dynamical matrix F(t) on a time grid
(analytically or by Monte Carlo), form the time-local generator
Q(t) = dF/dt . F^{-1}(t), project Q onto a Hermitian operator basis to obtain
the C matrix, split off the effective Hamiltonian H(t) = (i/2)(Ctilde -
Ctilde^dagger) and the decoherence matrix Gamma(t) = C restricted to the
traceless sector, and diagonalize Gamma into rates and Lindblad operators.

Grid times where F is numerically singular (smallest singular value below
1e-8 of the largest, or a diverging derivative) are flagged and skipped, never
regularized: they mark exact zeros of coherences where the inverse map does
not exist.  hbar = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ensembles import (
    DisorderEnsemble,
    chi_bar,
    chi_bar_deriv,
    sample_spectra,
    spacing_cf_matrix,
    spacing_cf_matrix_deriv,
)
from .operators import HermitianBasis, gell_mann_basis

SINGULARITY_RCOND = 1e-8
TRACE_PRESERVATION_TOL = 1e-8
RECONSTRUCTION_TOL = 1e-9
GAMMA_HERMITICITY_TOL = 1e-10


class ExtractionFailureError(RuntimeError):
    """The generator could not be extracted (non-isolated singular times, ...)."""


class InconsistentGeneratorError(ValueError):
    """The generator violates trace preservation beyond tolerance."""


@dataclass
class DynamicalMapSeries:
    """F(t) on a grid, with provenance and optional exact derivatives.

    ``maps[i]`` acts on row-major vectorized density matrices.  For analytic
    provenance, ``map_fn``/``dmap_fn`` evaluate F and dF/dt at arbitrary
    times; Monte Carlo series instead carry ``batch_maps`` for standard-error
    estimation.
    """

    times: np.ndarray
    maps: np.ndarray
    dim: int
    omega0: float
    provenance: str
    n_samples: int | None = None
    seed: int | None = None
    dmaps: np.ndarray | None = field(default=None, repr=False)
    map_fn: Callable | None = field(default=None, repr=False)
    dmap_fn: Callable | None = field(default=None, repr=False)
    batch_maps: np.ndarray | None = field(default=None, repr=False)

    def stderr(self) -> np.ndarray | None:
        """Per-entry standard error of the mean map (Monte Carlo provenance)."""
        if self.batch_maps is None:
            return None
        b = self.batch_maps.shape[0]
        dev = self.batch_maps - self.maps[None]
        var = (np.mean(dev.real**2, axis=0) + np.mean(dev.imag**2, axis=0)) * b / (b - 1)
        return np.sqrt(var / b)


def _depolarization_superops(d: int):
    eye = np.eye(d * d, dtype=complex)
    vec_id = np.eye(d, dtype=complex).reshape(-1)
    proj = np.outer(vec_id, vec_id)
    return eye, proj


def _mixing_probability(ens: DisorderEnsemble, t):
    d = ens.dim
    return (d * d * chi_bar(ens, t) - 1.0) / (d * d - 1.0)


def _mixing_probability_deriv(ens: DisorderEnsemble, t):
    d = ens.dim
    return d * d * chi_bar_deriv(ens, t) / (d * d - 1.0)


def build_map_analytic(ens: DisorderEnsemble, times) -> DynamicalMapSeries:
    """Closed-form average dynamical matrix on a grid.

    Spectral kinds give the diagonal superoperator F_{jk,jk} = conj(phi_jk),
    unitarily invariant kinds the depolarization channel
    F = a(t) Id + (1 - a(t))/d |vec(1)><vec(1)|.  finite-list ensembles have
    no closed form; use :func:`build_map_montecarlo` (exact for them).
    """
    times = np.asarray(times, dtype=float)
    d = ens.dim
    if ens.is_spectral:
        def map_fn(t):
            return np.diag(np.conj(spacing_cf_matrix(ens, t)).reshape(-1))

        def dmap_fn(t):
            return np.diag(np.conj(spacing_cf_matrix_deriv(ens, t)).reshape(-1))

        phis = spacing_cf_matrix(ens, times).reshape(times.size, -1)
        dphis = spacing_cf_matrix_deriv(ens, times).reshape(times.size, -1)
        maps = np.zeros((times.size, d * d, d * d), dtype=complex)
        dmaps = np.zeros_like(maps)
        idx = np.arange(d * d)
        maps[:, idx, idx] = np.conj(phis)
        dmaps[:, idx, idx] = np.conj(dphis)
    elif ens.is_unitarily_invariant:
        eye, proj = _depolarization_superops(d)

        def map_fn(t):
            a = _mixing_probability(ens, t)
            return a * eye + (1.0 - a) / d * proj

        def dmap_fn(t):
            da = _mixing_probability_deriv(ens, t)
            return da * (eye - proj / d)

        a = np.atleast_1d(_mixing_probability(ens, times))
        da = np.atleast_1d(_mixing_probability_deriv(ens, times))
        maps = a[:, None, None] * eye[None] + ((1.0 - a) / d)[:, None, None] * proj[None]
        dmaps = da[:, None, None] * (eye - proj / d)[None]
    else:
        raise ValueError("finite-list ensembles have no closed form; build_map_montecarlo is exact for them")
    return DynamicalMapSeries(times=times, maps=maps, dim=d, omega0=ens.omega0,
                              provenance="analytic", dmaps=dmaps, map_fn=map_fn, dmap_fn=dmap_fn)


def _finite_list_series(ens: DisorderEnsemble, times: np.ndarray) -> DynamicalMapSeries:
    d = ens.dim
    evals, evecs = np.linalg.eigh(ens.hamiltonians)

    def unitaries(t):
        ph = np.exp(-1j * evals * t)
        return np.einsum("nab,nb,ncb->nac", evecs, ph, evecs.conj())

    def assemble(us, dus=None):
        f = np.zeros((d * d, d * d), dtype=complex)
        df = np.zeros_like(f) if dus is not None else None
        for i, p in enumerate(ens.weights):
            f += p * np.kron(us[i], us[i].conj())
            if dus is not None:
                df += p * (np.kron(dus[i], us[i].conj()) + np.kron(us[i], dus[i].conj()))
        return f, df

    def map_fn(t):
        return assemble(unitaries(t))[0]

    def dmap_fn(t):
        us = unitaries(t)
        dus = np.einsum("nab,nb,ncb->nac", evecs, -1j * evals * np.exp(-1j * evals * t), evecs.conj())
        return assemble(us, dus)[1]

    maps = np.array([map_fn(t) for t in times])
    dmaps = np.array([dmap_fn(t) for t in times])
    return DynamicalMapSeries(times=times, maps=maps, dim=d, omega0=ens.omega0,
                              provenance="analytic", dmaps=dmaps, map_fn=map_fn, dmap_fn=dmap_fn)


def run_batches(worker, n_batches: int, n_threads: int | None = None) -> None:
    """Run ``worker(b)`` for b = 0..n_batches-1, optionally on a thread pool.

    Workers write disjoint slices of preallocated arrays, so results are
    bitwise independent of the worker count; batch boundaries are fixed by
    the batch count alone.
    """
    if n_threads is None or n_threads <= 1:
        for b in range(n_batches):
            worker(b)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        list(pool.map(worker, range(n_batches)))


def build_map_montecarlo(ens: DisorderEnsemble, times, n_samples: int,
                         rng: np.random.Generator, n_batches: int = 20,
                         seed: int | None = None, n_threads: int | None = None) -> DynamicalMapSeries:
    """Sample average of conjugation superoperators on a grid.

    For finite-list ensembles this is the exact probability-weighted sum
    (analytic provenance, exact derivatives).  Sampled ensembles store
    ``n_batches`` per-batch means for standard-error estimation; the overall
    mean is the batch-size-weighted combination, deterministic for a given
    generator state and independent of the thread count.
    """
    times = np.asarray(times, dtype=float)
    if ens.kind == "finite-list":
        return _finite_list_series(ens, times)
    if n_samples < 1:
        raise ValueError("need at least one sample")
    d = ens.dim
    lams, vecs = sample_spectra(ens, rng, n_samples)
    bounds = np.linspace(0, n_samples, n_batches + 1).astype(int)
    batch_maps = np.zeros((n_batches, times.size, d * d, d * d), dtype=complex)

    def worker(b):
        sl = slice(bounds[b], bounds[b + 1])
        lam_b = lams[sl]
        vec_b = None if vecs is None else vecs[sl]
        for i, t in enumerate(times):
            ph = np.exp(-1j * lam_b * ens.omega0 * t)
            if vec_b is None:
                # common eigenbasis: the map is diagonal with entries <ph_j conj(ph_k)>
                ee = ph.T @ ph.conj() / lam_b.shape[0]
                batch_maps[b, i] = np.diag(ee.reshape(-1))
            else:
                us = np.einsum("nab,nb,ncb->nac", vec_b, ph, vec_b.conj())
                flat = us.reshape(lam_b.shape[0], -1)
                t1 = flat.T @ flat.conj() / lam_b.shape[0]   # indices (jr),(ks)
                batch_maps[b, i] = t1.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)

    run_batches(worker, n_batches, n_threads)
    weights = (bounds[1:] - bounds[:-1]) / n_samples
    maps = np.einsum("b,btxy->txy", weights, batch_maps)
    return DynamicalMapSeries(times=times, maps=maps, dim=d, omega0=ens.omega0,
                              provenance="monte-carlo", n_samples=n_samples, seed=seed,
                              batch_maps=batch_maps)


def five_point_derivative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Fourth-order finite-difference time derivative along axis 0 (uniform grid)."""
    times = np.asarray(times, dtype=float)
    if len(times) < 5:
        raise ValueError("the 5-point stencil needs at least 5 grid points")
    h = times[1] - times[0]
    if not np.allclose(np.diff(times), h, rtol=1e-9, atol=1e-12):
        raise ValueError("finite differencing requires a uniform grid")
    f = values
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    return out


@dataclass
class GeneratorSeries:
    """Q(t) = dF/dt . F^{-1} on the grid, with singular-time flags."""

    times: np.ndarray
    qs: np.ndarray
    flags: np.ndarray


def extract_generator(series: DynamicalMapSeries, *,
                      allow_nonisolated: bool = False) -> GeneratorSeries:
    """Time-local generator of the map series.

    Flags (rather than fabricates) grid times where the map is near-singular
    or the derivative diverges; flagged entries are NaN.  Non-isolated flagged
    times raise :class:`ExtractionFailureError` unless ``allow_nonisolated``.
    Analytic provenance uses the exact derivative series; Monte Carlo uses
    the 5-point stencil, whose noise amplification dominates the error budget.
    """
    f = series.maps
    df = series.dmaps if series.dmaps is not None else five_point_derivative(f, series.times)
    n, d2 = f.shape[0], f.shape[1]
    qs = np.full_like(f, np.nan)
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        if not np.all(np.isfinite(df[i])):
            flags[i] = True
            continue
        sv = np.linalg.svd(f[i], compute_uv=False)
        if sv[-1] < SINGULARITY_RCOND * sv[0]:
            flags[i] = True
            continue
        qs[i] = np.linalg.solve(f[i].T, df[i].T).T
    if not allow_nonisolated:
        run = np.flatnonzero(flags[:-1] & flags[1:])
        if run.size:
            spans = [f"[{series.times[i]:.6g}, {series.times[i + 1]:.6g}]" for i in run]
            raise ExtractionFailureError(
                "non-isolated singular times detected at " + ", ".join(spans))
    return GeneratorSeries(times=series.times, qs=qs, flags=flags)


def generator_to_lindblad(q: np.ndarray, basis: HermitianBasis):
    """Split a generator into (H_eff, Gamma) in the given Hermitian basis.

    C_mn = sum_{jkrs} Q_{jk,rs} A_{m,rj} A_{n,ks}; the m = 0 / n = 0 terms are
    collected into Ctilde and yield H = (i/2)(Ctilde - Ctilde^dagger) (traceless
    by construction); Gamma is the traceless block C_{mn}, m, n >= 1.
    Raises if Q is not trace preserving, and verifies that reassembling Q from
    (H, Gamma) reproduces the input.
    """
    d = basis.dim
    q4 = np.asarray(q, dtype=complex).reshape(d, d, d, d)
    tp = np.einsum("jjrs->rs", q4)
    if np.max(np.abs(tp)) > TRACE_PRESERVATION_TOL * max(1.0, np.max(np.abs(q))):
        raise InconsistentGeneratorError("generator does not preserve the trace")
    a = basis.ops
    c = np.einsum("jkrs,mrj,nks->mn", q4, a, a)
    ctilde = c[0, 0] / (2 * d) * np.eye(d, dtype=complex)
    ctilde += np.einsum("m,mij->ij", c[1:, 0], a[1:]) / np.sqrt(d)
    h_eff = 0.5j * (ctilde - ctilde.conj().T)
    h_eff = 0.5 * (h_eff + h_eff.conj().T)
    gamma = c[1:, 1:]
    herm_dev = np.max(np.abs(gamma - gamma.conj().T))
    if herm_dev > GAMMA_HERMITICITY_TOL * max(1.0, np.max(np.abs(gamma))):
        raise InconsistentGeneratorError("decoherence matrix is not Hermitian within tolerance")
    gamma = 0.5 * (gamma + gamma.conj().T)
    q_re = assemble_generator(h_eff, gamma, basis)
    scale = max(1.0, np.max(np.abs(q)))
    if np.max(np.abs(q_re - q)) > RECONSTRUCTION_TOL * scale:
        raise ExtractionFailureError("generator reconstruction from (H_eff, Gamma) failed")
    return h_eff, gamma


def assemble_generator(h_eff: np.ndarray, gamma: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Superoperator of the non-diagonal Lindblad form with coefficients Gamma."""
    d = basis.dim
    eye = np.eye(d, dtype=complex)
    q = -1j * (np.kron(h_eff, eye) - np.kron(eye, h_eff.T))
    a = basis.traceless
    for m in range(d * d - 1):
        for n in range(d * d - 1):
            g = gamma[m, n]
            if g == 0.0:
                continue
            nm = a[n] @ a[m]
            q += g * (np.kron(a[m], a[n].conj())
                      - 0.5 * (np.kron(nm, eye) + np.kron(eye, nm.T)))
    return q


def lindblad_dissipator_superops(basis: HermitianBasis) -> np.ndarray:
    """Stack of superoperators D_mn[rho] = A_m rho A_n - (1/2){A_n A_m, rho}.

    Contracting with Gamma gives the dissipative part of the generator:
    Q_diss = sum_mn Gamma_mn D_mn.
    """
    d = basis.dim
    k = d * d - 1
    eye = np.eye(d, dtype=complex)
    a = basis.traceless
    out = np.empty((k, k, d * d, d * d), dtype=complex)
    for m in range(k):
        for n in range(k):
            nm = a[n] @ a[m]
            out[m, n] = (np.kron(a[m], a[n].conj())
                         - 0.5 * (np.kron(nm, eye) + np.kron(eye, nm.T)))
    return out


def diagonalize_gamma(gammas: np.ndarray, flags: np.ndarray | None = None):
    """Eigendecompose Gamma(t) with eigenvector continuity along the grid.

    Rates may be negative.  Columns at successive times are matched by
    maximal overlap (assignment problem) and phase-fixed against the previous
    time point; ties at the first point fall back to ascending-rate order.
    Returns (rates, vecs) with vecs[t][:, k] the k-th eigenvector.
    """
    gammas = np.asarray(gammas, dtype=complex)
    n, k = gammas.shape[0], gammas.shape[1]
    rates = np.full((n, k), np.nan)
    vecs = np.full((n, k, k), np.nan, dtype=complex)
    flags = np.zeros(n, dtype=bool) if flags is None else flags
    prev = None
    for i in range(n):
        if flags[i] or not np.all(np.isfinite(gammas[i])):
            continue
        w, v = np.linalg.eigh(gammas[i])
        if prev is not None:
            overlap = np.abs(prev.conj().T @ v)
            row, col = linear_sum_assignment(-overlap)
            order = np.empty(k, dtype=int)
            order[row] = col
            v = v[:, order]
            w = w[order]
            phases = np.einsum("ik,ik->k", prev.conj(), v)
            phases = np.where(np.abs(phases) < 1e-12, 1.0, phases / np.abs(phases))
            v = v * phases.conj()[None, :]
        else:
            # make the dominant component of each eigenvector real positive
            lead = np.argmax(np.abs(v), axis=0)
            ph = v[lead, np.arange(k)]
            ph = np.where(np.abs(ph) < 1e-12, 1.0, ph / np.abs(ph))
            v = v * ph.conj()[None, :]
        rates[i] = w
        vecs[i] = v
        prev = v
    return rates, vecs


def lindblad_operators(vecs: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """L_k = sum_m V_mk A_m for each time point; orthonormal under Tr[L^dag L]."""
    return np.einsum("tmk,mij->tkij", np.asarray(vecs), basis.traceless)


@dataclass
class MasterEquationSeries:
    """Per-time effective Hamiltonian, decoherence matrix, rates and Lindblads.

    ``exact_generator(t) -> (H_eff, Gamma)`` is attached for analytic
    provenance so consumers can evaluate between grid points without
    interpolation; ``maps`` keeps the originating map series for bridging
    across flagged times.
    """

    times: np.ndarray
    h_eff: np.ndarray
    gamma: np.ndarray
    rates: np.ndarray
    lindblads: np.ndarray
    flags: np.ndarray
    basis: HermitianBasis
    omega0: float
    provenance: str
    exact_generator: Callable | None = field(default=None, repr=False)
    maps: DynamicalMapSeries | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.basis.dim


def extract_master_equation(series: DynamicalMapSeries,
                            basis: HermitianBasis | None = None,
                            *, allow_nonisolated: bool = False) -> MasterEquationSeries:
    """Full extraction pipeline: maps -> generator -> (H_eff, Gamma) -> rates."""
    basis = gell_mann_basis(series.dim) if basis is None else basis
    gen = extract_generator(series, allow_nonisolated=allow_nonisolated)
    n, d = series.times.size, series.dim
    k = d * d - 1
    h_eff = np.full((n, d, d), np.nan, dtype=complex)
    gammas = np.full((n, k, k), np.nan, dtype=complex)
    for i in range(n):
        if gen.flags[i]:
            continue
        h_eff[i], gammas[i] = generator_to_lindblad(gen.qs[i], basis)
    rates, vecs = diagonalize_gamma(gammas, gen.flags)
    linds = np.full((n, k, d, d), np.nan, dtype=complex)
    ok = ~gen.flags
    if ok.any():
        linds[ok] = lindblad_operators(vecs[ok], basis)
    exact = None
    if series.map_fn is not None and series.dmap_fn is not None:
        def exact(t, _basis=basis, _s=series):
            f = _s.map_fn(t)
            df = _s.dmap_fn(t)
            q = np.linalg.solve(f.T, df.T).T
            return generator_to_lindblad(q, _basis)

    return MasterEquationSeries(times=series.times, h_eff=h_eff, gamma=gammas,
                                rates=rates, lindblads=linds, flags=gen.flags,
                                basis=basis, omega0=series.omega0,
                                provenance=series.provenance,
                                exact_generator=exact, maps=series)
