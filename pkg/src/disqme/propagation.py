"""Forward integration of master equations and direct disorder averages.

``propagate`` integrates drho/dt = -i[H_eff(t), rho] + sum_mn Gamma_mn(t)
(A_m rho A_n - (1/2){A_n A_m, rho}) with an adaptive embedded Runge-Kutta
pair on the vectorized state.  Analytic provenance evaluates the generator
exactly at the integrator's internal times; Monte Carlo provenance uses
monotone cubic (PCHIP) interpolation of the H_eff and Gamma entries between
grid points.  Grid times flagged as singular are never integrated through:
the exact map bridges them, or propagation refuses.

``average_direct`` computes the ensemble average rho_bar(t) = <U rho0 U^dag>
by seeded Monte Carlo (exact weighted sum for finite-list ensembles), with
per-batch means retained for standard-error bands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .ensembles import DisorderEnsemble, sample_spectra
from .extraction import MasterEquationSeries, lindblad_dissipator_superops, run_batches
from .operators import check_density_matrix

PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1j], [1j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


class CannotPropagateThroughSingularityError(RuntimeError):
    """An interior flagged time has no analytic map to bridge across."""


class ComparisonError(ValueError):
    """Trajectories are not comparable (grid mismatch)."""


@dataclass
class Trajectory:
    """States on a time grid plus derived observable channels.

    Channels: ``purity``, ``coh_jk`` = |rho_jk| for j < k (1-based labels),
    and ``bloch_x/y/z`` for qubits.  ``stderr`` carries matching-key standard
    errors when the trajectory came from a finite Monte Carlo sample.
    """

    times: np.ndarray
    states: np.ndarray
    channels: dict = field(default_factory=dict)
    stderr: dict | None = None

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def observable_channels(states: np.ndarray) -> dict:
    """Observable channels of a stack of states (T, d, d)."""
    d = states.shape[1]
    out = {"purity": np.einsum("tij,tji->t", states, states).real}
    for j in range(d):
        for k in range(j + 1, d):
            out[f"coh_{j + 1}{k + 1}"] = np.abs(states[:, j, k])
    if d == 2:
        for name, op in zip(("bloch_x", "bloch_y", "bloch_z"), PAULI):
            out[name] = np.einsum("tij,ji->t", states, op).real
    return out


def _segments(flags: np.ndarray):
    """Maximal runs of consecutive non-flagged indices."""
    runs, start = [], None
    for i, f in enumerate(flags):
        if not f and start is None:
            start = i
        elif f and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def propagate(me: MasterEquationSeries, rho0: np.ndarray, *,
              rtol: float = 1e-8, atol: float = 1e-10) -> Trajectory:
    """Integrate the extracted (H_eff, Gamma) master equation from rho0.

    The grid must start at t = 0 (where the dynamical map is the identity).
    Flagged grid times are bridged with the exact map composition
    rho(t_b) = F(t_b) F(t_a)^{-1} rho(t_a) when the map series is attached;
    otherwise an interior flagged time raises
    :class:`CannotPropagateThroughSingularityError`.
    """
    rho0 = check_density_matrix(rho0)
    times = me.times
    if times[0] != 0.0:
        raise ValueError("propagation grids must start at t = 0")
    d = me.dim
    diss = lindblad_dissipator_superops(me.basis)
    diss_flat = diss.reshape(-1, d * d, d * d)
    eye = np.eye(d, dtype=complex)

    if me.exact_generator is not None:
        def generator(t):
            h, g = me.exact_generator(t)
            q = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
            return q + np.tensordot(g.reshape(-1), diss_flat, axes=(0, 0))
    else:
        ok = ~me.flags
        if ok.sum() < 2:
            raise CannotPropagateThroughSingularityError("too few regular grid points to interpolate")
        t_ok = times[ok]
        h_interp = PchipInterpolator(t_ok, me.h_eff[ok], axis=0)
        g_interp = PchipInterpolator(t_ok, me.gamma[ok], axis=0)

        def generator(t):
            h = h_interp(t)
            g = g_interp(t)
            q = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
            return q + np.tensordot(g.reshape(-1), diss_flat, axes=(0, 0))

    def rhs(t, y):
        vec = y[: d * d] + 1j * y[d * d:]
        dvec = generator(t) @ vec
        return np.concatenate([dvec.real, dvec.imag])

    states = np.empty((times.size, d, d), dtype=complex)
    # only exact maps may bridge singular times; Monte Carlo noise gets refused
    map_series = me.maps if (me.maps is not None and me.maps.provenance == "analytic") else None

    def bridge(i_from: int, rho_from: np.ndarray, i_to: int) -> np.ndarray:
        if map_series is None:
            raise CannotPropagateThroughSingularityError(
                f"flagged time t = {times[i_to]:.6g} has no analytic map to bridge across")
        f_from = map_series.maps[i_from]
        f_to = map_series.maps[i_to]
        vec = np.linalg.solve(f_from, rho_from.reshape(-1))
        return (f_to @ vec).reshape(d, d)

    segs = _segments(me.flags)
    if not segs:
        raise CannotPropagateThroughSingularityError("every grid point is flagged")
    # state at the start of the first segment (bridged from rho0 at t = 0 if needed;
    # F(0) is the identity, so a flagged t = 0 still starts from rho0)
    first_start = segs[0][0]
    for i in range(first_start):
        states[i] = _apply_map(map_series, rho0, i, d, times)
    current = rho0 if first_start == 0 else _apply_map(map_series, rho0, first_start, d, times)

    prev_end = None
    for s, e in segs:
        if prev_end is not None:
            # bridge across the flagged gap (fill flagged states from the map)
            for i in range(prev_end + 1, s):
                states[i] = bridge(prev_end, states[prev_end], i)
            current = bridge(prev_end, states[prev_end], s)
        if s == e:
            states[s] = current
        else:
            y0 = np.concatenate([current.reshape(-1).real, current.reshape(-1).imag])
            sol = solve_ivp(rhs, (times[s], times[e]), y0, t_eval=times[s:e + 1],
                            method="RK45", rtol=rtol, atol=atol)
            if not sol.success:
                raise RuntimeError(f"integrator failed: {sol.message}")
            seg = (sol.y[: d * d] + 1j * sol.y[d * d:]).T.reshape(-1, d, d)
            states[s:e + 1] = seg
        prev_end = e
    # trailing flagged points
    for i in range(segs[-1][1] + 1, times.size):
        states[i] = bridge(segs[-1][1], states[segs[-1][1]], i)
    return Trajectory(times=times, states=states, channels=observable_channels(states))


def _apply_map(map_series, rho0, index, d, times):
    if map_series is None:
        raise CannotPropagateThroughSingularityError(
            f"flagged time t = {times[index]:.6g} has no analytic map to bridge across")
    return (map_series.maps[index] @ rho0.reshape(-1)).reshape(d, d)


def average_direct(ens: DisorderEnsemble, rho0: np.ndarray, times, n_samples: int,
                   rng: np.random.Generator | None = None, n_batches: int = 20,
                   n_threads: int | None = None) -> Trajectory:
    """Direct disorder average rho_bar(t) = <U(t) rho0 U(t)^dag>.

    Exact (weighted sum, no standard errors) for finite-list ensembles;
    otherwise a seeded Monte Carlo with per-batch means for error bands.
    The trace is exactly 1 by construction, and the result is bitwise
    reproducible for a given generator state (batch boundaries are fixed by
    the batch count, not the thread count).
    """
    rho0 = check_density_matrix(rho0)
    times = np.asarray(times, dtype=float)
    d = ens.dim
    if ens.kind == "finite-list":
        evals, evecs = np.linalg.eigh(ens.hamiltonians)
        states = np.zeros((times.size, d, d), dtype=complex)
        for i, t in enumerate(times):
            ph = np.exp(-1j * evals * t)
            us = np.einsum("nab,nb,ncb->nac", evecs, ph, evecs.conj())
            states[i] = np.einsum("n,nab,bc,ndc->ad", ens.weights, us, rho0, us.conj())
        return Trajectory(times=times, states=states, channels=observable_channels(states))

    if n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng() if rng is None else rng
    lams, vecs = sample_spectra(ens, rng, n_samples)
    bounds = np.linspace(0, n_samples, n_batches + 1).astype(int)
    batch_states = np.zeros((n_batches, times.size, d, d), dtype=complex)

    def worker(b):
        sl = slice(bounds[b], bounds[b + 1])
        lam_b = lams[sl]
        nb = lam_b.shape[0]
        if vecs is None:
            for i, t in enumerate(times):
                ph = np.exp(-1j * lam_b * ens.omega0 * t)
                ee = ph.T @ ph.conj() / nb
                batch_states[b, i] = rho0 * ee
        else:
            vec_b = vecs[sl]
            rot = np.einsum("nba,bc,ncd->nad", vec_b.conj(), rho0, vec_b)  # W^dag rho0 W
            for i, t in enumerate(times):
                ph = np.exp(-1j * lam_b * ens.omega0 * t)
                phased = rot * (ph[:, :, None] * ph.conj()[:, None, :])
                batch_states[b, i] = np.einsum("nab,nbc,ndc->ad", vec_b, phased, vec_b.conj()) / nb

    run_batches(worker, n_batches, n_threads)
    weights = (bounds[1:] - bounds[:-1]) / n_samples
    states = np.einsum("b,btij->tij", weights, batch_states)
    channels = observable_channels(states)
    nb_eff = n_batches
    stderr = {}
    for key in channels:
        per_batch = np.stack([observable_channels(batch_states[b])[key] for b in range(nb_eff)])
        stderr[key] = per_batch.std(axis=0, ddof=1) / np.sqrt(nb_eff)
    return Trajectory(times=times, states=states, channels=channels, stderr=stderr)


@dataclass
class ComparisonReport:
    """Per-channel deviation summary between two trajectories on one grid."""

    sup_norm: dict
    deviations: dict
    bands: dict
    passed: bool

    def worst(self) -> tuple[str, float]:
        key = max(self.sup_norm, key=lambda k: self.sup_norm[k])
        return key, self.sup_norm[key]


def compare(traj_a: Trajectory, traj_b: Trajectory, tol: float | None = None,
            n_sigma: float = 3.0, band_floor: float = 1e-12) -> ComparisonReport:
    """Compare two trajectories channel by channel.

    With ``tol`` given, every channel must agree within it in sup norm.
    Otherwise the tolerance band is n_sigma times the Monte Carlo standard
    error of whichever trajectory carries one (their quadrature sum if both).
    """
    if traj_a.times.shape != traj_b.times.shape or not np.allclose(traj_a.times, traj_b.times, rtol=0, atol=0):
        raise ComparisonError("trajectories live on different grids")
    keys = sorted(set(traj_a.channels) & set(traj_b.channels))
    if not keys:
        raise ComparisonError("no common channels to compare")
    sup, devs, bands = {}, {}, {}
    passed = True
    for key in keys:
        dev = np.abs(traj_a.channels[key] - traj_b.channels[key])
        devs[key] = dev
        sup[key] = float(dev.max())
        if tol is not None:
            band = np.full_like(dev, tol)
        else:
            se = np.zeros_like(dev)
            for traj in (traj_a, traj_b):
                if traj.stderr is not None and key in traj.stderr:
                    se = np.sqrt(se**2 + traj.stderr[key] ** 2)
            if not se.any():
                raise ComparisonError("no tolerance given and neither trajectory has error bands")
            band = n_sigma * se + band_floor
        bands[key] = band
        passed = passed and bool(np.all(dev <= band))
    return ComparisonReport(sup_norm=sup, deviations=devs, bands=bands, passed=passed)
