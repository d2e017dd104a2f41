"""Command-line front end.

Subcommands:

* ``rates``       rates/energy functions of a configured ensemble -> CSV
* ``figure``      figure-ready data bundles (fig2, fig3, fig4, bloch, purity-gue)
* ``crosscheck``  direct disorder average vs extracted-master-equation propagation

Every CSV gets a sibling ``<name>.manifest.json`` sufficient to re-run the
command; outputs are byte-identical across runs with the same config and
seed.  Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, default_grid
from .analytic import depolarization_law, purity_evolution, qubit_coherence, qubit_rates, spectral_master_equation
from .distributions import ScalarDistribution
from .ensembles import gue_ensemble, poisson_ensemble
from .extraction import ExtractionFailureError, build_map_analytic, build_map_montecarlo, extract_master_equation
from .operators import bloch_state
from .propagation import CannotPropagateThroughSingularityError, average_direct, compare, propagate
from .serialize import ConfigError, RunConfig, load_run_config, write_csv, write_manifest

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL = 3


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.samples is not None:
        cfg.n_samples = args.samples
    if args.out is not None:
        cfg.out_dir = args.out
    if args.grid is not None:
        try:
            t_max, n = args.grid.split(":")
            cfg.t_max, cfg.n_points = float(t_max), int(n)
        except ValueError:
            raise ConfigError("--grid expects t_max:n_points") from None
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "dim", None) is not None:
        ens = cfg.ensemble
        if ens.kind == "unitarily-invariant-pe":
            cfg.ensemble = poisson_ensemble(args.dim, ens.omega0, ens.laws[0].scale, ens.laws[0].location)
        elif ens.kind == "unitarily-invariant-gue":
            cfg.ensemble = gue_ensemble(args.dim, ens.omega0)
        else:
            raise ConfigError("--dim can only override unitarily invariant ensembles")
    return cfg


def _grid(cfg: RunConfig) -> np.ndarray:
    return default_grid(cfg.ensemble, cfg.n_points, cfg.t_max)


def _initial_state(cfg: RunConfig) -> np.ndarray:
    if cfg.bloch is not None:
        return bloch_state(cfg.bloch)
    if cfg.rho0 is not None:
        return cfg.rho0
    if cfg.ensemble.dim == 2:
        return bloch_state((0.4, 0.8, 1.0 / 3.0))
    d = cfg.ensemble.dim
    rho = np.full((d, d), 1.0 / (2 * d), dtype=complex)
    rho += np.eye(d) / (2.0)
    rho /= np.trace(rho).real
    return rho


def _flag_column(times: np.ndarray, singular: np.ndarray, sign: float = np.inf) -> np.ndarray:
    """0 away from singular times, signed infinity at the nearest grid point."""
    col = np.zeros(times.size)
    for tau in singular:
        col[np.argmin(np.abs(times - tau))] = sign
    return col


def cmd_rates(cfg: RunConfig) -> int:
    ens = cfg.ensemble
    times = _grid(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if ens.is_spectral and ens.dim == 2:
        # single-qubit convention: drho = -i[phi sigma_z, rho] + gamma (sz rho sz - rho)
        me = spectral_master_equation(ens, times)
        gamma = 0.5 * np.where(me.flags, np.inf, np.real(me.gamma[:, 2, 2]))
        phi = np.where(me.flags, np.nan, np.real(me.h_eff[:, 0, 0]))
        flag = np.where(me.flags, np.inf, 0.0)
        header = ["t", "flag", "gamma", "phi"]
        cols = [times, flag, gamma, phi]
    elif ens.is_spectral:
        me = spectral_master_equation(ens, times)
        flag = np.where(me.flags, np.inf, 0.0)
        header = ["t", "flag"] + [f"gamma_{k + 1}" for k in range(me.rates.shape[1])]
        cols = [times, flag] + [me.rates[:, k] for k in range(me.rates.shape[1])]
        header += [f"heff_{j + 1}" for j in range(ens.dim)]
        cols += [np.real(me.h_eff[:, j, j]) for j in range(ens.dim)]
    elif ens.is_unitarily_invariant:
        law = depolarization_law(ens)
        a = np.asarray(law.mixing(times))
        rate = np.asarray(law.rate(times))
        flag = _flag_column(times, law.singular_times(times[-1]))
        header = ["t", "flag", "gamma", "mixing"]
        cols = [times, flag, rate, a]
    else:
        series = build_map_montecarlo(ens, times, n_samples=1, rng=np.random.default_rng(cfg.seed))
        me = extract_master_equation(series, allow_nonisolated=True)
        flag = np.where(me.flags, np.inf, 0.0)
        header = ["t", "flag"] + [f"gamma_{k + 1}" for k in range(me.rates.shape[1])]
        cols = [times, flag] + [me.rates[:, k] for k in range(me.rates.shape[1])]
    write_csv(out / "rates.csv", header, cols)
    write_manifest(out / "rates.manifest.json",
                   {"command": "rates", "version": __version__, "config": cfg.to_json()})
    return EXIT_OK


_FIG2_LAWS = (
    ("cl", "cauchy-lorentz", 1.0),
    ("g", "gaussian", 1.0),
    ("b", "uniform-box", 2.0),   # box drawn at twice the common scale
    ("le", "levy", 1.0),
)


def cmd_figure(name: str, out_dir: str, t_max: float | None = None, n_points: int = 400) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if name == "fig2":
        sigma, omega0 = 1.0, 1.0
        t_max = 3.0 * np.pi / (sigma * omega0) if t_max is None else t_max
        times = np.linspace(0.0, t_max, n_points)
        rho0 = bloch_state((0.4, 0.8, 1.0 / 3.0))
        rho12 = rho0[0, 1]
        header, cols = ["t"], [times]
        for tag, kind, scale in _FIG2_LAWS:
            law = ScalarDistribution(kind, 0.0, scale * sigma)
            pair = qubit_rates(law, omega0)
            coh = np.abs(qubit_coherence(rho12, pair, times))
            with np.errstate(divide="ignore"):
                rate = np.asarray(pair.rate_fn(times))
            header += [f"coh_{tag}", f"rate_{tag}"]
            cols += [coh, rate]
            if kind == "uniform-box":
                header.append("flag_b")
                cols.append(_flag_column(times, pair.singular_times(times[-1])))
        write_csv(out / "fig2.csv", header, cols)
        payload = {"command": "figure", "name": "fig2", "version": __version__,
                   "sigma": sigma, "omega0": omega0, "bloch": [0.4, 0.8, 1.0 / 3.0],
                   "grid": {"t_max": t_max, "n_points": n_points},
                   "note": "box law uses scale 2*sigma; columns are |rho12(t)| and the dephasing rate"}
        write_manifest(out / "fig2.manifest.json", payload)
        return EXIT_OK
    if name in ("fig3", "fig4"):
        sigma, omega0 = 4.0, 1.0
        if t_max is None:
            t_max = 3.0 * np.pi / (sigma * omega0)
        times = np.linspace(0.0, t_max, n_points)
        header, cols = ["t"], [times]
        flags = {}
        for d in (2, 4, 8):
            ens = poisson_ensemble(d, omega0, sigma) if name == "fig3" else gue_ensemble(d, omega0)
            law = depolarization_law(ens)
            with np.errstate(divide="ignore", invalid="ignore"):
                rate = np.asarray(law.rate(times))
            purity = purity_evolution(law, 1.0, times)
            header += [f"rate_d{d}", f"purity_d{d}"]
            cols += [rate, purity]
            flags[d] = law.singular_times(times[-1])
        ens = poisson_ensemble(8, omega0, sigma) if name == "fig3" else gue_ensemble(8, omega0)
        law = depolarization_law(ens, large_d=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.asarray(law.rate(times))
        header += ["rate_large_d", "purity_large_d", "flag_large_d"]
        cols += [rate, purity_evolution(law, 1.0, times),
                 _flag_column(times, law.singular_times(times[-1]))]
        write_csv(out / f"{name}.csv", header, cols)
        write_manifest(out / f"{name}.manifest.json",
                       {"command": "figure", "name": name, "version": __version__,
                        "sigma": sigma, "omega0": omega0, "dims": [2, 4, 8],
                        "grid": {"t_max": t_max, "n_points": n_points},
                        "initial_purity": 1.0})
        return EXIT_OK
    if name == "bloch":
        sigma, omega0 = 1.0, 1.0
        t_max = 3.0 * np.pi / (sigma * omega0) if t_max is None else t_max
        times = np.linspace(0.0, t_max, n_points)
        rho12 = 0.2 - 0.4j
        header, cols = ["t"], [times]
        for tag, kind, scale in _FIG2_LAWS:
            pair = qubit_rates(ScalarDistribution(kind, 0.0, scale * sigma), omega0)
            coh = qubit_coherence(rho12, pair, times)
            header += [f"re_{tag}", f"im_{tag}"]
            cols += [coh.real, coh.imag]
        write_csv(out / "bloch.csv", header, cols)
        write_manifest(out / "bloch.manifest.json",
                       {"command": "figure", "name": "bloch", "version": __version__,
                        "sigma": sigma, "omega0": omega0, "rho12_0": [0.2, -0.4],
                        "grid": {"t_max": t_max, "n_points": n_points}})
        return EXIT_OK
    if name == "purity-gue":
        omega0 = 1.0
        t_max = 8.0 / omega0 if t_max is None else t_max
        times = np.linspace(0.0, t_max, n_points)
        header, cols = ["t"], [times]
        for d in (2, 4, 8):
            law = depolarization_law(gue_ensemble(d, omega0))
            purity = purity_evolution(law, 1.0, times)
            asym = (d + 3.0) / (1.0 + d) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                rate = np.abs(np.asarray(law.rate(times)))
            header += [f"purity_d{d}", f"purity_deficit_d{d}", f"absrate_d{d}"]
            cols += [purity, purity - asym, rate]
        law = depolarization_law(gue_ensemble(8, omega0), large_d=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.abs(np.asarray(law.rate(times)))
        header += ["purity_large_d", "absrate_large_d"]
        cols += [purity_evolution(law, 1.0, times), rate]
        write_csv(out / "purity-gue.csv", header, cols)
        write_manifest(out / "purity-gue.manifest.json",
                       {"command": "figure", "name": "purity-gue", "version": __version__,
                        "omega0": omega0, "dims": [2, 4, 8],
                        "grid": {"t_max": t_max, "n_points": n_points},
                        "initial_purity": 1.0})
        return EXIT_OK
    raise ConfigError(f"unknown figure name {name!r}")


def cmd_crosscheck(cfg: RunConfig) -> int:
    ens = cfg.ensemble
    times = _grid(cfg)
    rho0 = _initial_state(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    direct = average_direct(ens, rho0, times, cfg.n_samples, rng, n_threads=cfg.threads)
    if ens.kind == "finite-list":
        series = build_map_montecarlo(ens, times, 1, np.random.default_rng(cfg.seed))
    else:
        series = build_map_analytic(ens, times)
    me = extract_master_equation(series, allow_nonisolated=True)
    prop = propagate(me, rho0)
    tol = cfg.extra.get("tolerance")
    if ens.kind == "finite-list" and tol is None:
        tol = 1e-8  # both paths are deterministic and exact
    report = compare(direct, prop, tol=tol)
    worst_key, worst = report.worst()
    payload = {"command": "crosscheck", "version": __version__, "config": cfg.to_json(),
               "passed": report.passed, "sup_norm": report.sup_norm,
               "worst_channel": worst_key, "worst_deviation": worst}
    write_manifest(out / "crosscheck.json", payload)
    header = ["t"] + [f"dev_{k}" for k in sorted(report.deviations)] + [f"band_{k}" for k in sorted(report.bands)]
    cols = [times] + [report.deviations[k] for k in sorted(report.deviations)] + \
           [report.bands[k] for k in sorted(report.bands)]
    write_csv(out / "crosscheck.csv", header, cols)
    print(f"crosscheck {'PASS' if report.passed else 'FAIL'}: worst channel {worst_key}, "
          f"sup deviation {worst:.3e}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disqme", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config: bool):
        if need_config:
            sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--grid", default=None, help="t_max:n_points")
        sp.add_argument("--dim", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)

    common(sub.add_parser("rates", help="emit rate/energy columns"), True)
    fig = sub.add_parser("figure", help="emit figure-ready CSV bundles")
    fig.add_argument("name", choices=["fig2", "fig3", "fig4", "bloch", "purity-gue"])
    fig.add_argument("--out", default=".")
    fig.add_argument("--grid", default=None, help="t_max:n_points")
    fig.add_argument("--threads", type=int, default=None)
    common(sub.add_parser("crosscheck", help="direct average vs extracted master equation"), True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            t_max, n_points = None, 400
            if args.grid is not None:
                try:
                    head, tail = args.grid.split(":")
                    t_max, n_points = float(head), int(tail)
                except ValueError:
                    raise ConfigError("--grid expects t_max:n_points") from None
            return cmd_figure(args.name, args.out, t_max, n_points)
        cfg = _apply_overrides(load_run_config(args.config), args)
        if args.command == "rates":
            return cmd_rates(cfg)
        return cmd_crosscheck(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ExtractionFailureError, CannotPropagateThroughSingularityError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
