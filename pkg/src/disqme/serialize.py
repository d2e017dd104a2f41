"""JSON/CSV serialization: ensemble specs, run configs, trajectories, manifests.

Complex matrices are stored binary-free as nested lists of [re, im] pairs.
CSV output uses the shortest round-trip float representation (Python repr),
newline-terminated lines, so repeated runs with identical configs are
byte-identical.  Rate singularities are emitted as the literal strings
"inf" / "-inf" in flag-bearing columns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import ScalarDistribution
from .ensembles import (
    DisorderEnsemble,
    finite_list_ensemble,
    gue_ensemble,
    poisson_ensemble,
    spectral_general,
    spectral_global,
    spectral_uncorrelated,
)


class ConfigError(ValueError):
    """A config file could not be parsed; the message names the offending field."""


def complex_to_json(arr: np.ndarray):
    """Nested lists with innermost [re, im] pairs."""
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def ensemble_to_json(ens: DisorderEnsemble) -> dict:
    out = {"kind": ens.kind, "dim": ens.dim, "omega0": ens.omega0}
    if ens.is_spectral:
        out["laws"] = [law.to_json() for law in ens.laws]
        out["mixing"] = np.asarray(ens.mixing).tolist()
        out["offsets"] = np.asarray(ens.offsets).tolist()
    elif ens.kind == "unitarily-invariant-pe":
        out["law"] = ens.laws[0].to_json()
    elif ens.kind == "finite-list":
        out["hamiltonians"] = complex_to_json(ens.hamiltonians)
        out["weights"] = np.asarray(ens.weights).tolist()
    return out


def ensemble_from_json(obj: dict) -> DisorderEnsemble:
    try:
        kind = obj["kind"]
        omega0 = float(obj["omega0"])
        if kind == "spectral-general":
            laws = [ScalarDistribution.from_json(o) for o in obj["laws"]]
            return spectral_general(omega0, laws, obj["mixing"], obj.get("offsets"))
        if kind == "spectral-global":
            # stored in mixing form: single column times omega0 is the reference spectrum
            laws = [ScalarDistribution.from_json(o) for o in obj["laws"]]
            mixing = np.asarray(obj["mixing"], dtype=float)
            return spectral_global(omega0, laws[0], mixing[:, 0] * omega0)
        if kind == "spectral-uncorrelated":
            laws = [ScalarDistribution.from_json(o) for o in obj["laws"]]
            return spectral_uncorrelated(omega0, laws)
        if kind == "unitarily-invariant-pe":
            law = ScalarDistribution.from_json(obj["law"])
            return poisson_ensemble(int(obj["dim"]), omega0, law.scale, law.location)
        if kind == "unitarily-invariant-gue":
            return gue_ensemble(int(obj["dim"]), omega0)
        if kind == "finite-list":
            return finite_list_ensemble(omega0, complex_from_json(obj["hamiltonians"]), obj["weights"])
        raise ConfigError(f"unknown ensemble kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"ensemble spec is missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid ensemble spec: {exc}") from exc


@dataclass
class RunConfig:
    """Everything needed to reproduce a run: ensemble, initial state, grid, MC, output."""

    ensemble: DisorderEnsemble
    bloch: tuple | None = None            # qubit initial state as a Bloch vector
    rho0: np.ndarray | None = None        # explicit matrix otherwise
    t_max: float | None = None            # defaults to 3 pi/(sigma omega0)
    n_points: int = 400
    n_samples: int = 100_000
    seed: int = 0
    out_dir: str = "."
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "ensemble": ensemble_to_json(self.ensemble),
            "grid": {"t_max": self.t_max, "n_points": self.n_points},
            "mc": {"n_samples": self.n_samples, "seed": self.seed},
            "out": self.out_dir,
        }
        if self.bloch is not None:
            out["initial_state"] = {"bloch": list(self.bloch)}
        elif self.rho0 is not None:
            out["initial_state"] = {"matrix": complex_to_json(self.rho0)}
        if self.threads is not None:
            out["threads"] = self.threads
        out.update(self.extra)
        return out


def run_config_from_json(obj: dict) -> RunConfig:
    try:
        ens = ensemble_from_json(obj["ensemble"])
    except KeyError:
        raise ConfigError("config is missing the 'ensemble' section") from None
    grid = obj.get("grid", {})
    mc = obj.get("mc", {})
    cfg = RunConfig(
        ensemble=ens,
        t_max=None if grid.get("t_max") is None else float(grid["t_max"]),
        n_points=int(grid.get("n_points", 400)),
        n_samples=int(mc.get("n_samples", 100_000)),
        seed=int(mc.get("seed", 0)),
        out_dir=str(obj.get("out", ".")),
        threads=None if obj.get("threads") is None else int(obj["threads"]),
    )
    if "tolerance" in obj:
        cfg.extra["tolerance"] = float(obj["tolerance"])
    init = obj.get("initial_state")
    if init is not None:
        if "bloch" in init:
            b = init["bloch"]
            if len(b) != 3:
                raise ConfigError("initial_state.bloch must have three components")
            cfg.bloch = tuple(float(x) for x in b)
        elif "matrix" in init:
            cfg.rho0 = complex_from_json(init["matrix"])
        else:
            raise ConfigError("initial_state needs either 'bloch' or 'matrix'")
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return run_config_from_json(obj)


# ---------------------------------------------------------------------------
# deterministic CSV / manifest output

def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    """Column-oriented CSV with deterministic float formatting."""
    if len(header) != len(columns):
        raise ValueError("header/column count mismatch")
    n = len(columns[0])
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(format_value(col[i]) for col in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path: str | Path, payload: dict) -> None:
    """Sibling JSON manifest, sorted keys, sufficient to re-run the command."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
