"""Scalar disorder laws: densities, characteristic functions, cumulants, samplers.

Five families are supported: cauchy-lorentz, gaussian, uniform-box, levy and
point-mass.  All are parametrized by a dimensionless location lambda0 and a
dimensionless scale sigma (unused for point-mass).  Characteristic functions
phi(u) = E[exp(i lambda u)] use the principal branch everywhere; in particular
the Levy family uses sqrt(-2i sigma u) with the principal square root, which
makes phi(-u) = conj(phi(u)) automatic and matches the empirical
characteristic function of the lambda0 + sigma/Z^2 sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

KINDS = ("cauchy-lorentz", "gaussian", "uniform-box", "levy", "point-mass")

# Families with algebraic tails have no finite moments at any order.
_HEAVY_TAILED = ("cauchy-lorentz", "levy")

MAX_CUMULANT_ORDER = 20  # binomial coefficients stay well inside float range


class UnsupportedDistributionError(ValueError):
    """Operation requires moments/cumulants the distribution does not have."""


def _sinc(x: np.ndarray) -> np.ndarray:
    """sin(x)/x with the removable limit at 0 (numpy's sinc is sin(pi x)/(pi x))."""
    return np.sinc(np.asarray(x) / np.pi)


def _sinc_prime(x: np.ndarray) -> np.ndarray:
    """d/dx sinc(x), series near 0 to avoid cancellation."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    out = (np.cos(xs) - _sinc(xs)) / xs
    return np.where(small, -x / 3.0 + x**3 / 30.0, out)


@dataclass(frozen=True)
class ScalarDistribution:
    """A one-dimensional disorder law with location and scale parameters."""

    kind: str
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind != "point-mass" and not self.scale > 0:
            raise ValueError("scale parameter must be positive")

    # -- characteristic function ------------------------------------------

    def char_fn(self, u):
        """phi(u) = E[exp(i lambda u)], closed form, vectorized over u."""
        u = np.asarray(u, dtype=float)
        lam0, sig = self.location, self.scale
        phase = np.exp(1j * lam0 * u)
        if self.kind == "point-mass":
            return phase
        if self.kind == "cauchy-lorentz":
            return phase * np.exp(-sig * np.abs(u))
        if self.kind == "gaussian":
            return phase * np.exp(-0.5 * (sig * u) ** 2)
        if self.kind == "uniform-box":
            return phase * _sinc(sig * u / 2.0)
        # levy: principal branch of the square root
        return phase * np.exp(-np.sqrt(-2j * sig * u))

    def char_fn_deriv(self, u, zero_side: float = 1.0):
        """d phi / du.  The cauchy-lorentz CF has a kink at u = 0: there the
        one-sided derivative from sign ``zero_side`` is returned (callers
        evaluating phi(w u) as u -> 0+ pass sign(w)).  For levy the
        derivative diverges as u -> 0."""
        u = np.asarray(u, dtype=float)
        lam0, sig = self.location, self.scale
        phi = self.char_fn(u)
        if self.kind == "point-mass":
            return 1j * lam0 * phi
        if self.kind == "cauchy-lorentz":
            sgn = np.where(u > 0, 1.0, np.where(u < 0, -1.0, np.sign(zero_side) or 1.0))
            return (1j * lam0 - sig * sgn) * phi
        if self.kind == "gaussian":
            return (1j * lam0 - sig**2 * u) * phi
        if self.kind == "uniform-box":
            x = sig * u / 2.0
            return np.exp(1j * lam0 * u) * (1j * lam0 * _sinc(x) + (sig / 2.0) * _sinc_prime(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.sqrt(-2j * sig * u)
            deriv = (1j * lam0 + 1j * sig / root) * phi
        return np.where(u == 0, np.inf * (1 + 1j), deriv)

    # -- density and sampling ---------------------------------------------

    def density(self, x):
        """Probability density p(lambda) (point-mass has none)."""
        x = np.asarray(x, dtype=float)
        lam0, sig = self.location, self.scale
        if self.kind == "point-mass":
            raise UnsupportedDistributionError("point-mass has no density")
        if self.kind == "cauchy-lorentz":
            return sig / (np.pi * ((x - lam0) ** 2 + sig**2))
        if self.kind == "gaussian":
            return np.exp(-0.5 * ((x - lam0) / sig) ** 2) / (sig * np.sqrt(2 * np.pi))
        if self.kind == "uniform-box":
            inside = (x >= lam0 - sig / 2.0) & (x <= lam0 + sig / 2.0)
            return np.where(inside, 1.0 / sig, 0.0)
        y = x - lam0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dens = np.sqrt(sig / (2 * np.pi)) * np.exp(-sig / (2 * y)) / y**1.5
        return np.where(y > 0, dens, 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n realizations, deterministic for a given generator state.

        The levy sampler is the inverse-CDF construction lambda0 + sigma/Z^2
        with Z standard normal.
        """
        lam0, sig = self.location, self.scale
        if self.kind == "point-mass":
            return np.full(n, lam0)
        if self.kind == "cauchy-lorentz":
            return lam0 + sig * rng.standard_cauchy(n)
        if self.kind == "gaussian":
            return rng.normal(lam0, sig, n)
        if self.kind == "uniform-box":
            return rng.uniform(lam0 - sig / 2.0, lam0 + sig / 2.0, n)
        return lam0 + sig / rng.normal(size=n) ** 2

    # -- moments and cumulants --------------------------------------------

    @property
    def has_moments(self) -> bool:
        return self.kind not in _HEAVY_TAILED

    def mean(self) -> float:
        if not self.has_moments:
            raise UnsupportedDistributionError(f"{self.kind} has no finite mean")
        return self.location

    def variance(self) -> float:
        if not self.has_moments:
            raise UnsupportedDistributionError(f"{self.kind} has no finite variance")
        if self.kind == "gaussian":
            return self.scale**2
        if self.kind == "uniform-box":
            return self.scale**2 / 12.0
        return 0.0

    def raw_moments(self, n_max: int) -> np.ndarray:
        """Raw moments mu^(1)..mu^(n_max) about zero."""
        if not self.has_moments:
            raise UnsupportedDistributionError(f"{self.kind} has no finite moments")
        lam0, sig = self.location, self.scale
        if self.kind == "point-mass":
            central = [0.0] * (n_max + 1)
            central[0] = 1.0
        elif self.kind == "gaussian":
            # central moments: (n-1)!! sigma^n for even n
            central = [1.0] + [0.0] * n_max
            for n in range(2, n_max + 1, 2):
                central[n] = central[n - 2] * (n - 1) * sig**2
        else:  # uniform-box
            central = [1.0] + [0.0] * n_max
            for n in range(2, n_max + 1, 2):
                central[n] = (sig / 2.0) ** n / (n + 1)
        raw = np.zeros(n_max)
        for n in range(1, n_max + 1):
            raw[n - 1] = sum(comb(n, m) * central[m] * lam0 ** (n - m) for m in range(n + 1))
        return raw

    def cumulants(self, n_max: int) -> "CumulantVector":
        """Cumulant vector up to order n_max (all orders flagged infinite for
        cauchy-lorentz and levy)."""
        if n_max > MAX_CUMULANT_ORDER:
            raise ValueError(f"cumulant order capped at {MAX_CUMULANT_ORDER}")
        if not self.has_moments:
            return CumulantVector(values=np.full(n_max, np.nan), finite=np.zeros(n_max, bool))
        return cumulants_from_moments(self.raw_moments(n_max))

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, "location": self.location, "scale": self.scale}

    @classmethod
    def from_json(cls, obj: dict) -> "ScalarDistribution":
        return cls(kind=obj["kind"], location=float(obj.get("location", 0.0)),
                   scale=float(obj.get("scale", 1.0)))


@dataclass(frozen=True)
class CumulantVector:
    """Cumulants kappa^(1)..kappa^(n) with per-order finiteness flags."""

    values: np.ndarray
    finite: np.ndarray

    @property
    def order(self) -> int:
        return len(self.values)


def cumulants_from_moments(moments) -> CumulantVector:
    """Cumulants from raw moments via the recursion
    kappa^(n) = mu^(n) - sum_{m=1}^{n-1} C(n-1, m-1) kappa^(m) mu^(n-m)."""
    mu = np.asarray(moments, dtype=float)
    n_max = len(mu)
    if n_max < 1:
        raise ValueError("need at least the first moment")
    if n_max > MAX_CUMULANT_ORDER:
        raise ValueError(f"cumulant order capped at {MAX_CUMULANT_ORDER}")
    kappa = np.zeros(n_max)
    for n in range(1, n_max + 1):
        acc = mu[n - 1]
        for m in range(1, n):
            acc -= comb(n - 1, m - 1) * kappa[m - 1] * mu[n - m - 1]
        kappa[n - 1] = acc
    return CumulantVector(values=kappa, finite=np.ones(n_max, bool))


def cumulant_series_rates(kappa: CumulantVector, omega0: float, t, order: int | None = None):
    """Partial sums of the cumulant series for the qubit energy function and
    decoherence rate.

    phi(t)   = (1/2) (w k1 + sum_{n>=1} (-1)^n w^{2n+1} k_{2n+1} t^{2n} / (2n)!)
    gamma(t) = (1/2) (w^2 k2 t - sum_{n>=2} (-1)^n w^{2n} k_{2n} t^{2n-1} / (2n-1)!)

    with w = omega0, truncated at cumulant order <= ``order`` (all available
    orders by default).  Odd cumulants feed the coherent part, even ones the
    decoherence rate.  hbar = 1.
    """
    order = kappa.order if order is None else min(order, kappa.order)
    if order < 1:
        raise ValueError("need at least first-order cumulants")
    if not kappa.finite[:order].all():
        raise UnsupportedDistributionError("requested cumulants are not finite")
    t = np.asarray(t, dtype=float)
    k = kappa.values
    phi = np.full_like(t, 0.5 * omega0 * k[0])
    gamma = np.zeros_like(t)
    if order >= 2:
        gamma = 0.5 * omega0**2 * k[1] * t
    for n in range(1, order // 2 + 1):
        # cumulant order 2n+1 feeds phi, order 2n (n >= 2) feeds gamma
        if 2 * n + 1 <= order:
            phi = phi + 0.5 * (-1) ** n / _factorial(2 * n) * omega0 ** (2 * n + 1) * k[2 * n] * t ** (2 * n)
        if n >= 2 and 2 * n <= order:
            gamma = gamma - 0.5 * (-1) ** n / _factorial(2 * n - 1) * omega0 ** (2 * n) * k[2 * n - 1] * t ** (2 * n - 1)
    return phi, gamma


def _factorial(n: int) -> float:
    out = 1.0
    for i in range(2, n + 1):
        out *= i
    return out
