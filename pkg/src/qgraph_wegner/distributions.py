"""Single-site distributions and their modulus of continuity.

``s(mu, eps) = sup_x mu([x - eps, x + eps])`` is available in closed form for
the uniform, Bernoulli, point-mass and power-Hoelder laws; the log-Hoelder law
goes through the generic numerical supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

GRID_POINTS = 10_000
REFINE_CANDIDATES = 8
TERNARY_STEPS = 80


class SingleSiteDistribution:
    """Common interface: CDF with left limits, quantile function, atoms, modulus."""

    kind = "abstract"

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def c_mu(self) -> float:
        """Smallest C with supp mu inside [-C, C]."""
        lo, hi = self.support
        return max(abs(lo), abs(hi))

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        """F(x-), the mass of (-inf, x)."""
        return self.cdf(x)

    def ppf(self, u):
        raise NotImplementedError

    def atoms(self) -> list[tuple[float, float]]:
        return []

    def density(self, x):
        """Density of the absolutely continuous part."""
        return np.zeros_like(np.asarray(x, dtype=float))

    def breakpoints(self) -> list[float]:
        return list(self.support) + [a for a, _ in self.atoms()]

    def mass(self, a, b):
        """mu([a, b])."""
        return np.maximum(np.asarray(self.cdf(b)) - np.asarray(self.cdf_left(a)), 0.0)

    def sample(self, u):
        return self.ppf(u)

    def mean(self) -> float:
        import scipy.integrate

        lo, hi = self.support
        total = sum(a * p for a, p in self.atoms())
        if hi > lo:
            pts = [p for p in self.breakpoints() if lo < p < hi]
            val, _ = scipy.integrate.quad(lambda x: x * float(self.density(x)), lo, hi, points=pts or None, limit=200)
            total += val
        return total

    def modulus(self, eps: float) -> float:
        return numeric_modulus(self, eps)

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.kind}({inner})"

    def __repr__(self):
        return self.describe()


def numeric_modulus(mu: SingleSiteDistribution, eps: float) -> float:
    """sup of F(x + eps) - F((x - eps)-) via anchored windows, a grid and ternary refinement."""
    if eps < 0:
        raise InputError("eps must be >= 0")
    lo, hi = mu.support

    def window(c):
        return mu.mass(c - eps, c + eps)

    anchors = np.array(mu.breakpoints(), dtype=float)
    centres = [anchors, anchors + eps, anchors - eps]
    grid = np.linspace(lo - eps, hi + eps, GRID_POINTS)
    centres.append(grid)
    best = float(np.max(window(np.concatenate(centres))))
    values = window(grid)
    step = grid[1] - grid[0] if grid.size > 1 else 0.0
    if step > 0:
        for i in np.argsort(values)[-REFINE_CANDIDATES:]:
            a, b = grid[i] - step, grid[i] + step
            for _ in range(TERNARY_STEPS):
                m1, m2 = a + (b - a) / 3, b - (b - a) / 3
                if window(m1) < window(m2):
                    a = m1
                else:
                    b = m2
            best = max(best, float(window(0.5 * (a + b))))
    return float(min(1.0, best))


@dataclass(frozen=True, repr=False)
class Uniform(SingleSiteDistribution):
    lo: float = 0.0
    hi: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InputError("uniform needs lo < hi")

    @property
    def support(self):
        return (self.lo, self.hi)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def ppf(self, u):
        return self.lo + np.asarray(u) * (self.hi - self.lo)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def modulus(self, eps):
        if eps < 0:
            raise InputError("eps must be >= 0")
        return min(1.0, 2 * eps / (self.hi - self.lo))

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, repr=False)
class Bernoulli(SingleSiteDistribution):
    """Mass ``p`` at ``hi`` and ``1 - p`` at ``lo``."""

    p: float = 0.5
    lo: float = 0.0
    hi: float = 1.0
    kind = "bernoulli"

    def __post_init__(self):
        if not (0 < self.p < 1) or not self.hi > self.lo:
            raise InputError("bernoulli needs 0 < p < 1 and lo < hi")

    @property
    def support(self):
        return (self.lo, self.hi)

    def atoms(self):
        return [(self.lo, 1 - self.p), (self.hi, self.p)]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.hi, 1.0, np.where(x >= self.lo, 1 - self.p, 0.0))

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self.hi, 1.0, np.where(x > self.lo, 1 - self.p, 0.0))

    def ppf(self, u):
        return np.where(np.asarray(u) < 1 - self.p, self.lo, self.hi)

    def modulus(self, eps):
        if eps < 0:
            raise InputError("eps must be >= 0")
        if 2 * eps >= self.hi - self.lo:
            return 1.0
        return max(self.p, 1 - self.p)

    def params(self):
        return {"p": self.p, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, repr=False)
class PointMass(SingleSiteDistribution):
    c: float = 0.0
    kind = "point_mass"

    @property
    def support(self):
        return (self.c, self.c)

    def atoms(self):
        return [(self.c, 1.0)]

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.c, 1.0, 0.0)

    def cdf_left(self, x):
        return np.where(np.asarray(x, dtype=float) > self.c, 1.0, 0.0)

    def ppf(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    def modulus(self, eps):
        if eps < 0:
            raise InputError("eps must be >= 0")
        return 1.0

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True, repr=False)
class PowerHoelder(SingleSiteDistribution):
    """F(x) = (x / x0)**tau on [0, x0]; mu([0, h]) <= h**tau when x0 >= 1."""

    tau: float = 2.0
    x0: float = 1.0
    kind = "power_hoelder"

    def __post_init__(self):
        if not (self.tau > 0 and self.x0 > 0):
            raise InputError("power_hoelder needs tau > 0 and x0 > 0")

    @property
    def support(self):
        return (0.0, self.x0)

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.x0, 0.0, 1.0) ** self.tau

    def ppf(self, u):
        return self.x0 * np.asarray(u, dtype=float) ** (1.0 / self.tau)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= self.x0)
        xs = np.where(inside, x, 1.0)
        return np.where(inside, self.tau * xs ** (self.tau - 1) / self.x0**self.tau, 0.0)

    def modulus(self, eps):
        if eps < 0:
            raise InputError("eps must be >= 0")
        w = 2 * eps / self.x0
        if w >= 1:
            return 1.0
        # increasing density puts the best window at the right end, decreasing at the left
        if self.tau >= 1:
            return 1.0 - (1.0 - w) ** self.tau
        return w**self.tau

    def params(self):
        return {"tau": self.tau, "x0": self.x0}


@dataclass(frozen=True, repr=False)
class LogHoelder(SingleSiteDistribution):
    """F(x) = (1 + log(x0 / x))**(-alpha) on (0, x0], F(0) = 0."""

    alpha: float = 4.0
    x0: float = 1.0
    kind = "log_hoelder"

    def __post_init__(self):
        if not (self.alpha > 0 and self.x0 > 0):
            raise InputError("log_hoelder needs alpha > 0 and x0 > 0")

    @property
    def support(self):
        return (0.0, self.x0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, np.minimum(x, self.x0), self.x0)
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(pos, (1.0 + np.log(self.x0 / xs)) ** (-self.alpha), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        pos = u > 0
        us = np.where(pos, u, 1.0)
        return np.where(pos, self.x0 * np.exp(1.0 - us ** (-1.0 / self.alpha)), 0.0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= self.x0)
        xs = np.where(inside, x, self.x0)
        return np.where(inside, self.alpha * (1.0 + np.log(self.x0 / xs)) ** (-self.alpha - 1) / xs, 0.0)

    def params(self):
        return {"alpha": self.alpha, "x0": self.x0}


def loghoelder_constant(mu: SingleSiteDistribution, alpha: float, eps_grid=None) -> float:
    """Empirical c_mu = sup over 0 < eps < 1 of s(mu, eps) |log eps|**alpha on a log grid."""
    if eps_grid is None:
        eps_grid = np.logspace(-12, -1e-3, 200)
    return max(mu.modulus(float(e)) * abs(math.log(e)) ** alpha for e in eps_grid)


_KINDS = {
    "uniform": Uniform,
    "bernoulli": Bernoulli,
    "point_mass": PointMass,
    "power_hoelder": PowerHoelder,
    "log_hoelder": LogHoelder,
}


def make_distribution(kind: str, **params) -> SingleSiteDistribution:
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise InputError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise InputError(f"bad parameters for {kind}: {exc}") from None
