"""Alloy-type random potentials on metric graphs.

Single-site potentials are non-negative, piecewise constant and supported on
their home edge. Couplings are drawn from a counter-based generator so that a
configuration is a pure function of ``(seed, trial, edge id)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .distributions import SingleSiteDistribution
from .errors import InputError
from .graph import InducedSubgraph, MetricGraph, induced_subgraph

COUPLING_STREAM = 0
DISPLACEMENT_STREAM = 1
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Function on [0, length] equal to ``values[i]`` on ``(breaks[i], breaks[i+1])``; 0 outside."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.shape != (b.size - 1,) or b.size < 2:
            raise InputError("profile needs n+1 breaks and n values")
        if np.any(np.diff(b) < 0) or b[0] != 0.0:
            raise InputError("profile breaks must start at 0 and be non-decreasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, length: float, value: float = 0.0) -> "PiecewiseConstant":
        return cls(np.array([0.0, length]), np.array([value]))

    @classmethod
    def indicator(cls, length: float, a: float, b: float, value: float = 1.0) -> "PiecewiseConstant":
        if not 0 <= a <= b <= length:
            raise InputError("indicator interval must lie in [0, length]")
        pts = sorted({0.0, a, b, length})
        vals = [value if a <= 0.5 * (x + y) <= b else 0.0 for x, y in zip(pts[:-1], pts[1:])]
        return cls(np.array(pts), np.array(vals))

    @property
    def length(self) -> float:
        return float(self.breaks[-1])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, y, side="right") - 1, 0, self.values.size - 1)
        out = self.values[idx]
        return np.where((y < 0) | (y > self.length), 0.0, out)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def support_bounds(self) -> tuple[float, float] | None:
        """(inf supp, sup supp), or None for the zero function."""
        nz = np.flatnonzero((self.values != 0) & (np.diff(self.breaks) > 0))
        if nz.size == 0:
            return None
        return float(self.breaks[nz[0]]), float(self.breaks[nz[-1] + 1])

    def shifted(self, xi: float) -> "PiecewiseConstant":
        """The function ``y -> self(y - xi)`` on the same interval."""
        if xi == 0:
            return self
        L = self.length
        b = np.clip(self.breaks + xi, 0.0, L)
        pts = np.concatenate([[0.0], b, [L]])
        vals = np.concatenate([[0.0], self.values, [0.0]])
        keep = np.diff(pts) > 0
        return PiecewiseConstant(
            np.concatenate([[0.0], np.cumsum(np.diff(pts)[keep])]), vals[keep]
        )

    def scaled(self, c: float) -> "PiecewiseConstant":
        return PiecewiseConstant(self.breaks, c * self.values)

    def __add__(self, other: "PiecewiseConstant") -> "PiecewiseConstant":
        pts = np.union1d(self.breaks, other.breaks)
        mid = 0.5 * (pts[:-1] + pts[1:])
        return PiecewiseConstant(pts, self(mid) + other(mid))

    def min_on(self, a: float, b: float) -> float:
        """Minimum over the pieces meeting (a, b)."""
        lo, hi = self.breaks[:-1], self.breaks[1:]
        hit = (hi > a) & (lo < b) & (hi > lo)
        return float(np.min(self.values[hit])) if np.any(hit) else 0.0


@dataclass(frozen=True, eq=False)
class SingleSitePotential:
    """Profile ``u_e`` on its home edge with observability window ``S_e = [window[0], window[1]]``."""

    edge: int
    profile: PiecewiseConstant
    window: tuple[float, float]

    def __post_init__(self):
        a, b = self.window
        if not (0 <= a < b <= self.profile.length):
            raise InputError(f"edge {self.edge}: window must be a non-empty subinterval of [0, l_e]")
        if np.any(self.profile.values < 0):
            raise InputError(f"edge {self.edge}: single-site potentials must be non-negative")

    @property
    def window_length(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def support_edges(self) -> frozenset[int]:
        return frozenset() if self.profile.sup_norm() == 0 else frozenset({self.edge})


@dataclass(frozen=True, eq=False)
class AlloyModel:
    graph: MetricGraph
    potentials: Mapping[int, SingleSitePotential]
    distribution: SingleSiteDistribution
    displacement: bool = False

    def __post_init__(self):
        for e, u in self.potentials.items():
            if u.edge != e:
                raise InputError(f"potential keyed by {e} claims home edge {u.edge}")
            if not math.isclose(u.profile.length, self.graph.edge(e).length, rel_tol=1e-12):
                raise InputError(f"edge {e}: profile length differs from edge length")

    def profile(self, e: int) -> PiecewiseConstant:
        u = self.potentials.get(e)
        return u.profile if u is not None else PiecewiseConstant.constant(self.graph.edge(e).length)

    def background_norm(self, e: int) -> float:
        """||W||_{L^inf(e)} for W = sum of all single-site potentials (edge-local supports)."""
        return self.profile(e).sup_norm()

    def displacement_range(self, e: int) -> tuple[float, float]:
        """Admissible xi_e: 0 <= xi_e + a_e and xi_e + b_e <= l_e."""
        bounds = self.profile(e).support_bounds()
        length = self.graph.edge(e).length
        if bounds is None:
            return (0.0, 0.0)
        a, b = bounds
        return (-a, length - b)

    def with_distribution(self, mu: SingleSiteDistribution) -> "AlloyModel":
        return AlloyModel(self.graph, self.potentials, mu, self.displacement)

    def with_potentials(self, potentials: Mapping[int, SingleSitePotential]) -> "AlloyModel":
        return AlloyModel(self.graph, potentials, self.distribution, self.displacement)


@dataclass(frozen=True, eq=False)
class Configuration:
    omega: Mapping[int, float]
    xi: Mapping[int, float] | None = None
    seed: int | None = None
    trial: int | None = None

    def displacement(self, e: int) -> float:
        return 0.0 if self.xi is None else float(self.xi.get(e, 0.0))

    def shifted(self, delta: float) -> "Configuration":
        """Same configuration with every coupling raised by ``delta``."""
        return Configuration({e: w + delta for e, w in self.omega.items()}, self.xi, self.seed, self.trial)


def alloy_model(
    graph: MetricGraph,
    distribution: SingleSiteDistribution,
    edges: Iterable[int] | None = None,
    profile: Sequence[tuple[float, float, float]] = ((0.0, 1.0, 1.0),),
    window: tuple[float, float] | None = None,
    displacement: bool = False,
) -> AlloyModel:
    """Translation-invariant model: every edge gets the same profile in edge-relative coordinates.

    ``profile`` lists ``(start, end, value)`` as fractions of the edge length;
    ``window`` (fractions) defaults to the first piece with positive value.
    """
    edges = graph.edge_ids if edges is None else sorted(edges)
    pots = {}
    for e in edges:
        length = graph.edge(e).length
        f = PiecewiseConstant.constant(length)
        for a, b, val in profile:
            f = f + PiecewiseConstant.indicator(length, a * length, b * length, val)
        if window is None:
            first = next((p for p in profile if p[2] > 0), (0.0, 1.0, 0.0))
            win = (first[0] * length, first[1] * length)
        else:
            win = (window[0] * length, window[1] * length)
        pots[e] = SingleSitePotential(e, f, win)
    return AlloyModel(graph, pots, distribution, displacement)


# ---------------------------------------------------------------------------
# covering and summability


def covering_constant(lam: float, e: int, model: AlloyModel) -> float:
    """C(lam, e) = (l_e / s_e) exp(8 l_e sqrt(C_mu ||W||_{L^inf(e)} + |lam|))."""
    u = model.potentials.get(e)
    s = 0.0 if u is None else u.window_length
    if s <= 0:
        raise InputError(f"edge {e} has no observability window")
    length = model.graph.edge(e).length
    arg = model.distribution.c_mu * model.background_norm(e) + abs(lam)
    return length / s * math.exp(8.0 * length * math.sqrt(arg))


def _worst_energy(energies: tuple[float, float]) -> float:
    lo, hi = energies
    return max(abs(lo), abs(hi))


def covering_lower_bound(model: AlloyModel, edges: Iterable[int], energies: tuple[float, float]) -> float:
    """Largest c_- for which the partial covering condition holds on ``energies``."""
    lam = _worst_energy(energies)
    out = math.inf
    for e in edges:
        u = model.potentials[e]
        out = min(out, u.profile.min_on(*u.window) / covering_constant(lam, e, model))
    return out


def verify_covering(
    model: AlloyModel, edges: Iterable[int], c_minus: float, energies: tuple[float, float]
) -> tuple[bool, float]:
    """Check sum u_e >= c_- C(lam, e) chi_{S_e} piece by piece; returns (holds, worst ratio)."""
    lam = _worst_energy(energies)
    worst = math.inf
    for e in edges:
        u = model.potentials[e]
        need = c_minus * covering_constant(lam, e, model)
        lo, hi = u.profile.breaks[:-1], u.profile.breaks[1:]
        hit = (hi > u.window[0]) & (lo < u.window[1]) & (hi > lo)
        worst = min(worst, float(np.min(u.profile.values[hit])) / need)
    return worst >= 1.0, worst


def enforce_covering(
    model: AlloyModel, edges: Iterable[int], c_minus: float, energies: tuple[float, float]
) -> AlloyModel:
    """Rescale each profile by the smallest factor that makes the covering inequality hold.

    The constant C(lam, e) grows with the profile's sup norm, so the scale
    solves ``t m_e >= c_- C_t(lam, e)``; no solution means ``c_minus`` is too large.
    """
    lam = _worst_energy(energies)
    mu_c = model.distribution.c_mu
    pots = dict(model.potentials)
    for e in edges:
        u = pots[e]
        length = model.graph.edge(e).length
        m = u.profile.min_on(*u.window)
        U = u.profile.sup_norm()
        if m <= 0:
            raise InputError(f"edge {e}: profile vanishes on its window")

        def gap(t):
            # log form of t m - c_- (l_e / s_e) exp(8 l_e sqrt(C_mu t U + lam))
            rhs = math.log(c_minus * length / u.window_length) + 8 * length * math.sqrt(mu_c * t * U + lam)
            return math.log(t * m) - rhs

        ts = np.logspace(-12, 12, 2401)
        vals = np.array([gap(t) for t in ts])
        ok = np.flatnonzero(vals >= 0)
        if ok.size == 0:
            raise InputError(f"edge {e}: no rescaling satisfies the covering condition with c_-={c_minus}")
        hi = ts[ok[0]]
        lo = ts[ok[0] - 1] if ok[0] > 0 else 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if gap(mid) >= 0:
                hi = mid
            else:
                lo = mid
        # gap increases through its first root, so a relative nudge absorbs rounding
        pots[e] = SingleSitePotential(e, u.profile.scaled(hi * (1 + 1e-10)), u.window)
    return model.with_potentials(pots)


@dataclass(frozen=True)
class SummabilityReport:
    edge_count: int
    degree_sum: float
    l2_sum: float
    support_sum: float

    @property
    def C1(self) -> float:
        return self.degree_sum / self.edge_count if self.edge_count else 0.0

    @property
    def C2(self) -> float:
        return self.l2_sum / self.edge_count if self.edge_count else 0.0

    @property
    def C3(self) -> float:
        return self.support_sum / self.edge_count if self.edge_count else 0.0


def check_summability(sub: InducedSubgraph, model: AlloyModel) -> SummabilityReport:
    """Left-hand sides of the three summability sums over the window, divided by |Lambda|."""
    graph = sub.parent
    deg_sum = l2_sum = supp_sum = 0.0
    for e in sub.sorted_edges():
        u = model.potentials.get(e)
        supp = frozenset() if u is None else u.support_edges
        if not supp:
            continue
        local = induced_subgraph(graph, supp)
        deg_sum += sum(graph.degree(v) for v in local.boundary)
        l2_sum += math.sqrt(u.profile.sup_norm()) * local.volume()
        supp_sum += len(supp)
    return SummabilityReport(sub.edge_count, deg_sum, l2_sum, supp_sum)


# ---------------------------------------------------------------------------
# sampling


def stream_uniforms(seed: int, trial: int, edge_ids: Sequence[int], stream: int = COUPLING_STREAM) -> np.ndarray:
    """One uniform in [0, 1) per edge from Philox keyed by ``(seed, stream)``.

    The counter's two high words hold ``(edge id, trial)`` so every
    ``(seed, trial, edge)`` triple owns a disjoint block of the stream.
    """
    key = [int(seed) & _MASK64, int(stream) & _MASK64]
    out = np.empty(len(edge_ids))
    for i, e in enumerate(edge_ids):
        bitgen = np.random.Philox(key=key, counter=[0, 0, int(e) & _MASK64, int(trial) & _MASK64])
        out[i] = np.random.Generator(bitgen).random()
    return out


def sample_configuration(model: AlloyModel, edges: Iterable[int], seed: int, trial: int) -> Configuration:
    """I.i.d. couplings (and displacements, if enabled) on ``edges``."""
    ids = sorted(edges)
    u = stream_uniforms(seed, trial, ids)
    omega = dict(zip(ids, np.asarray(model.distribution.ppf(u), dtype=float).tolist()))
    xi = None
    if model.displacement:
        v = stream_uniforms(seed, trial, ids, DISPLACEMENT_STREAM)
        xi = {}
        for e, t in zip(ids, v):
            lo, hi = model.displacement_range(e)
            xi[e] = lo + t * (hi - lo)
    return Configuration(omega, xi, seed, trial)


def edge_potential(model: AlloyModel, config: Configuration, e: int) -> PiecewiseConstant:
    """omega_e u_e(. - xi_e) on edge e as a piecewise-constant function."""
    w = float(config.omega.get(e, 0.0))
    return model.profile(e).shifted(config.displacement(e)).scaled(w)


def evaluate_potential(model: AlloyModel, config: Configuration, e: int, x: float) -> float:
    length = model.graph.edge(e).length
    if not 0 <= x <= length:
        raise InputError(f"x={x} outside [0, {length}] on edge {e}")
    w = float(config.omega.get(e, 0.0))
    return w * float(model.profile(e)(x - config.displacement(e)))
