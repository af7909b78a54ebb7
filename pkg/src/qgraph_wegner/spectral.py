"""Spectral statistics and the finite-volume ingredients of the Wegner argument.

Spectral shift functions are computed purely from counting functions,
``xi_{H1,H2}(lam) = N_{H2}(lam) - N_{H1}(lam)``, so operators with different
dof sets (Dirichlet removals) can be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.integrate

from .alloy import AlloyModel, Configuration, PiecewiseConstant, covering_constant, covering_lower_bound
from .assembly import DiscretizedOperator, SpectrumResult, assemble
from .conditions import ConditionFamily, dirichlet_restriction
from .counting import count_below, count_strictly_below
from .distributions import SingleSiteDistribution
from .errors import InputError, PrecisionError
from .graph import InducedSubgraph, MetricGraph, full_subgraph, induced_subgraph
from .reporting import Table

GAP_RTOL = 1e-6
BOUND_FRACTION = 0.25


def trace_projector(op: DiscretizedOperator, a: float, b: float) -> int:
    """Number of eigenvalues in the closed interval [a, b]."""
    if a > b:
        raise InputError(f"empty interval [{a}, {b}]")
    return count_below(op, b) - count_strictly_below(op, a)


class CountingFunction:
    """lam -> #{n : lam_n <= lam} / scale, from an operator or a computed spectrum."""

    def __init__(self, source: DiscretizedOperator | SpectrumResult, scale: float = 1.0):
        self.source = source
        self.scale = float(scale)

    def count(self, lam: float) -> int:
        if isinstance(self.source, SpectrumResult):
            if self.source.upto is not None and lam > self.source.upto:
                raise InputError(f"spectrum only known up to {self.source.upto}")
            return int(np.searchsorted(self.source.values, lam, side="right"))
        return count_below(self.source, lam)

    def __call__(self, lam):
        if np.ndim(lam):
            return np.array([self.count(float(x)) for x in np.ravel(lam)]).reshape(np.shape(lam)) / self.scale
        return self.count(float(lam)) / self.scale


@dataclass(frozen=True)
class SwitchFunction:
    """Monotone C^2 switch from -1 (below center - eps) to 0 (above center + eps).

    The profile is the quintic smoothstep over the full width 2 eps, whose
    derivative peaks at 15 / (16 eps) < 1 / eps.
    """

    center: float
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise InputError("switch half-width must be positive")

    def _t(self, x):
        return np.clip((np.asarray(x, dtype=float) - (self.center - self.eps)) / (2 * self.eps), 0.0, 1.0)

    def __call__(self, x):
        t = self._t(x)
        return t**3 * (10 - 15 * t + 6 * t * t) - 1.0

    def derivative(self, x):
        t = self._t(x)
        return 30 * t * t * (1 - t) ** 2 / (2 * self.eps)

    @property
    def sup_derivative(self) -> float:
        return 15.0 / (16.0 * self.eps)

    def trace(self, eigenvalues) -> float:
        """Tr rho(H) for a spectrum (eigenvalues above center + eps contribute 0)."""
        return float(np.sum(self(np.asarray(eigenvalues, dtype=float))))


def switch_sandwich_gap(rho: SwitchFunction, x) -> np.ndarray:
    """rho(x + 2 eps) - rho(x - 2 eps) - chi_[c - eps, c + eps](x); non-negative for a valid switch."""
    x = np.asarray(x, dtype=float)
    chi = ((x >= rho.center - rho.eps) & (x <= rho.center + rho.eps)).astype(float)
    return rho(x + 2 * rho.eps) - rho(x - 2 * rho.eps) - chi


# ---------------------------------------------------------------------------
# spectral shift function


@dataclass
class SsfSample:
    grid: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict)


def ssf(op1: DiscretizedOperator, op2: DiscretizedOperator, grid: Sequence[float]) -> SsfSample:
    """xi(lam) = N_{op2}(lam) - N_{op1}(lam) on the grid."""
    grid = np.asarray(grid, dtype=float)
    vals = np.array([count_below(op2, x) - count_below(op1, x) for x in grid], dtype=int)
    return SsfSample(grid, vals, {"h1": op1.h, "h2": op2.h})


@dataclass
class BoundReport:
    """One row per energy with both sides of an inequality; ``margin = rhs - lhs``."""

    name: str
    table: Table
    h: float
    energy_limit: float
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def margins(self) -> np.ndarray:
        return np.array(self.table.column("margin"), dtype=float)

    @property
    def violations(self) -> int:
        return int(np.sum(self.margins < 0))

    @property
    def worst_margin(self) -> float:
        m = self.margins
        return float(m.min()) if m.size else math.inf

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_csv(self) -> str:
        return self.table.to_csv()


def _sup(W: Mapping[int, PiecewiseConstant] | None) -> float:
    if not W:
        return 0.0
    return max(p.sup_norm() for p in W.values())


def _restrict(W, edges):
    return {e: p for e, p in (W or {}).items() if e in edges}


def _admissible_grid(grid, limit):
    grid = np.asarray(grid, dtype=float)
    keep = grid <= limit
    return grid[keep], int(np.sum(~keep))


def check_ssf_decoupling(graph: MetricGraph, edges, family: Mapping, W1, W2, grid, h: float) -> BoundReport:
    """|xi_{H1,H2}| <= sum_{v in boundary} deg_G(v) + |xi_{h1,h2}| with h_j the Dirichlet restrictions."""
    sub = induced_subgraph(graph, edges)
    lam_set = set(sub.edges)
    for e in set(W1 or {}) | set(W2 or {}):
        p1 = (W1 or {}).get(e)
        p2 = (W2 or {}).get(e)
        length = graph.edge(e).length
        d = (p2 or PiecewiseConstant.constant(length)) + (p1 or PiecewiseConstant.constant(length)).scaled(-1.0)
        if e not in lam_set and d.sup_norm() > 0:
            raise InputError(f"W2 - W1 is supported on edge {e} outside the window")
    full = full_subgraph(graph)
    fam = ConditionFamily(family).check(graph)
    H1 = assemble(full, fam, None, None, h, extra=W1)
    H2 = assemble(full, fam, None, None, h, extra=W2, layout=H1.layout)
    rfam = dirichlet_restriction(fam, sub)
    h1 = assemble(sub, rfam, None, None, h, extra=_restrict(W1, lam_set))
    h2 = assemble(sub, rfam, None, None, h, extra=_restrict(W2, lam_set), layout=h1.layout)
    limit = BOUND_FRACTION * min(H1.lambda_max, h1.lambda_max if sub.edge_count else math.inf)
    pts, skipped = _admissible_grid(grid, limit)
    slack = sum(graph.degree(v) for v in sub.boundary)
    big = ssf(H1, H2, pts).values
    small = ssf(h1, h2, pts).values
    t = Table(("lam", "xi_full", "xi_window", "boundary_degree", "lhs", "rhs", "margin"))
    for x, a, b in zip(pts, big, small):
        lhs, rhs = abs(int(a)), slack + abs(int(b))
        t.add(float(x), int(a), int(b), slack, lhs, rhs, rhs - lhs)
    return BoundReport("ssf-decoupling", t, H1.h, limit, skipped)


def check_ssf_volume_bound(graph: MetricGraph, family: Mapping, W1, W2, grid, h: float) -> BoundReport:
    """|xi_{H1,H2}| <= (sqrt||W1|| + sqrt||W2||) vol(G) / pi + 5 |E|."""
    full = full_subgraph(graph)
    fam = ConditionFamily(family).check(graph)
    H1 = assemble(full, fam, None, None, h, extra=W1)
    H2 = assemble(full, fam, None, None, h, extra=W2, layout=H1.layout)
    limit = BOUND_FRACTION * H1.lambda_max
    pts, skipped = _admissible_grid(grid, limit)
    n1, n2 = _sup(W1), _sup(W2)
    bound = (math.sqrt(n1) + math.sqrt(n2)) * graph.volume() / math.pi + 5 * len(graph.edges)
    t = Table(("lam", "xi", "lhs", "rhs", "margin"))
    for x, v in zip(pts, ssf(H1, H2, pts).values):
        t.add(float(x), int(v), abs(int(v)), bound, bound - abs(int(v)))
    return BoundReport("ssf-volume", t, H1.h, limit, skipped, {"bound": bound, "norm1": n1, "norm2": n2})


# ---------------------------------------------------------------------------
# eigenvalue derivatives


@dataclass(frozen=True)
class HellmannFeynman:
    value: float
    eigenvalue: float
    degenerate: bool
    multiplicity: int


def _site_profile(model: AlloyModel, config: Configuration, e: int) -> PiecewiseConstant:
    return model.profile(e).shifted(config.displacement(e))


def _cluster(values: np.ndarray, i: int, rtol: float) -> tuple[int, int]:
    tol = rtol * max(1.0, abs(values[i]))
    lo = i
    while lo > 0 and values[i] - values[lo - 1] <= tol:
        lo -= 1
    hi = i
    while hi + 1 < values.size and values[hi + 1] - values[i] <= tol:
        hi += 1
    return lo, hi


def hellmann_feynman(sub: InducedSubgraph, family: Mapping, model: AlloyModel, config: Configuration,
                     n: int, e: int, h: float, allow_degenerate: bool = False,
                     gap_rtol: float = GAP_RTOL) -> HellmannFeynman:
    """d lam_n / d omega_e = (psi_n, u_e psi_n) for the n-th eigenvalue (1-based).

    A degenerate eigenvalue (relative gap below ``gap_rtol``) raises unless
    ``allow_degenerate``; then the average over the eigenspace is returned.
    """
    if n < 1:
        raise InputError("eigenvalue index is 1-based")
    op = assemble(sub, family, model, config, h)
    spec = op.eigenvalues(count=n + 1, vectors=True)
    if spec.values.size < n:
        raise InputError(f"operator has only {spec.values.size} eigenvalues")
    i = n - 1
    lo, hi = _cluster(spec.values, i, gap_rtol)
    if hi == spec.values.size - 1 and spec.values.size < op.n_dofs:
        more = op.eigenvalues(count=min(op.n_dofs, hi + 8), vectors=True)
        spec = more
        lo, hi = _cluster(spec.values, i, gap_rtol)
    mult = hi - lo + 1
    if mult > 1 and not allow_degenerate:
        raise PrecisionError(f"eigenvalue {n} is degenerate (multiplicity {mult}); derivative is not defined")
    prof = _site_profile(model, config, e) if e in model.potentials else None
    if prof is None:
        return HellmannFeynman(0.0, float(spec.values[i]), mult > 1, mult)
    vals = [op.weighted_norm2(spec.vectors[:, j], e, profile=prof) for j in range(lo, hi + 1)]
    return HellmannFeynman(float(np.mean(vals)), float(spec.values[i]), mult > 1, mult)


def finite_difference_derivative(sub, family, model: AlloyModel, config: Configuration, n: int, e: int,
                                 h: float, delta: float = 1e-4) -> float:
    """(lam_n(omega_e + delta) - lam_n(omega_e - delta)) / (2 delta)."""
    out = []
    for s in (+1, -1):
        om = dict(config.omega)
        om[e] = om.get(e, 0.0) + s * delta
        cfg = Configuration(om, config.xi, config.seed, config.trial)
        out.append(assemble(sub, family, model, cfg, h).eigenvalues(count=n).values[n - 1])
    return float((out[0] - out[1]) / (2 * delta))


@dataclass
class LiftReport:
    table: Table
    c_uc: float | None
    floor: float
    trace_ok: bool | None
    extra: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.c_uc is None

    @property
    def positive(self) -> bool:
        return self.c_uc is not None and self.c_uc > 0

    def to_csv(self) -> str:
        return self.table.to_csv()


def eigenvalue_lift(sub: InducedSubgraph, family: Mapping, model: AlloyModel, config: Configuration,
                    eps: float, lam0: float, h: float) -> LiftReport:
    """min over lam_n <= lam0 of (lam_n(omega + eps) - lam_n(omega)) / eps.

    ``floor`` is the largest covering lower bound c_- on I = [lam0 - 1, lam0 + 1],
    the a priori lower bound on the sum of eigenvalue derivatives.
    """
    if not eps > 0:
        raise InputError("eps must be positive")
    op0 = assemble(sub, family, model, config, h)
    base = op0.eigenvalues(upto=lam0).values
    edges = [e for e in sub.sorted_edges() if e in model.potentials]
    try:
        floor = covering_lower_bound(model, edges, (lam0 - 1, lam0 + 1)) if edges else 0.0
    except InputError:
        floor = 0.0
    t = Table(("n", "lam", "lam_shifted", "ratio"))
    if base.size == 0:
        return LiftReport(t, None, floor, None)
    shifted_cfg = Configuration({e: config.omega.get(e, 0.0) + eps for e in edges}
                                | {e: w for e, w in config.omega.items() if e not in model.potentials},
                                config.xi, config.seed, config.trial)
    op1 = assemble(sub, family, model, shifted_cfg, h, layout=op0.layout)
    lifted = op1.eigenvalues(count=base.size).values
    ratios = (lifted - base) / eps
    for i, (a, b, r) in enumerate(zip(base, lifted, ratios), 1):
        t.add(i, float(a), float(b), float(r))
    c_uc = float(np.min(ratios))
    rho = SwitchFunction(lam0 - 2 * eps, eps)
    trace_ok = rho.trace(base + c_uc * eps) <= rho.trace(lifted) + 1e-12 * base.size
    return LiftReport(t, c_uc, floor, bool(trace_ok))


@dataclass
class ObservabilityReport:
    table: Table

    @property
    def min_slack(self) -> float:
        s = self.table.column("slack")
        return float(min(s)) if s else math.inf

    @property
    def ok(self) -> bool:
        return self.min_slack >= 1.0

    def to_csv(self) -> str:
        return self.table.to_csv()


def observability_check(sub: InducedSubgraph, family: Mapping, model: AlloyModel, config: Configuration,
                        lam0: float, h: float, mass_floor: float = 1e-12) -> ObservabilityReport:
    """Ratio of window mass to edge mass per eigenpair and edge, against C(lam, e)^{-1}."""
    op = assemble(sub, family, model, config, h)
    spec = op.eigenvalues(upto=lam0, vectors=True)
    t = Table(("n", "lam", "edge", "ratio", "inverse_constant", "slack"))
    for j, lam in enumerate(spec.values):
        psi = spec.vectors[:, j]
        for e in sub.sorted_edges():
            u = model.potentials.get(e)
            if u is None:
                continue
            total = op.weighted_norm2(psi, e)
            if total <= mass_floor:
                continue
            win = op.weighted_norm2(psi, e, interval=u.window)
            ratio = win / total
            inv = 1.0 / covering_constant(float(lam), e, model)
            t.add(j + 1, float(lam), e, ratio, inv, ratio / inv)
    return ObservabilityReport(t)


# ---------------------------------------------------------------------------
# monotone shift inequality


@dataclass(frozen=True)
class MonotoneShiftReport:
    lhs: float
    rhs: float
    modulus: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs + 1e-9 * max(1.0, abs(self.rhs))


def _as_function(phi) -> Callable:
    if callable(phi):
        return phi
    xs, ys = (np.asarray(v, dtype=float) for v in phi)
    return lambda x: np.interp(x, xs, ys)


def expect(g: Callable, mu: SingleSiteDistribution, points: Sequence[float] = ()) -> float:
    """int g dmu via the quantile transform; atoms contribute exactly."""
    cuts = [0.0, 1.0]
    total = 0.0
    for a, p in mu.atoms():
        lo = float(mu.cdf_left(a))
        total += p * float(g(a))
        cuts += [lo, lo + p]
    cuts += [float(mu.cdf(x)) for x in points]
    cuts = sorted(set(min(max(c, 0.0), 1.0) for c in cuts))
    atom_ranges = [(float(mu.cdf_left(a)), float(mu.cdf_left(a)) + p) for a, p in mu.atoms()]
    for u0, u1 in zip(cuts[:-1], cuts[1:]):
        if u1 - u0 <= 0:
            continue
        mid = 0.5 * (u0 + u1)
        if any(a0 - 1e-15 <= mid <= a1 + 1e-15 for a0, a1 in atom_ranges):
            continue
        val, _ = scipy.integrate.quad(lambda u: float(g(float(mu.ppf(u)))), u0, u1,
                                      limit=400, epsabs=1e-12, epsrel=1e-10)
        total += val
    return total


def monotone_shift_inequality(phi, mu: SingleSiteDistribution, eps: float, checks: int = 2001) -> MonotoneShiftReport:
    """int [phi(w + 4 eps) - phi(w)] dmu(w) <= s(mu, 2 eps) [phi(b + 4 eps) - phi(a)], supp mu in [a, b]."""
    if eps < 0:
        raise InputError("eps must be >= 0")
    f = _as_function(phi)
    a, b = mu.support
    xs = np.linspace(a, b + 4 * eps, checks)
    ys = np.array([float(f(x)) for x in xs])
    if np.any(np.diff(ys) < -1e-12 * max(1.0, float(np.max(np.abs(ys))))):
        raise InputError("phi is not non-decreasing on [a, b + 4 eps]")
    kinks = list(phi[0]) if not callable(phi) else []
    pts = kinks + [x - 4 * eps for x in kinks]
    lhs = expect(lambda w: f(w + 4 * eps) - f(w), mu, [p for p in pts if a < p < b])
    s = mu.modulus(2 * eps)
    rhs = s * (float(f(b + 4 * eps)) - float(f(a)))
    return MonotoneShiftReport(float(lhs), float(rhs), float(s))
