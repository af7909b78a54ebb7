"""Monte Carlo experiments on lattice windows and threshold arithmetic.

Every trial is a pure function of ``(spec, window size, trial index)``; the
worker pool only changes where trials run, never what they return, and
aggregation walks trials in index order.
"""

from __future__ import annotations

import dataclasses
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .alloy import AlloyModel, alloy_model, sample_configuration
from .assembly import SUPPORTED_KINDS, DofLayout, assemble, build_layout, lambda_max_for, mesh_for_energy
from .conditions import dirichlet_restriction, uniform_family
from .counting import count_below, count_strictly_below, locate_eigenvalue
from .distributions import PowerHoelder, SingleSiteDistribution, Uniform
from .errors import AccuracyError, CapabilityError, InputError
from .graph import InducedSubgraph, MetricGraph, build_lattice_graph, induced_subgraph
from .reporting import Table

ENERGY_FRACTION = 0.25
SOLVER_FLOOR_FACTOR = 10.0


@dataclass(frozen=True)
class WegnerScanSpec:
    """Lattice windows, alloy model, energies and sampling parameters of a scan."""

    distribution: SingleSiteDistribution = Uniform(0.0, 1.0)
    nu: int = 1
    sizes: tuple[int, ...] = (8, 16, 32)
    lam: float = 1.0
    lam0: float = 1.5
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05)
    trials: int = 500
    seed: int = 0
    profile: tuple[tuple[float, float, float], ...] = ((0.0, 1.0, 1.0),)
    window: tuple[float, float] | None = None
    displacement: bool = False
    interior_kind: str = "kirchhoff"
    interior_alpha: float = 0.0
    boundary_kind: str = "dirichlet"
    boundary_alpha: float = 0.0
    h: float | None = None
    spread_limit: float = 1.5

    def mesh(self) -> float:
        return self.h if self.h is not None else mesh_for_energy(self.lam0)

    def replace(self, **changes) -> "WegnerScanSpec":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "WegnerScanSpec":
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        if self.nu < 1 or any(l < 2 for l in self.sizes) or not self.sizes:
            raise InputError("need nu >= 1 and window sizes l >= 2")
        for eps in self.eps_list:
            if not 0 < eps <= 0.5:
                raise InputError(f"eps={eps} outside (0, 1/2]")
        if self.lam > self.lam0:
            raise InputError(f"lam={self.lam} exceeds lam0={self.lam0}")
        for kind in (self.interior_kind, self.boundary_kind):
            if kind not in SUPPORTED_KINDS:
                raise CapabilityError(f"condition kind {kind!r} is not supported by the solver")
        check_mesh(self.mesh(), self.lam0)
        return self


def check_mesh(h: float, lam0: float):
    """Require lam0 + 1 <= lambda_max(h) / 4; the error suggests an admissible h."""
    lmax = lambda_max_for(h)
    if lam0 + 1 > ENERGY_FRACTION * lmax * (1 + 1e-12):
        raise AccuracyError(
            f"lam0={lam0:g} needs lambda_max(h)/4 >= {lam0 + 1:g} but h={h:g} gives {lmax / 4:g}; "
            f"use h <= {mesh_for_energy(lam0):.6g}"
        )


@dataclass(frozen=True, eq=False)
class WindowContext:
    l: int
    graph: MetricGraph
    sub: InducedSubgraph
    family: dict
    model: AlloyModel
    layout: DofLayout
    edges: tuple[int, ...]
    weyl_bound: int | None


def _weyl_bound(ctx_graph: MetricGraph, edges, model: AlloyModel, lam0: float, family) -> int | None:
    """Decoupled-Neumann count bound; None when a negative delta strength invalidates it."""
    if any(c.kind == "delta" and c.alpha < 0 for c in family.values()):
        return None
    cmu = model.distribution.c_mu
    total = 0
    for e in edges:
        length = ctx_graph.edge(e).length
        top = lam0 + cmu * model.profile(e).sup_norm()
        if top >= 0:
            total += math.floor(length * math.sqrt(top) / math.pi) + 1
    return total


@lru_cache(maxsize=16)
def build_window(spec: WegnerScanSpec, l: int) -> WindowContext:
    graph, window = build_lattice_graph(spec.nu, l)
    sub = induced_subgraph(graph, window)
    model = alloy_model(graph, spec.distribution, edges=window, profile=spec.profile,
                        window=spec.window, displacement=spec.displacement)
    parent = uniform_family(graph, spec.interior_kind, spec.interior_alpha)
    fam = dirichlet_restriction(parent, sub, spec.boundary_kind, spec.boundary_alpha)
    layout = build_layout(sub, fam, spec.mesh())
    edges = tuple(sub.sorted_edges())
    return WindowContext(l, graph, sub, fam, model, layout, edges,
                         _weyl_bound(graph, edges, model, spec.lam0, fam))


def trial_operator(spec: WegnerScanSpec, ctx: WindowContext, trial: int):
    cfg = sample_configuration(ctx.model, ctx.edges, spec.seed, trial)
    return assemble(ctx.sub, ctx.family, ctx.model, cfg, spec.mesh(), layout=ctx.layout)


def _evaluate(op, queries) -> list[int]:
    out = []
    for q in queries:
        if q[0] == "below":
            out.append(count_below(op, q[1]))
        else:
            out.append(count_below(op, q[2]) - count_strictly_below(op, q[1]))
    return out


def _chunk(args) -> np.ndarray:
    spec, l, queries, start, stop = args
    ctx = build_window(spec, l)
    rows = [_evaluate(trial_operator(spec, ctx, t), queries) for t in range(start, stop)]
    return np.array(rows, dtype=np.int64).reshape(stop - start, len(queries))


def run_trials(spec: WegnerScanSpec, l: int, queries: Sequence[tuple], trials: int | None = None,
               workers: int = 1) -> np.ndarray:
    """Counts per trial (rows, in trial order) and query (columns).

    A query is ``("below", x)`` for ``#{lam_n <= x}`` or ``("interval", a, b)``
    for the number of eigenvalues in ``[a, b]``.
    """
    n = spec.trials if trials is None else trials
    queries = tuple(tuple(q) for q in queries)
    if workers <= 1 or n < 2:
        return _chunk((spec, l, queries, 0, n))
    size = max(1, math.ceil(n / (4 * workers)))
    jobs = [(spec, l, queries, a, min(n, a + size)) for a in range(0, n, size)]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = list(pool.map(_chunk, jobs))
    return np.concatenate(parts, axis=0)


def mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def weighted_intercept(x, y, se) -> tuple[float, float]:
    """Intercept of y ~ a + b x and its standard error from known per-point s.e."""
    x, y, se = (np.asarray(v, dtype=float) for v in (x, y, se))
    X = np.column_stack([np.ones_like(x), x])
    if np.all(se > 0):
        w = 1.0 / se**2
        cov = np.linalg.inv(X.T @ (w[:, None] * X))
        coef = cov @ (X.T @ (w * y))
        return float(coef[0]), float(math.sqrt(cov[0, 0]))
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), 0.0


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    kind: str
    table: Table
    flags: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_csv(self) -> str:
        return self.table.to_csv()

    def summary_lines(self) -> list[str]:
        lines = [f"experiment: {self.kind}"]
        lines += [f"{k}: {_fmt(v)}" for k, v in self.provenance.items()]
        lines += [f"{k}: {_fmt(v)}" for k, v in self.values.items()]
        lines += [f"check.{k}: {'PASS' if v else 'FAIL'}" for k, v in self.flags.items()]
        lines.append(f"status: {'PASS' if self.passed else 'FAIL'}")
        return lines


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _provenance(spec: WegnerScanSpec) -> dict:
    return {
        "seed": spec.seed,
        "trials": spec.trials,
        "h": spec.mesh(),
        "nu": spec.nu,
        "distribution": spec.distribution.describe(),
        "boundary": spec.boundary_kind if spec.boundary_kind != "delta" else f"delta({spec.boundary_alpha!r})",
    }


# ---------------------------------------------------------------------------
# Wegner scan


def wegner_scan(spec: WegnerScanSpec, workers: int = 1) -> ExperimentReport:
    """Mean of Tr chi_[lam-eps, lam+eps] per window size and eps against s(mu, eps) |Lambda|."""
    spec.validate()
    eps_list = sorted(spec.eps_list)
    queries = [("interval", spec.lam - e, spec.lam + e) for e in eps_list] + [("below", spec.lam0)]
    t = Table(("l", "edges", "eps", "lam", "mean", "se", "s_mu", "ratio", "ratio_se"))
    raw, ratios, ratio_se = {}, [], []
    nested = weyl = True
    per_eps: dict[float, list] = {e: [] for e in eps_list}
    for l in spec.sizes:
        ctx = build_window(spec, l)
        counts = run_trials(spec, l, queries, workers=workers)
        raw[l] = counts
        traces = counts[:, :-1]
        nested &= bool(np.all(np.diff(traces, axis=1) >= 0))
        if ctx.weyl_bound is not None:
            weyl &= bool(np.all(counts[:, -1] <= ctx.weyl_bound))
        n = ctx.sub.edge_count
        for j, eps in enumerate(eps_list):
            m, se = mean_se(traces[:, j])
            s = spec.distribution.modulus(eps)
            r = m / (s * n) if s > 0 else math.inf
            rse = se / (s * n) if s > 0 else math.inf
            t.add(l, n, eps, spec.lam, m, se, s, r, rse)
            ratios.append(r)
            ratio_se.append(rse)
            per_eps[eps].append((n, m, se))
    t.rows.sort(key=lambda r: (r[0], -r[2]))
    ratios, ratio_se = np.array(ratios), np.array(ratio_se)
    c_w = float(ratios.max())
    rmin = float(ratios.min())
    spread = c_w / rmin if rmin > 0 else math.inf
    lo = float(np.max(ratios - 2 * ratio_se))
    hi = float(np.min(ratios + 2 * ratio_se))
    slack_spread = lo / hi if hi > 0 else math.inf
    intercepts = {}
    icpt_ok = True
    for eps, pts in per_eps.items():
        if len(pts) >= 2:
            a, ase = weighted_intercept(*zip(*pts))
            intercepts[eps] = (a, ase)
            icpt_ok &= abs(a) <= 2 * ase + 1e-12
    values = {
        "C_W": c_w,
        "ratio_min": rmin,
        "spread": spread,
        "spread_within_2se": slack_spread,
    }
    for eps, (a, ase) in intercepts.items():
        values[f"intercept[eps={eps!r}]"] = a
        values[f"intercept_se[eps={eps!r}]"] = ase
    flags = {
        "finite_constant": math.isfinite(c_w),
        "bounded_ratio_spread": slack_spread <= spec.spread_limit,
        "nested_eps_monotone": nested,
        "weyl_bound": weyl,
    }
    return ExperimentReport("wegner", t, flags, values, _provenance(spec),
                            {"counts": raw, "eps": eps_list, "intercepts": intercepts})


# ---------------------------------------------------------------------------
# IDS


@dataclass
class IdsEstimate:
    grid: np.ndarray
    sizes: tuple[int, ...]
    means: dict
    ses: dict
    convergence: dict
    increments: Table | None
    report: ExperimentReport

    @property
    def N(self) -> np.ndarray:
        return self.means[max(self.sizes)]


def ids_estimate(spec: WegnerScanSpec, grid: Sequence[float], C_W: float | None = None,
                 eps_list: Sequence[float] | None = None, workers: int = 1) -> IdsEstimate:
    """Volume-scaled counting functions per window size and IDS increments at the largest size.

    The increment bound uses the finite-volume form ``C_W s(mu, eps) |Lambda| / l^nu``.
    """
    spec.validate()
    grid = np.asarray(sorted(grid), dtype=float)
    if grid.size and grid[-1] > spec.lam0:
        raise InputError("IDS grid exceeds lam0")
    eps_list = sorted(spec.eps_list if eps_list is None else eps_list)
    means, ses = {}, {}
    monotone = True
    lmax = max(spec.sizes)
    inc_table = None
    for l in spec.sizes:
        vol = float(l**spec.nu)
        queries = [("below", x) for x in grid]
        if l == lmax:
            queries += [("interval", x - e, x + e) for x in grid for e in eps_list]
        counts = run_trials(spec, l, queries, workers=workers)
        below = counts[:, : grid.size]
        monotone &= bool(np.all(np.diff(below, axis=1) >= 0))
        means[l] = below.mean(axis=0) / vol
        ses[l] = (below.std(axis=0, ddof=1) / math.sqrt(below.shape[0]) / vol if below.shape[0] > 1
                  else np.zeros(grid.size))
        if l == lmax:
            inc = counts[:, grid.size :]
            edges = build_window(spec, l).sub.edge_count
            inc_table = Table(("lam", "eps", "increment", "se", "s_mu", "bound", "margin"))
            k = 0
            for x in grid:
                for e in eps_list:
                    m, se = mean_se(inc[:, k])
                    k += 1
                    s = spec.distribution.modulus(e)
                    bound = C_W * s * edges / vol if C_W is not None else math.nan
                    inc_table.add(float(x), e, m / vol, se / vol, s, bound, bound - m / vol)
    conv = {l: float(np.max(np.abs(means[l] - means[lmax]))) if grid.size else 0.0 for l in spec.sizes}
    t = Table(("l", "lam", "N", "se"))
    for l in spec.sizes:
        for x, m, s in zip(grid, means[l], ses[l]):
            t.add(l, float(x), float(m), float(s))
    flags = {"monotone": monotone}
    if C_W is not None and inc_table is not None:
        inc = np.array(inc_table.column("increment"))
        se = np.array(inc_table.column("se"))
        bound = np.array(inc_table.column("bound"))
        flags["continuity_bound"] = bool(np.all(inc <= bound + 2 * se))
    values = {f"convergence[l={l}]": v for l, v in conv.items()}
    rep = ExperimentReport("ids", t, flags, values, _provenance(spec), {"increments": inc_table})
    return IdsEstimate(grid, tuple(spec.sizes), means, ses, conv, inc_table, rep)


def edge_dirichlet_eigenvalue(length: float, h: float, k: int = 1) -> float:
    """k-th discrete eigenvalue of a single Dirichlet edge on the mesh used by ``assemble``."""
    from .conditions import standard_condition
    from .graph import build_named_graph, full_subgraph

    g = build_named_graph("interval", l=length)
    sub = full_subgraph(g)
    fam = {v: standard_condition("dirichlet", 1, vertex=v) for v in sub.vertices}
    op = assemble(sub, fam, None, None, h)
    return locate_eigenvalue(op, k)


# ---------------------------------------------------------------------------
# weak Wegner estimate


@dataclass(frozen=True)
class WeakWegnerResult:
    probability: float
    se: float
    threshold: float
    width: float
    requested_width: float
    clamped: bool
    mean_trace: float

    @property
    def passed(self) -> bool:
        return self.probability <= self.threshold + 2 * self.se

    @property
    def markov_ok(self) -> bool:
        """P{trace > 0} <= E trace, checked on the same samples."""
        return self.probability <= self.mean_trace + 1e-12


def resolvable_floor(h: float) -> float:
    """Smallest event half-width the counter resolves: 10 x (machine eps x top discrete eigenvalue)."""
    return SOLVER_FLOOR_FACTOR * np.finfo(float).eps * 12.0 / h**2


def weak_wegner_probability(L: int, beta: float, q: float, lam: float, spec: WegnerScanSpec,
                            width: float | None = None, workers: int = 1) -> WeakWegnerResult:
    """Monte Carlo P{dist(sigma(H^L), lam) <= e^{-L^beta}} against L^{-q}.

    ``width`` replaces e^{-L^beta} (e.g. by a fixed eps for the Markov comparison).
    """
    spec = spec.replace(sizes=(L,), lam=min(lam, spec.lam0)).validate()
    if not (beta > 0 and q > 0):
        raise InputError("beta and q must be positive")
    req = math.exp(-float(L) ** beta) if width is None else float(width)
    floor = resolvable_floor(build_window(spec, L).layout.h)
    w = max(req, floor)
    counts = run_trials(spec, L, [("interval", lam - w, lam + w)], workers=workers)[:, 0]
    hit = (counts > 0).astype(float)
    p, se = mean_se(hit)
    return WeakWegnerResult(p, se, float(L) ** (-q), float(w), req, bool(w > req), float(counts.mean()))


# ---------------------------------------------------------------------------
# log-Hoelder threshold


@dataclass(frozen=True)
class Threshold:
    delta: float
    L1: float | None
    valid: bool


def loghoelder_threshold(C_W: float, c_mu: float, alpha: float, beta: float, q: float, nu: float,
                         L0: float = 1.0) -> Threshold:
    """delta = alpha beta - q - nu and L1 = max(L0, (C_W c_mu)^(1/delta)) when delta > 0."""
    for name, v in (("C_W", C_W), ("c_mu", c_mu), ("alpha", alpha), ("beta", beta), ("q", q), ("nu", nu)):
        if not v > 0:
            raise InputError(f"{name} must be positive")
    delta = alpha * beta - q - nu
    if not delta > 0:
        return Threshold(delta, None, False)
    return Threshold(delta, max(L0, (C_W * c_mu) ** (1.0 / delta)), True)


def loghoelder_chain(C_W: float, c_mu: float, alpha: float, beta: float, q: float, nu: float,
                     Ls: Sequence[float], rtol: float = 1e-12) -> np.ndarray:
    """C_W c_mu L^(nu - alpha beta) <= L^(-q) per L, compared in the log domain."""
    L = np.asarray(Ls, dtype=float)
    lhs = math.log(C_W * c_mu) + (nu - alpha * beta) * np.log(L)
    rhs = -q * np.log(L)
    return lhs <= rhs + rtol * np.maximum(1.0, np.abs(rhs))


# ---------------------------------------------------------------------------
# initial length scale


def initial_scale_check(spec: WegnerScanSpec, tau: float, xi_exp: float, sizes: Sequence[int],
                        beta: float = 1.5, workers: int = 1) -> ExperimentReport:
    """P{dist(sigma(H^l), E_ref) <= l^(beta - 2)} against l^(-xi) over window sizes (trend check).

    ``E_ref`` is q_- plus the lowest eigenvalue of the free Dirichlet window,
    the bottom of the random band at finite volume.
    """
    mu = spec.distribution
    if not isinstance(mu, PowerHoelder):
        raise InputError("initial-scale check needs a power_hoelder distribution")
    if not math.isclose(mu.tau, tau):
        raise InputError(f"tau={tau} differs from the distribution's tau={mu.tau}")
    if not tau > spec.nu / 2:
        raise InputError(f"need tau > nu/2 = {spec.nu / 2}")
    if not 0 < xi_exp < 2 * tau - spec.nu:
        raise InputError(f"xi must lie in (0, {2 * tau - spec.nu})")
    if not 0 < beta < 2:
        raise InputError("beta must lie in (0, 2)")
    q_minus = mu.support[0]
    t = Table(("l", "edges", "E_ref", "width", "probability", "se", "l_pow_minus_xi", "below_bound"))
    probs, ses = [], []
    for l in sizes:
        sp = spec.replace(sizes=(l,))
        sp.validate()
        ctx = build_window(sp, l)
        free = assemble(ctx.sub, ctx.family, None, None, sp.mesh(), layout=ctx.layout)
        e_ref = q_minus + locate_eigenvalue(free, 1)
        width = float(l) ** (beta - 2)
        if e_ref + width > spec.lam0:
            raise InputError(f"E_ref + width = {e_ref + width:g} exceeds lam0; raise lam0")
        counts = run_trials(sp, l, [("interval", e_ref - width, e_ref + width)], workers=workers)[:, 0]
        p, se = mean_se(counts > 0)
        probs.append(p)
        ses.append(se)
        t.add(l, ctx.sub.edge_count, e_ref, width, p, se, float(l) ** (-xi_exp), p <= float(l) ** (-xi_exp))
    probs, ses = np.array(probs), np.array(ses)
    trend = bool(np.all(np.diff(probs) <= 2 * np.hypot(ses[1:], ses[:-1]))) and probs[-1] < probs[0]
    values = {"trend_decreasing": trend, "qualitative": True}
    return ExperimentReport("initial-scale", t, {}, values, _provenance(spec))


# ---------------------------------------------------------------------------
# boundary-condition sweep


def parse_kind(kind) -> tuple[str, float]:
    """'dirichlet', 'kirchhoff', 'delta(1.5)' or a (kind, alpha) pair."""
    if isinstance(kind, tuple):
        name, alpha = kind
    else:
        s = str(kind).strip()
        if s.startswith("delta(") and s.endswith(")"):
            name, alpha = "delta", float(s[6:-1])
        else:
            name, alpha = s, 0.0
    if name not in SUPPORTED_KINDS:
        raise CapabilityError(f"condition kind {name!r} is not supported by the solver")
    return name, float(alpha)


def boundary_condition_sweep(spec: WegnerScanSpec, kinds: Sequence, factor: float = 4.0,
                             workers: int = 1) -> ExperimentReport:
    """Wegner scans with the window boundary condition varied under shared seeds."""
    parsed = [parse_kind(k) for k in kinds]
    t = Table(("boundary", "C_W", "ratio_min", "spread"))
    cws, reports = [], {}
    for name, alpha in parsed:
        rep = wegner_scan(spec.replace(boundary_kind=name, boundary_alpha=alpha), workers=workers)
        label = name if name != "delta" else f"delta({alpha!r})"
        reports[label] = rep
        t.add(label, rep.values["C_W"], rep.values["ratio_min"], rep.values["spread"])
        cws.append(rep.values["C_W"])
    agree = max(cws) / min(cws) if min(cws) > 0 else math.inf
    flags = {"constants_agree": agree <= factor, "all_finite": all(math.isfinite(c) for c in cws)}
    return ExperimentReport("bc-sweep", t, flags, {"C_W_ratio": agree}, _provenance(spec), {"reports": reports})
