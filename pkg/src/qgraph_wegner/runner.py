"""Dispatch from an :class:`ExperimentConfig` to the experiment functions.

Config layout (all lists whitespace separated)::

    [experiment]  kind
    [graph]       kind (lattice | interval | loop | star | path | fibonacci_chain),
                  nu, sizes, l, K, lengths, generations
    [conditions]  interior, interior_alpha, boundary, boundary_alpha, kinds, preset
    [model]       distribution plus its parameters, profile, window, displacement
    [numerics]    h, lam, lam0, eps, trials, seed, grid, count, fixtures, bound,
                  L, beta, q, tau, xi, factor, spread_limit
"""

from __future__ import annotations

import math

import numpy as np

from .alloy import check_summability
from .assembly import assemble, eigenvalues, mesh_for_energy
from .conditions import ConditionFamily, uniform_family
from .config import ConfigError, ExperimentConfig
from .distributions import Uniform
from .errors import InputError
from .experiments import (
    ExperimentReport,
    WegnerScanSpec,
    boundary_condition_sweep,
    build_window,
    check_mesh,
    ids_estimate,
    initial_scale_check,
    parse_kind,
    weak_wegner_probability,
    wegner_scan,
)
from .fixtures import oracle_fixture, oracle_spectrum, random_ssf_fixture
from .graph import build_named_graph, full_subgraph
from .reporting import Table
from .spectral import check_ssf_decoupling, check_ssf_volume_bound

ORACLE_RTOL = 1e-3
ORACLE_GRAPHS = ("interval", "loop", "star")
SSF_H = 0.02


def _profile(cfg: ExperimentConfig):
    vals = cfg.floats("model", "profile", default=(0.0, 1.0, 1.0))
    if len(vals) % 3:
        raise ConfigError(f"{cfg._where('model', 'profile')}profile needs (start end value) triples")
    return tuple(tuple(vals[i : i + 3]) for i in range(0, len(vals), 3))


def scan_spec(cfg: ExperimentConfig) -> WegnerScanSpec:
    """Build and validate the lattice scan parameters."""
    gk = cfg.get("graph", "kind", default="lattice")
    if gk != "lattice":
        raise ConfigError(f"{cfg._where('graph', 'kind')}{cfg.kind} experiments need graph kind 'lattice'")
    window = cfg.floats("model", "window", default=None)
    if window is not None and len(window) != 2:
        raise ConfigError(f"{cfg._where('model', 'window')}window needs two fractions")
    interior = parse_kind(cfg.get("conditions", "interior", default="kirchhoff"))
    boundary = parse_kind(cfg.get("conditions", "boundary", default="dirichlet"))
    spec = WegnerScanSpec(
        distribution=cfg.distribution() if cfg.parser.has_section("model") else Uniform(0.0, 1.0),
        nu=cfg.get("graph", "nu", int, default=1),
        sizes=cfg.ints("graph", "sizes", default=(8, 16, 32)),
        lam=cfg.get("numerics", "lam", float, default=1.0),
        lam0=cfg.get("numerics", "lam0", float, default=1.5),
        eps_list=cfg.floats("numerics", "eps", default=(0.2, 0.1, 0.05)),
        trials=cfg.get("numerics", "trials", int, default=500),
        seed=cfg.get("numerics", "seed", int, default=0),
        profile=_profile(cfg),
        window=window,
        displacement=cfg.boolean("model", "displacement", False),
        interior_kind=interior[0],
        interior_alpha=cfg.get("conditions", "interior_alpha", float, default=interior[1]),
        boundary_kind=boundary[0],
        boundary_alpha=cfg.get("conditions", "boundary_alpha", float, default=boundary[1]),
        h=cfg.get("numerics", "h", float, default=None),
        spread_limit=cfg.get("numerics", "spread_limit", float, default=1.5),
    )
    return spec.validate()


def _graph(cfg: ExperimentConfig):
    kind = cfg.get("graph", "kind", default="interval")
    params = {}
    for key in ("l", "K", "generations"):
        if cfg.has("graph", key):
            params[key] = cfg.get("graph", key, float if key == "l" else int)
    if cfg.has("graph", "lengths"):
        params["lengths"] = cfg.floats("graph", "lengths")
    try:
        return kind, params, build_named_graph(kind, **params)
    except (InputError, KeyError) as exc:
        raise ConfigError(f"{cfg._where('graph', 'kind')}{exc}") from None


def run_spectrum(cfg: ExperimentConfig) -> ExperimentReport:
    kind, params, g = _graph(cfg)
    preset = cfg.get("conditions", "preset", default="oracle" if kind in ORACLE_GRAPHS else "none")
    if preset == "oracle":
        if kind not in ORACLE_GRAPHS:
            raise ConfigError(f"no oracle preset for graph kind {kind!r}")
        g, fam = oracle_fixture(kind, **params)
    else:
        name, alpha = parse_kind(cfg.get("conditions", "interior", default="kirchhoff"))
        fam = uniform_family(g, name, cfg.get("conditions", "interior_alpha", float, default=alpha))
    count = cfg.get("numerics", "count", int, default=10)
    if count < 1:
        raise ConfigError("count must be >= 1")
    longest = max(e.length for e in g.edges)
    h = cfg.get("numerics", "h", float, default=longest / 2000)
    res = eigenvalues(assemble(full_subgraph(g), ConditionFamily(fam), None, None, h), count=count)
    oracle = oracle_spectrum(kind, count, **params) if preset == "oracle" else None
    t = Table(("n", "eigenvalue", "oracle", "rel_err"))
    worst = 0.0
    for i, w in enumerate(res.values, 1):
        if oracle is None:
            t.add(i, float(w), math.nan, math.nan)
            continue
        ref = float(oracle[i - 1])
        err = abs(w - ref) / max(abs(ref), 1.0)
        worst = max(worst, err)
        t.add(i, float(w), ref, float(err))
    flags = {"oracle_rel_err": worst <= ORACLE_RTOL} if oracle is not None else {}
    values = {"max_rel_err": worst} if oracle is not None else {}
    prov = {"graph": kind, "h": h, "count": count, "preset": preset}
    return ExperimentReport("spectrum", t, flags, values, prov)


def _ssf(cfg: ExperimentConfig, kind: str) -> ExperimentReport:
    n = cfg.get("numerics", "fixtures", int, default=50)
    if n < 1:
        raise ConfigError("fixtures must be >= 1")
    seed = cfg.get("numerics", "seed", int, default=0)
    bound = cfg.get("numerics", "bound", float, default=4.0)
    h = cfg.get("numerics", "h", float, default=SSF_H)
    grid = cfg.floats("numerics", "grid", default=None)
    grid = np.linspace(-5.0, 25.0, 61) if grid is None else np.asarray(grid)
    t = None
    violations = skipped = 0
    worst = math.inf
    for i in range(n):
        fx = random_ssf_fixture(np.random.default_rng([seed, i]), bound)
        if kind == "ssf-decoupling":
            rep = check_ssf_decoupling(fx.graph, fx.window, fx.family, fx.W1, fx.W2, grid, h)
        else:
            rep = check_ssf_volume_bound(fx.graph, fx.family, fx.W1, fx.W2, grid, h)
        if t is None:
            t = Table(("fixture",) + rep.table.columns)
        for row in rep.table.rows:
            t.add(i, *row)
        violations += rep.violations
        skipped += rep.skipped
        worst = min(worst, rep.worst_margin)
    values = {"fixtures": n, "violations": violations, "worst_margin": float(worst), "skipped_energies": skipped}
    return ExperimentReport(kind, t, {"zero_violations": violations == 0}, values,
                            {"seed": seed, "h": h, "bound": bound})


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Execute the configured experiment; the worker count never changes the result."""
    kind = cfg.kind
    if kind == "spectrum":
        return run_spectrum(cfg)
    if kind in ("ssf-decoupling", "ssf-volume"):
        return _ssf(cfg, kind)
    spec = scan_spec(cfg)
    if kind == "wegner":
        return wegner_scan(spec, workers=workers)
    if kind == "ids":
        grid = cfg.floats("numerics", "grid", default=tuple(np.linspace(0.0, spec.lam0, 16)))
        cw = cfg.get("numerics", "c_w", float, default=None)
        return ids_estimate(spec, grid, C_W=cw, workers=workers).report
    if kind == "weak-wegner":
        L = cfg.get("numerics", "L", int, default=max(spec.sizes))
        beta = cfg.get("numerics", "beta", float, default=1.0)
        q = cfg.get("numerics", "q", float, default=2.0)
        width = cfg.get("numerics", "width", float, default=None)
        r = weak_wegner_probability(L, beta, q, spec.lam, spec, width=width, workers=workers)
        t = Table(("L", "beta", "q", "lam", "width", "requested_width", "clamped", "probability", "se",
                   "threshold", "mean_trace"))
        t.add(L, beta, q, spec.lam, r.width, r.requested_width, r.clamped, r.probability, r.se,
              r.threshold, r.mean_trace)
        flags = {"below_threshold": r.passed, "markov": r.markov_ok}
        prov = dict(seed=spec.seed, trials=spec.trials, h=spec.mesh(), distribution=spec.distribution.describe())
        return ExperimentReport("weak-wegner", t, flags, {"width_clamped": r.clamped}, prov)
    if kind == "initial-scale":
        tau = cfg.get("numerics", "tau", float, default=getattr(spec.distribution, "tau", 2.0))
        xi = cfg.get("numerics", "xi", float, default=1.0)
        beta = cfg.get("numerics", "beta", float, default=1.5)
        return initial_scale_check(spec, tau, xi, spec.sizes, beta=beta, workers=workers)
    if kind == "bc-sweep":
        raw = cfg.get("conditions", "kinds", default="dirichlet kirchhoff delta(1)")
        factor = cfg.get("numerics", "factor", float, default=4.0)
        return boundary_condition_sweep(spec, raw.split(), factor=factor, workers=workers)
    raise ConfigError(f"unhandled experiment kind {kind!r}")


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Dry-run checks without sampling; returns diagnostic lines ending in ``ok``."""
    kind = cfg.kind
    lines = [f"experiment: {kind}"]
    if kind == "spectrum":
        g = _graph(cfg)[2]
        longest = max(e.length for e in g.edges)
        h = cfg.get("numerics", "h", float, default=longest / 2000)
        lines.append(f"h: {h!r}")
    elif kind in ("ssf-decoupling", "ssf-volume"):
        h = cfg.get("numerics", "h", float, default=SSF_H)
        lines.append(f"h: {h!r}")
    else:
        spec = scan_spec(cfg)
        check_mesh(spec.mesh(), spec.lam0)
        lines.append(f"h: {spec.mesh()!r} (suggested for lam0: {mesh_for_energy(spec.lam0)!r})")
        lines.append(f"distribution: {spec.distribution.describe()}")
        for l in spec.sizes:
            ctx = build_window(spec, l)
            s = check_summability(ctx.sub, ctx.model)
            lines.append(f"summability[l={l}]: C1={s.C1!r} C2={s.C2!r} C3={s.C3!r}")
    lines.append("ok")
    return lines
