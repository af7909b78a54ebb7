import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qgraph_wegner.distributions import Bernoulli, PointMass, PowerHoelder, Uniform
from qgraph_wegner.errors import AccuracyError, CapabilityError, InputError
from qgraph_wegner.experiments import (
    WegnerScanSpec,
    boundary_condition_sweep,
    build_window,
    check_mesh,
    edge_dirichlet_eigenvalue,
    ids_estimate,
    initial_scale_check,
    loghoelder_chain,
    loghoelder_threshold,
    parse_kind,
    resolvable_floor,
    run_trials,
    weak_wegner_probability,
    wegner_scan,
    weighted_intercept,
)

SMALL = WegnerScanSpec(sizes=(4, 8), trials=24, seed=5)


def test_spec_validation():
    with pytest.raises(InputError):
        SMALL.replace(trials=0).validate()
    with pytest.raises(InputError):
        SMALL.replace(eps_list=(0.6,)).validate()
    with pytest.raises(InputError):
        SMALL.replace(lam=2.0, lam0=1.5).validate()
    with pytest.raises(CapabilityError):
        SMALL.replace(boundary_kind="robin").validate()
    with pytest.raises(AccuracyError, match="use h <="):
        SMALL.replace(h=0.2).validate()


def test_check_mesh_boundary():
    check_mesh(0.0632455532, 1.5)
    with pytest.raises(AccuracyError):
        check_mesh(0.07, 1.5)


def test_parse_kind():
    assert parse_kind("delta(1.5)") == ("delta", 1.5)
    assert parse_kind("kirchhoff") == ("kirchhoff", 0.0)
    assert parse_kind(("delta", 2)) == ("delta", 2.0)
    with pytest.raises(CapabilityError):
        parse_kind("robin")


def test_window_context():
    ctx = build_window(SMALL, 4)
    assert ctx.sub.edge_count == 4
    assert ctx.weyl_bound is not None and ctx.weyl_bound >= 4


def test_trials_are_worker_independent():
    q = [("interval", 0.8, 1.2), ("below", 1.5)]
    a = run_trials(SMALL, 8, q, workers=1)
    b = run_trials(SMALL, 8, q, workers=3)
    assert a.dtype == np.int64 and np.array_equal(a, b)
    assert np.array_equal(run_trials(SMALL, 8, q, trials=10), a[:10])


def test_wegner_scan_frozen_and_deterministic():
    a = wegner_scan(SMALL)
    b = wegner_scan(SMALL, workers=2)
    assert a.to_csv() == b.to_csv()
    assert a.table.columns == ("l", "edges", "eps", "lam", "mean", "se", "s_mu", "ratio", "ratio_se")
    assert len(a.table) == 6
    assert a.flags["finite_constant"] and a.flags["nested_eps_monotone"] and a.flags["weyl_bound"]
    assert a.values["C_W"] == max(a.table.column("ratio"))


def test_point_mass_is_deterministic():
    rep = wegner_scan(SMALL.replace(distribution=PointMass(0.0), trials=3))
    # every trial sees the same free operator and s(mu, eps) = 1
    counts = rep.raw["counts"][8]
    assert np.all(counts == counts[0])
    assert set(rep.table.column("se")) == {0.0} and set(rep.table.column("s_mu")) == {1.0}


def test_weighted_intercept_exact_line():
    a, se = weighted_intercept([8, 16, 32], [1.0 + 0.5 * 8, 1.0 + 0.5 * 16, 1.0 + 0.5 * 32], [0.1, 0.1, 0.1])
    assert a == pytest.approx(1.0) and se > 0


def test_free_ids_matches_sqrt_law():
    spec = WegnerScanSpec(distribution=PointMass(0.0), sizes=(32,), lam0=4.0, trials=1)
    grid = np.linspace(0.1, 4.0, 12)
    est = ids_estimate(spec, grid)
    assert np.max(np.abs(est.N - np.sqrt(grid) / math.pi)) <= 2 / 32
    assert est.report.flags["monotone"]
    with pytest.raises(InputError):
        ids_estimate(spec, [5.0])


def test_ids_continuity_flag_uses_bound():
    spec = SMALL.replace(sizes=(8,), trials=40)
    est = ids_estimate(spec, [1.0], C_W=100.0)
    assert est.report.flags["continuity_bound"]
    est = ids_estimate(spec, [1.0], C_W=1e-6)
    assert not est.report.flags["continuity_bound"]


def test_edge_dirichlet_eigenvalue():
    assert edge_dirichlet_eigenvalue(1.0, 0.01) == pytest.approx(math.pi**2, rel=1e-4)


def test_weak_wegner_clamps_width():
    spec = SMALL.replace(trials=30)
    r = weak_wegner_probability(8, 1.0, 2.0, 1.0, spec)
    assert r.requested_width == pytest.approx(math.exp(-8))
    assert not r.clamped and r.width == r.requested_width
    tiny = weak_wegner_probability(8, 3.0, 2.0, 1.0, spec)
    assert tiny.clamped is True and tiny.width == resolvable_floor(build_window(spec, 8).layout.h)
    assert tiny.markov_ok and r.markov_ok
    wide = weak_wegner_probability(8, 1.0, 2.0, 1.0, spec, width=0.1)
    assert wide.probability >= r.probability
    with pytest.raises(InputError):
        weak_wegner_probability(8, -1.0, 2.0, 1.0, spec)


def test_loghoelder_threshold_arithmetic():
    t = loghoelder_threshold(2.0, 4.0, alpha=4.0, beta=1.5, q=2.0, nu=1.0)
    assert t.valid and t.delta == pytest.approx(3.0) and t.L1 == pytest.approx(2.0)
    assert loghoelder_threshold(1.0, 1.0, alpha=3.0, beta=1.0, q=1.0, nu=1.0).delta == pytest.approx(1.0)
    bad = loghoelder_threshold(1.0, 1.0, alpha=2.0, beta=1.0, q=1.0, nu=1.0)
    assert not bad.valid and bad.L1 is None and bad.delta == 0.0
    with pytest.raises(InputError):
        loghoelder_threshold(0.0, 1.0, 1.0, 1.0, 1.0, 1.0)


@given(st.floats(0.1, 50), st.floats(0.1, 10), st.floats(0.5, 8), st.floats(0.2, 3), st.floats(0.1, 4),
       st.integers(1, 3))
def test_loghoelder_chain_above_threshold(cw, cmu, alpha, beta, q, nu):
    t = loghoelder_threshold(cw, cmu, alpha, beta, q, nu)
    assert t.valid == (alpha > (q + nu) / beta)
    if t.valid and t.L1 < 1e100:
        Ls = t.L1 * np.logspace(0, 6, 25)
        assert np.all(loghoelder_chain(cw, cmu, alpha, beta, q, nu, Ls))


def test_initial_scale_trend():
    spec = WegnerScanSpec(distribution=PowerHoelder(2.0, 1.0), sizes=(4, 8, 16), lam0=2.5, trials=60, seed=3)
    rep = initial_scale_check(spec, 2.0, 1.0, (4, 8, 16))
    probs = rep.table.column("probability")
    assert probs[-1] < probs[0]
    assert rep.values["trend_decreasing"]
    with pytest.raises(InputError):
        initial_scale_check(spec.replace(distribution=Uniform(0.0, 1.0)), 2.0, 1.0, (4,))
    with pytest.raises(InputError):
        initial_scale_check(spec, 2.0, 5.0, (4,))


def test_bc_sweep():
    rep = boundary_condition_sweep(SMALL, ["dirichlet", "kirchhoff", "delta(1)"])
    assert rep.table.column("boundary") == ["dirichlet", "kirchhoff", "delta(1.0)"]
    assert rep.flags["all_finite"]
    with pytest.raises(CapabilityError):
        boundary_condition_sweep(SMALL, ["dirichlet", "robin"])


def test_bernoulli_scan_runs():
    rep = wegner_scan(SMALL.replace(distribution=Bernoulli(0.5, 0.0, 1.0)))
    assert rep.flags["finite_constant"]
