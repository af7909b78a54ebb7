import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgraph_wegner.distributions import (
    Bernoulli,
    LogHoelder,
    PointMass,
    PowerHoelder,
    Uniform,
    loghoelder_constant,
    make_distribution,
    numeric_modulus,
)
from qgraph_wegner.errors import InputError

DISTRIBUTIONS = [Uniform(0.0, 1.0), Uniform(-2.0, 3.0), PowerHoelder(2.0, 1.0), PowerHoelder(0.5, 2.0),
                 LogHoelder(4.0, 1.0), Bernoulli(0.3, 0.0, 1.0), PointMass(0.7)]


def test_uniform_modulus():
    mu = Uniform(0.0, 1.0)
    assert mu.modulus(0.1) == pytest.approx(0.2, abs=1e-15)
    assert mu.modulus(0.6) == 1.0
    assert mu.c_mu == 1.0


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_power_hoelder_closed_form(eps):
    mu = PowerHoelder(2.0, 1.0)
    assert mu.modulus(eps) == pytest.approx(1 - (1 - 2 * eps) ** 2, rel=1e-14)
    assert numeric_modulus(mu, eps) == pytest.approx(mu.modulus(eps), rel=1e-9)


def test_power_hoelder_below_one():
    mu = PowerHoelder(0.5, 1.0)
    assert mu.modulus(0.1) == pytest.approx(math.sqrt(0.2), rel=1e-14)
    assert numeric_modulus(mu, 0.1) == pytest.approx(mu.modulus(0.1), rel=1e-9)


@pytest.mark.parametrize("eps,expected", [(0.2, 0.8080701020430595), (0.1, 0.5532235426146235),
                                          (0.05, 0.3301397437357718), (0.01, 0.0768886023001607)])
def test_log_hoelder_modulus_frozen(eps, expected):
    mu = LogHoelder(4.0, 1.0)
    assert mu.modulus(eps) == pytest.approx(expected, rel=1e-9)
    # the heavy end sits at x0
    assert mu.modulus(eps) == pytest.approx(1 - (1 - math.log(1 - 2 * eps)) ** -4, rel=1e-9)


def test_log_hoelder_constant_frozen():
    assert loghoelder_constant(LogHoelder(4.0, 1.0), 4.0) == pytest.approx(35.16760136568496, rel=1e-12)


def test_atoms():
    b = Bernoulli(0.3, 0.0, 1.0)
    assert b.modulus(0.1) == 0.7
    assert b.modulus(0.5) == 1.0
    assert float(b.mass(1.0, 1.0)) == pytest.approx(0.3)
    assert float(b.mass(0.0, 0.0)) == pytest.approx(0.7)
    p = PointMass(0.7)
    assert p.modulus(0.0) == 1.0 and float(p.mass(0.7, 0.7)) == 1.0


def test_means():
    assert PowerHoelder(2.0, 1.0).mean() == pytest.approx(2 / 3, rel=1e-12)
    assert Uniform(-2.0, 3.0).mean() == pytest.approx(0.5, rel=1e-12)
    assert Bernoulli(0.3, 0.0, 1.0).mean() == pytest.approx(0.3)


def test_factory():
    mu = make_distribution("power_hoelder", tau=2, x0=1)
    assert isinstance(mu, PowerHoelder) and mu.tau == 2.0
    assert mu.describe() == "power_hoelder(tau=2.0, x0=1.0)"
    with pytest.raises(InputError):
        make_distribution("gaussian")
    with pytest.raises(InputError):
        make_distribution("uniform", width=2)
    with pytest.raises(InputError):
        Uniform(1.0, 0.0)
    with pytest.raises(InputError):
        Uniform().modulus(-0.1)


@pytest.mark.parametrize("mu", DISTRIBUTIONS, ids=lambda m: m.describe())
@given(u=st.floats(0.0, 1.0, exclude_max=True))
def test_quantile_inverts_cdf(mu, u):
    x = float(mu.ppf(u))
    lo, hi = mu.support
    assert lo <= x <= hi
    # F(x-) <= u <= F(x)
    assert float(mu.cdf_left(x)) <= u + 1e-12
    assert u <= float(mu.cdf(x)) + 1e-12


@pytest.mark.parametrize("mu", DISTRIBUTIONS, ids=lambda m: m.describe())
@settings(max_examples=15)
@given(e1=st.floats(0.0, 0.5), e2=st.floats(0.0, 0.5))
def test_modulus_monotone_and_subadditive(mu, e1, e2):
    a, b = sorted((e1, e2))
    assert mu.modulus(a) <= mu.modulus(b) + 1e-12
    # an interval of length 2(a + b) is covered by two of lengths 2a and 2b
    assert mu.modulus(a + b) <= mu.modulus(a) + mu.modulus(b) + 1e-9


@pytest.mark.parametrize("mu", DISTRIBUTIONS, ids=lambda m: m.describe())
def test_modulus_dominates_every_window(mu):
    xs = np.linspace(mu.support[0] - 0.5, mu.support[1] + 0.5, 301)
    for eps in (0.01, 0.1, 0.3):
        assert np.all(mu.mass(xs - eps, xs + eps) <= mu.modulus(eps) + 1e-12)
