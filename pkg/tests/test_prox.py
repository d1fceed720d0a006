import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import brentq

from hdglm.estimators.prox import ProxQuery, prox, prox_batch
from hdglm.exceptions import NonMonotoneLink, OutOfRange
from hdglm.model_zoo.links import ClippedExp, Cloglog, Linear, Logistic, Piecewise, Square, make_link

LINKS = [Logistic(), Logistic(-1.0), ClippedExp(50), make_link("exp"), Piecewise(5, 0.1), Cloglog(), Linear()]


def test_logistic_known_root():
    oracle = brentq(lambda z: z + 1.0 / (1.0 + np.exp(-z)) + 3.0, -4.0, -2.0, xtol=1e-14)
    assert_allclose(prox(ProxQuery(-3.0, 1.0, Logistic())), oracle, atol=1e-12)


def test_linear_closed_form():
    x = np.linspace(-10, 10, 21)
    assert_allclose(prox_batch(x, 0.5, Linear()), x / 1.5, atol=1e-12)


def test_eta_zero_is_identity():
    x = np.array([-1.0, 0.0, 2.5])
    assert_allclose(prox_batch(x, 0.0, ClippedExp(50)), x)


@pytest.mark.parametrize("link", LINKS)
def test_fixed_point_identity(link, rng):
    x = rng.normal(scale=5.0, size=10_000)
    eta = 0.7
    z = prox_batch(x, eta, link)
    assert_allclose(z + eta * link.g(z), x, atol=1e-9 * (1 + np.max(np.abs(x))))


@pytest.mark.parametrize("link", LINKS)
def test_prox_is_monotone_and_nonexpansive(link, rng):
    x = np.sort(rng.normal(scale=4.0, size=10_000))
    z = prox_batch(x, 1.3, link)
    dz, dx = np.diff(z), np.diff(x)
    assert np.all(dz >= -1e-10)
    assert np.all(dz <= dx + 1e-10)


def test_extreme_arguments_converge():
    x = np.array([-1e8, -500.0, 500.0, 1e8])
    z = prox_batch(x, 2.0, ClippedExp(50))
    link = ClippedExp(50)
    assert np.all(np.isfinite(z))
    assert_allclose(z + 2.0 * link.g(z), x, rtol=1e-10)


def test_shape_is_kept():
    x = np.arange(12.0).reshape(3, 4) - 6
    assert prox_batch(x, 1.0, Logistic()).shape == (3, 4)


def test_rejects_bad_input():
    with pytest.raises(NonMonotoneLink):
        prox_batch(np.zeros(2), 1.0, Square())
    with pytest.raises(OutOfRange):
        prox_batch(np.zeros(2), -1.0, Logistic())
