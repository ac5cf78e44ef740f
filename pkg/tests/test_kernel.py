import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bfinito.errors import DomainError, InvalidKernelError, StepsizeError
from bfinito.kernel import (bregman, make_derived_kernel, make_euclidean_kernel,
                            make_poisson_kernel, make_quartic_kernel)
from bfinito.model import poisson_component, quadratic_component, squared_loss_component


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h * max(1.0, abs(x[j]))
        g[j] = (f(x + e) - f(x - e)) / (2 * e[j])
    return g


def test_euclidean_examples():
    k = make_euclidean_kernel(2)
    assert bregman(k, [1, 0], [0, 0]) == 0.5
    assert np.array_equal(k.gradient(np.array([3.0, 4.0])), [3, 4])
    assert k.value(np.zeros(2)) == 0
    assert bregman(k, [1, 1], [0, 0]) == 1.0


def test_quartic_examples():
    k = make_quartic_kernel(2)
    assert bregman(k, [1, 0], [0, 0]) == 0.75
    assert np.array_equal(k.gradient(np.array([1.0, 0.0])), [2, 0])
    assert np.array_equal(k.gradient(np.zeros(2)), [0, 0])
    assert k.value(np.array([1.0, 1.0])) == 2.0


def test_bregman_identity_case():
    for k in (make_euclidean_kernel(3), make_quartic_kernel(3), make_poisson_kernel([1, 2, 0], 1.5)):
        x = np.array([0.3, 1.2, 2.0])
        assert bregman(k, x, x) == pytest.approx(0.0, abs=1e-14)


def test_poisson_kernel_examples():
    k = make_poisson_kernel([1.0, 0.0, 0.0], 1.0)
    assert np.allclose(k.gradient(np.ones(3)), 0)
    assert k.value(np.array([1.0, 0.0, 1.0])) == np.inf
    assert k.value(np.array([1.0, -1.0, 1.0])) == np.inf
    k1 = make_poisson_kernel([1.0], 1.0)
    # direct evaluation: h(2) = 4 - 2 log 2, h(1) = 1, h'(1) = 0
    assert bregman(k1, [2.0], [1.0]) == pytest.approx(3 - 2 * math.log(2), rel=1e-14)


def test_poisson_kernel_errors_and_degenerate():
    with pytest.raises(InvalidKernelError):
        make_poisson_kernel([0.0, 0.0], 1.0)
    k = make_poisson_kernel([1.0, 1.0], 0.0)
    # b = 0: scaled Euclidean on the whole space
    assert k.in_interior(np.array([-1.0, 0.0]))
    assert bregman(k, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(2.0)


def test_bregman_domain_handling():
    k = make_poisson_kernel([1.0], 1.0)
    with pytest.raises(DomainError):
        bregman(k, [1.0], [0.0])
    assert bregman(k, [-1.0], [1.0]) == np.inf


def test_derived_kernel_example():
    # f = 1/2 (x - 2)^2, gamma = 1, N = 2: h_hat(w) = w^2/2 - (w-2)^2/4
    comp = quadratic_component([2.0], 1.0)
    dk = make_derived_kernel(make_euclidean_kernel(1), comp, 1.0, 2)
    for w in (-1.0, 0.0, 0.7, 3.0):
        x = np.array([w])
        assert dk.value(x) == pytest.approx(0.5 * w * w - 0.25 * (w - 2) ** 2)
        assert dk.gradient(x)[0] == pytest.approx(0.5 * w + 1)
    assert dk.gradient(np.zeros(1))[0] == 1.0
    assert bregman(dk, [0.5], [0.0]) == pytest.approx(0.0625)


def test_derived_kernel_stepsize_range():
    comp = quadratic_component([2.0], 1.0)
    base = make_euclidean_kernel(1)
    with pytest.raises(StepsizeError):
        make_derived_kernel(base, comp, 2.0, 2)  # gamma = N / L exactly
    with pytest.raises(StepsizeError):
        make_derived_kernel(base, comp, 0.0, 2)
    make_derived_kernel(base, comp, 1.999, 2)


def _kernels(rng):
    a = np.abs(rng.standard_normal(3)) + 0.1
    return [("euclidean", make_euclidean_kernel(3), False),
            ("quartic", make_quartic_kernel(3), False),
            ("poisson", make_poisson_kernel(a, 1.7), True)]


def _point(rng, positive):
    x = rng.standard_normal(3)
    return np.abs(x) + 0.05 if positive else x


def test_three_point_identity_random():
    rng = np.random.default_rng(0)
    for name, k, pos in _kernels(rng):
        for _ in range(200):
            x, y, z = (_point(rng, pos) for _ in range(3))
            lhs = bregman(k, x, z)
            rhs = bregman(k, x, y) + bregman(k, y, z) + np.dot(x - y, k.gradient(y) - k.gradient(z))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs)), name


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    for name, k, pos in _kernels(rng):
        for _ in range(20):
            x = _point(rng, pos) + (0.2 if pos else 0.0)
            g = k.gradient(x)
            fd = fd_gradient(k.value, x)
            assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g)), name


def test_derived_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    a = rng.standard_normal(3)
    comp = squared_loss_component(a, 0.8)
    dk = make_derived_kernel(comp.kernel, comp, 0.9 * 4 / comp.smoothness, 4)
    for _ in range(20):
        x = rng.standard_normal(3)
        g = dk.gradient(x)
        assert np.linalg.norm(fd_gradient(dk.value, x) - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_sandwich_bound():
    # (N - gamma L)/(N gamma) D <= D_hat <= (N + gamma L)/(N gamma) D
    rng = np.random.default_rng(3)
    N = 5
    comps = [squared_loss_component(rng.standard_normal(3), 1.3),
             poisson_component(np.abs(rng.standard_normal(3)) + 0.1, 2.0),
             quadratic_component(rng.standard_normal(3), -0.4)]
    for c in comps:
        pos = c.name == "poisson"
        for frac in (0.3, 0.99):
            gamma = frac * N / c.smoothness
            dk = make_derived_kernel(c.kernel, c, gamma, N)
            lo = (N - gamma * c.smoothness) / (N * gamma)
            hi = (N + gamma * c.smoothness) / (N * gamma)
            for _ in range(200):
                x, y = _point(rng, pos), _point(rng, pos)
                d = bregman(c.kernel, x, y)
                dh = bregman(dk, x, y)
                tol = 1e-10 * max(1.0, d * hi)
                assert lo * d - tol <= dh <= hi * d + tol


vec3 = arrays(np.float64, 3, elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(vec3, vec3)
def test_bregman_nonnegative_and_vanishes_only_on_diagonal(x, y):
    for k in (make_euclidean_kernel(3), make_quartic_kernel(3)):
        d = bregman(k, x, y)
        assert d >= -1e-12 * max(1.0, k.value(x))
        if np.linalg.norm(x - y) > 1e-3:
            assert d > 0


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(0.01, 5)),
       arrays(np.float64, 3, elements=st.floats(0.01, 5)))
def test_poisson_bregman_nonnegative(x, y):
    k = make_poisson_kernel([1.0, 0.5, 0.0], 0.7)
    d = bregman(k, x, y)
    assert d >= -1e-12 * max(1.0, abs(k.value(x)))
    if np.linalg.norm(x - y) > 1e-3:
        assert d > 0
