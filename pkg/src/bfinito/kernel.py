"""Legendre kernels and Bregman distances.

A kernel ``h`` is stored as a bundle of callables (value, gradient and the two
domain predicates).  Three families are shipped:

* Euclidean  ``h(x) = 1/2 ||x||^2``
* quartic    ``h(x) = 1/4 ||x||^4 + 1/2 ||x||^2``
* Poisson    ``h(x) = ||a||^2 ||x||^2 - 2 b sum_j log x_j``

plus the derived kernel ``h_i / gamma_i - f_i / N`` that absorbs a smooth
component into the distance-generating function.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidKernelError, StepsizeError

# strict-positivity floor for log-barrier kernels
EPS_DOM = 1e-12


def _everywhere(x):
    return bool(np.all(np.isfinite(x)))


@dataclass(frozen=True)
class Kernel:
    """A Legendre distance-generating function on R^dimension.

    ``value`` must return ``np.inf`` outside the domain; ``gradient`` is only
    ever called on interior points.
    """

    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], bool] = _everywhere
    in_interior: Callable[[np.ndarray], bool] = _everywhere
    name: str = "kernel"

    def __call__(self, x):
        return self.value(x)


def bregman(k, x, y):
    """Bregman distance ``D_k(x, y) = k(x) - k(y) - <grad k(y), x - y>``.

    Returns ``inf`` when ``x`` is outside the domain of ``k``; raises
    :class:`DomainError` when ``y`` is not an interior point.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not k.in_interior(y):
        raise DomainError(f"bregman: second argument is not interior to dom {k.name}")
    if not k.in_domain(x):
        return np.inf
    return float(k.value(x) - k.value(y) - np.dot(k.gradient(y), x - y))


def make_euclidean_kernel(n):
    def value(x):
        return 0.5 * float(np.dot(x, x))

    def gradient(x):
        return np.array(x, dtype=float)

    return Kernel(n, value, gradient, name="euclidean")


def make_quartic_kernel(n):
    def value(x):
        sq = float(np.dot(x, x))
        return 0.25 * sq * sq + 0.5 * sq

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return (np.dot(x, x) + 1.0) * x

    return Kernel(n, value, gradient, name="quartic")


def poisson_kernel_from_norm(a_sqnorm, b, n):
    """Poisson kernel parametrized by ``||a||^2`` directly.

    Used for the averaged kernel of the mirror-descent baselines, where only
    the squared norm enters.
    """
    a_sqnorm = float(a_sqnorm)
    b = float(b)
    if a_sqnorm <= 0:
        raise InvalidKernelError("Poisson kernel needs ||a|| > 0")
    if b < 0:
        raise InvalidKernelError("Poisson kernel needs b >= 0")

    if b == 0:
        # degenerates to a scaled Euclidean kernel on the whole space
        def value(x):
            return a_sqnorm * float(np.dot(x, x))

        def gradient(x):
            return 2.0 * a_sqnorm * np.asarray(x, dtype=float)

        return Kernel(n, value, gradient, name="poisson")

    def in_domain(x):
        return bool(np.all(x > 0))

    def in_interior(x):
        return bool(np.all(x > EPS_DOM))

    def value(x):
        x = np.asarray(x, dtype=float)
        if not np.all(x > 0):
            return np.inf
        return a_sqnorm * float(np.dot(x, x)) - 2.0 * b * float(np.sum(np.log(x)))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * a_sqnorm * x - 2.0 * b / x

    return Kernel(n, value, gradient, in_domain, in_interior, name="poisson")


def make_poisson_kernel(a, b):
    a = np.asarray(a, dtype=float)
    sq = float(np.dot(a, a))
    if sq == 0:
        raise InvalidKernelError("Poisson kernel needs a nonzero vector a")
    return poisson_kernel_from_norm(sq, b, a.size)


@dataclass(frozen=True)
class DerivedKernel(Kernel):
    """``h_hat = base / gamma - f / N`` for one component ``f`` of the sum."""

    base: Kernel = None
    component: object = None
    gamma: float = 1.0
    n_components: int = 1


def make_derived_kernel(base, component, gamma, N):
    """Build ``base/gamma - component/N``.

    ``gamma`` must lie in the open interval ``(0, N / L)`` where ``L`` is the
    relative-smoothness constant of ``component``; otherwise the result is
    not a Legendre kernel and :class:`StepsizeError` is raised.
    """
    gamma = float(gamma)
    upper = N / component.smoothness
    if not 0 < gamma < upper:
        raise StepsizeError(f"gamma={gamma} outside (0, {upper})")
    f, grad_f = component.value, component.gradient

    def value(x):
        hx = base.value(x)
        if not np.isfinite(hx):
            return np.inf
        return hx / gamma - f(x) / N

    def gradient(x):
        return base.gradient(x) / gamma - grad_f(x) / N

    return DerivedKernel(
        base.dimension, value, gradient, base.in_domain, base.in_interior,
        name=f"derived({base.name})", base=base, component=component,
        gamma=gamma, n_components=N,
    )
