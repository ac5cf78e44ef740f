"""Finite-sum problems ``phi(x) = 1/N sum_i f_i(x) + g(x)`` and their subproblem solvers.

Every component ``f_i`` is smooth relative to a Legendre kernel ``h_i``.  The
solvers only touch the components through a *family* object that evaluates
values and gradients for a whole index subset at once, so a table of a few
hundred components costs one matrix-vector product rather than a Python loop.

The shared subproblem

    T(s) = argmin_w { g(w) + sum_i h_i(w) / gamma_i - <s, w> }

has a closed form for every shipped (kernel, regularizer) pair; these are the
``t_solve_*`` functions below.
"""
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DomainError, InvalidDataError, PreconditionError,
                     StepsizeError)
from .kernel import (EPS_DOM, Kernel, bregman, make_euclidean_kernel,
                     make_poisson_kernel, make_quartic_kernel)

# smoothness constant used for a zero-weight quadratic component
L_FLOOR = 1e-12


@dataclass(frozen=True)
class Component:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    smoothness: float
    kernel: Kernel
    name: str = "component"
    # (a, b) measurement data for the phase-retrieval components
    data: tuple = ()


def squared_loss_component(a, b):
    """``f(x) = 1/4 (<a, x>^2 - b)^2`` relative to the quartic kernel."""
    a = np.asarray(a, dtype=float)
    b = float(b)
    if not np.any(a):
        raise InvalidDataError("squared-loss component needs a != 0")
    sq = float(np.dot(a, a))

    def value(x):
        r = float(np.dot(a, x))
        return 0.25 * (r * r - b) ** 2

    def gradient(x):
        r = float(np.dot(a, x))
        return (r * r - b) * r * a

    return Component(value, gradient, 3 * sq * sq + sq * abs(b),
                     make_quartic_kernel(a.size), "squared", (a, b))


def poisson_component(a, b):
    """``f(x) = -b log(<a, x>^2) + <a, x>^2`` relative to the Poisson kernel, ``L = 1``."""
    a = np.asarray(a, dtype=float)
    b = float(b)
    if np.any(a < 0):
        raise InvalidDataError("Poisson component needs a >= 0 elementwise")
    if not np.any(a):
        raise InvalidDataError("Poisson component needs a != 0")
    if b < 0:
        raise InvalidDataError("Poisson component needs b >= 0")

    def value(x):
        r = float(np.dot(a, x))
        if b == 0:
            return r * r
        if r <= 0:
            return np.inf
        return -b * math.log(r * r) + r * r

    def gradient(x):
        r = float(np.dot(a, x))
        return (2 * r - 2 * b / r) * a

    return Component(value, gradient, 1.0, make_poisson_kernel(a, b), "poisson", (a, b))


def quadratic_component(c, weight):
    """``f(x) = weight * 1/2 ||x - c||^2`` with the Euclidean kernel.

    A negative weight gives a concave component.
    """
    c = np.asarray(c, dtype=float)
    weight = float(weight)

    def value(x):
        d = np.asarray(x, dtype=float) - c
        return 0.5 * weight * float(np.dot(d, d))

    def gradient(x):
        return weight * (np.asarray(x, dtype=float) - c)

    return Component(value, gradient, max(abs(weight), L_FLOOR),
                     make_euclidean_kernel(c.size), "quadratic")


@dataclass(frozen=True)
class Regularizer:
    """``g`` in {0, lam * ||.||_1, indicator of the l0 ball of radius kappa}."""

    tag: str = "none"
    lam: float = 0.0
    kappa: Optional[int] = None

    def __post_init__(self):
        if self.tag not in ("none", "l1", "l0ball"):
            raise PreconditionError(f"unknown regularizer {self.tag!r}")
        if self.lam < 0:
            raise PreconditionError("lambda must be nonnegative")
        if self.tag == "l0ball" and (self.kappa is None or self.kappa < 1):
            raise PreconditionError("l0 ball needs kappa >= 1")

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam=float(lam))

    @classmethod
    def l0ball(cls, kappa):
        return cls("l0ball", kappa=int(kappa))

    def value(self, x):
        if self.tag == "l1":
            return self.lam * float(np.sum(np.abs(x)))
        if self.tag == "l0ball":
            return 0.0 if np.count_nonzero(x) <= self.kappa else np.inf
        return 0.0

    def __call__(self, x):
        return self.value(x)


# ---------------------------------------------------------------------------
# subproblem solvers


def cardano_positive_root(p, q):
    """Nonnegative real root of ``t^3 + p t + q = 0`` for ``p > 0``, ``q <= 0``.

    Cardano gives ``t = u - v`` with ``u = (c - q/2)^(1/3)``,
    ``v = (c + q/2)^(1/3) = p / (3u)`` and ``c = sqrt(q^2/4 + p^3/27)``.  The
    difference cancels badly when ``p^3 >> q^2``, so it is evaluated as
    ``-q / (u^2 + uv + v^2)`` (from ``u^3 - v^3 = -q``), followed by one
    guarded Newton step.
    """
    p = float(p)
    q = float(q)
    if not p > 0 or q > 0:
        raise PreconditionError(f"cardano_positive_root needs p > 0, q <= 0 (got p={p}, q={q})")
    if q == 0:
        return 0.0
    c = math.sqrt(0.25 * q * q + p ** 3 / 27.0)
    u = (c - 0.5 * q) ** (1.0 / 3.0)
    v = p / (3.0 * u)
    t = -q / (u * u + u * v + v * v)

    res = t ** 3 + p * t + q
    t_new = t - res / (3 * t * t + p)
    if t_new >= 0 and abs(t_new ** 3 + p * t_new + q) < abs(res):
        t = t_new
    return t


def soft_threshold(v, tau):
    v = np.asarray(v, dtype=float)
    if tau < 0:
        raise PreconditionError("soft_threshold needs tau >= 0")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def project_l0_ball(v, kappa):
    """Keep the ``kappa`` largest-magnitude entries of ``v``; ties go to the lower index."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if not 1 <= kappa <= n:
        raise PreconditionError(f"kappa={kappa} outside [1, {n}]")
    keep = np.argsort(-np.abs(v), kind="stable")[:kappa]
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def aggregate_stepsize(gammas):
    """``(sum_i 1/gamma_i)^-1``."""
    return 1.0 / float(np.sum(1.0 / np.asarray(gammas, dtype=float)))


def _quartic_scale(y):
    # the minimizer of h/gbar - <s, w> over the support of y solves
    # (||w||^2 + 1) w = y, i.e. w = (tau/||y||) y with tau^3 + tau = ||y||
    ny = float(np.linalg.norm(y))
    if ny == 0:
        return np.zeros_like(y)
    tau = cardano_positive_root(1.0, -ny)
    return (tau / ny) * y


def t_solve_quartic_l1(s, lam, gammas):
    """T(s) for quartic kernels and ``g = lam ||.||_1``."""
    gbar = aggregate_stepsize(gammas)
    y = soft_threshold(gbar * np.asarray(s, dtype=float), gbar * lam)
    return _quartic_scale(y)


def t_solve_quartic_l0(s, kappa, gammas):
    """T(s) for quartic kernels and the l0-ball indicator of radius ``kappa``."""
    gbar = aggregate_stepsize(gammas)
    y = project_l0_ball(gbar * np.asarray(s, dtype=float), kappa)
    return _quartic_scale(y)


def poisson_constants(a_sqnorms, b, gammas):
    """``c_a = sum 4 ||a_i||^2 / gamma_i`` and ``c_b = sum 4 b_i / gamma_i``."""
    gammas = np.asarray(gammas, dtype=float)
    c_a = float(np.sum(4.0 * np.asarray(a_sqnorms, dtype=float) / gammas))
    c_b = float(np.sum(4.0 * np.asarray(b, dtype=float) / gammas))
    return c_a, c_b


def poisson_prox(s, lam, c_a, c_b):
    s = np.asarray(s, dtype=float)
    if c_a <= 0:
        raise PreconditionError("Poisson subproblem needs c_a > 0")
    d = s - lam
    if c_b <= 0:
        if np.any(d <= 0):
            raise DomainError("Poisson subproblem with c_b = 0 leaves the positive orthant")
        return 2.0 * d / c_a
    root = np.sqrt(d * d + c_a * c_b)
    # the two branches are algebraically equal; the second avoids
    # cancellation when s_j - lam is large and negative
    return np.where(d >= 0, (d + root) / c_a, c_b / (root - d))


def t_solve_poisson_l1(s, lam, components, gammas):
    """T(s) for Poisson kernels and ``g = lam ||.||_1``; the output is strictly positive.

    ``components`` may be a sequence of :class:`Component` built by
    :func:`poisson_component` or a :class:`PoissonFamily`.
    """
    if isinstance(components, PoissonFamily):
        a_sq, b = components.a_sqnorms, components.b
    else:
        a_sq = [float(np.dot(c.data[0], c.data[0])) for c in components]
        b = [c.data[1] for c in components]
    c_a, c_b = poisson_constants(a_sq, b, gammas)
    return poisson_prox(s, lam, c_a, c_b)


def t_solve_euclidean(s, regularizer, gammas):
    """T(s) = prox_{gbar g}(gbar s) for Euclidean kernels."""
    gbar = aggregate_stepsize(gammas)
    y = gbar * np.asarray(s, dtype=float)
    if regularizer.tag == "l1":
        return soft_threshold(y, gbar * regularizer.lam)
    if regularizer.tag == "l0ball":
        return project_l0_ball(y, regularizer.kappa)
    return y


def relative_smoothness_margin(c, x, y):
    """``L D_h(y, x) - |f(y) - f(x) - <grad f(x), y - x>|``; nonnegative when the certificate holds."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lin = c.value(y) - c.value(x) - float(np.dot(c.gradient(x), y - x))
    return c.smoothness * bregman(c.kernel, y, x) - abs(lin)


# ---------------------------------------------------------------------------
# batched component families


def _rows(idx, N):
    return np.arange(N) if idx is None else np.asarray(idx)


class ComponentFamily:
    """N components evaluated through Python callables, one at a time.

    Subclasses override the batch methods with vectorized versions.  All
    methods take a single point ``x`` and an optional index array ``idx``
    (``None`` meaning every component) and return one row per index.
    """

    kind = "generic"

    def __init__(self, components):
        self._components = list(components)
        if not self._components:
            raise InvalidDataError("a problem needs at least one component")
        self.N = len(self._components)
        self.n = self._components[0].kernel.dimension
        self.smoothness = np.array([c.smoothness for c in self._components], dtype=float)

    @property
    def components(self):
        return self._components

    def component(self, i):
        return self.components[i]

    def f_values(self, x, idx=None):
        return np.array([self.components[i].value(x) for i in _rows(idx, self.N)])

    def f_grads(self, x, idx=None):
        return np.array([self.components[i].gradient(x) for i in _rows(idx, self.N)])

    def h_values(self, x, idx=None):
        return np.array([self.components[i].kernel.value(x) for i in _rows(idx, self.N)])

    def h_grads(self, x, idx=None):
        return np.array([self.components[i].kernel.gradient(x) for i in _rows(idx, self.N)])

    def in_interior(self, x):
        return all(c.kernel.in_interior(x) for c in self.components)


class SquaredLossFamily(ComponentFamily):
    """Rows ``a_i`` of ``A`` with ``f_i(x) = 1/4 (<a_i, x>^2 - b_i)^2`` and quartic kernels."""

    kind = "quartic"

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.N, self.n = self.A.shape
        if self.b.shape != (self.N,):
            raise InvalidDataError("b must have one entry per row of A")
        self.a_sqnorms = np.einsum("ij,ij->i", self.A, self.A)
        if np.any(self.a_sqnorms == 0):
            raise InvalidDataError("every row a_i must be nonzero")
        self.smoothness = 3 * self.a_sqnorms ** 2 + self.a_sqnorms * np.abs(self.b)
        self._kernel = make_quartic_kernel(self.n)

    @functools.cached_property
    def components(self):
        return [squared_loss_component(a, bi) for a, bi in zip(self.A, self.b)]

    def f_values(self, x, idx=None):
        A, b = (self.A, self.b) if idx is None else (self.A[idx], self.b[idx])
        r = A @ x
        return 0.25 * (r * r - b) ** 2

    def f_grads(self, x, idx=None):
        A, b = (self.A, self.b) if idx is None else (self.A[idx], self.b[idx])
        r = A @ x
        return ((r * r - b) * r)[:, None] * A

    def h_values(self, x, idx=None):
        m = self.N if idx is None else len(idx)
        return np.full(m, self._kernel.value(x))

    def h_grads(self, x, idx=None):
        m = self.N if idx is None else len(idx)
        return np.broadcast_to(self._kernel.gradient(x), (m, self.n))

    def in_interior(self, x):
        return bool(np.all(np.isfinite(x)))


class PoissonFamily(ComponentFamily):
    """``f_i(x) = -b_i log(<a_i, x>^2) + <a_i, x>^2`` with the Poisson kernels, ``L_i = 1``."""

    kind = "poisson"

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.N, self.n = self.A.shape
        if self.b.shape != (self.N,):
            raise InvalidDataError("b must have one entry per row of A")
        if np.any(self.A < 0) or np.any(self.b < 0):
            raise InvalidDataError("Poisson data must be elementwise nonnegative")
        self.a_sqnorms = np.einsum("ij,ij->i", self.A, self.A)
        if np.any(self.a_sqnorms == 0):
            raise InvalidDataError("every row a_i must be nonzero")
        self.smoothness = np.ones(self.N)

    @functools.cached_property
    def components(self):
        return [poisson_component(a, bi) for a, bi in zip(self.A, self.b)]

    def _data(self, idx):
        if idx is None:
            return self.A, self.b, self.a_sqnorms
        return self.A[idx], self.b[idx], self.a_sqnorms[idx]

    def f_values(self, x, idx=None):
        A, b, _ = self._data(idx)
        r = A @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(b > 0, b * np.log(r * r), 0.0)
        out = r * r - logs
        return np.where((b > 0) & (r <= 0), np.inf, out)

    def f_grads(self, x, idx=None):
        A, b, _ = self._data(idx)
        r = A @ x
        return (2 * r - 2 * b / r)[:, None] * A

    def h_values(self, x, idx=None):
        _, b, a_sq = self._data(idx)
        if not np.all(x > 0):
            return np.where(b > 0, np.inf, a_sq * np.dot(x, x))
        return a_sq * np.dot(x, x) - 2 * b * np.sum(np.log(x))

    def h_grads(self, x, idx=None):
        _, b, a_sq = self._data(idx)
        return 2 * a_sq[:, None] * x[None, :] - 2 * b[:, None] / x[None, :]

    def in_interior(self, x):
        return bool(np.all(x > EPS_DOM))


class QuadraticFamily(ComponentFamily):
    """``f_i(x) = w_i/2 ||x - c_i||^2`` with Euclidean kernels."""

    kind = "euclidean"

    def __init__(self, C, weights):
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self.N, self.n = self.C.shape
        if self.weights.shape != (self.N,):
            raise InvalidDataError("one weight per center required")
        self.smoothness = np.maximum(np.abs(self.weights), L_FLOOR)

    @functools.cached_property
    def components(self):
        return [quadratic_component(c, w) for c, w in zip(self.C, self.weights)]

    def f_values(self, x, idx=None):
        C, w = (self.C, self.weights) if idx is None else (self.C[idx], self.weights[idx])
        d = x[None, :] - C
        return 0.5 * w * np.einsum("ij,ij->i", d, d)

    def f_grads(self, x, idx=None):
        C, w = (self.C, self.weights) if idx is None else (self.C[idx], self.weights[idx])
        return w[:, None] * (x[None, :] - C)

    def h_values(self, x, idx=None):
        m = self.N if idx is None else len(idx)
        return np.full(m, 0.5 * np.dot(x, x))

    def h_grads(self, x, idx=None):
        m = self.N if idx is None else len(idx)
        return np.broadcast_to(np.asarray(x, dtype=float), (m, self.n))

    def in_interior(self, x):
        return bool(np.all(np.isfinite(x)))


# ---------------------------------------------------------------------------
# problems


def default_stepsizes(smoothness, N, scale=0.99):
    """``gamma_i = scale * N / L_i``."""
    if not 0 < scale < 1:
        raise StepsizeError("stepsize scale must lie in (0, 1)")
    return scale * N / np.asarray(smoothness, dtype=float)


@dataclass(eq=False)
class Problem:
    """Components, regularizer, stepsizes and the closed-form subproblem solver."""

    family: ComponentFamily
    regularizer: Regularizer
    gammas: np.ndarray
    t_solver: Callable[[np.ndarray], np.ndarray]
    name: str = "problem"
    _gamma_col: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.gammas = np.asarray(self.gammas, dtype=float)
        if self.gammas.shape != (self.N,):
            raise StepsizeError("one stepsize per component required")
        upper = self.N / self.family.smoothness
        bad = ~((self.gammas > 0) & (self.gammas < upper))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise StepsizeError(f"gamma_{i}={self.gammas[i]} outside (0, {upper[i]})")
        if self.regularizer.tag == "l0ball" and self.regularizer.kappa > self.n:
            raise PreconditionError("kappa exceeds the dimension")
        self._gamma_col = self.gammas[:, None]

    @property
    def N(self):
        return self.family.N

    @property
    def n(self):
        return self.family.n

    @property
    def kind(self):
        return self.family.kind

    @property
    def components(self):
        return self.family.components

    def T(self, s):
        return self.t_solver(s)

    def in_C(self, x):
        x = np.asarray(x, dtype=float)
        return x.shape == (self.n,) and self.family.in_interior(x)

    def derived_grads(self, x, idx=None):
        """Rows ``grad h_i(x)/gamma_i - grad f_i(x)/N`` for ``i`` in ``idx``."""
        g = self._gamma_col if idx is None else self._gamma_col[idx]
        return self.family.h_grads(x, idx) / g - self.family.f_grads(x, idx) / self.N

    def derived_values(self, x, idx=None):
        g = self.gammas if idx is None else self.gammas[idx]
        return self.family.h_values(x, idx) / g - self.family.f_values(x, idx) / self.N

    def derived_kernel(self, i):
        from .kernel import make_derived_kernel
        c = self.family.component(i)
        return make_derived_kernel(c.kernel, c, self.gammas[i], self.N)


def _gammas_for(family, gammas, gamma_scale):
    if gammas is None:
        return default_stepsizes(family.smoothness, family.N, gamma_scale)
    return np.broadcast_to(np.asarray(gammas, dtype=float), (family.N,)).copy()


def squared_loss_problem(A, b, regularizer=None, gammas=None, gamma_scale=0.99):
    """Sparse phase retrieval with squared loss and quartic kernels."""
    family = SquaredLossFamily(A, b)
    reg = regularizer or Regularizer()
    g = _gammas_for(family, gammas, gamma_scale)
    if reg.tag == "l0ball":
        solver = functools.partial(_apply_l0, kappa=reg.kappa, gammas=g)
    else:
        solver = functools.partial(_apply_l1, lam=reg.lam, gammas=g)
    return Problem(family, reg, g, solver, name="squared")


def poisson_problem(A, b, lam=0.0, gammas=None, gamma_scale=0.99):
    """Sparse phase retrieval with Poisson loss, ``g = lam ||.||_1``."""
    family = PoissonFamily(A, b)
    reg = Regularizer.l1(lam)
    g = _gammas_for(family, gammas, gamma_scale)
    c_a, c_b = poisson_constants(family.a_sqnorms, family.b, g)
    if c_b <= 0:
        raise InvalidDataError("Poisson problem needs some b_i > 0")
    solver = functools.partial(_apply_poisson, lam=lam, c_a=c_a, c_b=c_b)
    return Problem(family, reg, g, solver, name="poisson")


def quadratic_problem(C, weights, regularizer=None, gammas=None, gamma_scale=0.99):
    """Euclidean test problem with quadratic (possibly concave) components."""
    family = QuadraticFamily(C, weights)
    reg = regularizer or Regularizer()
    g = _gammas_for(family, gammas, gamma_scale)
    solver = functools.partial(_apply_euclidean, regularizer=reg, gammas=g)
    return Problem(family, reg, g, solver, name="quadratic")


def generic_problem(components, regularizer, gammas, t_solver):
    return Problem(ComponentFamily(components), regularizer, gammas, t_solver)


# module-level so that bound solvers pickle for process pools
def _apply_l1(s, lam, gammas):
    return t_solve_quartic_l1(s, lam, gammas)


def _apply_l0(s, kappa, gammas):
    return t_solve_quartic_l0(s, kappa, gammas)


def _apply_poisson(s, lam, c_a, c_b):
    return poisson_prox(s, lam, c_a, c_b)


def _apply_euclidean(s, regularizer, gammas):
    return t_solve_euclidean(s, regularizer, gammas)
