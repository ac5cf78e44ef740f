"""Bregman mirror descent (MD) and stochastic mirror descent (SMD) baselines.

Both use a single kernel ``h`` for the whole sum:

    x+ = argmin_w { g(w) + <grad, w> + D_h(w, x) / step }

which is the shared subproblem with one kernel and stepsize ``step`` applied
to ``s = grad h(x) / step - grad``.  Full MD uses ``step = 1/L_f``; SMD samples
one component uniformly and uses ``step = alpha / (L_f k)``, ``k >= 1``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .kernel import Kernel, make_euclidean_kernel, make_quartic_kernel, poisson_kernel_from_norm
from .model import (poisson_constants, poisson_prox, t_solve_euclidean,
                    t_solve_quartic_l0, t_solve_quartic_l1)
from .runner import drive


def aggregate_kernel(problem):
    """The kernel ``h`` relative to which ``f = 1/N sum_i f_i`` is ``L_f``-smooth."""
    kind, n = problem.kind, problem.n
    if kind == "quartic":
        return make_quartic_kernel(n)
    if kind == "euclidean":
        return make_euclidean_kernel(n)
    if kind == "poisson":
        fam = problem.family
        return poisson_kernel_from_norm(fam.a_sqnorms.mean(), fam.b.mean(), n)
    raise ParameterError(f"no aggregate kernel for {kind!r} problems")


@dataclass(frozen=True)
class MDConfig:
    alpha: float
    aggregate_smoothness: float
    aggregate_kernel: Kernel
    mode: str = "stochastic"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError("alpha must be positive")
        if not self.aggregate_smoothness > 0:
            raise ParameterError("L_f must be positive")
        if self.mode not in ("full", "stochastic"):
            raise ParameterError(f"unknown mode {self.mode!r}")

    def stepsize(self, k):
        if self.mode == "full":
            return 1.0 / self.aggregate_smoothness
        return self.alpha / (self.aggregate_smoothness * k)


def md_config(problem, mode="stochastic", alpha=1.0):
    """Config with ``L_f = mean_i L_i`` and the problem's aggregate kernel."""
    return MDConfig(alpha, float(np.mean(problem.family.smoothness)), aggregate_kernel(problem), mode)


def mirror_prox(problem, s, step):
    """``argmin_w { g(w) + h(w)/step - <s, w> }`` for the aggregate kernel ``h``."""
    reg, kind = problem.regularizer, problem.kind
    gam = [step]
    if kind == "quartic":
        if reg.tag == "l0ball":
            return t_solve_quartic_l0(s, reg.kappa, gam)
        return t_solve_quartic_l1(s, reg.lam, gam)
    if kind == "euclidean":
        return t_solve_euclidean(s, reg, gam)
    if kind == "poisson":
        fam = problem.family
        c_a, c_b = poisson_constants(fam.a_sqnorms.mean(), fam.b.mean(), gam)
        return poisson_prox(s, reg.lam, c_a, c_b)
    raise ParameterError(f"no mirror step for {kind!r} problems")


def md_step(x, config, problem, k, sampled_index=None):
    """One (stochastic) mirror step from ``x`` at iteration ``k >= 1``.

    With ``sampled_index`` the gradient of that single component is used,
    otherwise the full average gradient.
    """
    x = np.asarray(x, dtype=float)
    if k < 1:
        raise ParameterError("iteration counter starts at 1")
    if not config.aggregate_kernel.in_interior(x):
        raise DomainError("mirror step from a non-interior point")
    if sampled_index is None:
        grad = problem.family.f_grads(x).mean(axis=0)
    else:
        grad = problem.family.f_grads(x, [int(sampled_index)])[0]
    step = config.stepsize(k)
    s = config.aggregate_kernel.gradient(x) / step - grad
    w = mirror_prox(problem, s, step)
    if not config.aggregate_kernel.in_interior(w):
        raise DomainError("mirror step left the kernel domain")
    return w


class _MDLoop:
    def __init__(self, problem, config, x_init, seed):
        self.problem, self.config = problem, config
        self.x = np.asarray(x_init, dtype=float).copy()
        self.k = 0
        self.sampled = 0
        self.rng = np.random.default_rng(seed)

    @property
    def epochs(self):
        return self.sampled / self.problem.N

    def prepare(self):
        return self.x

    def lyapunov(self):
        return None

    def advance(self):
        N = self.problem.N
        if self.config.mode == "full":
            self.x = md_step(self.x, self.config, self.problem, self.k + 1)
            self.sampled += N
        else:
            i = int(self.rng.integers(N))
            self.x = md_step(self.x, self.config, self.problem, self.k + 1, i)
            self.sampled += 1
        self.k += 1


def md_run(problem, config, x_init, max_epochs=100.0, tol=0.0, max_iter=None, seed=0,
           cadence=None, residual=True, sink=None):
    """Run MD or SMD; a full MD step counts as one epoch, an SMD step as 1/N."""
    x_init = np.asarray(x_init, dtype=float)
    if not problem.in_C(x_init):
        raise DomainError("x_init is not in the interior of every kernel domain")
    loop = _MDLoop(problem, config, x_init, seed)
    result = drive(problem, loop, x_init, max_epochs=max_epochs, tol=tol, max_iter=max_iter,
                   cadence=cadence, residual=residual, sink=sink)
    result.state = loop
    return result
