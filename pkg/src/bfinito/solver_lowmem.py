"""Low-memory Bregman Finito/MISO.

Instead of the N x n table, only ``s_tilde`` and the last full-update point
``z_tilde`` are stored.  A full update resets ``s_tilde = sum_i grad h_hat_i(z)``;
in between, every index is visited at most once and its contribution is
swapped from ``z_tilde`` to the current ``z``, at the price of two gradient
evaluations per sampled index.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import cost
from .errors import DomainError, ScheduleError
from .runner import drive


def cyclic_inner(selectable, k):
    """Lowest selectable index (the cyclic inner loop)."""
    return selectable[:1]


def shuffled_inner(seed=0):
    rng = np.random.default_rng(seed)

    def select(selectable, k):
        return selectable[rng.integers(selectable.size)][None]

    return select


@dataclass(eq=False)
class LowMemState:
    s_tilde: np.ndarray
    selectable: np.ndarray   # boolean mask of K
    z_tilde: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    k: int = 0
    sampled: int = 0
    grad_evals: int = 0
    # sum_i <grad h_hat_i(x_i), x_i> - h_hat_i(x_i) over the implicit anchors;
    # lets the Lyapunov value be evaluated in O(n) memory
    conj_sum: Optional[float] = None
    full_pending: bool = True
    last_index_set: Optional[np.ndarray] = None

    @property
    def N(self):
        return self.selectable.size

    @property
    def epochs(self):
        return self.sampled / self.N


def _conj_terms(problem, x, idx=None):
    grads = problem.derived_grads(x, idx)
    return grads @ x - problem.derived_values(x, idx)


def lowmem_init(problem, x_init, lyapunov=False):
    x_init = np.asarray(x_init, dtype=float)
    if not problem.in_C(x_init):
        raise DomainError("x_init is not in the interior of every kernel domain")
    grads = problem.derived_grads(x_init)
    state = LowMemState(grads.sum(axis=0), np.zeros(problem.N, dtype=bool))
    state.grad_evals = problem.N
    if lyapunov:
        state.conj_sum = float(np.sum(grads @ x_init - problem.derived_values(x_init)))
    return state


def compute_z(state, problem):
    z = problem.T(state.s_tilde)
    if not problem.in_C(z):
        raise DomainError("subproblem solution left the interior of the kernel domains")
    state.z = z
    state.full_pending = not state.selectable.any()
    if state.full_pending:
        state.z_tilde = z
    return z


def apply_update(state, problem, inner_selector=cyclic_inner):
    """Second half of an iteration, at the cached ``state.z``."""
    z, N = state.z, problem.N
    if state.full_pending:
        state.s_tilde = problem.derived_grads(z).sum(axis=0)
        if state.conj_sum is not None:
            state.conj_sum = float(np.sum(_conj_terms(problem, z)))
        state.selectable[:] = True
        state.last_index_set = np.arange(N)
        state.grad_evals += N
        state.sampled += N
    else:
        K = np.flatnonzero(state.selectable)
        idx = np.asarray(inner_selector(K, state.k), dtype=int).reshape(-1)
        if idx.size == 0:
            raise ScheduleError("inner selector returned an empty set")
        if np.unique(idx).size != idx.size or not np.all(np.isin(idx, K)):
            raise ScheduleError(f"inner selector returned {idx.tolist()} outside the selectable set")
        zt = state.z_tilde
        state.s_tilde = state.s_tilde + (problem.derived_grads(z, idx)
                                         - problem.derived_grads(zt, idx)).sum(axis=0)
        if state.conj_sum is not None:
            state.conj_sum += float(np.sum(_conj_terms(problem, z, idx) - _conj_terms(problem, zt, idx)))
        state.selectable[idx] = False
        state.last_index_set = idx
        state.grad_evals += 2 * idx.size
        state.sampled += idx.size
    state.k += 1
    return state


def lowmem_step(state, problem, inner_selector=cyclic_inner):
    """One iteration (full or incremental); the state is updated in place and returned."""
    compute_z(state, problem)
    return apply_update(state, problem, inner_selector)


def state_lyapunov(state, problem):
    if state.conj_sum is None or state.z is None:
        return None
    z = state.z
    return (cost(problem, z) + float(np.sum(problem.derived_values(z)))
            - float(state.s_tilde @ z) + state.conj_sum)


class _LowMemLoop:
    def __init__(self, problem, selector, state, lyapunov):
        self.problem, self.selector, self.state = problem, selector, state
        self._lyap = lyapunov

    @property
    def k(self):
        return self.state.k

    @property
    def epochs(self):
        return self.state.epochs

    def prepare(self):
        compute_z(self.state, self.problem)
        return self.state.z_tilde

    def lyapunov(self):
        return state_lyapunov(self.state, self.problem) if self._lyap else None

    def advance(self):
        apply_update(self.state, self.problem, self.selector)


def lowmem_run(problem, x_init, inner_selector=cyclic_inner, max_epochs=100.0, tol=0.0,
               max_iter=None, cadence=None, lyapunov=False, residual=True, sink=None):
    """Run the low-memory method; the returned point is ``z_tilde``, the last full-update point.

    Cost and residual records refer to ``z_tilde``; the optional Lyapunov
    value refers to ``z``.
    """
    state = lowmem_init(problem, x_init, lyapunov=lyapunov)
    loop = _LowMemLoop(problem, inner_selector, state, lyapunov)
    result = drive(problem, loop, x_init, max_epochs=max_epochs, tol=tol, max_iter=max_iter,
                   cadence=cadence, residual=residual, sink=sink)
    result.state = state
    return result
