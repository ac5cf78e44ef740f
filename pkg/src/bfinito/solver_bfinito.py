"""Bregman Finito/MISO: the table-based incremental method.

Each iteration solves the shared subproblem ``z = T(s_tilde)`` and refreshes
the rows ``s_i = grad h_i(z)/gamma_i - grad f_i(z)/N`` of a sampled index set,
keeping ``s_tilde = sum_i s_i`` up to date incrementally.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import cost
from .errors import DomainError, ScheduleError
from .runner import drive


@dataclass(eq=False)
class BFinitoState:
    table: np.ndarray                    # (N, n) rows s_i
    s_tilde: np.ndarray
    z: Optional[np.ndarray] = None
    anchors: Optional[np.ndarray] = None  # (N, n) point where s_i was last computed
    anchor_values: Optional[np.ndarray] = None  # h_hat_i(x_i)
    k: int = 0
    sampled: int = 0
    debug: bool = False

    @property
    def N(self):
        return self.table.shape[0]

    @property
    def epochs(self):
        return self.sampled / self.N


def bfinito_init(problem, x_init, anchors=True, debug=False):
    """Fill the table at ``x_init``.

    With ``anchors=False`` the O(nN) anchor table used by the Lyapunov
    diagnostics is not kept; the solver itself does not need it.
    """
    x_init = np.asarray(x_init, dtype=float)
    if not problem.in_C(x_init):
        raise DomainError("x_init is not in the interior of every kernel domain")
    table = np.array(problem.derived_grads(x_init), dtype=float)
    state = BFinitoState(table, table.sum(axis=0), debug=debug)
    if anchors:
        state.anchors = np.tile(x_init, (problem.N, 1))
        state.anchor_values = np.array(problem.derived_values(x_init), dtype=float)
    return state


def compute_z(state, problem):
    z = problem.T(state.s_tilde)
    if not problem.in_C(z):
        raise DomainError("subproblem solution left the interior of the kernel domains")
    state.z = z
    return z


def _check_index_set(index_set, N):
    idx = np.asarray(index_set, dtype=int).reshape(-1)
    if idx.size == 0:
        raise ScheduleError("index set is empty")
    if idx.min() < 0 or idx.max() >= N:
        raise ScheduleError(f"index set {idx.tolist()} outside range({N})")
    if np.unique(idx).size != idx.size:
        raise ScheduleError("index set has repeated entries")
    return idx


def update_table(state, problem, index_set):
    """Refresh rows ``index_set`` at the cached ``state.z``."""
    idx = _check_index_set(index_set, problem.N)
    z = state.z
    new = problem.derived_grads(z, idx)
    state.s_tilde = state.s_tilde + (new - state.table[idx]).sum(axis=0)
    state.table[idx] = new
    if state.anchors is not None:
        state.anchors[idx] = z
        state.anchor_values[idx] = problem.derived_values(z, idx)
    state.k += 1
    state.sampled += idx.size
    if state.debug:
        drift = np.linalg.norm(state.s_tilde - state.table.sum(axis=0))
        assert drift <= 1e-12 * (1 + np.linalg.norm(state.s_tilde)), f"aggregate drift {drift}"
    return state


def bfinito_step(state, problem, index_set):
    """One iteration: ``z^k = T(s_tilde^k)``, then refresh the rows in ``index_set``.

    The state is updated in place and returned.
    """
    compute_z(state, problem)
    return update_table(state, problem, index_set)


def state_lyapunov(state, problem):
    """Lyapunov value at the cached ``z`` using the stored anchors."""
    if state.anchors is None or state.z is None:
        return None
    z = state.z
    phi = cost(problem, z)
    d = (problem.derived_values(z) - state.anchor_values
         - np.einsum("ij,ij->i", state.table, z[None, :] - state.anchors))
    return phi + float(d.sum())


class _BFinitoLoop:
    def __init__(self, problem, sampler, state, lyapunov):
        self.problem, self.sampler, self.state = problem, sampler, state
        self._lyap = lyapunov

    @property
    def k(self):
        return self.state.k

    @property
    def epochs(self):
        return self.state.epochs

    def prepare(self):
        return compute_z(self.state, self.problem)

    def lyapunov(self):
        return state_lyapunov(self.state, self.problem) if self._lyap else None

    def advance(self):
        update_table(self.state, self.problem, self.sampler.next_index_set())


def bfinito_run(problem, sampler, x_init, max_epochs=100.0, tol=0.0, max_iter=None,
                cadence=None, lyapunov=True, residual=True, sink=None, debug=False):
    """Run the table method with index sets drawn from ``sampler``.

    Stops once ``max_epochs`` passes over the data (counted as sampled
    indices / N) are spent, after ``max_iter`` iterations, or when the
    residual ``Op(z)`` checked at epoch boundaries drops to ``tol``.
    Returns a :class:`~bfinito.runner.RunResult` whose ``x`` is the last ``z``.
    """
    state = bfinito_init(problem, x_init, anchors=lyapunov, debug=debug)
    loop = _BFinitoLoop(problem, sampler, state, lyapunov)
    result = drive(problem, loop, x_init, max_epochs=max_epochs, tol=tol, max_iter=max_iter,
                   cadence=cadence, residual=residual, sink=sink)
    result.state = state
    return result
