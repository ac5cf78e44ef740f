"""Run loop shared by all solvers: stopping rules and trace emission."""
import math
import time
from dataclasses import dataclass, field
from typing import Any, List

import numpy as np

from .diagnostics import TraceRecord, cost, op_residual


@dataclass
class RunResult:
    x: np.ndarray
    trace: List[TraceRecord] = field(default_factory=list)
    state: Any = None
    iterations: int = 0
    epochs: float = 0.0
    converged: bool = False


def drive(problem, algo, x_init, *, max_epochs=100.0, tol=0.0, max_iter=None,
          cadence=None, residual=True, sink=None):
    """Iterate ``algo`` until the epoch/iteration budget is spent or ``Op(x) <= tol``.

    ``algo`` exposes ``prepare() -> point``, ``lyapunov() -> float | None``,
    ``advance()``, ``k`` and ``epochs``.  A record is emitted at ``k = 0``, at
    every epoch boundary (or every ``cadence`` iterations when given) and at
    the last iteration.  The residual, which costs an extra subproblem solve,
    is evaluated at epoch boundaries only.
    """
    trace = []
    x_init = np.asarray(x_init, dtype=float)
    if max_epochs <= 0 or max_iter == 0:
        return RunResult(x_init.copy(), trace, algo, 0, 0.0, False)

    t0 = time.perf_counter()
    last_epoch = -1
    converged = False

    def emit(k, epochs, point, res):
        rec = TraceRecord(k, epochs, cost(problem, point), algo.lyapunov(), res,
                          time.perf_counter() - t0)
        trace.append(rec)
        if sink is not None:
            sink(rec)

    while True:
        point = algo.prepare()
        k, epochs = algo.k, algo.epochs
        mark = math.floor(epochs + 1e-9)
        boundary = mark > last_epoch
        if boundary:
            last_epoch = mark
        done = epochs >= max_epochs - 1e-12 or (max_iter is not None and k >= max_iter)
        res = None
        if (boundary or done) and (residual or tol > 0):
            res = op_residual(problem, point)
            converged = tol > 0 and res <= tol
        due = boundary if cadence is None else k % cadence == 0
        if due or done or converged:
            emit(k, epochs, point, res)
        if done or converged:
            break
        algo.advance()

    return RunResult(np.array(point), trace, algo, algo.k, algo.epochs, converged)
