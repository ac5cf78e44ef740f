"""Cost, Lyapunov function, stationarity residual and convergence checks.

The Lyapunov function of the incremental method is the Bregman-Moreau
envelope of the lifted problem.  With anchor points ``x_i`` (the iterate at
which table row ``s_i`` was last refreshed, so that ``s_i = grad h_hat_i(x_i)``)
it reads

    L(z, s) = phi(z) + sum_i D_{h_hat_i}(z, x_i),     z = T(sum_i s_i),

which needs no conjugate kernels.
"""
import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ParameterError

CSV_HEADER = ("iter", "epochs", "cost", "lyapunov", "residual", "time_s")


@dataclass
class TraceRecord:
    k: int
    epochs: float
    cost: float
    lyapunov: Optional[float] = None
    residual: Optional[float] = None
    wall_seconds: float = 0.0


def cost(problem, z):
    """``phi(z) = 1/N sum_i f_i(z) + g(z)``; ``inf`` outside the domain."""
    z = np.asarray(z, dtype=float)
    if not problem.family.in_interior(z):
        return np.inf
    gz = problem.regularizer.value(z)
    if not np.isfinite(gz):
        return np.inf
    with np.errstate(invalid="ignore", divide="ignore"):
        fz = float(np.mean(problem.family.f_values(z)))
    return fz + gz if np.isfinite(fz) else np.inf


def bregman_terms(problem, z, anchors, anchor_values=None):
    """``D_{h_hat_i}(z, x_i)`` for every component, shape ``(N,)``.

    ``anchor_values`` may carry precomputed ``h_hat_i(x_i)``.
    """
    N = problem.N
    anchors = np.asarray(anchors, dtype=float)
    hz = problem.derived_values(z)
    if anchor_values is None:
        anchor_values = np.array([problem.derived_values(anchors[i], [i])[0] for i in range(N)])
    grads = np.array([problem.derived_grads(anchors[i], [i])[0] for i in range(N)])
    return hz - anchor_values - np.einsum("ij,ij->i", grads, z[None, :] - anchors)


def lyapunov(problem, z, anchors):
    """``phi(z) + sum_i D_{h_hat_i}(z, x_i)`` for anchor points ``x_i`` (rows of ``anchors``)."""
    z = np.asarray(z, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape != (problem.N, problem.n):
        raise ParameterError("anchors must have shape (N, n)")
    for i in range(problem.N):
        if not problem.family.in_interior(anchors[i]):
            raise DomainError(f"anchor {i} is not interior")
    if not problem.family.in_interior(z):
        return np.inf
    return cost(problem, z) + float(np.sum(bregman_terms(problem, z, anchors)))


def op_residual(problem, z):
    """``||z - T(sum_i grad h_hat_i(z))||``, an algorithm-independent stationarity measure."""
    z = np.asarray(z, dtype=float)
    if not problem.in_C(z):
        raise DomainError("op_residual needs an interior point")
    s = problem.derived_grads(z).sum(axis=0)
    return float(np.linalg.norm(z - problem.T(s)))


def strconvex_rate_bound(mu_phi, gammas, kernel_lipschitz, weak_convexity, probabilities,
                         smoothness=None):
    """Linear-rate constant ``c`` for randomized sampling on strongly convex problems.

    ``c = min_i p_i / (1 + (1/mu) sum_i (l_i / gamma_i - sigma_i / N))``; the
    expected optimality gap contracts by ``1 - c`` per iteration.  When
    ``smoothness`` is given, ``sigma_i >= -L_i l_i`` is enforced.
    """
    gammas = np.asarray(gammas, dtype=float)
    ell = np.asarray(kernel_lipschitz, dtype=float)
    sigma = np.asarray(weak_convexity, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    N = gammas.size
    if not mu_phi > 0:
        raise ParameterError("mu_phi must be positive")
    if np.any(gammas <= 0) or np.any(ell <= 0) or np.any(p < 0):
        raise ParameterError("stepsizes and kernel moduli must be positive, probabilities nonnegative")
    if not (ell.size == sigma.size == p.size == N):
        raise ParameterError("all per-component arrays need length N")
    if smoothness is not None and np.any(sigma < -np.asarray(smoothness) * ell):
        raise ParameterError("weak convexity modulus below -L * l")
    denom = 1.0 + float(np.sum(ell / gammas - sigma / N)) / mu_phi
    if denom <= 0:
        raise ParameterError("nonpositive denominator")
    return float(p.min()) / denom


def descent_check(trace, slack=1e-9):
    """True iff ``L_{k+1} <= L_k + slack * max(1, |L_k|)`` along the trace.

    ``trace`` is a sequence of :class:`TraceRecord` or of plain numbers.
    """
    vals = [r.lyapunov if isinstance(r, TraceRecord) else r for r in trace]
    vals = [v for v in vals if v is not None]
    return all(b <= a + slack * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def record_row(rec, clock=True):
    return [str(rec.k), _fmt(rec.epochs), _fmt(rec.cost), _fmt(rec.lyapunov),
            _fmt(rec.residual), _fmt(rec.wall_seconds if clock else 0.0)]


class CsvTraceSink:
    """Streams trace records to a CSV file object using the fixed header."""

    def __init__(self, fh, clock=True):
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(CSV_HEADER)
        self.clock = clock

    def __call__(self, rec):
        self.writer.writerow(record_row(rec, self.clock))


def read_trace_csv(fh):
    rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ParameterError("not a trace file")

    def num(s):
        return None if s == "" else float(s)

    return [TraceRecord(int(r[0]), float(r[1]), float(r[2]), num(r[3]), num(r[4]), float(r[5]))
            for r in rows[1:]]
