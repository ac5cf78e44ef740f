"""Synthetic phase-retrieval instances and initialization."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidDataError, SizeError
from .kernel import EPS_DOM


@dataclass(eq=False)
class PhaseRetrievalInstance:
    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray
    corruption_mask: np.ndarray = None
    family: str = "squared"

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.x_true = np.asarray(self.x_true, dtype=float)
        if self.corruption_mask is None:
            self.corruption_mask = np.zeros(self.b.size, dtype=bool)
        if self.family not in ("squared", "poisson"):
            raise InvalidDataError(f"unknown family {self.family!r}")
        if self.A.shape != (self.b.size, self.x_true.size):
            raise InvalidDataError("A, b and x_true have inconsistent sizes")
        if np.any(self.b < 0):
            raise InvalidDataError("measurements must be nonnegative")

    @property
    def N(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def hadamard(n):
    """Orthonormal Sylvester-Hadamard matrix of order ``n`` (a power of two)."""
    if not _is_pow2(n):
        raise SizeError(f"Hadamard order must be a power of two, got {n}")
    return scipy.linalg.hadamard(n).astype(float) / np.sqrt(n)


def synthetic_signal(n, seed=0, density=0.3):
    """Sparse nonnegative test signal standing in for a small image."""
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    support = rng.random(n) < density
    if not support.any():
        support[rng.integers(n)] = True
    x[support] = rng.uniform(0.5, 1.5, support.sum())
    return x


def make_squared_instance(n, d, x_true=None, p_corrupt=1 / 50, seed=0):
    """``A = [M S_1; ...; M S_d]`` with ``M`` the orthonormal Hadamard matrix and
    ``S_j`` random diagonal sign matrices; ``b_i = <a_i, x>^2``, each zeroed
    independently with probability ``p_corrupt``.
    """
    M = hadamard(n)
    rng = np.random.default_rng(seed)
    if x_true is None:
        x_true = synthetic_signal(n, seed=rng.integers(2 ** 63))
    x_true = np.asarray(x_true, dtype=float)
    if x_true.shape != (n,):
        raise SizeError("x_true must have length n")
    signs = rng.choice([-1.0, 1.0], size=(d, n))
    A = np.vstack([M * s[None, :] for s in signs])
    b = (A @ x_true) ** 2
    mask = rng.random(A.shape[0]) < p_corrupt
    b[mask] = 0.0
    return PhaseRetrievalInstance(A, b, x_true, mask, "squared")


def make_poisson_instance(n, N, seed=0, p_corrupt=1 / 10):
    """Nonnegative Gaussian design with Poisson measurements ``b_i ~ Poisson(<a_i, x>^2)``.

    Corrupted entries are replaced by the nearest integer to ``|‖x‖^2 xi|``,
    ``xi ~ N(0, 1)``.
    """
    rng = np.random.default_rng(seed)
    A = np.abs(rng.standard_normal((N, n)))
    x_true = np.abs(rng.standard_normal(n))
    b = rng.poisson((A @ x_true) ** 2).astype(float)
    mask = rng.random(N) < p_corrupt
    b[mask] = np.rint(np.abs(np.dot(x_true, x_true) * rng.standard_normal(mask.sum())))
    return PhaseRetrievalInstance(A, b, x_true, mask, "poisson")


def spectral_init(instance, power_iterations=100, seed=0):
    """Leading eigenvector of ``W = 1/N sum_i b_i a_i a_i^T``, rescaled to match the data.

    The scale is fixed by ``mean_i <a_i, x0>^2 = mean_i b_i``.  For the Poisson
    family the result is mapped into the positive orthant.  With ``b = 0`` a
    random unit vector is returned.
    """
    rng = np.random.default_rng(seed)
    A, b = instance.A, instance.b
    x = rng.standard_normal(instance.n)
    x /= np.linalg.norm(x)
    if np.any(b > 0):
        for _ in range(power_iterations):
            y = A.T @ (b * (A @ x)) / instance.N
            ny = np.linalg.norm(y)
            if ny == 0:
                break
            x = y / ny
        scale = np.sqrt(np.mean(b) / np.mean((A @ x) ** 2))
        x = scale * x
    if instance.family == "poisson":
        x = np.maximum(np.abs(x), EPS_DOM * 10)
    return x


def random_init(instance, seed=0):
    """Random start with the same scale rule; positive for the Poisson family."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(instance.n)
    if instance.family == "poisson":
        x = np.abs(x) + 1e-3
    denom = np.mean((instance.A @ x) ** 2)
    if np.mean(instance.b) > 0 and denom > 0:
        x *= np.sqrt(np.mean(instance.b) / denom)
    return x


# ---------------------------------------------------------------------------
# text serialization: "n N family", A row by row, b, x_true


def _line(v):
    return " ".join(repr(float(t)) for t in v)


def save_instance(instance, path):
    with open(path, "w") as fh:
        fh.write(f"{instance.n} {instance.N} {instance.family}\n")
        for row in instance.A:
            fh.write(_line(row) + "\n")
        fh.write(_line(instance.b) + "\n")
        fh.write(_line(instance.x_true) + "\n")


def load_instance(path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    try:
        n_s, N_s, family = lines[0].split()
        n, N = int(n_s), int(N_s)
        A = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + N]])
        b = np.array([float(t) for t in lines[1 + N].split()])
        x_true = np.array([float(t) for t in lines[2 + N].split()])
    except (ValueError, IndexError) as exc:
        raise InvalidDataError(f"{path}: malformed instance file ({exc})") from None
    if A.shape != (N, n):
        raise InvalidDataError(f"{path}: expected {N} rows of length {n}")
    return PhaseRetrievalInstance(A, b, x_true, None, family)
