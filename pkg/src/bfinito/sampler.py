"""Index-set selection rules for the incremental solvers.

Indices are 0-based throughout.  Randomness comes from numpy's PCG64 bit
generator seeded through :class:`numpy.random.SeedSequence`, so independent
runs can be given statistically independent streams with :func:`spawn_seeds`.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, ScheduleError

TAGS = ("uniform_single", "weighted_single", "minibatch", "cyclic",
        "shuffled_cyclic", "custom_schedule")


@dataclass(frozen=True)
class SamplerSpec:
    tag: str
    N: int
    seed: int = 0
    probabilities: Optional[tuple] = None
    batch_size: Optional[int] = None
    schedule: Optional[tuple] = None
    window: Optional[int] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ParameterError(f"unknown sampler {self.tag!r}")
        if self.N < 1:
            raise ParameterError("N must be positive")
        if self.tag == "weighted_single":
            p = np.asarray(self.probabilities, dtype=float)
            if p.shape != (self.N,) or np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
                raise ParameterError("weights must be N positive numbers summing to 1")
        if self.tag == "minibatch" and not (self.batch_size and 1 <= self.batch_size <= self.N):
            raise ParameterError(f"batch size must lie in [1, {self.N}]")
        if self.tag == "custom_schedule":
            if not self.schedule:
                raise ScheduleError("custom schedule is empty")
            if any(len(s) == 0 for s in self.schedule):
                raise ScheduleError("custom schedule contains an empty index set")
            window = self.window or len(self.schedule)
            if not validate_essentially_cyclic(self.schedule, self.N, window):
                raise ScheduleError(f"schedule does not cover all indices within {window} steps")

    def inclusion_probabilities(self):
        """Marginal ``P[i in I]`` for the randomized rules."""
        if self.tag == "uniform_single":
            return np.full(self.N, 1.0 / self.N)
        if self.tag == "weighted_single":
            return np.asarray(self.probabilities, dtype=float)
        if self.tag == "minibatch":
            return np.full(self.N, self.batch_size / self.N)
        raise ParameterError(f"{self.tag} is not a randomized rule")


class Sampler:
    """Stateful iterator over index sets for a given :class:`SamplerSpec`."""

    def __init__(self, spec):
        self.spec = spec
        self.k = 0
        self.rng = np.random.default_rng(spec.seed)
        self._perm = None
        self._all = np.arange(spec.N)

    def next_index_set(self, N=None):
        spec = self.spec
        if N is not None and N != spec.N:
            raise ParameterError(f"sampler built for N={spec.N}, asked for N={N}")
        k, N = self.k, spec.N
        tag = spec.tag
        if tag == "cyclic":
            out = np.array([k % N])
        elif tag == "shuffled_cyclic":
            if k % N == 0:
                self._perm = self.rng.permutation(N)
            out = self._perm[k % N: k % N + 1]
        elif tag == "uniform_single":
            out = np.array([self.rng.integers(N)])
        elif tag == "weighted_single":
            out = np.array([self.rng.choice(N, p=spec.probabilities)])
        elif tag == "minibatch":
            if spec.batch_size == N:
                out = self._all
            else:
                out = np.sort(self.rng.choice(N, spec.batch_size, replace=False))
        else:
            out = np.asarray(sorted(spec.schedule[k % len(spec.schedule)]))
            if out.size == 0:
                raise ScheduleError("empty index set in schedule")
        self.k += 1
        return out

    def __iter__(self):
        while True:
            yield self.next_index_set()


def validate_essentially_cyclic(schedule, N, T):
    """True iff every ``T`` consecutive sets of the (periodically repeated) schedule cover ``range(N)``.

    The schedule is treated as repeating forever, which is how
    :class:`Sampler` replays a custom schedule.
    """
    schedule = [set(int(i) for i in s) for s in schedule]
    if not schedule:
        raise ScheduleError("schedule is empty")
    if T < 1:
        return False
    full = set(range(N))
    L = len(schedule)
    for start in range(L):
        seen = set()
        for t in range(T):
            seen |= schedule[(start + t) % L]
        if not full <= seen:
            return False
    return True


def lowmem_schedule(N):
    """Index sets of the low-memory method with a cyclic inner loop: ``[N], {0}, ..., {N-1}``."""
    return [tuple(range(N))] + [(i,) for i in range(N)]


def spawn_seeds(seed, count):
    """Independent 64-bit seeds for ``count`` parallel runs."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def parse_sampler(text, N, seed=0):
    """Parse ``uniform``, ``cyclic``, ``shuffled``, ``minibatch:b`` or ``weighted:p1,...,pN``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "uniform":
        return SamplerSpec("uniform_single", N, seed)
    if name == "cyclic":
        return SamplerSpec("cyclic", N, seed)
    if name in ("shuffled", "shuffled_cyclic"):
        return SamplerSpec("shuffled_cyclic", N, seed)
    if name == "minibatch":
        try:
            b = int(arg)
        except ValueError:
            raise ParameterError(f"bad minibatch size in {text!r}") from None
        return SamplerSpec("minibatch", N, seed, batch_size=b)
    if name == "weighted":
        try:
            p = tuple(float(v) for v in arg.split(","))
        except ValueError:
            raise ParameterError(f"bad weights in {text!r}") from None
        return SamplerSpec("weighted_single", N, seed, probabilities=p)
    raise ParameterError(f"unknown sampler {text!r}")


def make_sampler(spec_or_text, N=None, seed=0):
    if isinstance(spec_or_text, str):
        spec_or_text = parse_sampler(spec_or_text, N, seed)
    return Sampler(spec_or_text)
