"""Two-phase SRSWOR design: variance factors and seeded sample draws.

Random numbers come from a counter-based scheme. Replication ``r`` under
seed ``s`` owns a SplitMix64 stream whose state starts at
``mix(mix(s) + r)``; its ``j``-th output is ``mix(state + (j + 1) * GAMMA)``.
A draw consumes the stream in a fixed order: ``n'`` uniforms for the
first-phase partial Fisher-Yates shuffle of ``0..N-1``, then ``n`` uniforms
for the second-phase shuffle of the first-phase units. Replication ``r``
therefore yields the same sample whether it is drawn alone, in a batch, or
on another thread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .population import FinitePopulation

UINT64_MAX = 2**64 - 1
GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class DesignSpec:
    n_population: int
    n_first: int
    n_second: int

    def __post_init__(self) -> None:
        for name in ("n_population", "n_first", "n_second"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val:
                raise ValidationError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if not 2 <= self.n_second <= self.n_first <= self.n_population:
            raise ValidationError(
                "design requires 2 <= n <= n' <= N, got "
                f"N={self.n_population}, n'={self.n_first}, n={self.n_second}"
            )

    @property
    def is_census(self) -> bool:
        return self.n_second == self.n_population


@dataclass(frozen=True)
class SampleFactors:
    f1: float
    f2: float
    f3: float


def factors(spec: DesignSpec) -> SampleFactors:
    """Finite-population factors 1/n - 1/N, 1/n' - 1/N and 1/n - 1/n'.

    ``f1`` is formed as ``f2 + f3`` so the identity f1 = f2 + f3 holds in
    floating point too.
    """
    inv_n = 1.0 / spec.n_second
    inv_n1 = 1.0 / spec.n_first
    inv_N = 1.0 / spec.n_population
    f2 = inv_n1 - inv_N
    f3 = inv_n - inv_n1
    return SampleFactors(f1=f2 + f3, f2=f2, f3=f3)


@dataclass(frozen=True)
class Substream:
    """Stream for replication ``replication`` under a 64-bit ``seed``."""

    seed: int
    replication: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= UINT64_MAX:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.replication < 0:
            raise ValidationError("replication index must be >= 0")


def _mix(x: np.ndarray) -> np.ndarray:
    z = x.copy()
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def stream_keys(seed: int, replications: np.ndarray) -> np.ndarray:
    """Initial SplitMix64 state of each replication's substream."""
    if not 0 <= seed <= UINT64_MAX:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    with np.errstate(over="ignore"):
        s = _mix(np.array([seed], dtype=np.uint64) + GAMMA)
        return _mix(np.asarray(replications, dtype=np.uint64) + s + GAMMA)


def uniforms(keys: np.ndarray, count: int, offset: int = 0) -> np.ndarray:
    """Uniforms on [0, 1) of shape (len(keys), count), outputs offset..offset+count-1."""
    steps = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = keys[:, None] + steps[None, :] * GAMMA
        bits = _mix(state)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _partial_shuffle(perm: np.ndarray, u: np.ndarray) -> None:
    """Fisher-Yates over the first u.shape[1] positions of each row, in place."""
    rows = np.arange(perm.shape[0])
    size = perm.shape[1]
    for j in range(u.shape[1]):
        pick = j + np.minimum((u[:, j] * (size - j)).astype(np.int64), size - 1 - j)
        held = perm[rows, j].copy()
        perm[rows, j] = perm[rows, pick]
        perm[rows, pick] = held


def draw_indices(spec: DesignSpec, seed: int, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Index sets for replications start..start+count-1.

    Returns sorted ``first`` (count, n') and ``second`` (count, n) arrays.
    """
    N, n1, n = spec.n_population, spec.n_first, spec.n_second
    keys = stream_keys(seed, np.arange(start, start + count, dtype=np.uint64))
    u = uniforms(keys, n1 + n)
    dtype = np.int32 if N < 2**31 else np.int64
    perm = np.broadcast_to(np.arange(N, dtype=dtype), (count, N)).copy()
    _partial_shuffle(perm, u[:, :n1])
    first = perm[:, :n1].copy()
    second = first.copy()
    _partial_shuffle(second, u[:, n1:])
    second = second[:, :n]
    first.sort(axis=1)
    second.sort(axis=1)
    return first, second


@dataclass(frozen=True)
class SampleMeans:
    """Sample means for one or many two-phase samples (scalars or arrays)."""

    mean_y_second: np.ndarray
    mean_x_second: np.ndarray
    mean_x_first: np.ndarray
    mean_z_first: np.ndarray


def sample_means(pop: FinitePopulation, first: np.ndarray, second: np.ndarray) -> SampleMeans:
    return SampleMeans(
        mean_y_second=pop.y[second].mean(axis=-1),
        mean_x_second=pop.x[second].mean(axis=-1),
        mean_x_first=pop.x[first].mean(axis=-1),
        mean_z_first=pop.z[first].mean(axis=-1),
    )


@dataclass(frozen=True)
class TwoPhaseSample:
    """One realized two-phase sample.

    z is read on the first phase only; second-phase z values are never used.
    """

    first_indices: tuple[int, ...]
    second_indices: tuple[int, ...]
    mean_y_second: float
    mean_x_second: float
    mean_x_first: float
    mean_z_first: float


def check_compatible(pop: FinitePopulation, spec: DesignSpec) -> None:
    if spec.n_population != pop.size:
        raise ValidationError(f"design has N = {spec.n_population} but population has {pop.size} units")


def draw_two_phase(pop: FinitePopulation, spec: DesignSpec, stream: Substream) -> TwoPhaseSample:
    """Draw an SRSWOR first phase of n' units, then an SRSWOR subsample of n."""
    check_compatible(pop, spec)
    first, second = draw_indices(spec, stream.seed, stream.replication, 1)
    m = sample_means(pop, first[0], second[0])
    return TwoPhaseSample(
        first_indices=tuple(int(i) for i in first[0]),
        second_indices=tuple(int(i) for i in second[0]),
        mean_y_second=float(m.mean_y_second),
        mean_x_second=float(m.mean_x_second),
        mean_x_first=float(m.mean_x_first),
        mean_z_first=float(m.mean_z_first),
    )
