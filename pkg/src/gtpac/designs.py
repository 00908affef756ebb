"""Random pooling designs and reproducible random streams.

Both samplers are prefix-stable: the first ``m`` rows of a matrix drawn
with ``M > m`` tests equal the matrix drawn with ``m`` tests from the same
stream. The Monte Carlo engine relies on this to share one draw across a
grid of test counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Bernoulli,
    DesignSpec,
    InvalidParameter,
    PoolingMatrix,
    RowWeight,
    _check_int,
    _check_probability,
)

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A counter-based random stream keyed by ``(master_seed, stream_id)``.

    The key feeds numpy's Philox generator directly, so a stream's bits do
    not depend on which thread draws them or in what order streams are used.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _U64:
                raise InvalidParameter(name, f"must be a 64-bit unsigned integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def generator(self, substream: int = 0) -> np.random.Generator:
        """A fresh generator; distinct ``substream`` values give disjoint sequences."""
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        counter = np.array([0, 0, substream, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidParameter("rng", f"expected RngStream or Generator, got {type(rng).__name__}")


def sample_bernoulli(n: int, m: int, p: float, rng) -> PoolingMatrix:
    """Draw an m-by-n matrix with i.i.d. Bernoulli(p) entries.

    Ones are placed by accumulating geometric gaps along the row-major
    order, which costs O(p m n) rather than O(m n).
    """
    _check_int("n", n, 1)
    _check_int("m", m, 0)
    _check_probability("p", p)
    gen = _as_generator(rng)
    total = m * n
    if total == 0:
        return PoolingMatrix(m, n, np.empty(0, dtype=np.int64))
    chunks = []
    position = -1
    chunk = max(1024, int(total * p * 1.05) + 64)
    while True:
        gaps = gen.geometric(p, size=chunk)
        positions = position + np.cumsum(gaps)
        inside = positions[positions < total]
        chunks.append(inside)
        if inside.size < positions.size:
            break
        position = int(positions[-1])
        chunk = max(1024, int((total - position) * p * 1.05) + 64)
    return PoolingMatrix(m, n, np.concatenate(chunks))


def sample_row_weight(n: int, m: int, s: int, rng) -> PoolingMatrix:
    """Each test draws ``s`` items uniformly with replacement; repeats collapse to a single one."""
    _check_int("n", n, 1)
    _check_int("m", m, 0)
    _check_int("s", s, 1)
    gen = _as_generator(rng)
    if m == 0:
        return PoolingMatrix(0, n, np.empty(0, dtype=np.int64))
    draws = gen.integers(0, n, size=(m, s), dtype=np.int64)
    flat = np.unique(draws + np.arange(m, dtype=np.int64)[:, None] * n)
    return PoolingMatrix(m, n, flat)


def sampling_row_weight(s: float) -> int:
    """Integral row weight used when sampling from a real-valued ``s``."""
    return max(1, int(round(s)))


def sample_design(design: DesignSpec, n: int, m: int, rng) -> PoolingMatrix:
    if isinstance(design, Bernoulli):
        return sample_bernoulli(n, m, design.p, rng)
    if isinstance(design, RowWeight):
        return sample_row_weight(n, m, design.s, rng)
    raise InvalidParameter("design", f"unknown design {design!r}")


def optimal_row_weight(n: int, k: int) -> float:
    """Row weight maximising the chance a test is positive through one fixed defective.

    Returns ``1 / log(n / (n - k))`` as a real number.
    """
    _check_int("n", n, 2)
    _check_int("k", k, 1)
    if not 0 < k < n:
        raise InvalidParameter("k", f"need 0 < k < n, got k={k}, n={n}")
    return -1.0 / math.log1p(-k / n)
