"""Subset coupon collection: draw uniformly from ``w`` coupons until all but
``g`` of them have been seen.

Provides the expected stopping time in exact and approximate form, a tail
bound on the stopping time, and a simulator used as an oracle for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import InvalidParameter, _check_int

EULER_GAMMA = 0.57721566490153286061

_EXACT_HARMONIC_LIMIT = 10**6


@dataclass(frozen=True)
class SccpInstance:
    w: int
    g: int = 0

    def __post_init__(self):
        _check_int("w", self.w, 1)
        _check_int("g", self.g, 0)
        if self.g >= self.w:
            raise InvalidParameter("g", f"need g < w, got g={self.g}, w={self.w}")


@lru_cache(maxsize=None)
def _harmonic_table() -> np.ndarray:
    # Cumulative sums in float64 accumulate at most ~1e-13 relative error up to 1e6.
    terms = 1.0 / np.arange(1, _EXACT_HARMONIC_LIMIT + 1, dtype=np.float64)
    return np.concatenate(([0.0], np.cumsum(terms)))


def harmonic(x: int) -> float:
    """H_x = 1 + 1/2 + ... + 1/x, with H_0 = 0.

    Exact summation up to 10**6, asymptotic expansion beyond.
    """
    x = int(x)
    if x < 0:
        raise InvalidParameter("x", f"must be nonnegative, got {x}")
    if x <= 64:
        return math.fsum(1.0 / i for i in range(1, x + 1))
    if x <= _EXACT_HARMONIC_LIMIT:
        return float(_harmonic_table()[x])
    return math.log(x) + EULER_GAMMA + 1.0 / (2 * x)


def sccp_expected_time(inst: SccpInstance, form: str = "exact") -> float:
    """Expected number of draws to collect ``w - g`` distinct coupons.

    ``form="exact"`` gives w (H_w - H_g); ``form="approx"`` replaces H_w with
    log w + gamma, which is the form the CBP bound is built on.
    """
    w, g = inst.w, inst.g
    if form == "exact":
        return w * (harmonic(w) - harmonic(g))
    if form == "approx":
        return w * (math.log(w) + EULER_GAMMA - harmonic(g))
    raise InvalidParameter("form", f"expected 'exact' or 'approx', got {form!r}")


def sccp_tail_log_bound(inst: SccpInstance, chi: float) -> float:
    """Natural log of the (unclipped) tail bound; see :func:`sccp_tail_bound`."""
    if not chi > 1:
        raise InvalidParameter("chi", f"must exceed 1, got {chi}")
    w, g = inst.w, inst.g
    return (
        (g + 1) * (1 - chi) * math.log(w)
        + (g + 1) * chi * (harmonic(g) - EULER_GAMMA)
        + g
        - (g + 1) * math.log(g + 1)
    )


def sccp_tail_bound(inst: SccpInstance, chi: float) -> float:
    """Upper bound on P(T > chi * w [log w + gamma - H_g]).

    The threshold uses the approximate expected time, matching how the
    bound is consumed by the CBP analysis.
    """
    return min(1.0, math.exp(min(0.0, sccp_tail_log_bound(inst, chi))))


def sccp_simulate(inst: SccpInstance, runs: int, rng, block: int = 4096) -> np.ndarray:
    """Simulated stopping times for ``runs`` independent collections.

    Runs are processed in blocks; block ``b`` draws from substream ``b`` of
    the given stream, so results do not depend on how blocks are scheduled.
    """
    from .designs import RngStream

    _check_int("runs", runs, 1)
    if not isinstance(rng, RngStream):
        raise InvalidParameter("rng", "expected an RngStream")
    w, target = inst.w, inst.w - inst.g
    out = np.empty(runs, dtype=np.int64)
    for b, start in enumerate(range(0, runs, block)):
        size = min(block, runs - start)
        gen = rng.generator(substream=b)
        seen = np.zeros((size, w), dtype=bool)
        distinct = np.zeros(size, dtype=np.int64)
        times = np.zeros(size, dtype=np.int64)
        active = np.arange(size)
        t = 0
        while active.size:
            t += 1
            draws = gen.integers(0, w, size=active.size)
            new = ~seen[active, draws]
            seen[active, draws] = True
            distinct[active] += new
            done = distinct[active] >= target
            times[active[done]] = t
            active = active[~done]
        out[start : start + size] = times
    return out


def histogram_csv(times: np.ndarray) -> str:
    values, counts = np.unique(np.asarray(times), return_counts=True)
    lines = ["t,count"] + [f"{int(t)},{int(c)}" for t, c in zip(values, counts)]
    return "\n".join(lines) + "\n"
