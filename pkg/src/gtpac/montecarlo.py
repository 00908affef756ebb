"""Seeded Monte Carlo checks of the decoders and of the probability formulas.

Every trial owns a random stream keyed by ``(master_seed, stream_id)``, so a
run gives the same numbers for any thread count and any scheduling order.
Within a trial the defective set (when random) is drawn first and the test
matrix second, both from the trial's generator.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    Bernoulli,
    DesignSpec,
    ErrorBudget,
    ErrorKind,
    GroundTruth,
    InvalidParameter,
    PoolingMatrix,
    RowWeight,
    _check_int,
    _check_probability,
)
from .decoders import cbp_mask, coma_mask, dd_mask, outcome_mask
from .designs import RngStream, sample_design

WILSON_Z = 1.959963984540054
CURVE_STRIDE = 1 << 32
DECODER_KIND = {"coma": ErrorKind.FALSE_POSITIVE, "cbp": ErrorKind.FALSE_POSITIVE, "dd": ErrorKind.FALSE_NEGATIVE}
CSV_COLUMNS = (
    "m",
    "trials",
    "failures",
    "p_hat",
    "ci_low",
    "ci_high",
    "budget_kind",
    "budget",
    "decoder",
    "design",
    "seed",
)


def default_threads() -> int:
    value = os.environ.get("GTPAC_THREADS")
    if value is None:
        return 1
    try:
        threads = int(value)
    except ValueError:
        raise InvalidParameter("GTPAC_THREADS", f"not an integer: {value!r}") from None
    if threads < 1:
        raise InvalidParameter("GTPAC_THREADS", f"must be >= 1, got {threads}")
    return threads


def wilson_interval(failures: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise InvalidParameter("trials", "must be positive")
    phat = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    # At phat = 0 or 1 the exact endpoint equals phat; rounding can miss it by an ulp.
    return max(0.0, min(phat, centre - half)), min(1.0, max(phat, centre + half))


def binomial_sigma(prob: float, trials: int) -> float:
    return math.sqrt(prob * (1.0 - prob) / trials)


@dataclass(frozen=True)
class TrialPlan:
    """One Monte Carlo cell.

    ``defectives=None`` draws a uniformly random k-set in every trial;
    otherwise the given set is used throughout.
    """

    n: int
    k: int
    design: DesignSpec
    decoder: str
    m: int
    budget: ErrorBudget
    trials: int = 1000
    master_seed: int = 0
    defectives: tuple[int, ...] | None = None

    def __post_init__(self):
        _check_int("trials", self.trials, 1)
        _check_int("m", self.m, 0)
        if self.decoder not in DECODER_KIND:
            raise InvalidParameter("decoder", f"expected coma, cbp or dd, got {self.decoder!r}")
        if self.budget.kind is not DECODER_KIND[self.decoder]:
            raise InvalidParameter(
                "budget_kind",
                f"{self.decoder} makes only {DECODER_KIND[self.decoder].value} errors",
            )
        if self.defectives is not None:
            gt = GroundTruth(self.n, self.defectives)
            if gt.k != self.k:
                raise InvalidParameter("k", f"fixed set has {gt.k} items, plan says {self.k}")
            object.__setattr__(self, "defectives", gt.defectives)
        else:
            GroundTruth(self.n, tuple(range(self.k)))
        self.budget.check_against(self.n, self.k)


@dataclass(frozen=True)
class SimulationSummary:
    failures: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    histogram: tuple[int, ...]
    plan: TrialPlan | None = field(default=None, compare=False)

    @classmethod
    def from_counts(cls, counts: np.ndarray, budget: int, plan: TrialPlan | None = None):
        counts = np.asarray(counts, dtype=np.int64)
        failures = int(np.count_nonzero(counts > budget))
        trials = int(counts.size)
        lo, hi = wilson_interval(failures, trials)
        hist = tuple(int(c) for c in np.bincount(counts))
        return cls(failures, trials, failures / trials, lo, hi, hist, plan)

    @property
    def sigma(self) -> float:
        return binomial_sigma(self.p_hat, self.trials)

    def csv_row(self) -> dict:
        plan = self.plan
        return {
            "m": plan.m,
            "trials": self.trials,
            "failures": self.failures,
            "p_hat": repr(float(self.p_hat)),
            "ci_low": repr(float(self.ci_low)),
            "ci_high": repr(float(self.ci_high)),
            "budget_kind": plan.budget.kind.value,
            "budget": plan.budget.count,
            "decoder": plan.decoder,
            "design": plan.design.label,
            "seed": plan.master_seed,
        }


def summaries_to_csv(summaries: Sequence[SimulationSummary]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for s in summaries:
        row = s.csv_row()
        buf.write(",".join(str(row[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def parse_curve_csv(text: str) -> list[dict]:
    """Parse a curve CSV back into typed rows."""
    import csv

    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        if tuple(r.keys()) != CSV_COLUMNS:
            raise InvalidParameter("header", "unexpected curve CSV columns")
        out.append(
            {
                "m": int(r["m"]),
                "trials": int(r["trials"]),
                "failures": int(r["failures"]),
                "p_hat": float(r["p_hat"]),
                "ci_low": float(r["ci_low"]),
                "ci_high": float(r["ci_high"]),
                "budget_kind": ErrorKind(r["budget_kind"]),
                "budget": int(r["budget"]),
                "decoder": r["decoder"],
                "design": r["design"],
                "seed": int(r["seed"]),
            }
        )
    return out


# Trial execution.


def _trial_setup(n, k, design, m, fixed, gen) -> tuple[np.ndarray, PoolingMatrix]:
    truth = np.zeros(n, dtype=bool)
    if fixed is None:
        truth[gen.choice(n, size=k, replace=False)] = True
    else:
        truth[list(fixed)] = True
    return truth, sample_design(design, n, m, gen)


def _error_count(decoder: str, A: PoolingMatrix, truth: np.ndarray) -> int:
    y = outcome_mask(A, truth)
    if decoder == "coma":
        est = coma_mask(A, y)
        return int(np.count_nonzero(est & ~truth))
    if decoder == "cbp":
        est = cbp_mask(A, y)
        return int(np.count_nonzero(est & ~truth))
    est = dd_mask(A, y)
    return int(np.count_nonzero(truth & ~est))


def _parallel_map(fn, n_items: int, threads: int) -> list:
    """Apply ``fn`` to contiguous index ranges; results come back in index order."""
    threads = max(1, min(threads, n_items))
    bounds = np.linspace(0, n_items, threads + 1).astype(int)
    ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if threads == 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def _trial_counts(plan: TrialPlan, stream_offset: int, threads: int) -> np.ndarray:
    def work(lo, hi):
        out = np.empty(hi - lo, dtype=np.int64)
        for t in range(lo, hi):
            gen = RngStream(plan.master_seed, stream_offset + t).generator()
            truth, A = _trial_setup(plan.n, plan.k, plan.design, plan.m, plan.defectives, gen)
            out[t - lo] = _error_count(plan.decoder, A, truth)
        return out

    return np.concatenate(_parallel_map(work, plan.trials, threads))


def run_trials(plan: TrialPlan, threads: int | None = None) -> SimulationSummary:
    """Run every trial of ``plan``; a trial fails when its error count exceeds the budget."""
    threads = default_threads() if threads is None else threads
    counts = _trial_counts(plan, 0, threads)
    return SimulationSummary.from_counts(counts, plan.budget.count, plan)


def _first_clearing_test(A: PoolingMatrix, y: np.ndarray) -> np.ndarray:
    """For each item, the index of the first negative test containing it (A.m if none)."""
    neg = ~y[A.row_index]
    first = np.full(A.n, A.m, dtype=np.int64)
    # Entries are sorted by row, so the first occurrence of a column is its earliest test.
    cols, where = np.unique(A.col_index[neg], return_index=True)
    first[cols] = A.row_index[neg][where]
    return first


def run_trials_grid(
    base: TrialPlan,
    m_values: Sequence[int],
    budgets: Sequence[int],
    threads: int | None = None,
) -> dict[tuple[int, int], SimulationSummary]:
    """Summaries for every (m, budget) pair, sharing one matrix per trial.

    Each trial draws a matrix with max(m_values) tests and reads every
    smaller m off its prefix, which the samplers make identical to a fresh
    draw. The result for each pair is therefore exactly what
    ``run_trials(replace(base, m=m, budget=...))`` returns. For CoMa and CBP
    the false-positive count at every prefix comes from the first negative
    test that clears each item, so one pass serves the whole grid.
    """
    threads = default_threads() if threads is None else threads
    m_values = sorted(set(int(m) for m in m_values))
    m_max = m_values[-1]
    kind = base.budget.kind

    def work(lo, hi):
        out = np.empty((hi - lo, len(m_values)), dtype=np.int64)
        for t in range(lo, hi):
            gen = RngStream(base.master_seed, t).generator()
            truth, A = _trial_setup(base.n, base.k, base.design, m_max, base.defectives, gen)
            if base.decoder in ("coma", "cbp"):
                first = _first_clearing_test(A, outcome_mask(A, truth))[~truth]
                ranked = np.sort(first)
                out[t - lo] = ranked.size - np.searchsorted(ranked, m_values, side="left")
            else:
                for i, m in enumerate(m_values):
                    out[t - lo, i] = _error_count("dd", A.head(m), truth)
        return out

    counts = np.concatenate(_parallel_map(work, base.trials, threads))
    result = {}
    for i, m in enumerate(m_values):
        for b in budgets:
            plan = replace(base, m=m, budget=ErrorBudget(kind, b))
            result[(m, b)] = SimulationSummary.from_counts(counts[:, i], b, plan)
    return result


def empirical_rate_curve(
    template: TrialPlan, m_grid: Sequence[int], threads: int | None = None
) -> list[SimulationSummary]:
    """One summary per m, using stream ids m * 2**32 + trial so grid points are independent."""
    m_grid = [int(m) for m in m_grid]
    if any(b < a for a, b in zip(m_grid, m_grid[1:])):
        raise InvalidParameter("m_grid", "must be sorted ascending")
    threads = default_threads() if threads is None else threads
    out = []
    for m in m_grid:
        plan = replace(template, m=m)
        counts = _trial_counts(plan, m * CURVE_STRIDE, threads)
        out.append(SimulationSummary.from_counts(counts, plan.budget.count, plan))
    return out


# Oracle estimators for the probability formulas. Each draws trials in fixed
# blocks, block b using substream b of RngStream(seed, stream), so results do
# not depend on threading.


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int

    def within(self, value: float, sigmas: float = 4.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= sigmas * max(self.stderr, floor)


def _blocks(trials: int, block: int):
    for b, start in enumerate(range(0, trials, block)):
        yield b, min(block, trials - start)


def _bernoulli_cols(gen, shape, p) -> np.ndarray:
    # Single-precision uniforms are multiples of 2**-24, a negligible bias here.
    return gen.random(shape, dtype=np.float32) < np.float32(p)


def _proportion(hits: int, trials: int) -> Estimate:
    phat = hits / trials
    return Estimate(phat, binomial_sigma(phat, trials), trials)


def _mean(values: np.ndarray) -> Estimate:
    values = np.asarray(values, dtype=float)
    return Estimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), values.size)


def _block_size(m: int, cols: int) -> int:
    return max(1, min(100_000, 4_000_000 // max(1, m * cols)))


def estimate_hidden_prob(g: int, k: int, p: float, m: int, trials: int, seed: int) -> Estimate:
    """Frequency with which a fixed set of g non-defectives avoids all negative tests.

    Samples the k defective and g designated columns of each matrix.
    """
    _check_int("g", g, 1)
    _check_int("trials", trials, 1)
    stream = RngStream(seed, 1)
    hits = 0
    for b, size in _blocks(trials, _block_size(m, k + g)):
        gen = stream.generator(b)
        cols = _bernoulli_cols(gen, (size, m, k + g), p)
        negative = ~cols[:, :, :k].any(axis=2)
        touched = cols[:, :, k:].any(axis=2)
        hits += int(np.count_nonzero(~(negative & touched).any(axis=1)))
    return _proportion(hits, trials)


def sample_hidden_counts(n: int, k: int, p: float, m: int, trials: int, seed: int) -> np.ndarray:
    """Number of hidden non-defectives in each of ``trials`` Bernoulli designs.

    Defective columns are sampled entry by entry to find the negative tests.
    Each non-defective column's entries in those tests are i.i.d. Bernoulli(p),
    so the number of non-defectives with no one there is drawn as one binomial.
    """
    _check_int("trials", trials, 1)
    stream = RngStream(seed, 2)
    out = np.empty(trials, dtype=np.int64)
    pos = 0
    for b, size in _blocks(trials, _block_size(m, k)):
        gen = stream.generator(b)
        cols = _bernoulli_cols(gen, (size, m, k), p)
        negatives = np.count_nonzero(~cols.any(axis=2), axis=1)
        out[pos : pos + size] = gen.binomial(n - k, (1.0 - p) ** negatives)
        pos += size
    return out


def estimate_expected_hidden(
    n: int, k: int, p: float, m: int, trials: int, seed: int, threads: int | None = None
) -> Estimate:
    """Mean number of hidden non-defectives, running the full sampler and CBP decoder.

    The defective set is fixed to the first k items; the design is exchangeable
    over items so this loses no generality.
    """
    _check_int("trials", trials, 1)
    plan = TrialPlan(
        n, k, Bernoulli(p), "cbp", m, ErrorBudget(ErrorKind.FALSE_POSITIVE, 0), trials, seed,
        tuple(range(k)),
    )
    counts = _trial_counts(plan, 0, default_threads() if threads is None else threads)
    return _mean(counts)


def estimate_miss_prob(d: int, g: int, k: int, p: float, m: int, trials: int, seed: int) -> Estimate:
    """Frequency with which none of d designated defectives is isolated.

    The probable defective set is taken to be the k defectives plus g fixed
    non-defectives; a defective is isolated by a test that contains it and
    no other member of that set.
    """
    _check_int("d", d, 0)
    _check_int("trials", trials, 1)
    if d > k:
        raise InvalidParameter("d", f"must be <= k = {k}")
    stream = RngStream(seed, 3)
    hits = 0
    width = k + g
    for b, size in _blocks(trials, _block_size(m, width)):
        gen = stream.generator(b)
        cols = _bernoulli_cols(gen, (size, m, width), p)
        sole = cols.sum(axis=2) == 1
        isolated = (cols[:, :, :d] & sole[:, :, None]).any(axis=1)
        hits += int(np.count_nonzero(~isolated.any(axis=1)))
    return _proportion(hits, trials)


def hidden_count_histogram(n: int, k: int, p: float, m: int, trials: int, seed: int) -> np.ndarray:
    """Empirical counts of G = 0..n-k from :func:`sample_hidden_counts`."""
    return np.bincount(sample_hidden_counts(n, k, p, m, trials, seed), minlength=n - k + 1)


def sample_hidden_counts_full(n: int, k: int, p: float, m: int, trials: int, seed: int) -> np.ndarray:
    """Hidden non-defective counts from whole sampled matrices (small n and m only)."""
    _check_int("trials", trials, 1)
    stream = RngStream(seed, 4)
    out = np.empty(trials, dtype=np.int64)
    pos = 0
    for b, size in _blocks(trials, _block_size(m, n)):
        gen = stream.generator(b)
        A = _bernoulli_cols(gen, (size, m, n), p)
        negative = ~A[:, :, :k].any(axis=2)
        hidden = ~(A[:, :, k:] & negative[:, :, None]).any(axis=1)
        out[pos : pos + size] = hidden.sum(axis=1)
        pos += size
    return out


def design_for(decoder: str, n: int, k: int, p: float | None = None, s: int | None = None) -> DesignSpec:
    """Default design per decoder: Bernoulli(1/k) for CoMa and DD, row weight round(s*) for CBP."""
    from .designs import optimal_row_weight, sampling_row_weight

    if decoder == "cbp":
        return RowWeight(s if s is not None else sampling_row_weight(optimal_row_weight(n, k)))
    _check_probability("p", p if p is not None else 1.0 / k)
    return Bernoulli(p if p is not None else 1.0 / k)


def empirical_rate_curves(
    template: TrialPlan,
    m_grid: Sequence[int],
    budgets: Sequence[int],
    threads: int | None = None,
) -> dict[int, list[SimulationSummary]]:
    """:func:`empirical_rate_curve` for several budgets from the same trials.

    The error count of a trial does not depend on the budget, so every budget
    reads the same counts; each returned curve equals the single-budget call.
    """
    m_grid = [int(m) for m in m_grid]
    if any(b < a for a, b in zip(m_grid, m_grid[1:])):
        raise InvalidParameter("m_grid", "must be sorted ascending")
    threads = default_threads() if threads is None else threads
    kind = template.budget.kind
    for b in budgets:
        ErrorBudget(kind, b).check_against(template.n, template.k)
    out = {b: [] for b in budgets}
    for m in m_grid:
        counts = _trial_counts(replace(template, m=m), m * CURVE_STRIDE, threads)
        for b in budgets:
            plan = replace(template, m=m, budget=ErrorBudget(kind, b))
            out[b].append(SimulationSummary.from_counts(counts, b, plan))
    return out
