"""Test outcomes, the three decoders, and exact prediction-error probabilities.

Decoders work on the sparse entry list of a PoolingMatrix, so every call is
linear in the number of ones. CoMa additionally uses the packed column bits
for a word-parallel containment test; CBP reaches the same estimate by
scanning negative rows, and the test suite checks that the two agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

import numpy as np

from .core import (
    Bernoulli,
    DesignSpec,
    DimensionMismatch,
    GroundTruth,
    InvalidParameter,
    Outcomes,
    PoolingMatrix,
    RowWeight,
)


@dataclass(frozen=True)
class DecodeResult:
    estimate: tuple[int, ...]
    fp: int | None = None
    fn: int | None = None

    @classmethod
    def build(cls, mask: np.ndarray, gt: GroundTruth | None = None) -> "DecodeResult":
        estimate = tuple(int(j) for j in np.flatnonzero(mask))
        if gt is None:
            return cls(estimate)
        truth = gt.mask()
        fp = int(np.count_nonzero(mask & ~truth))
        fn = int(np.count_nonzero(truth & ~mask))
        return cls(estimate, fp, fn)

    def to_json(self) -> dict:
        return {"estimate": list(self.estimate), "fp": self.fp, "fn": self.fn}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "DecodeResult":
        return cls(tuple(int(j) for j in data["estimate"]), data.get("fp"), data.get("fn"))


def _outcome_bits(y) -> np.ndarray:
    return y.bits if isinstance(y, Outcomes) else np.asarray(y, dtype=bool)


def _check_dims(A: PoolingMatrix, y: np.ndarray):
    if y.size != A.m:
        raise DimensionMismatch(f"outcomes have length {y.size}, matrix has {A.m} tests")


# Mask-level kernels. These are what the Monte Carlo loop calls directly.


def outcome_mask(A: PoolingMatrix, defective_mask: np.ndarray) -> np.ndarray:
    y = np.zeros(A.m, dtype=bool)
    y[A.row_index[defective_mask[A.col_index]]] = True
    return y


def cbp_mask(A: PoolingMatrix, y: np.ndarray) -> np.ndarray:
    """Clear every item that sits in a negative test."""
    cleared = np.zeros(A.n, dtype=bool)
    cleared[A.col_index[~y[A.row_index]]] = True
    return ~cleared


def coma_mask(A: PoolingMatrix, y: np.ndarray) -> np.ndarray:
    """Declare item j defective iff its column's ones are a subset of the positive tests."""
    if A.m == 0:
        return np.ones(A.n, dtype=bool)
    negatives = np.packbits(~y)
    return ~np.any(A.column_bits & negatives, axis=1)


def coma_mask_counting(A: PoolingMatrix, y: np.ndarray) -> np.ndarray:
    """Column containment by counting: ones in positive tests equal all ones."""
    positive_hits = np.bincount(A.col_index, weights=y[A.row_index], minlength=A.n)
    return positive_hits == np.bincount(A.col_index, minlength=A.n)


def dd_mask(A: PoolingMatrix, y: np.ndarray, pds: np.ndarray | None = None) -> np.ndarray:
    if pds is None:
        pds = cbp_mask(A, y)
    keep = pds[A.col_index] & y[A.row_index]
    rows, cols = A.row_index[keep], A.col_index[keep]
    per_row = np.bincount(rows, minlength=A.m)
    found = np.zeros(A.n, dtype=bool)
    found[cols[per_row[rows] == 1]] = True
    return found


# Public API on domain types.


def generate_outcomes(A: PoolingMatrix, gt: GroundTruth) -> Outcomes:
    """Test i is positive iff it contains at least one defective."""
    if A.n != gt.n:
        raise DimensionMismatch(f"matrix has {A.n} items, ground truth has {gt.n}")
    return Outcomes(outcome_mask(A, gt.mask()))


def decode_coma(A: PoolingMatrix, y, gt: GroundTruth | None = None) -> DecodeResult:
    bits = _outcome_bits(y)
    _check_dims(A, bits)
    return DecodeResult.build(coma_mask(A, bits), gt)


def decode_cbp(A: PoolingMatrix, y, gt: GroundTruth | None = None) -> DecodeResult:
    bits = _outcome_bits(y)
    _check_dims(A, bits)
    return DecodeResult.build(cbp_mask(A, bits), gt)


def decode_dd(A: PoolingMatrix, y, gt: GroundTruth | None = None) -> DecodeResult:
    """Two stages: the CBP estimate forms the probable set, then keep items
    that are the only probable member of some positive test."""
    bits = _outcome_bits(y)
    _check_dims(A, bits)
    return DecodeResult.build(dd_mask(A, bits), gt)


DECODERS = {"coma": decode_coma, "cbp": decode_cbp, "dd": decode_dd}


def _index_set(items: Iterable[int], n: int, name: str) -> frozenset:
    out = frozenset(int(j) for j in items)
    if any(j < 0 or j >= n for j in out):
        raise InvalidParameter(name, f"indices must lie in [0, {n})")
    return out


def exact_disagreement_prob(K: Iterable[int], K_hat: Iterable[int], design: DesignSpec, n: int) -> float:
    """Probability that a fresh test from ``design`` has different outcomes under K and K_hat.

    With A = K minus K_hat, B = K_hat minus K and C their intersection, the
    two outcomes differ exactly when the test misses C and hits one of A, B
    but not the other.
    """
    K = _index_set(K, n, "K")
    K_hat = _index_set(K_hat, n, "K_hat")
    a = len(K - K_hat)
    b = len(K_hat - K)
    c = len(K & K_hat)
    if isinstance(design, Bernoulli):
        q = 1.0 - design.p
        return q**c * ((1 - q**a) * q**b + (1 - q**b) * q**a)
    if isinstance(design, RowWeight):
        s = design.s

        def miss(size):
            return ((n - size) / n) ** s

        both_missed = miss(a + b + c)
        return (miss(c + b) - both_missed) + (miss(c + a) - both_missed)
    raise InvalidParameter("design", f"unknown design {design!r}")
