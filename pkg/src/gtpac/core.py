"""Domain types shared by every gtpac module.

All types are immutable after construction. Item indices are 0-based
everywhere, including CSV and JSON output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Mapping, Union

import numpy as np


class InvalidParameter(ValueError):
    """A parameter violates a documented range or type invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class DimensionMismatch(ValueError):
    pass


class Unsatisfiable(RuntimeError):
    """No number of tests inside the search range meets the target."""


class NonConvergence(RuntimeError):
    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last


def _check_probability(name: str, value: float, *, open_low=True, open_high=True):
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise InvalidParameter(name, f"expected a real number, got {value!r}")
    low_bad = value <= 0 if open_low else value < 0
    high_bad = value >= 1 if open_high else value > 1
    if low_bad or high_bad:
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise InvalidParameter(name, f"{value} outside {lo}0, 1{hi}")


def _check_int(name: str, value, minimum: int):
    if isinstance(value, bool) or not isinstance(value, (int,)) and not (
        hasattr(value, "__index__")
    ):
        raise InvalidParameter(name, f"expected an integer, got {value!r}")
    if int(value) < minimum:
        raise InvalidParameter(name, f"{value} < {minimum}")


@dataclass(frozen=True)
class GroundTruth:
    n: int
    defectives: tuple[int, ...]

    def __post_init__(self):
        _check_int("n", self.n, 1)
        items = tuple(sorted(int(j) for j in self.defectives))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "defectives", items)
        if len(set(items)) != len(items):
            raise InvalidParameter("defectives", "indices must be unique")
        if items and (items[0] < 0 or items[-1] >= self.n):
            raise InvalidParameter("defectives", f"indices must lie in [0, {self.n})")
        if not 0 < len(items) < self.n:
            raise InvalidParameter("k", f"need 0 < k < n, got k={len(items)}, n={self.n}")

    @property
    def k(self) -> int:
        return len(self.defectives)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.defectives)] = True
        return out

    def to_json(self) -> dict:
        return {"n": self.n, "defectives": list(self.defectives)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "GroundTruth":
        return cls(int(data["n"]), tuple(int(j) for j in data["defectives"]))


@dataclass(frozen=True, eq=False)
class PoolingMatrix:
    """An m-by-n binary test matrix stored sparsely.

    ``ones`` holds the row-major flat indices ``i * n + j`` of the one
    entries in increasing order. Row and column views are derived lazily
    and cached, so a matrix can be shared between threads.
    """

    m: int
    n: int
    ones: np.ndarray

    def __post_init__(self):
        _check_int("m", self.m, 0)
        _check_int("n", self.n, 1)
        ones = np.asarray(self.ones, dtype=np.int64).ravel()
        if ones.size:
            if ones[0] < 0 or ones[-1] >= self.m * self.n:
                raise InvalidParameter("ones", "entry index out of range")
            if np.any(np.diff(ones) <= 0):
                raise InvalidParameter("ones", "entries must be strictly increasing")
        ones.setflags(write=False)
        object.__setattr__(self, "ones", ones)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_dense(cls, dense) -> "PoolingMatrix":
        arr = np.asarray(dense)
        if arr.ndim != 2:
            raise InvalidParameter("dense", "expected a 2-D array")
        if not np.isin(arr, (0, 1)).all():
            raise InvalidParameter("dense", "entries must be 0 or 1")
        m, n = arr.shape
        return cls(m, n, np.flatnonzero(arr))

    @cached_property
    def row_index(self) -> np.ndarray:
        return self.ones // self.n

    @cached_property
    def col_index(self) -> np.ndarray:
        return self.ones % self.n

    @cached_property
    def row_starts(self) -> np.ndarray:
        """Offsets into ``ones`` where each row begins (length m + 1)."""
        return np.searchsorted(self.ones, np.arange(self.m + 1, dtype=np.int64) * self.n)

    @property
    def nnz(self) -> int:
        return int(self.ones.size)

    def to_dense(self, dtype=np.uint8) -> np.ndarray:
        out = np.zeros(self.m * self.n, dtype=dtype)
        out[self.ones] = 1
        return out.reshape(self.m, self.n)

    def row(self, i: int) -> np.ndarray:
        """Item indices present in test ``i``."""
        lo, hi = self.row_starts[i], self.row_starts[i + 1]
        return self.col_index[lo:hi]

    def column(self, j: int) -> np.ndarray:
        """Test indices that include item ``j``."""
        return self.row_index[self.col_index == j]

    def entry(self, i: int, j: int) -> int:
        flat = i * self.n + j
        pos = np.searchsorted(self.ones, flat)
        return int(pos < self.ones.size and self.ones[pos] == flat)

    @cached_property
    def row_bits(self) -> np.ndarray:
        """Rows packed into bytes, shape (m, ceil(n / 8)), big-endian bit order."""
        return np.packbits(self.to_dense(np.bool_), axis=1)

    @cached_property
    def column_bits(self) -> np.ndarray:
        """Columns packed into bytes, shape (n, ceil(m / 8))."""
        return np.packbits(self.to_dense(np.bool_).T, axis=1)

    def head(self, m: int) -> "PoolingMatrix":
        """The first ``m`` tests."""
        if not 0 <= m <= self.m:
            raise InvalidParameter("m", f"{m} outside [0, {self.m}]")
        cut = np.searchsorted(self.ones, m * self.n)
        return PoolingMatrix(m, self.n, self.ones[:cut])

    def __eq__(self, other):
        if not isinstance(other, PoolingMatrix):
            return NotImplemented
        return (
            self.m == other.m and self.n == other.n and np.array_equal(self.ones, other.ones)
        )

    __hash__ = None

    def to_csv(self) -> str:
        header = ",".join(f"item_{j}" for j in range(self.n))
        dense = self.to_dense()
        lines = [header] + [",".join(map(str, row)) for row in dense.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PoolingMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header != [f"item_{j}" for j in range(len(header))]:
            raise InvalidParameter("header", "expected item_0..item_{n-1}")
        rows = [[int(v) for v in ln.split(",")] for ln in lines[1:]]
        if any(len(r) != len(header) for r in rows):
            raise DimensionMismatch("row width differs from header")
        dense = np.array(rows, dtype=np.uint8).reshape(len(rows), len(header))
        return cls.from_dense(dense)

    def to_json(self) -> dict:
        """Compact form: one hex string per row of the packed bits."""
        return {"m": self.m, "n": self.n, "rows": [r.tobytes().hex() for r in self.row_bits]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "PoolingMatrix":
        m, n = int(data["m"]), int(data["n"])
        if len(data["rows"]) != m:
            raise DimensionMismatch(f"expected {m} rows, got {len(data['rows'])}")
        if m == 0:
            return cls(0, n, np.empty(0, dtype=np.int64))
        packed = np.array([np.frombuffer(bytes.fromhex(h), dtype=np.uint8) for h in data["rows"]])
        dense = np.unpackbits(packed, axis=1, count=n)
        return cls.from_dense(dense)


@dataclass(frozen=True, eq=False)
class Outcomes:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool).ravel()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def m(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, Outcomes):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None

    def to_json(self) -> dict:
        return {"bits": self.bits.astype(int).tolist()}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Outcomes":
        return cls(np.array(data["bits"], dtype=bool))


@dataclass(frozen=True)
class Bernoulli:
    """Every matrix entry is an independent Bernoulli(p) draw."""

    p: float

    def __post_init__(self):
        _check_probability("p", self.p)

    def to_json(self) -> dict:
        return {"bernoulli": {"p": self.p}}

    @property
    def label(self) -> str:
        return f"bernoulli(p={self.p:.10g})"


@dataclass(frozen=True)
class RowWeight:
    """Each test draws ``s`` items uniformly with replacement; repeats collapse."""

    s: int

    def __post_init__(self):
        _check_int("s", self.s, 1)
        object.__setattr__(self, "s", int(self.s))

    def to_json(self) -> dict:
        return {"row_weight": {"s": self.s}}

    @property
    def label(self) -> str:
        return f"row_weight(s={self.s})"


DesignSpec = Union[Bernoulli, RowWeight]


def design_from_json(data: Mapping[str, Any]) -> DesignSpec:
    if "bernoulli" in data:
        return Bernoulli(float(data["bernoulli"]["p"]))
    if "row_weight" in data:
        return RowWeight(int(data["row_weight"]["s"]))
    raise InvalidParameter("design", f"unknown design {dict(data)!r}")


@dataclass(frozen=True)
class PacTarget:
    epsilon: float
    delta: float

    def __post_init__(self):
        _check_probability("epsilon", self.epsilon, open_low=False, open_high=False)
        _check_probability("delta", self.delta)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "PacTarget":
        return cls(float(data["epsilon"]), float(data["delta"]))


class ErrorKind(str, Enum):
    FALSE_POSITIVE = "fp"
    FALSE_NEGATIVE = "fn"


@dataclass(frozen=True)
class ErrorBudget:
    kind: ErrorKind
    count: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        _check_int("count", self.count, 0)
        object.__setattr__(self, "count", int(self.count))

    def check_against(self, n: int, k: int) -> None:
        limit = n - k if self.kind is ErrorKind.FALSE_POSITIVE else k
        if self.count > limit:
            raise InvalidParameter("count", f"{self.kind.value} budget {self.count} > {limit}")

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "count": self.count}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ErrorBudget":
        return cls(ErrorKind(data["kind"]), int(data["count"]))


@dataclass(frozen=True)
class BoundResult:
    """A sufficient number of tests together with the quantities behind it.

    ``m_real`` is the real-valued bound before the ceiling; ``m_s`` is the
    integer number of tests reported to callers.
    """

    algorithm: str
    n: int
    k: int
    m_s: int
    m_real: float
    budget: ErrorBudget
    intermediates: Mapping[str, float] = field(default_factory=dict)
    saturated: bool = False

    def __post_init__(self):
        if self.m_s < 1:
            raise InvalidParameter("m_s", f"must be >= 1, got {self.m_s}")
        for name, value in self.intermediates.items():
            if not math.isfinite(float(value)):
                raise InvalidParameter(name, f"intermediate not finite: {value}")

    @property
    def rho_r(self) -> float:
        """Testing rate: sufficient tests per item."""
        return self.m_s / self.n

    def to_json(self) -> dict:
        inter = {name: float(v) for name, v in self.intermediates.items()}
        inter["saturated"] = self.saturated
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "k": self.k,
            "m_s": self.m_s,
            "m_real": self.m_real,
            "rho_r": self.rho_r,
            "budget": self.budget.to_json(),
            "intermediates": inter,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "BoundResult":
        inter = dict(data["intermediates"])
        saturated = bool(inter.pop("saturated", False))
        return cls(
            algorithm=data["algorithm"],
            n=int(data["n"]),
            k=int(data["k"]),
            m_s=int(data["m_s"]),
            m_real=float(data["m_real"]),
            budget=ErrorBudget.from_json(data["budget"]),
            intermediates=inter,
            saturated=saturated,
        )


def validate_instance(gt: GroundTruth, design: DesignSpec) -> None:
    """Re-check every invariant of an (instance, design) pair.

    Construction already validates each type; this catches objects built
    with ``object.__new__`` or mutated through ``object.__setattr__``, and
    checks cross-field constraints.
    """
    GroundTruth(gt.n, gt.defectives)
    if isinstance(design, Bernoulli):
        _check_probability("p", design.p)
    elif isinstance(design, RowWeight):
        _check_int("s", design.s, 1)
    else:
        raise InvalidParameter("design", f"unknown design type {type(design).__name__}")
