"""Association weights, joint events and marginal tables.

A problem with ``n`` targets and ``m`` measurements is described by an
``n x m`` matrix of single-target association weights. Entry ``[i, j]``
is the (unnormalised) weight of target ``i`` being associated with
measurement ``j``; the missed-detection weight of every target is fixed to
one and never stored. Gated-out pairs are exact zeros.

Target and measurement indices inside an association vector are 1-based,
with 0 meaning "missed" / "clutter", so they line up with column 0 of the
marginal tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    InconsistentEvent,
    NegativeWeight,
    NonFiniteWeight,
    ParseError,
    ShapeMismatch,
)

DEFAULT_EVENT_BUDGET = 10**7
ROW_SUM_TOL = 1e-12


def _as_weight_array(weights, n_targets=None, n_measurements=None) -> np.ndarray:
    if isinstance(weights, WeightMatrix):
        arr = weights.weights
    else:
        rows = weights
        if not isinstance(rows, np.ndarray):
            rows = list(rows)
            lengths = {len(r) for r in rows}
            if len(lengths) > 1:
                first = len(rows[0])
                for i, r in enumerate(rows):
                    if len(r) != first:
                        raise DimensionMismatch(
                            f"row {i + 1} has {len(r)} entries, expected {first}",
                            position=(i + 1, min(len(r), first) + 1),
                        )
            if not rows:
                rows = np.zeros((0, 0))
        try:
            arr = np.array(rows, dtype=float)
        except (TypeError, ValueError) as exc:
            raise DimensionMismatch(f"weights are not a numeric matrix: {exc}") from None
        if arr.ndim == 1 and arr.size == 0 and n_targets:
            arr = arr.reshape(n_targets, 0)
    if arr.ndim != 2:
        raise DimensionMismatch(f"weights must be 2-dimensional, got shape {arr.shape}")
    if n_targets is not None and arr.shape[0] != n_targets:
        raise DimensionMismatch(
            f"expected {n_targets} target rows, got {arr.shape[0]}",
            position=(min(arr.shape[0], n_targets) + 1, 1),
        )
    if n_measurements is not None and arr.shape[1] != n_measurements:
        raise DimensionMismatch(
            f"expected {n_measurements} measurement columns, got {arr.shape[1]}",
            position=(1, min(arr.shape[1], n_measurements) + 1),
        )
    return arr


def validate_weights(weights, n_targets=None, n_measurements=None) -> None:
    """Raise if ``weights`` is not a valid association weight matrix.

    Accepts a :class:`WeightMatrix` or anything convertible to a 2-d float
    array. Errors carry the 1-based ``position`` of the first offending
    entry in row-major order.
    """
    arr = _as_weight_array(weights, n_targets, n_measurements)
    if arr.shape[0] < 1:
        raise DimensionMismatch("a weight matrix needs at least one target row")
    bad = ~np.isfinite(arr)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonFiniteWeight(
            f"non-finite weight {arr[i, j]!r} at ({i + 1},{j + 1})", position=(i + 1, j + 1)
        )
    neg = arr < 0
    if neg.any():
        i, j = np.argwhere(neg)[0]
        raise NegativeWeight(
            f"negative weight {arr[i, j]!r} at ({i + 1},{j + 1})", position=(i + 1, j + 1)
        )


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Dense, read-only ``n_targets x n_measurements`` weight matrix."""

    weights: np.ndarray

    def __post_init__(self):
        arr = _as_weight_array(self.weights).copy()
        validate_weights(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @classmethod
    def empty(cls, n_targets: int) -> "WeightMatrix":
        return cls(np.zeros((n_targets, 0)))

    @property
    def n_targets(self) -> int:
        return self.weights.shape[0]

    @property
    def n_measurements(self) -> int:
        return self.weights.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def __eq__(self, other):
        if not isinstance(other, WeightMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"WeightMatrix({self.n_targets}x{self.n_measurements})"


def read_weight_matrix(text: str) -> WeightMatrix:
    """Parse the ``n m`` header + ``n`` rows text format."""
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("missing 'n m' header", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(f"header must be 'n m', got {lines[0]!r}", line=1)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(f"non-integer header {lines[0]!r}", line=1) from None
    if n < 1 or m < 0:
        raise ParseError(f"invalid dimensions {n} x {m}", line=1)
    body = lines[1 : 1 + n]
    if len(body) < n:
        raise ParseError(f"expected {n} weight rows, found {len(body)}", line=len(lines))
    rows = []
    for k, line in enumerate(body, start=2):
        fields = line.split()
        if len(fields) != m:
            raise ParseError(f"expected {m} weights, found {len(fields)}", line=k)
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ParseError(f"non-numeric weight in {line!r}", line=k) from None
    extra = [ln for ln in lines[1 + n :] if ln.strip()]
    if extra:
        raise ParseError("trailing content after weight rows", line=n + 2)
    return WeightMatrix(np.array(rows, dtype=float).reshape(n, m))


def format_weight_matrix(w: WeightMatrix) -> str:
    out = [f"{w.n_targets} {w.n_measurements}"]
    for row in w.weights:
        out.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class JointEvent:
    """A consistent joint association: ``assignment[i]`` is 0 or a 1-based measurement."""

    assignment: tuple[int, ...]
    n_measurements: int

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignment)
        object.__setattr__(self, "assignment", a)
        seen = {}
        for i, j in enumerate(a):
            if j < 0 or j > self.n_measurements:
                raise InconsistentEvent(f"target {i + 1} assigned to unknown measurement {j}")
            if j > 0:
                if j in seen:
                    raise InconsistentEvent(
                        f"targets {seen[j] + 1} and {i + 1} both claim measurement {j}"
                    )
                seen[j] = i

    @property
    def measurement_side(self) -> tuple[int, ...]:
        """The redundant per-measurement vector ``b``: 1-based target or 0."""
        b = [0] * self.n_measurements
        for i, j in enumerate(self.assignment):
            if j > 0:
                b[j - 1] = i + 1
        return tuple(b)


def event_weight(w: WeightMatrix, e: JointEvent | Sequence[int]) -> float:
    """Unnormalised joint mass of an association event."""
    if not isinstance(e, JointEvent):
        e = JointEvent(tuple(e), w.n_measurements)
    if len(e.assignment) != w.n_targets:
        raise ShapeMismatch(f"event has {len(e.assignment)} targets, weights have {w.n_targets}")
    out = 1.0
    for i, j in enumerate(e.assignment):
        if j > 0:
            out *= w.weights[i, j - 1]
    return out


def event_table(
    w: WeightMatrix, budget: int = DEFAULT_EVENT_BUDGET, prune_zeros: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """All consistent events as an ``(events, n_targets)`` array plus their weights.

    Events are grown one target at a time; the running event count never
    decreases from one target to the next, so exceeding ``budget`` part way
    through already proves the full count exceeds it.
    """
    psi = w.weights
    n, m = psi.shape
    assign = np.zeros((1, 0), dtype=np.int32)
    weight = np.ones(1)
    for i in range(n):
        blocks_a = [np.concatenate([assign, np.zeros((len(assign), 1), dtype=np.int32)], axis=1)]
        blocks_w = [weight]
        for j in range(1, m + 1):
            pj = psi[i, j - 1]
            if prune_zeros and pj == 0.0:
                continue
            free = ~np.any(assign == j, axis=1) if i else np.ones(len(assign), dtype=bool)
            if not free.any():
                continue
            sub = assign[free]
            blocks_a.append(
                np.concatenate([sub, np.full((len(sub), 1), j, dtype=np.int32)], axis=1)
            )
            blocks_w.append(weight[free] * pj)
        count = sum(len(b) for b in blocks_w)
        if count > budget:
            raise BudgetExceeded(
                f"more than {budget} consistent events (exceeded after {i + 1} of {n} targets)"
            )
        assign = np.concatenate(blocks_a, axis=0)
        weight = np.concatenate(blocks_w)
    return assign, weight


def enumerate_events(
    w: WeightMatrix, budget: int = DEFAULT_EVENT_BUDGET, prune_zeros: bool = True
) -> Iterator[JointEvent]:
    """Yield every consistent joint event exactly once."""
    assign, _ = event_table(w, budget, prune_zeros)
    m = w.n_measurements
    for row in assign:
        yield JointEvent(tuple(int(x) for x in row), m)


def dense_event_count(n: int, m: int) -> int:
    """Number of partial matchings of a complete ``n x m`` bipartite graph."""
    return sum(math.comb(n, k) * math.comb(m, k) * math.factorial(k) for k in range(min(n, m) + 1))


def _check_rows(name, arr, width):
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeMismatch(f"{name} must have {width} columns, got shape {arr.shape}")
    if arr.size and (np.any(arr < -ROW_SUM_TOL) or np.any(arr > 1 + ROW_SUM_TOL)):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if arr.shape[0]:
        err = np.abs(arr.sum(axis=1) - 1.0)
        if err.max() > ROW_SUM_TOL:
            raise ValueError(f"{name} row {int(err.argmax()) + 1} sums to 1 {err.max():+.3g}")


@dataclass(frozen=True, eq=False)
class BeliefTable:
    """Marginal association probabilities on both sides of the bipartite graph.

    ``target_marginals[i, j]`` is P(target i <- measurement j), column 0 the
    missed detection; ``measurement_marginals[j, i]`` is P(measurement j <-
    target i), column 0 meaning clutter.
    """

    target_marginals: np.ndarray
    measurement_marginals: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.target_marginals, dtype=float)
        mm = np.asarray(self.measurement_marginals, dtype=float)
        n = t.shape[0]
        m = t.shape[1] - 1 if t.ndim == 2 else -1
        if m < 0:
            raise ShapeMismatch(f"bad target marginal shape {t.shape}")
        if mm.size == 0:
            mm = mm.reshape(m, n + 1)
        if mm.shape[0] != m:
            raise ShapeMismatch(f"expected {m} measurement rows, got {mm.shape[0]}")
        _check_rows("target_marginals", t, m + 1)
        _check_rows("measurement_marginals", mm, n + 1)
        for arr in (t, mm):
            arr.setflags(write=False)
        object.__setattr__(self, "target_marginals", t)
        object.__setattr__(self, "measurement_marginals", mm)

    @property
    def n_targets(self) -> int:
        return self.target_marginals.shape[0]

    @property
    def n_measurements(self) -> int:
        return self.target_marginals.shape[1] - 1

    def respects_zero_pattern(self, w: WeightMatrix) -> bool:
        return bool(np.all(self.target_marginals[:, 1:][w.weights == 0] == 0))
