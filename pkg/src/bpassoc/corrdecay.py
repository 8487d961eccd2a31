"""Self-avoiding correlation-decay recursion for association marginals.

``phi`` for a track node is the probability-ratio style quantity

    1 / (1 + sum_{j in M} psi_i(j) * phi(T - {i}, M, j, t - 1))

and symmetrically for a measurement node. Nodes already visited are
removed from the remaining sets, so with unlimited depth the recursion is
exact (and exponential). Truncated at depth ``t`` it returns 1 at the
leaves, which mirrors BP's all-ones initialisation.

Indices are 0-based here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DepthBudget, DomainError
from .model import BeliefTable, WeightMatrix

DEFAULT_MEMO_CAP = 10**7

NodeKind = Literal["track", "measurement"]


@dataclass(frozen=True)
class CdQuery:
    track_set: frozenset[int]
    meas_set: frozenset[int]
    kind: NodeKind
    index: int
    depth: int

    def __post_init__(self):
        object.__setattr__(self, "track_set", frozenset(self.track_set))
        object.__setattr__(self, "meas_set", frozenset(self.meas_set))
        if self.depth < 0:
            raise DomainError(f"depth must be >= 0, got {self.depth}")
        own = self.track_set if self.kind == "track" else self.meas_set
        if self.kind not in ("track", "measurement"):
            raise DomainError(f"unknown node kind {self.kind!r}")
        if self.index not in own:
            raise DomainError(f"{self.kind} {self.index} is not in its own set")


def _mask(indices) -> int:
    out = 0
    for k in indices:
        out |= 1 << k
    return out


class _Recursion:
    def __init__(self, psi: np.ndarray, cap: int):
        self.psi = psi
        self.cap = cap
        n, m = psi.shape
        self.meas_of = [[(j, float(psi[i, j])) for j in range(m) if psi[i, j] > 0] for i in range(n)]
        self.tracks_of = [[(i, float(psi[i, j])) for i in range(n) if psi[i, j] > 0] for j in range(m)]
        self.memo: dict[tuple, float] = {}

    def _store(self, key, value):
        if len(self.memo) >= self.cap:
            raise DepthBudget(f"more than {self.cap} memoised subproblems")
        self.memo[key] = value
        return value

    def track(self, T: int, M: int, i: int, t: int) -> float:
        if t == 0:
            return 1.0
        key = (0, T, M, i, t)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        T2 = T & ~(1 << i)
        s = 1.0
        for j, p in self.meas_of[i]:
            if M >> j & 1:
                s += p * self.meas(T2, M, j, t - 1)
        return self._store(key, 1.0 / s)

    def meas(self, T: int, M: int, j: int, t: int) -> float:
        if t == 0:
            return 1.0
        key = (1, T, M, j, t)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        M2 = M & ~(1 << j)
        s = 1.0
        for i, p in self.tracks_of[j]:
            if T >> i & 1:
                s += p * self.track(T, M2, i, t - 1)
        return self._store(key, 1.0 / s)


def phi(w: WeightMatrix, q: CdQuery, memo_cap: int = DEFAULT_MEMO_CAP) -> float:
    rec = _Recursion(w.weights, memo_cap)
    T, M = _mask(q.track_set), _mask(q.meas_set)
    if q.kind == "track":
        return rec.track(T, M, q.index, q.depth)
    return rec.meas(T, M, q.index, q.depth)


def cd_beliefs(w: WeightMatrix, depth: int, memo_cap: int = DEFAULT_MEMO_CAP) -> BeliefTable:
    """Marginals from the depth-truncated recursion, both sides of the graph.

    Target ``i`` gets weight ``psi_i(j) * phi(T - {i}, M, j, depth)`` on
    measurement ``j`` and 1 on the miss; measurement beliefs are built the
    same way from ``phi(T, M - {j}, i, depth)``.
    """
    if depth < 1:
        raise DomainError(f"depth must be >= 1, got {depth}")
    psi = w.weights
    n, m = psi.shape
    rec = _Recursion(psi, memo_cap)
    T_all = (1 << n) - 1
    M_all = (1 << m) - 1

    target = np.zeros((n, m + 1))
    for i in range(n):
        target[i, 0] = 1.0
        T = T_all & ~(1 << i)
        for j, p in rec.meas_of[i]:
            target[i, j + 1] = p * rec.meas(T, M_all, j, depth)
        target[i] /= target[i].sum()

    meas = np.zeros((m, n + 1))
    for j in range(m):
        meas[j, 0] = 1.0
        M = M_all & ~(1 << j)
        for i, p in rec.tracks_of[j]:
            meas[j, i + 1] = p * rec.track(T_all, M, i, depth)
        meas[j] /= meas[j].sum()
    return BeliefTable(target, meas)
