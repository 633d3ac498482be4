"""Pareto dominance relative to a target point, and domination-pair sets."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CandidateCriteria, CohortTable, DesignPoint, ObjectiveKind
from .errors import DimensionMismatch


class DominanceMode(enum.Enum):
    STRICT_ALL = "strict"
    WEAK_PARETO = "weak"


@dataclass(frozen=True, order=True)
class PreferencePair:
    winner_id: int
    loser_id: int

    def __post_init__(self):
        if self.winner_id == self.loser_id:
            raise ValueError("a point cannot be preferred to itself")


def closeness_keys(assays: np.ndarray, criteria: CandidateCriteria) -> np.ndarray:
    """Per-assay keys where smaller means closer to the target.

    Range objectives use ``|x - t|``. Maximise/minimise objectives compare
    the raw value instead of the distance to the sentinel: the two orderings
    agree for every value on the near side of the sentinel, and the raw
    comparison does not lose resolution to the sentinel's magnitude.
    """
    A = np.asarray(assays, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.shape[1] != criteria.K:
        raise DimensionMismatch(f"assay vectors have length {A.shape[1]}, criteria have {criteria.K}")
    keys = np.empty_like(A)
    for i, (t, kind) in enumerate(zip(criteria.targets, criteria.kinds)):
        if kind is ObjectiveKind.MAXIMIZE:
            keys[:, i] = -A[:, i]
        elif kind is ObjectiveKind.MINIMIZE:
            keys[:, i] = A[:, i]
        else:
            keys[:, i] = np.abs(A[:, i] - t)
    return keys


def _dominates_keys(ka: np.ndarray, kb: np.ndarray, mode: DominanceMode) -> np.ndarray:
    if mode is DominanceMode.STRICT_ALL:
        return np.all(ka < kb, axis=-1)
    return np.all(ka <= kb, axis=-1) & np.any(ka < kb, axis=-1)


def dominates(
    a: DesignPoint,
    b: DesignPoint,
    criteria: CandidateCriteria,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
) -> bool:
    """Whether ``a`` is closer to ``criteria`` than ``b`` (per ``mode``)."""
    if len(a.assays) != criteria.K or len(b.assays) != criteria.K:
        raise DimensionMismatch("point assays do not match criteria length")
    keys = closeness_keys(np.array([a.assays, b.assays]), criteria)
    return bool(_dominates_keys(keys[0], keys[1], mode))


def dominance_matrix(
    assays: np.ndarray,
    criteria: CandidateCriteria,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
    chunk: int = 256,
) -> np.ndarray:
    """Boolean matrix ``M[i, j]`` = row i dominates row j."""
    keys = closeness_keys(assays, criteria)
    n = keys.shape[0]
    out = np.zeros((n, n), dtype=bool)
    for start in range(0, n, chunk):
        block = keys[start:start + chunk, None, :]
        out[start:start + chunk] = _dominates_keys(block, keys[None, :, :], mode)
    return out


def domination_index_pairs(
    table: CohortTable,
    criteria: CandidateCriteria,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
) -> tuple[np.ndarray, np.ndarray]:
    """Row positions ``(winners, losers)`` of all dominance pairs, in id order."""
    M = dominance_matrix(table.assay_matrix, criteria, mode)
    wi, li = np.nonzero(M)
    ids = table.ids
    order = np.lexsort((ids[li], ids[wi]))
    return wi[order], li[order]


def domination_pairs(
    table: CohortTable,
    criteria: CandidateCriteria,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
) -> list[PreferencePair]:
    """All ``(winner, loser)`` pairs in ``table``, sorted by ids."""
    if len(table) == 0:
        raise ValueError("table is empty")
    wi, li = domination_index_pairs(table, criteria, mode)
    ids = table.ids
    return [PreferencePair(int(w), int(l)) for w, l in zip(ids[wi], ids[li])]


def pareto_front(
    table: CohortTable,
    criteria: CandidateCriteria,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
) -> list[int]:
    """Ids of points that no other point dominates."""
    if len(table) == 0:
        raise ValueError("table is empty")
    M = dominance_matrix(table.assay_matrix, criteria, mode)
    return [int(i) for i in table.ids[~M.any(axis=0)]]


def write_pairs(pairs: list[PreferencePair], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["winner_id", "loser_id"])
        for p in pairs:
            w.writerow([p.winner_id, p.loser_id])


def read_pairs(path: str | Path) -> list[PreferencePair]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [PreferencePair(int(r["winner_id"]), int(r["loser_id"])) for r in csv.DictReader(fh)]
