"""Rank-based evaluation: Spearman's rho, ranking accuracy, temporal splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import CandidateCriteria, CohortTable, DesignPoint, fmt, split_by_cycle
from .errors import DegenerateSeries, EmptyPairs, EmptySplit, LengthMismatch
from .pareto import DominanceMode, PreferencePair, domination_pairs
from .reward import RewardModel, TrainConfig, TransformKind, _pair_indices, fit_reward


@dataclass(frozen=True)
class RankSeries:
    ids: tuple
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.scores):
            raise LengthMismatch("ids and scores differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")

    @classmethod
    def of(cls, scores, ids=None) -> "RankSeries":
        scores = tuple(float(s) for s in scores)
        ids = tuple(range(len(scores))) if ids is None else tuple(ids)
        return cls(ids, scores)


def spearman(a: RankSeries, b: RankSeries) -> float:
    """Spearman's rank correlation with average ranks for ties.

    Series are aligned by id. Raises :class:`DegenerateSeries` when either
    side has constant scores.
    """
    if len(a.ids) != len(b.ids):
        raise LengthMismatch(f"series lengths differ: {len(a.ids)} vs {len(b.ids)}")
    if set(a.ids) != set(b.ids):
        raise LengthMismatch("series cover different ids")
    if len(a.ids) < 2:
        raise DegenerateSeries("at least two items are needed")
    pos_b = {i: k for k, i in enumerate(b.ids)}
    xb = np.array([b.scores[pos_b[i]] for i in a.ids])
    ra = rankdata(np.asarray(a.scores), method="average")
    rb = rankdata(xb, method="average")
    da = ra - ra.mean()
    db = rb - rb.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise DegenerateSeries("constant score series has no rank variance")
    rho = float(da @ db) / math.sqrt(va * vb)
    return min(1.0, max(-1.0, rho))


def _scores(model, table: CohortTable) -> np.ndarray:
    if isinstance(model, RewardModel):
        return model.score(table.component_matrix)
    return np.asarray([model(p) for p in table.points], dtype=float)


def ranking_accuracy(model, pairs: Sequence[PreferencePair], table: CohortTable) -> float:
    """Fraction of pairs the scorer orders correctly; exact ties count 0.5.

    ``model`` is a :class:`RewardModel` or any callable mapping a
    :class:`DesignPoint` to a score.
    """
    if len(pairs) == 0:
        raise EmptyPairs("no pairs to score")
    wi, li = _pair_indices(pairs, table)
    r = _scores(model, table)
    return float(pair_accuracy_from_scores(r[wi], r[li]))


def pair_accuracy_from_scores(r_win: np.ndarray, r_lose: np.ndarray) -> float:
    hits = (r_win > r_lose).astype(float) + 0.5 * (r_win == r_lose)
    return float(np.mean(hits))


@dataclass(frozen=True)
class CycleEvalRow:
    cycle: int
    rho_learned: float | None
    rho_reference: float | None
    delta_rho: float | None
    accuracy: float | None
    n_train: int
    n_test: int
    skipped: str | None = None  # reason, when metrics could not be computed

    @property
    def is_skip(self) -> bool:
        return self.skipped is not None


def _skip(cycle, n_train, n_test, reason):
    return CycleEvalRow(cycle, None, None, None, None, n_train, n_test, reason)


def temporal_eval(
    table: CohortTable,
    criteria: CandidateCriteria,
    components_spec: Sequence[TransformKind | str],
    reference,
    config: TrainConfig,
    first_cycle: int,
    last_cycle: int,
    evaluator: Callable[[DesignPoint], float] | None = None,
    mode: DominanceMode = DominanceMode.STRICT_ALL,
    restarts: int = 4,
) -> list[CycleEvalRow]:
    """Fit on earlier cycles, evaluate on the next, for each cycle in range.

    Evaluation scores come from ``evaluator`` when given, otherwise from the
    table's ``evaluation`` field. Cycles where a side is empty, where no
    training pairs exist, or where rho is undefined yield skip rows.
    """
    if evaluator is None:
        if not table.has_evaluations:
            raise ValueError("no evaluator given and the table carries no evaluation scores")
        evaluator = lambda p: p.evaluation  # noqa: E731
    rows = []
    for cycle in range(first_cycle, last_cycle + 1):
        try:
            train_t, test_t = split_by_cycle(table, cycle)
        except EmptySplit as e:
            n_tr = int(np.sum(table.cycles < cycle))
            n_te = int(np.sum(table.cycles == cycle))
            rows.append(_skip(cycle, n_tr, n_te, f"empty {e.side}"))
            continue
        n_tr, n_te = len(train_t), len(test_t)
        if n_te < 2:
            rows.append(_skip(cycle, n_tr, n_te, "fewer than two test points"))
            continue
        pairs = domination_pairs(train_t, criteria, mode)
        if not pairs:
            rows.append(_skip(cycle, n_tr, n_te, "no training pairs"))
            continue
        seed = int(np.random.SeedSequence([config.seed, cycle]).generate_state(1)[0])
        model, _ = fit_reward(list(components_spec), pairs, train_t, replace(config, seed=seed), restarts)

        ids = tuple(int(i) for i in test_t.ids)
        truth = RankSeries(ids, tuple(float(evaluator(p)) for p in test_t.points))
        learned = RankSeries(ids, tuple(_scores(model, test_t).tolist()))
        ref = RankSeries(ids, tuple(_scores(reference, test_t).tolist()))
        try:
            rho_l = spearman(learned, truth)
            rho_r = spearman(ref, truth)
        except DegenerateSeries as e:
            rows.append(_skip(cycle, n_tr, n_te, f"degenerate: {e}"))
            continue
        test_pairs = domination_pairs(test_t, criteria, mode)
        acc = ranking_accuracy(model, test_pairs, test_t) if test_pairs else None
        rows.append(CycleEvalRow(cycle, rho_l, rho_r, rho_l - rho_r, acc, n_tr, n_te))
    return rows


EVAL_COLUMNS = ["cycle", "rho_learned", "rho_reference", "delta_rho", "accuracy", "n_train", "n_test"]


def write_eval_rows(rows: Sequence[CycleEvalRow], path: str | Path) -> None:
    def cell(v):
        return "" if v is None else fmt(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVAL_COLUMNS)
        for r in rows:
            w.writerow([
                r.cycle, cell(r.rho_learned), cell(r.rho_reference), cell(r.delta_rho),
                cell(r.accuracy), r.n_train, r.n_test,
            ])
