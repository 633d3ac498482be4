import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from paretoreward.core import SENTINEL, CandidateCriteria, ObjectiveKind, make_table
from paretoreward.errors import DegenerateSeries, EmptyPairs, LengthMismatch
from paretoreward.metrics import (
    EVAL_COLUMNS,
    CycleEvalRow,
    RankSeries,
    pair_accuracy_from_scores,
    ranking_accuracy,
    spearman,
    temporal_eval,
    write_eval_rows,
)
from paretoreward.pareto import PreferencePair
from paretoreward.reward import RewardModel, TrainConfig, TransformParams, init_model

from oracles import average_ranks, pearson, spearman_closed_form


def S(values, ids=None):
    return RankSeries.of(values, ids)


def test_spearman_basic_cases():
    assert spearman(S([1, 2, 3, 4]), S([10, 20, 30, 40])) == 1.0
    assert spearman(S([1, 2, 3, 4]), S([4, 3, 2, 1])) == -1.0
    assert spearman(S([1, 2, 3]), S([1, 3, 2])) == pytest.approx(0.5, abs=1e-15)


def test_spearman_ties_match_average_rank_oracle():
    a, b = [1, 1, 2], [1, 2, 3]
    assert spearman(S(a), S(b)) == pytest.approx(pearson(average_ranks(a), average_ranks(b)), abs=1e-12)
    assert average_ranks(a) == [1.5, 1.5, 3.0]


def test_spearman_aligns_by_id():
    a = RankSeries(("x", "y", "z"), (1.0, 2.0, 3.0))
    b = RankSeries(("z", "x", "y"), (3.0, 1.0, 2.0))
    assert spearman(a, b) == 1.0


def test_spearman_errors():
    with pytest.raises(LengthMismatch):
        spearman(S([1, 2, 3]), S([1, 2]))
    with pytest.raises(LengthMismatch):
        spearman(S([1, 2], ids=[0, 1]), S([1, 2], ids=[0, 2]))
    with pytest.raises(DegenerateSeries):
        spearman(S([1, 1, 1]), S([1, 2, 3]))
    with pytest.raises(DegenerateSeries):
        spearman(S([1]), S([1]))
    with pytest.raises(LengthMismatch):
        RankSeries((1, 2), (0.5,))
    with pytest.raises(ValueError):
        RankSeries((1, 1), (0.5, 0.6))


series = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(-5, 5), min_size=n, max_size=n),
        st.lists(st.integers(-5, 5), min_size=n, max_size=n),
    )
).filter(lambda ab: len(set(ab[0])) > 1 and len(set(ab[1])) > 1)


@given(series)
def test_spearman_symmetric_and_bounded(ab):
    a, b = ab
    rho = spearman(S(a), S(b))
    assert rho == spearman(S(b), S(a))
    assert -1.0 <= rho <= 1.0


@given(series)
def test_spearman_tied_oracle(ab):
    a, b = ab
    assert abs(spearman(S(a), S(b)) - pearson(average_ranks(a), average_ranks(b))) < 1e-10


@given(series, st.sampled_from([np.exp, np.arctan, lambda x: x**3 + 2 * x, lambda x: 5 * x - 1]))
def test_spearman_monotone_invariance(ab, f):
    a, b = ab
    fa = f(np.asarray(a, dtype=float))
    assert spearman(S(fa), S(b)) == pytest.approx(spearman(S(a), S(b)), abs=1e-12)


def test_spearman_tie_free_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        a, b = rng.permutation(n).tolist(), rng.normal(size=n).tolist()
        assert abs(spearman(S(a), S(b)) - spearman_closed_form(a, b)) < 1e-12


def _table_and_pairs():
    t = make_table([[0.1], [0.5], [0.9], [0.3]], ids=[10, 11, 12, 13])
    pairs = [PreferencePair(12, 10), PreferencePair(11, 13), PreferencePair(12, 11)]
    return t, pairs


def test_accuracy_perfect_and_constant():
    t, pairs = _table_and_pairs()
    perfect = RewardModel((TransformParams.sigmoid(5.0, 0.5),), (1.0,))
    assert ranking_accuracy(perfect, pairs, t) == 1.0
    assert ranking_accuracy(lambda p: 0.0, pairs, t) == 0.5


def test_accuracy_callable_and_reversed():
    t, pairs = _table_and_pairs()
    assert ranking_accuracy(lambda p: -p.components[0], pairs, t) == 0.0


def test_accuracy_brute_force_count():
    rng = np.random.default_rng(3)
    C = rng.normal(size=(100, 2))
    t = make_table(C)
    model = init_model(["sigmoid", "gaussian"], seed=8)
    raw = [(int(i), int(j)) for i, j in rng.integers(0, 100, (520, 2)) if i != j][:500]
    r = model.score(C)
    hits = sum(1.0 if r[i] > r[j] else 0.5 if r[i] == r[j] else 0.0 for i, j in raw)
    assert ranking_accuracy(model, [PreferencePair(*p) for p in raw], t) == hits / len(raw)


def test_accuracy_empty_pairs():
    t, _ = _table_and_pairs()
    with pytest.raises(EmptyPairs):
        ranking_accuracy(lambda p: 0.0, [], t)


@given(
    st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=1, max_size=40),
    st.integers(1, 8),
    st.integers(-20, 20),
)
def test_accuracy_affine_invariant(pairs, a, b):
    rw = np.array([p[0] for p in pairs], dtype=float)
    rl = np.array([p[1] for p in pairs], dtype=float)
    assert pair_accuracy_from_scores(a * rw + b, a * rl + b) == pair_accuracy_from_scores(rw, rl)


# Temporal evaluation

MAX1 = CandidateCriteria((SENTINEL,), (ObjectiveKind.MAXIMIZE,))


def _one_assay_cohort():
    rng = np.random.default_rng(1)
    x = rng.normal(size=60)
    cycles = np.repeat([1, 2, 3, 4], 15)
    ev = 1 / (1 + np.exp(-2 * x))
    return make_table(x[:, None], cycles=cycles, evaluations=ev)


def test_exact_reference_rho_is_one():
    t = _one_assay_cohort()
    rows = temporal_eval(t, MAX1, ["sigmoid"], lambda p: p.evaluation, TrainConfig(epochs=50), 2, 4, restarts=1)
    assert [r.cycle for r in rows] == [2, 3, 4]
    for r in rows:
        assert r.rho_reference == 1.0
        assert r.delta_rho == r.rho_learned - r.rho_reference
        assert r.delta_rho <= 0
        assert 0 <= r.accuracy <= 1
        assert r.n_test == 15


def test_temporal_skips():
    x = np.arange(7, dtype=float)
    t = make_table(x[:, None], cycles=[1, 1, 1, 2, 3, 3, 3], evaluations=x)
    rows = temporal_eval(t, MAX1, ["sigmoid"], lambda p: p.evaluation, TrainConfig(epochs=5), 1, 5, restarts=1)
    by = {r.cycle: r for r in rows}
    assert by[1].is_skip and "train" in by[1].skipped
    assert by[2].is_skip and by[2].n_test == 1
    assert not by[3].is_skip
    assert by[4].is_skip and "test" in by[4].skipped
    assert by[5].is_skip


def test_temporal_requires_scores():
    t = make_table([[0.0], [1.0]], cycles=[1, 2])
    with pytest.raises(ValueError):
        temporal_eval(t, MAX1, ["sigmoid"], lambda p: 0.0, TrainConfig(), 2, 2)


def test_eval_rows_csv(tmp_path):
    rows = [CycleEvalRow(2, 0.5, 0.75, -0.25, 1.0, 10, 5), CycleEvalRow(3, None, None, None, None, 15, 1, "x")]
    write_eval_rows(rows, tmp_path / "e.csv")
    with open(tmp_path / "e.csv") as fh:
        got = list(csv.reader(fh))
    assert got[0] == EVAL_COLUMNS
    assert got[1] == ["2", "0.5", "0.75", "-0.25", "1", "10", "5"]
    assert got[2] == ["3", "", "", "", "", "15", "1"]
