import csv
import math

import numpy as np
import pytest

from paretoreward.core import SENTINEL, DesignPoint, ObjectiveKind, criteria_from_profile
from paretoreward.errors import BadKindList, DimensionMismatch
from paretoreward.evolve import GAConfig, GAResult
from paretoreward.pareto import DominanceMode, domination_pairs
from paretoreward.reward import TrainConfig, TransformKind, TransformParams
from paretoreward.simulator import (
    AGGREGATE_COLUMNS,
    TRACE_COLUMNS,
    CycleTrace,
    SimConfig,
    SyntheticTask,
    aggregate_traces,
    criteria_of,
    evaluate_E,
    make_cohort,
    make_task,
    profile_of,
    run_dmta,
    training_pairs,
    write_aggregate,
    write_traces,
)

FAST = SimConfig(
    cycles=3,
    repeats=2,
    ga=GAConfig(population_size=30, offspring_size=30, generations=5),
    train=TrainConfig(epochs=30),
    restarts=1,
)


def task_with(transforms, weights, d=4, K=None):
    K = len(transforms)
    eye = np.eye(d)[:K]
    return SyntheticTask(d, eye, eye, tuple(transforms), tuple(weights))


def test_make_task_deterministic():
    a = make_task(5, 8, ["sigmoid", "gaussian", "sigmoid"])
    b = make_task(5, 8, ["sigmoid", "gaussian", "sigmoid"])
    assert a.dumps() == b.dumps()
    np.testing.assert_array_equal(a.directions, b.directions)
    assert a.dumps() != make_task(6, 8, ["sigmoid", "gaussian", "sigmoid"]).dumps()


def test_make_task_shapes_and_orientation():
    t = make_task(1, 16, ["sigmoid", "gaussian"])
    assert (t.K, t.d) == (2, 16)
    np.testing.assert_allclose(np.linalg.norm(t.directions, axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(t.waves, axis=1), 1.0)
    sig, gau = t.target_transforms
    assert sig.slope > 0
    lo, hi = t.reachable_range()[1]
    assert lo < gau.mean < hi


@pytest.mark.parametrize("kinds", [["sigmoid"], [], ["sigmoid", "cosine"]])
def test_bad_kind_lists(kinds):
    with pytest.raises(BadKindList):
        make_task(0, 4, kinds)


def test_assay_bound_over_many_genomes():
    t = make_task(3, 16, ["sigmoid", "gaussian", "gaussian"])
    G = np.random.default_rng(0).random((100_000, 16))
    A = t.assays(G)
    linear = G @ t.directions.T
    assert np.all(np.abs(A) <= np.abs(linear) + 0.3 + 1e-12)
    rng = t.reachable_range()
    assert np.all(A >= rng[:, 0] - 1e-12) and np.all(A <= rng[:, 1] + 1e-12)


def test_criteria_of_mixed_task():
    t = make_task(0, 8, ["sigmoid", "gaussian"])
    c = criteria_of(t)
    assert c.kinds == (ObjectiveKind.MAXIMIZE, ObjectiveKind.RANGE)
    assert c.targets == (SENTINEL, t.target_transforms[1].mean)


def test_criteria_rule_table():
    t = task_with(
        [TransformParams.gaussian(3.0, 0.0), TransformParams.sigmoid(2.0, 0.0), TransformParams.sigmoid(-1.0, 0.5)],
        [1, 1, 1],
    )
    c = criteria_of(t)
    assert c.targets == (3.0, SENTINEL, -SENTINEL)
    assert c.kinds == (ObjectiveKind.RANGE, ObjectiveKind.MAXIMIZE, ObjectiveKind.MINIMIZE)


def test_profile_of_reproduces_criteria():
    t = task_with(
        [TransformParams.gaussian(0.75, math.log(0.25)), TransformParams.sigmoid(2.0, 0.0), TransformParams.sigmoid(-1.0, 0.5)],
        [1, 2, 3],
    )
    assert criteria_from_profile(profile_of(t)).targets == criteria_of(t).targets


def test_E_all_half_is_half():
    # Sigmoid factors sit exactly on their midpoints at the zero genome.
    t = task_with([TransformParams.sigmoid(3.0, 0.0), TransformParams.sigmoid(-1.0, 0.0)], [0.7, 2.9])
    assert evaluate_E(t, np.zeros(4)) == pytest.approx(0.5, abs=1e-15)


def test_E_soft_min():
    eps = 1e-4
    # First factor is eps at the zero genome; the second is 1.
    x0 = math.log(1 / eps - 1) / 5.0
    t = task_with([TransformParams.sigmoid(5.0, x0), TransformParams.gaussian(0.0, 0.0)], [1.0, 3.0])
    E = evaluate_E(t, np.zeros(4))
    assert E < eps ** (1.0 / 4.0) + 1e-15


def test_E_log_domain_oracle():
    t = make_task(9, 16, ["sigmoid", "sigmoid", "gaussian"])
    G = np.random.default_rng(1).random((200, 16))
    A = t.assays(G)
    w = np.array(t.target_weights)
    for g, a, e in zip(G, A, evaluate_E(t, G)):
        logs = []
        for tp, x in zip(t.target_transforms, a):
            if tp.kind is TransformKind.SIGMOID:
                logs.append(-math.log1p(math.exp(-tp.slope * (x - tp.midpoint))))
            else:
                logs.append(-((x - tp.mean) ** 2) / (2 * math.exp(2 * tp.log_width)))
        assert abs(e - math.exp(float(np.dot(w, logs)) / w.sum())) < 1e-12
        assert 0 < e <= 1


def test_E_dimension_mismatch():
    t = make_task(0, 8)
    with pytest.raises(DimensionMismatch):
        evaluate_E(t, DesignPoint(0, (0.5,) * 3, (0.0, 0.0), (0.0, 0.0)))


def test_task_json_round_trip():
    t = make_task(4, 6, ["gaussian", "sigmoid"])
    import json

    back = SyntheticTask.from_dict(json.loads(t.dumps()))
    assert back.dumps() == t.dumps()
    G = np.random.default_rng(0).random((10, 6))
    np.testing.assert_array_equal(back.evaluate(G), t.evaluate(G))


def test_make_cohort_layout():
    t = make_task(0, 8, ["sigmoid", "sigmoid", "gaussian"])
    c = make_cohort(t, n=95, cycles=10, seed=1)
    assert len(c) == 95
    assert (c.K, c.N, c.d) == (3, 3, 8)
    assert sorted(set(c.cycles.tolist())) == list(range(1, 11))
    np.testing.assert_array_equal(c.assay_matrix, t.assays(c.genome_matrix))
    np.testing.assert_array_equal([p.evaluation for p in c.points], t.evaluate(c.genome_matrix))


def identity_generator(fitness, seeds, cfg):
    return GAResult(np.array(seeds), np.asarray(fitness(seeds)), np.zeros(len(seeds), dtype=int))


def test_identity_generator_matches_pool_statistics():
    t = make_task(2, 8)
    cfg = SimConfig(cycles=1, repeats=1, keep_per_cycle=5, train=TrainConfig(epochs=5), restarts=1)
    (trace,) = run_dmta(t, cfg, generator=identity_generator)
    pool = np.random.default_rng(np.random.SeedSequence(0).spawn(1)[0].spawn(2)[0]).random((20, 8))
    E = t.evaluate(pool)
    assert trace.mean_score == pytest.approx(E.mean(), abs=1e-15)
    assert trace.max_score == E.max()


@pytest.fixture(scope="module")
def fast_traces():
    return run_dmta(make_task(7, 8, ["sigmoid", "gaussian"]), FAST)


def test_trace_invariants(fast_traces):
    assert len(fast_traces) == FAST.cycles * FAST.repeats
    for tr in fast_traces:
        assert 0 <= tr.mean_score <= tr.max_score <= 1
        assert tr.pool_size == FAST.seed_pool + tr.iteration * FAST.keep_per_cycle
    for rep in range(FAST.repeats):
        best = [tr.pool_best for tr in fast_traces if tr.repeat_index == rep]
        assert best == sorted(best)


def test_dmta_deterministic(fast_traces, tmp_path):
    again = run_dmta(make_task(7, 8, ["sigmoid", "gaussian"]), FAST)
    write_traces(fast_traces, tmp_path / "a.csv")
    write_traces(again, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_kmeans_and_selected_seeding_run():
    from dataclasses import replace

    t = make_task(7, 8, ["sigmoid", "gaussian"])
    for cfg in (replace(FAST, selection="kmeans"), replace(FAST, seed_with="selected", repeats=1)):
        traces = run_dmta(t, cfg)
        assert len(traces) == cfg.cycles * cfg.repeats


def test_oracle_guidance_untouched_by_training():
    traces = run_dmta(make_task(7, 8), FAST, guidance="oracle")
    assert all(tr.n_pairs == 0 and not tr.untrained for tr in traces)


def test_zero_pair_cycle_uses_untrained_model():
    # A strict dominance mode with a single-point pool cannot produce pairs.
    cfg = SimConfig(
        cycles=1, repeats=1, seed_pool=1, keep_per_cycle=2,
        ga=GAConfig(population_size=10, offspring_size=10, generations=2),
    )
    (tr,) = run_dmta(make_task(1, 4), cfg)
    assert tr.untrained and tr.n_pairs == 0


def test_training_inputs_ignore_ground_truth_transforms():
    t = make_task(11, 8, ["sigmoid", "gaussian"])
    G = np.random.default_rng(0).random((40, 8))
    A = t.assays(G)
    crit = criteria_of(t)
    scrambled = SyntheticTask(
        t.d, t.directions, t.waves,
        (TransformParams.sigmoid(-99.0, 5.0), TransformParams.gaussian(-7.0, 3.0)), (9.0, 0.1),
    )
    # Ground truth is replaced after the criteria are read; pairs depend only on (assays, criteria).
    table_a, pairs_a = training_pairs(A, crit, DominanceMode.STRICT_ALL)
    table_b, pairs_b = training_pairs(scrambled.assays(G), crit, DominanceMode.STRICT_ALL)
    assert pairs_a == pairs_b
    assert table_a.points == table_b.points
    assert pairs_a == domination_pairs(table_a, crit)


def test_aggregate_population_std(tmp_path):
    traces = [
        CycleTrace(1, 0.2, 0.4, 30, 0),
        CycleTrace(1, 0.4, 0.8, 30, 1),
        CycleTrace(2, 0.5, 0.9, 40, 0),
        CycleTrace(2, 0.5, 0.9, 40, 1),
    ]
    rows = aggregate_traces(traces)
    assert rows[0]["mean_of_mean"] == pytest.approx(0.3)
    assert rows[0]["std_of_mean"] == pytest.approx(0.1)
    assert rows[0]["std_of_max"] == pytest.approx(0.2)
    assert rows[1]["std_of_mean"] == 0.0
    write_aggregate(rows, tmp_path / "agg.csv")
    write_traces(traces, tmp_path / "t.csv")
    with open(tmp_path / "agg.csv") as fh:
        assert next(csv.reader(fh)) == AGGREGATE_COLUMNS
    with open(tmp_path / "t.csv") as fh:
        assert next(csv.reader(fh)) == TRACE_COLUMNS


@pytest.mark.parametrize("kw", [{"cycles": 0}, {"selection": "random"}, {"seed_with": "all"}, {"repeats": 0}])
def test_sim_config_invariants(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)
