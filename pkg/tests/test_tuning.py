import json

import numpy as np
import pytest

from kgrank.dynamics import PageRankConfig
from kgrank.errors import InputError
from kgrank.evaluation import UserRelevance, nmrg_corpus
from kgrank.recommend import FilterConfig, Seed, SeedSpec, recommend
from kgrank.tuning import (
    ParamSample,
    nmrg_evaluator,
    random_search,
    sample_parameters,
    teleport_sweep,
)

from synthetic import community_loyal_users, planted_community_kg


class TestSampleParameters:
    def test_single_block_column_is_one(self):
        rng = np.random.default_rng(0)
        sample = sample_parameters([("t1", "s1")], rng)
        assert sample.salience.blocks[("t1", "s1")] == 1.0

    def test_columns_sum_to_one(self, toy_graph):
        rng = np.random.default_rng(1)
        pattern = toy_graph.structure_block_keys()
        for _ in range(50):
            sample = sample_parameters(pattern, rng)
            columns = {}
            for (t, s), value in sample.salience.blocks.items():
                columns.setdefault(s, []).append(value)
            for values in columns.values():
                assert abs(sum(values) - 1.0) <= 1e-12
                assert all(v >= 0 for v in values)
            assert 0 < sample.rho < 1

    def test_first_toy_column_has_dimension_three(self, toy_graph):
        # blocks with source f-act: two couplings plus the acting layer
        pattern = toy_graph.structure_block_keys()
        targets = [t for t, s in pattern if s == "f-act"]
        assert len(targets) == 3
        sample = sample_parameters(pattern, np.random.default_rng(2))
        values = [sample.salience.blocks[(t, "f-act")] for t in targets]
        assert abs(sum(values) - 1.0) <= 1e-12

    def test_flat_dirichlet_component_means(self):
        rng = np.random.default_rng(3)
        pattern = [("a", "col"), ("b", "col"), ("c", "col")]
        draws = np.array(
            [
                [
                    sample_parameters(pattern, rng).salience.blocks[(t, "col")]
                    for t in ("a", "b", "c")
                ]
                for _ in range(10_000)
            ]
        )
        np.testing.assert_allclose(draws.mean(axis=0), [1 / 3] * 3, atol=0.01)

    def test_same_seed_reproduces_sample(self, toy_graph):
        pattern = toy_graph.structure_block_keys()
        first = sample_parameters(pattern, np.random.default_rng(9))
        second = sample_parameters(pattern, np.random.default_rng(9))
        assert first.salience.blocks == second.salience.blocks
        assert first.rho == second.rho

    def test_empty_pattern_rejected(self):
        with pytest.raises(InputError):
            sample_parameters([], np.random.default_rng(0))


def scripted_evaluator(scores_by_rho):
    def evaluate(params: ParamSample):
        return scores_by_rho(params)

    return evaluate


class TestRandomSearch:
    def test_single_trial_is_best(self, toy_graph):
        pattern = toy_graph.structure_block_keys()
        result = random_search(
            pattern, 1,
            scripted_evaluator(lambda p: {1: 1.0, 10: 2.0, 20: 3.0}),
            np.random.default_rng(0),
        )
        assert len(result.trials) == 1
        assert result.best is result.trials[0]
        assert result.trajectory == [2.0]

    def test_cumulative_best_is_monotone(self, toy_graph):
        pattern = toy_graph.structure_block_keys()
        result = random_search(
            pattern, 40,
            scripted_evaluator(lambda p: {10: p.rho * 100.0}),
            np.random.default_rng(1),
        )
        assert all(
            a <= b + 1e-12 for a, b in zip(result.trajectory, result.trajectory[1:])
        )
        best_rho = max(t.params.rho for t in result.trials)
        assert result.best.scores[10] == pytest.approx(best_rho * 100.0)

    def test_reproducible_with_same_seed(self, toy_graph):
        pattern = toy_graph.structure_block_keys()
        evaluator = scripted_evaluator(lambda p: {10: p.rho})
        first = random_search(pattern, 5, evaluator, np.random.default_rng(7))
        second = random_search(pattern, 5, evaluator, np.random.default_rng(7))
        for a, b in zip(first.trials, second.trials):
            assert a.params.rng_seed == b.params.rng_seed
            assert a.params.rho == b.params.rho
            assert a.params.salience.blocks == b.params.salience.blocks

    def test_evaluator_failure_recorded_and_search_continues(self, toy_graph):
        pattern = toy_graph.structure_block_keys()
        calls = {"n": 0}

        def sometimes_fails(params):
            calls["n"] += 1
            if calls["n"] % 2 == 1:
                raise RuntimeError("flaky")
            return {10: params.rho}

        result = random_search(
            pattern, 6, sometimes_fails, np.random.default_rng(2)
        )
        assert len(result.trials) == 6
        failed = [t for t in result.trials if t.error is not None]
        assert len(failed) == 3
        assert result.best is not None

    def test_incremental_log(self, toy_graph, tmp_path):
        pattern = toy_graph.structure_block_keys()
        log_path = tmp_path / "trials.jsonl"
        random_search(
            pattern, 4,
            scripted_evaluator(lambda p: {10: p.rho}),
            np.random.default_rng(3),
            log_path=log_path,
        )
        lines = log_path.read_text().strip().splitlines()
        assert len(lines) == 4
        for line in lines:
            record = json.loads(line)
            assert {"trial_id", "rng_seed", "rho", "salience", "scores"} <= set(record)

    def test_zero_trials_rejected(self, toy_graph):
        with pytest.raises(InputError):
            random_search(
                toy_graph.structure_block_keys(), 0,
                scripted_evaluator(lambda p: {}), np.random.default_rng(0),
            )


class TestTeleportSweep:
    def test_single_point(self, toy_graph):
        base = sample_parameters(
            toy_graph.structure_block_keys(), np.random.default_rng(0)
        )
        result = teleport_sweep(
            base, [0.3], scripted_evaluator(lambda p: {10: p.rho})
        )
        assert len(result.points) == 1
        assert result.best_rho == 0.3

    def test_argmax_matches_reevaluation(self, toy_graph):
        base = sample_parameters(
            toy_graph.structure_block_keys(), np.random.default_rng(1)
        )
        objective = lambda rho: -(rho - 0.12) ** 2
        result = teleport_sweep(
            base,
            [0.05, 0.1, 0.12, 0.2, 0.5],
            scripted_evaluator(lambda p: {10: objective(p.rho)}),
        )
        best = max(result.points, key=lambda point: objective(point.rho))
        assert result.best_rho == best.rho == 0.12

    def test_salience_is_fixed_across_points(self, toy_graph):
        base = sample_parameters(
            toy_graph.structure_block_keys(), np.random.default_rng(2)
        )
        seen = []
        result = teleport_sweep(
            base, [0.1, 0.4],
            scripted_evaluator(
                lambda p: seen.append(p.salience.blocks) or {10: 0.0}
            ),
        )
        assert seen[0] == seen[1] == base.salience.blocks

    def test_empty_grid_rejected(self, toy_graph):
        base = sample_parameters(
            toy_graph.structure_block_keys(), np.random.default_rng(3)
        )
        with pytest.raises(InputError):
            teleport_sweep(base, [], scripted_evaluator(lambda p: {10: 0.0}))

    def test_out_of_range_grid_rejected(self, toy_graph):
        base = sample_parameters(
            toy_graph.structure_block_keys(), np.random.default_rng(3)
        )
        with pytest.raises(InputError):
            teleport_sweep(base, [0.0, 0.5], scripted_evaluator(lambda p: {10: 0.0}))


@pytest.fixture(scope="module")
def small_planted():
    rng = np.random.default_rng(11)
    graph, communities, popularity = planted_community_kg(
        rng, n_communities=4, movies_per=6, people_per=4, keywords_per=3
    )
    users_raw = community_loyal_users(rng, communities, n_users=12)
    users = [UserRelevance(u, items) for u, items in users_raw.items()]
    return graph, users


class TestNmrgEvaluator:
    def test_two_stage_equals_on_demand(self, small_planted):
        graph, users = small_planted
        filter_config = FilterConfig(threshold=-10.0, top_k=30)
        evaluator = nmrg_evaluator(
            graph, users, ("movie",), filter_config, cutoffs=(10,), max_users=6
        )
        params = sample_parameters(
            graph.structure_block_keys(), np.random.default_rng(4)
        )
        scores = evaluator(params)

        config = PageRankConfig(rho=params.rho, tolerance=1e-10)
        ordered = sorted(users, key=lambda u: u.user_id)[:6]
        seed_items = sorted({m for u in ordered for m in u.items})
        on_demand = {
            item: recommend(
                graph, params.salience, SeedSpec([Seed(item)]), config,
                filter_config, ("movie",),
            )
            for item in seed_items
        }
        report = nmrg_corpus(ordered, on_demand, (10,))
        assert scores[10] == report.cutoffs[10].mean

    def test_search_on_planted_structure_beats_median(self, small_planted):
        graph, users = small_planted
        evaluator = nmrg_evaluator(
            graph, users, ("movie",),
            FilterConfig(threshold=-10.0, top_k=30),
            cutoffs=(10,), max_users=5, tolerance=1e-8,
        )
        result = random_search(
            graph.structure_block_keys(), 8, evaluator, np.random.default_rng(5)
        )
        values = sorted(t.scores[10] for t in result.trials if t.scores)
        median = values[len(values) // 2]
        assert result.best.scores[10] >= median
