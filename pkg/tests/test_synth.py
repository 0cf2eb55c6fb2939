import math

import numpy as np
import pytest

from bicomet.brim import bipartite_modularity, brim_converge, random_partition
from bicomet.errors import InputError
from bicomet.graph import load_period_series
from bicomet.synth import (
    AttributePlant,
    CategoryPlan,
    MergeEvent,
    PlantedModel,
    SplitEvent,
    TemporalScript,
    exhaustive_modularity_oracle,
    generate_catalog,
    generate_graph,
    generate_sequence,
    set_partitions,
    write_synthetic_dataset,
)


class TestModelValidation:
    def test_rejects_bad_probabilities(self):
        with pytest.raises(InputError):
            PlantedModel(communities=((2, 2),), p_in=0.2, p_out=0.5)
        with pytest.raises(InputError):
            PlantedModel(communities=((2, 2),), p_in=1.2, p_out=0.0)

    def test_equal_probabilities_allowed(self):
        PlantedModel(communities=((2, 2),), p_in=1.0, p_out=1.0)

    def test_rejects_empty_or_zero_sizes(self):
        with pytest.raises(InputError):
            PlantedModel(communities=(), p_in=0.5, p_out=0.1)
        with pytest.raises(InputError):
            PlantedModel(communities=((0, 2),), p_in=0.5, p_out=0.1)


class TestGenerateGraph:
    def test_separated_communities_are_bicliques(self):
        model = PlantedModel(communities=((2, 2), (2, 2)), p_in=1.0, p_out=0.0, seed=1)
        graph, truth = generate_graph(model)
        assert graph.n_edges == 8
        assert bipartite_modularity(graph, truth) == pytest.approx(0.5, abs=1e-12)

    def test_all_probability_one_is_complete(self):
        model = PlantedModel(communities=((2, 3), (1, 2)), p_in=1.0, p_out=1.0, seed=2)
        graph, _ = generate_graph(model)
        assert graph.n_edges == graph.n_red * graph.n_blue

    def test_edge_count_within_binomial_bounds(self):
        model = PlantedModel(
            communities=((10, 30), (10, 30)), p_in=0.6, p_out=0.05, seed=3
        )
        graph, _ = generate_graph(model)
        within_pairs = 2 * 10 * 30
        cross_pairs = 20 * 60 - within_pairs
        expected = 0.6 * within_pairs + 0.05 * cross_pairs
        variance = 0.6 * 0.4 * within_pairs + 0.05 * 0.95 * cross_pairs
        assert abs(graph.n_edges - expected) <= 3 * math.sqrt(variance)

    def test_seed_determinism(self):
        model = PlantedModel(communities=((3, 5), (4, 4)), p_in=0.7, p_out=0.1, seed=9)
        g1, t1 = generate_graph(model)
        g2, t2 = generate_graph(model)
        assert g1 == g2
        assert t1 == t2

    def test_graph_invariants(self):
        model = PlantedModel(communities=((4, 6), (3, 7)), p_in=0.5, p_out=0.1, seed=4)
        graph, truth = generate_graph(model)
        assert graph.red_degrees.sum() == graph.n_edges
        assert set(truth.nodes) == set(graph.red_nodes) | set(graph.blue_nodes)


class TestGenerateSequence:
    def base_model(self, seed=0):
        return PlantedModel(
            communities=((4, 8), (4, 8), (4, 8)), p_in=0.8, p_out=0.02, seed=seed
        )

    def test_no_churn_identity_lineage(self):
        series, truths, lineage = generate_sequence(
            self.base_model(), TemporalScript(periods=4)
        )
        assert len(series) == 4
        for a, b in zip(truths, truths[1:]):
            assert a.as_dict() == b.as_dict()
        assert len(lineage) == 3 * 3
        assert all(e.community_from == e.community_to for e in lineage)

    def test_scripted_split_adds_branch(self):
        script = TemporalScript(
            periods=5, events=(SplitEvent(period=3, community=1, fraction=0.5),)
        )
        series, truths, lineage = generate_sequence(self.base_model(), script)
        assert truths[2].n_communities == 3
        assert truths[3].n_communities == 4
        out = {}
        for e in lineage:
            out.setdefault((e.period_from, e.community_from), []).append(e)
        fan_out = [k for k, v in out.items() if len(v) == 2]
        assert fan_out == [("p02", 1)]

    def test_scripted_merge_reduces_count(self):
        script = TemporalScript(
            periods=4, events=(MergeEvent(period=2, source=0, target=1),)
        )
        series, truths, lineage = generate_sequence(self.base_model(), script)
        assert truths[1].n_communities == 3
        assert truths[2].n_communities == 2
        incoming = [
            e for e in lineage if e.period_to == "p02"
        ]
        targets = {}
        for e in incoming:
            targets.setdefault(e.community_to, []).append(e)
        assert any(len(v) == 2 for v in targets.values())

    def test_churn_moment(self):
        # a member of a size-s community survives 4 churn rounds w.p. 0.9^4
        model = PlantedModel(
            communities=((10, 90), (10, 90), (10, 90)), p_in=0.5, p_out=0.01, seed=11
        )
        script = TemporalScript(periods=5, churn=0.1)
        _, truths, _ = generate_sequence(model, script)
        first = truths[0].members(0)
        last = truths[-1]
        survivors = sum(1 for n in first if last.as_dict()[n] == 0)
        expected = len(first) * 0.9**4
        # churned nodes can also churn back in; bound loosely at 4 sigma
        sigma = math.sqrt(len(first) * 0.9**4 * (1 - 0.9**4))
        assert abs(survivors - expected) <= 4 * sigma + 3

    def test_event_on_dead_community_rejected(self):
        script = TemporalScript(
            periods=4,
            events=(
                MergeEvent(period=2, source=0, target=1),
                SplitEvent(period=3, community=0),
            ),
        )
        with pytest.raises(InputError, match="not alive"):
            generate_sequence(self.base_model(), script)

    def test_determinism(self):
        script = TemporalScript(periods=3, churn=0.05)
        a = generate_sequence(self.base_model(7), script)
        b = generate_sequence(self.base_model(7), script)
        assert list(a[0]) == list(b[0])
        assert a[1] == b[1]
        assert a[2] == b[2]


class TestCatalogGeneration:
    def test_plant_penetration(self):
        model = PlantedModel(communities=((5, 50), (5, 50)), p_in=0.5, p_out=0.05, seed=2)
        _, truth = generate_graph(model)
        plans = [CategoryPlan(name="sector", side="blue", values=("A", "B", "C", "D"))]
        plants = [AttributePlant(category="sector", value="Z", community=0, penetration=1.0)]
        catalog = generate_catalog(truth, plans, seed=3, plants=plants)
        assigned = catalog.assignments("sector")
        members = truth.blue_members(0)
        assert all(assigned[n] == "Z" for n in members)
        others = set(assigned) - members
        assert all(assigned[n] != "Z" for n in others)

    def test_unknown_plant_category_rejected(self):
        model = PlantedModel(communities=((2, 2),), p_in=1.0, p_out=0.0)
        _, truth = generate_graph(model)
        plans = [CategoryPlan(name="sector", side="blue", values=("A",))]
        plants = [AttributePlant(category="region", value="X", community=0, penetration=0.5)]
        with pytest.raises(InputError, match="unknown category"):
            generate_catalog(truth, plans, seed=0, plants=plants)


class TestSetPartitions:
    @pytest.mark.parametrize("n,bell", [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52)])
    def test_bell_numbers(self, n, bell):
        assert sum(1 for _ in set_partitions(n)) == bell

    def test_labels_are_restricted_growth(self):
        for labels in set_partitions(5):
            assert labels[0] == 0
            for i in range(1, 5):
                assert labels[i] <= max(labels[:i]) + 1


class TestOracle:
    def test_two_single_edges(self):
        model = PlantedModel(communities=((1, 1), (1, 1)), p_in=1.0, p_out=0.0)
        graph, _ = generate_graph(model)
        best_q, best = exhaustive_modularity_oracle(graph)
        assert best_q == pytest.approx(0.5, abs=1e-12)
        assert best.n_communities == 2

    def test_complete_two_by_two(self):
        model = PlantedModel(communities=((2, 2),), p_in=1.0, p_out=0.0)
        graph, _ = generate_graph(model)
        best_q, _ = exhaustive_modularity_oracle(graph)
        assert best_q == pytest.approx(0.0, abs=1e-12)

    def test_three_edge_path_regression(self):
        from bicomet.graph import BipartiteGraph

        graph = BipartiteGraph([("b1", "f1"), ("b2", "f1"), ("b2", "f2")])
        best_q, _ = exhaustive_modularity_oracle(graph)
        assert best_q == pytest.approx(2 / 9, abs=1e-12)

    def test_cap_enforced(self):
        model = PlantedModel(communities=((7, 7),), p_in=0.5, p_out=0.0, seed=1)
        graph, _ = generate_graph(model)
        with pytest.raises(InputError, match="cap"):
            exhaustive_modularity_oracle(graph)

    def test_oracle_dominates_heuristic(self):
        rng = np.random.default_rng(5)
        for seed in range(20):
            model = PlantedModel(
                communities=((2, 2), (1, 3)), p_in=0.8, p_out=0.2, seed=seed
            )
            graph, _ = generate_graph(model)
            if graph.n_edges == 0:
                continue
            best_q, _ = exhaustive_modularity_oracle(graph)
            result = brim_converge(graph, random_partition(graph, 4, rng))
            assert result.modularity <= best_q + 1e-12


class TestDatasetFiles:
    def test_round_trip_through_loaders(self, tmp_path):
        model = PlantedModel(
            communities=((3, 6), (3, 6)), p_in=0.9, p_out=0.05, seed=8
        )
        script = TemporalScript(periods=3)
        series, truths, lineage = generate_sequence(model, script)
        plans = [CategoryPlan(name="sector", side="blue", values=("A", "B"))]
        catalog = generate_catalog(truths[0], plans, seed=8)
        manifest = write_synthetic_dataset(
            tmp_path / "data", series, truths, lineage, catalog=catalog
        )
        loaded = load_period_series(manifest)
        assert loaded.labels == series.labels
        for (_, g1), (_, g2) in zip(loaded, series):
            assert g1 == g2
        assert (tmp_path / "data" / "ground_truth.csv").exists()
        assert (tmp_path / "data" / "lineage.csv").exists()
        assert (tmp_path / "data" / "attributes.csv").exists()

    def test_isolated_nodes_survive_round_trip(self, tmp_path):
        # a node can end up with no edges; the node list must preserve it
        model = PlantedModel(communities=((2, 3),), p_in=0.35, p_out=0.0, seed=21)
        series, truths, lineage = generate_sequence(model, TemporalScript(periods=1))
        _, graph = series.labels[0], series[0][1]
        manifest = write_synthetic_dataset(tmp_path / "d", series, truths, lineage)
        loaded = load_period_series(manifest)
        assert loaded[0][1].red_nodes == graph.red_nodes
        assert loaded[0][1].blue_nodes == graph.blue_nodes
