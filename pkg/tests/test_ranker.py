"""
Tests for path extension, scoring, aggregation and hop expansion.
"""

import zlib
from collections import defaultdict

import numpy as np
import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.errors import ConfigError, RankerError
from dxpath.kg import Concept, KnowledgeGraph, RelationType, Triple
from dxpath.ranker import (
    PathState,
    RankerConfig,
    aggregate_and_select,
    encode_input,
    explore,
    extend_path,
    extend_paths,
    init_paths,
    paths_from_record,
    score_path_multiattn,
    score_path_triattn,
    score_paths,
    select_top,
)

from .conftest import BACTERIAL, COUGH, FEVER, LEUKOCYTOSIS, PNEUMONIA, SEPSIS

RELATIONS = ["associated with", "cause of", "may cause"]


def stub_score(state):
    """Deterministic pseudo-score of a path from its key."""
    return float(zlib.crc32(repr(state.key).encode("utf-8")) % 10007)


def stub_scorer(candidates):
    return np.array([stub_score(c) for c in candidates])


def random_graph(seed, size=8):
    """Random graph with at most one relation per ordered node pair."""
    rng = np.random.default_rng(seed)
    cuis = [f"C{i:07d}" for i in range(1, size + 1)]
    concepts = {c: Concept(c, (f"node {i}",), ("T047",)) for i, c in enumerate(cuis)}
    triples = []
    for src in cuis:
        degree = int(rng.integers(0, 4))
        others = [c for c in cuis if c != src]
        for j in rng.choice(len(others), size=degree, replace=False):
            rel = RELATIONS[int(rng.integers(len(RELATIONS)))]
            triples.append(Triple(src, RelationType(rel), others[int(j)]))
    return KnowledgeGraph(concepts, triples, RELATIONS), cuis


def exhaustive_top(graph, source, top_n):
    """Final nodes of a two-hop run that keeps every first-hop node."""
    first = [PathState(source, (Triple(source, rel, dst),), terminated=rel.is_self_loop)
             for rel, dst in graph.neighbors(source)]
    candidates = []
    for state in first:
        if state.terminated:
            candidates.append(state)
            continue
        for rel, dst in graph.neighbors(state.end):
            candidates.append(PathState(source, state.hops + (Triple(state.end, rel, dst),)))
    totals = defaultdict(float)
    for state in candidates:
        totals[state.end] += stub_score(state)
    return sorted(totals, key=lambda cui: (-totals[cui], cui))[:top_n]


class TestRankerConfig:
    """Tests for config validation."""

    def test_invalid_values(self):
        """top_n, max_hops and variant are checked."""
        with pytest.raises(ConfigError):
            RankerConfig(top_n=0)
        with pytest.raises(ConfigError):
            RankerConfig(max_hops=0)
        with pytest.raises(ConfigError):
            RankerConfig(variant="bilinear")


class TestExtension:
    """Tests for path initialization and extension."""

    def test_init_paths_dedupes_sources(self, sample_graph):
        """One zero-hop path per distinct source, sorted."""
        states = init_paths([COUGH, FEVER, COUGH], sample_graph)

        assert [s.source for s in states] == sorted([COUGH, FEVER])
        assert all(len(s) == 0 and s.end == s.source for s in states)

    def test_init_paths_empty(self, sample_graph):
        """No sources, no exploration."""
        with pytest.raises(RankerError):
            init_paths([], sample_graph)

    def test_extend_path(self, sample_graph):
        """A hop appends the edge and keeps the path open."""
        state = init_paths([FEVER], sample_graph)[0]

        extended = extend_path(state, "may cause", PNEUMONIA, sample_graph)

        assert extended.nodes == [FEVER, PNEUMONIA]
        assert extended.relations == ["may cause"]
        assert not extended.terminated

    def test_self_loop_terminates(self, sample_graph):
        """A self hop terminates the path, which can then not be extended."""
        state = init_paths([FEVER], sample_graph)[0]
        stopped = extend_path(state, "self", FEVER, sample_graph)

        assert stopped.terminated
        with pytest.raises(RankerError):
            extend_path(stopped, "may cause", PNEUMONIA, sample_graph)

    def test_missing_edge(self, sample_graph):
        """Only graph edges can be followed."""
        state = init_paths([COUGH], sample_graph)[0]

        with pytest.raises(RankerError):
            extend_path(state, "may cause", SEPSIS, sample_graph)

    def test_extend_paths_enumerates_neighbors(self, sample_graph):
        """Every out-edge plus the self loop, in neighbor order."""
        states = init_paths([FEVER], sample_graph)

        result = extend_paths(states, sample_graph)

        assert [s.key for s in result] == [
            (FEVER, ("may cause", PNEUMONIA)),
            (FEVER, ("may cause", SEPSIS)),
            (FEVER, ("self", FEVER)),
        ]


class TestAggregation:
    """Tests for per-node aggregation and selection."""

    def _candidates(self):
        return [
            PathState(FEVER, (Triple(FEVER, RelationType("may cause"), PNEUMONIA),)),
            PathState(FEVER, (Triple(FEVER, RelationType("may cause"), SEPSIS),)),
            PathState(COUGH, (Triple(COUGH, RelationType("associated with"), PNEUMONIA),)),
            PathState(COUGH, (Triple(COUGH, RelationType("self"), COUGH),), terminated=True),
        ]

    def test_scores_summed_per_node(self):
        """Node score is the sum of its paths' scores; beta is their softmax."""
        ranked = aggregate_and_select(self._candidates(), np.array([1.0, 0.5, 2.0, -1.0]), 2)

        assert ranked.node_ids == sorted([COUGH, PNEUMONIA, SEPSIS])
        node = dict(zip(ranked.node_ids, ranked.node_scores.data))
        assert node[PNEUMONIA] == pytest.approx(3.0)
        assert ranked.beta.data.sum() == pytest.approx(1.0)
        assert ranked.selected == (PNEUMONIA, SEPSIS)

    def test_witness_is_best_path(self):
        """Each selected node survives through its highest-scoring path."""
        ranked = aggregate_and_select(self._candidates(), np.array([1.0, 0.5, 2.0, -1.0]), 2)

        assert ranked.witnesses[PNEUMONIA] == 2
        assert [s.source for s in ranked.survivors()] == [COUGH, FEVER]

    def test_ties_break_on_cui(self):
        """Equal node scores keep the smaller CUI."""
        assert select_top(["C0000002", "C0000001", "C0000003"], np.array([1.0, 1.0, 0.5]), 2) == [
            "C0000001", "C0000002",
        ]

    def test_selection_invariant_under_shift(self):
        """Adding a constant to every node score changes neither beta nor the selection."""
        cands = [self._candidates()[i] for i in (0, 1, 3)]
        scores = np.array([0.3, -0.7, 1.1])

        base = aggregate_and_select(cands, scores, 2)
        shifted = aggregate_and_select(cands, scores + 50.0, 2)

        assert base.selected == shifted.selected
        assert np.allclose(base.beta.data, shifted.beta.data)

    def test_score_count_mismatch(self):
        """One score per candidate."""
        with pytest.raises(RankerError):
            aggregate_and_select(self._candidates(), np.zeros(3), 2)

    def test_empty_candidates(self):
        """Nothing to aggregate."""
        with pytest.raises(RankerError):
            aggregate_and_select([], np.zeros(0), 2)


class TestExplore:
    """Tests for iterative hop expansion."""

    @pytest.mark.parametrize("seed", range(20))
    def test_beam_matches_exhaustive_when_nothing_is_pruned(self, seed):
        """With top_n above every out-degree the beam equals exhaustive search."""
        graph, cuis = random_graph(seed)
        source = cuis[0]
        top_n = max(len(graph.neighbors(c)) for c in cuis) + 1

        result = explore(graph, None, [source], RankerConfig(top_n=top_n, max_hops=2), scorer=stub_scorer)

        assert list(result.final_nodes) == exhaustive_top(graph, source, top_n)

    def test_terminated_paths_are_carried(self, sample_graph):
        """A self-terminated survivor reappears among the next hop's candidates."""
        result = explore(sample_graph, None, [FEVER], RankerConfig(top_n=3, max_hops=2), scorer=stub_scorer)

        second = result.hops[1].candidates
        assert any(s.terminated and len(s) == 1 and s.end == FEVER for s in second)

    def test_stops_when_all_terminated(self, sample_graph):
        """A sink source ends after one hop."""
        result = explore(sample_graph, None, [BACTERIAL], RankerConfig(top_n=2, max_hops=3), scorer=stub_scorer)

        assert len(result.hops) == 1
        assert result.final_nodes == (BACTERIAL,)

    def test_needs_model_or_scorer(self, sample_graph):
        """Exploration needs something to score with."""
        with pytest.raises(RankerError):
            explore(sample_graph, None, [FEVER], RankerConfig())

    def test_record_round_trip(self, sample_graph):
        """Witness paths read back from a retrieval record in rank order."""
        result = explore(sample_graph, None, [FEVER, COUGH], RankerConfig(top_n=2, max_hops=2), scorer=stub_scorer)

        paths = paths_from_record(result.to_record("n1"))

        assert [p.nodes[-1] for p in paths] == list(result.final_nodes)
        assert [list(p.nodes) for p in paths] == [s.nodes for s in result.witness_paths()]


class TestModelScoring:
    """Tests for scoring with a real model."""

    @pytest.mark.parametrize("variant", ["triattn", "multiattn"])
    def test_explore_with_model(self, variant, make_model, sample_graph, provider):
        """Model-scored exploration yields a distribution per hop and top_n nodes."""
        model = make_model(variant)
        enc = encode_input(model, provider, sample_graph, "fever and cough", [FEVER, COUGH], note_id="n1")

        result = explore(sample_graph, enc, [FEVER, COUGH], RankerConfig(top_n=2, max_hops=2), model)

        assert len(result.final_nodes) == 2
        for ranked in result.hops:
            assert ranked.beta.data.sum() == pytest.approx(1.0)
            assert ranked.scores.shape == (len(ranked.candidates),)

    def test_exploration_is_deterministic(self, make_model, sample_graph, provider):
        """Same model and input, same records."""
        records = []
        for _ in range(2):
            model = make_model()
            enc = encode_input(model, provider, sample_graph, "leukocytosis", [LEUKOCYTOSIS])
            records.append(explore(sample_graph, enc, [LEUKOCYTOSIS], RankerConfig(top_n=2), model).to_record("x"))

        assert records[0] == records[1]

    def test_single_path_scorers_match_batch(self, make_model, sample_graph, provider):
        """Scoring one path alone equals its entry in the batch."""
        for variant, single in (("triattn", score_path_triattn), ("multiattn", score_path_multiattn)):
            model = make_model(variant)
            enc = encode_input(model, provider, sample_graph, "fever", [FEVER])
            encodings = enc.session.encode([FEVER])
            states = extend_paths(init_paths([FEVER], sample_graph, enc, model), sample_graph, model, encodings)

            batch = score_paths(enc, states, model)

            for j, state in enumerate(states):
                assert single(enc, state, model).item() == pytest.approx(batch.data[j])

    def test_wrong_single_scorer(self, make_model, sample_graph, provider):
        """The single-path scorer must match the model variant."""
        model = make_model("triattn")
        enc = encode_input(model, provider, sample_graph, "fever", [FEVER])
        state = init_paths([FEVER], sample_graph, enc, model)[0]

        with pytest.raises(RankerError):
            score_path_multiattn(enc, state, model)

    def test_encode_input_rejects_empty(self, make_model, sample_graph, provider):
        """Empty text or no sources cannot be encoded."""
        model = make_model()
        with pytest.raises(RankerError):
            encode_input(model, provider, sample_graph, "  ", [FEVER])
        with pytest.raises(RankerError):
            encode_input(model, provider, sample_graph, "fever", [])
