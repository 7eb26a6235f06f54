"""
Tests for concept documents, providers and the GIN encoder.
"""

import json
import numpy as np
import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.checkpoint import write_arrays
from dxpath.encoder import GinEncoder, build_concept_doc, encode_concepts, stack_gin
from dxpath.errors import ConfigError, EncodingError
from dxpath.kg import Concept, one_hop_subgraph
from dxpath.model import NoteSession
from dxpath.numerics import Tape, backward, check_gradients, tsum
from dxpath.providers import CachedProvider, HashingProvider

from .conftest import COUGH, FEVER, LEUKOCYTOSIS, PNEUMONIA, SEPSIS


class TestConceptDocs:
    """Tests for concept name documents and base vectors."""

    def test_doc_joins_names(self, sample_graph):
        """Names in stored order, joined with [SEP]."""
        doc = build_concept_doc(sample_graph.concept(FEVER))

        assert doc.doc == "Fever [SEP] pyrexia [SEP] febrile"

    def test_concept_without_names(self):
        """A concept needs at least one name."""
        with pytest.raises(EncodingError):
            build_concept_doc(Concept("C0000001", ()))

    def test_weights_scale_mentioned_concepts(self, sample_graph, provider):
        """W_CUI scales listed concepts; others keep weight 1."""
        concepts = [sample_graph.concept(FEVER), sample_graph.concept(COUGH)]
        plain = encode_concepts(provider, concepts, 8)
        weighted = encode_concepts(provider, concepts, 8, {FEVER: 2.5})

        assert np.allclose(weighted[FEVER], 2.5 * plain[FEVER])
        assert np.allclose(weighted[COUGH], plain[COUGH])

    def test_dim_mismatch(self, sample_graph, provider):
        """Provider and configured dims must agree."""
        with pytest.raises(ConfigError):
            encode_concepts(provider, [sample_graph.concept(FEVER)], 16)


class TestProviders:
    """Tests for embedding providers."""

    def test_hashing_is_normalized_and_deterministic(self):
        """Unit vectors, identical across instances with the same seed."""
        a = HashingProvider(16, seed=3).embed("chest pain")
        b = HashingProvider(16, seed=3).embed("Chest  pain!")

        assert np.linalg.norm(a) == pytest.approx(1.0)
        assert np.array_equal(a, b)

    def test_hashing_seed_changes_vectors(self):
        """Different seeds give different projections."""
        a = HashingProvider(16, seed=3).embed("chest pain")
        b = HashingProvider(16, seed=4).embed("chest pain")

        assert not np.allclose(a, b)

    def test_hashing_empty_text(self, provider):
        """Punctuation-only text has nothing to embed."""
        with pytest.raises(EncodingError):
            provider.embed("...")

    def test_cached_jsonl_with_fallback(self, tmp_path, sample_graph, provider):
        """Cached concepts are used; misses fall back."""
        path = tmp_path / "cache.jsonl"
        path.write_text(
            json.dumps({"cui": FEVER, "vector": [3.0] + [0.0] * 7}) + "\n"
            + json.dumps({"text": "note", "vector": [0.0, 2.0] + [0.0] * 6}) + "\n",
            encoding="utf-8",
        )
        cached = CachedProvider(path, fallback=provider)

        assert cached.dim == 8
        assert np.array_equal(cached.embed_concept(sample_graph.concept(FEVER)), np.eye(8)[0])
        assert np.array_equal(cached.embed("note"), np.eye(8)[1])
        assert np.allclose(cached.embed_concept(sample_graph.concept(COUGH)),
                           provider.embed_concept(sample_graph.concept(COUGH)))

    def test_cached_miss_without_fallback(self, tmp_path, sample_graph):
        """Without a fallback a miss is an error."""
        path = tmp_path / "cache.jsonl"
        path.write_text(json.dumps({"cui": FEVER, "vector": [1.0, 0.0]}) + "\n", encoding="utf-8")
        cached = CachedProvider(path)

        with pytest.raises(EncodingError):
            cached.embed_concept(sample_graph.concept(COUGH))

    def test_cached_mixed_dims(self, tmp_path):
        """All cached vectors share one dim."""
        path = tmp_path / "cache.jsonl"
        path.write_text(
            json.dumps({"cui": FEVER, "vector": [1.0, 0.0]}) + "\n"
            + json.dumps({"cui": COUGH, "vector": [1.0, 0.0, 0.0]}) + "\n",
            encoding="utf-8",
        )

        with pytest.raises(EncodingError):
            CachedProvider(path)

    def test_cached_checkpoint_directory(self, tmp_path, sample_graph):
        """A checkpoint directory of CUI-named arrays is a valid cache."""
        write_arrays(tmp_path / "emb", {FEVER: np.array([0.0, 0.0, 5.0])})

        cached = CachedProvider(tmp_path / "emb")

        assert np.array_equal(cached.embed_concept(sample_graph.concept(FEVER)), [0.0, 0.0, 1.0])


class TestGin:
    """Tests for the GIN encoder."""

    def _base(self, sample_graph, provider, subgraph):
        return {cui: provider.embed_concept(sample_graph.concept(cui)) for cui in subgraph.nodes}

    def test_stacked_dim(self, sample_graph, provider):
        """K layers stack to K * D per node."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 2, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [FEVER])

        enc = encoder(sub, self._base(sample_graph, provider, sub), sample_graph.relation_index)

        assert enc.stacked.shape == (3, 16)
        assert enc.stacked_dim == encoder.output_dim == 16
        assert enc.nodes == tuple(sorted([FEVER, PNEUMONIA, SEPSIS]))

    def test_identity_layer_without_messages(self, sample_graph, provider):
        """With identity MLPs, eps = 0 and no incoming edges, a node keeps its base vector."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 1, np.random.default_rng(0))
        encoder.layers[0].mlp.init_identity()
        sub = one_hop_subgraph(sample_graph, [FEVER])
        base = self._base(sample_graph, provider, sub)

        enc = encoder(sub, base, sample_graph.relation_index)

        assert np.allclose(enc.row(FEVER).data, base[FEVER])
        assert not np.allclose(enc.row(PNEUMONIA).data, base[PNEUMONIA])

    def test_messages_flow_along_edges(self, sample_graph, provider):
        """Changing a source's vector changes its targets' encodings, not unrelated nodes."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 1, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [COUGH, LEUKOCYTOSIS])
        base = self._base(sample_graph, provider, sub)
        before = encoder(sub, base, sample_graph.relation_index)

        base[LEUKOCYTOSIS] = -base[LEUKOCYTOSIS]
        after = encoder(sub, base, sample_graph.relation_index)

        assert np.allclose(before.row(PNEUMONIA).data, after.row(PNEUMONIA).data)
        assert np.allclose(before.row(COUGH).data, after.row(COUGH).data)
        assert not np.allclose(before.row(SEPSIS).data, after.row(SEPSIS).data)

    def test_post_scale(self, sample_graph, provider):
        """Post-GIN weighting scales stacked rows."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 2, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [FEVER])
        base = self._base(sample_graph, provider, sub)

        plain = encoder(sub, base, sample_graph.relation_index)
        scaled = encoder(sub, base, sample_graph.relation_index, post_scale={FEVER: 3.0})

        assert np.allclose(scaled.row(FEVER).data, 3.0 * plain.row(FEVER).data)
        assert np.allclose(scaled.row(SEPSIS).data, plain.row(SEPSIS).data)

    def test_missing_base_vector(self, sample_graph, provider):
        """Every subgraph node needs a base vector."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 1, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [FEVER])

        with pytest.raises(EncodingError):
            stack_gin(encoder.layers, sub, {FEVER: np.ones(8)}, sample_graph.relation_index)

    def test_unknown_row(self, sample_graph, provider):
        """Rows exist only for subgraph nodes."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 1, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [FEVER])
        enc = encoder(sub, self._base(sample_graph, provider, sub), sample_graph.relation_index)

        with pytest.raises(EncodingError):
            enc.row(COUGH)

    def test_gin_gradients(self, sample_graph, provider):
        """Finite differences agree with the tape through two GIN layers."""
        encoder = GinEncoder(8, len(sample_graph.relation_vocab), 2, np.random.default_rng(0))
        sub = one_hop_subgraph(sample_graph, [FEVER, COUGH])
        base = self._base(sample_graph, provider, sub)
        target = np.random.default_rng(1).normal(size=(len(sub.nodes), 16))

        def loss():
            enc = encoder(sub, base, sample_graph.relation_index)
            return tsum(enc.stacked * target)

        report = check_gradients(loss, encoder.parameters(), rng=np.random.default_rng(2))
        assert report.passed()


class TestNoteSession:
    """Tests for per-note encoding state."""

    def test_before_weighting_scales_base(self, make_model, sample_graph, provider):
        """'before' placement scales the base vector of weighted concepts."""
        session = NoteSession(make_model(), sample_graph, provider, {FEVER: 0.5}, "before")

        assert np.allclose(session.base_vector(FEVER), 0.5 * provider.embed_concept(sample_graph.concept(FEVER)))
        assert np.allclose(session.base_vector(COUGH), provider.embed_concept(sample_graph.concept(COUGH)))

    def test_encodings_are_cached_per_frontier(self, make_model, sample_graph, provider):
        """The same frontier in any order reuses its encodings."""
        session = NoteSession(make_model(), sample_graph, provider)

        assert session.encode([FEVER, COUGH]) is session.encode([COUGH, FEVER])

    def test_provider_dim_mismatch(self, make_model, sample_graph):
        """Model and provider dims must agree."""
        with pytest.raises(ConfigError):
            NoteSession(make_model(), sample_graph, HashingProvider(4))
