"""
Tests for concept extraction and TF-IDF weighting.
"""

import json
import math
import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.errors import ExtractionError
from dxpath.extractor import (
    ConceptWeighting,
    build_vocab_index,
    compute_tfidf_weights,
    extract_concepts,
    load_weighting,
    mention_cuis,
    normalize_surface,
    tokenize,
)
from dxpath.kg import Concept
from dxpath.notes import extract_corpus

from .conftest import COUGH, FEVER, LEUKOCYTOSIS, PNEUMONIA


class TestTokenize:
    """Tests for tokenization and surface normalization."""

    def test_tokenize_offsets(self):
        """Tokens carry their character span."""
        assert tokenize("Fever, cough.") == [("Fever", 0, 5), ("cough", 7, 12)]

    def test_normalize_surface(self):
        """Lowercase, punctuation dropped, whitespace collapsed."""
        assert normalize_surface("  Acute   Kidney-Injury ") == "acute kidney injury"


class TestExtractConcepts:
    """Tests for longest-match extraction."""

    def test_alias_and_case(self, sample_index):
        """Aliases match case-insensitively."""
        mentions = extract_concepts("PYREXIA and Cough", sample_index)

        assert [(m.surface, m.cui) for m in mentions] == [("PYREXIA", FEVER), ("Cough", COUGH)]
        assert mentions[0].start == 0 and mentions[0].end == 7

    def test_longest_match_wins(self):
        """A multi-token name beats its one-token prefix."""
        index = build_vocab_index([
            Concept("C0000001", ("Kidney",), ("T023",)),
            Concept("C0000002", ("Kidney failure",), ("T047",)),
        ])

        mentions = extract_concepts("History of kidney failure.", index)

        assert [m.cui for m in mentions] == ["C0000002"]
        assert mentions[0].surface == "kidney failure"

    def test_ambiguous_surface_yields_every_cui(self):
        """One mention per candidate concept at the same span."""
        index = build_vocab_index([
            Concept("C0000002", ("Cold",), ("T184",)),
            Concept("C0000001", ("Cold",), ("T070",)),
        ])

        mentions = extract_concepts("cold", index)

        assert [m.cui for m in mentions] == ["C0000001", "C0000002"]
        assert {(m.start, m.end) for m in mentions} == {(0, 4)}

    def test_no_partial_token_match(self, sample_index):
        """Names only match on token boundaries."""
        assert extract_concepts("Fevers and coughing", sample_index) == []

    def test_mention_cuis(self, sample_index):
        """Distinct sorted CUIs."""
        mentions = extract_concepts("fever, fever and leukocytosis", sample_index)

        assert mention_cuis(mentions) == sorted([FEVER, LEUKOCYTOSIS])

    def test_empty_concept_list(self):
        """An index needs at least one concept."""
        with pytest.raises(ExtractionError):
            build_vocab_index([])

    def test_names_normalizing_to_empty_are_skipped(self):
        """Punctuation-only names are counted and skipped."""
        index = build_vocab_index([
            Concept("C0000001", ("---",), ()),
            Concept("C0000002", ("Rash",), ("T184",)),
        ])

        assert index.skipped == 1
        assert index.lookup("rash") == ("C0000002",)


class TestTfidfWeights:
    """Tests for W_CUI."""

    def test_weights_match_hand_computation(self, sample_graph, sample_index, sample_notes):
        """W_CUI = tf*idf(concept) * sum of type tf*idf, with smoothed idf."""
        corpus = extract_corpus(sample_notes, sample_index)
        weighting = compute_tfidf_weights(corpus, sample_graph.semantic_types_of)

        n = 4
        idf = lambda df: math.log((1 + n) / (1 + df)) + 1.0
        # n1: fever, cough. Fever appears in n1, n2 (pyrexia) and n4; T184 in n1..n4.
        fever_concept = 1 * idf(3)
        t184_in_n1 = 2 * idf(4)
        assert weighting.per_note["n1"][FEVER] == pytest.approx(fever_concept * t184_in_n1)
        assert weighting.concept_df[FEVER] == 3
        assert weighting.type_df["T184"] == 4
        assert weighting.corpus_size == 4

    def test_corpus_weight_is_mean_over_notes(self, sample_graph, sample_index, sample_notes):
        """Corpus-level weight averages the notes containing the concept."""
        corpus = extract_corpus(sample_notes, sample_index)
        weighting = compute_tfidf_weights(corpus, sample_graph.semantic_types_of)

        per_note = [w[COUGH] for w in weighting.per_note.values() if COUGH in w]
        assert weighting.corpus[COUGH] == pytest.approx(sum(per_note) / len(per_note))

    def test_for_note_scopes(self, sample_graph, sample_index, sample_notes):
        """Note scope uses fitted per-note weights, corpus scope the corpus mean."""
        corpus = extract_corpus(sample_notes, sample_index)
        weighting = compute_tfidf_weights(corpus, sample_graph.semantic_types_of)
        mentions = dict(corpus)["n1"]

        note_scope = weighting.for_note("n1", mentions, sample_graph.semantic_types_of, "note")
        corpus_scope = weighting.for_note("n1", mentions, sample_graph.semantic_types_of, "corpus")

        assert note_scope == weighting.per_note["n1"]
        assert corpus_scope == {FEVER: weighting.corpus[FEVER], COUGH: weighting.corpus[COUGH]}

    def test_unseen_note_uses_stored_idf(self, sample_graph, sample_index, sample_notes):
        """A note outside the corpus is weighted with the fitted IDF tables."""
        corpus = extract_corpus(sample_notes, sample_index)
        weighting = compute_tfidf_weights(corpus, sample_graph.semantic_types_of)
        mentions = extract_concepts("cough", sample_index)

        result = weighting.for_note("new", mentions, sample_graph.semantic_types_of)

        expected = weighting.concept_idf[COUGH] * weighting.type_idf["T184"]
        assert result == {COUGH: pytest.approx(expected)}

    def test_concept_without_types_is_flagged(self):
        """Concepts without semantic types get weight 0 and are listed."""
        index = build_vocab_index([Concept("C0000001", ("Rash",), ())])
        corpus = [("a", extract_concepts("rash", index))]

        weighting = compute_tfidf_weights(corpus, lambda cui: ())

        assert weighting.flagged == ["C0000001"]
        assert weighting.per_note["a"]["C0000001"] == 0.0

    def test_empty_corpus(self, sample_graph):
        """No notes, no weights."""
        with pytest.raises(ExtractionError):
            compute_tfidf_weights([], sample_graph.semantic_types_of)

    def test_load_weighting_from_output_envelope(self, tmp_path, sample_graph, sample_index, sample_notes):
        """Weights wrapped in the command output envelope load back unchanged."""
        corpus = extract_corpus(sample_notes, sample_index)
        weighting = compute_tfidf_weights(corpus, sample_graph.semantic_types_of)
        path = tmp_path / "weights.json"
        path.write_text(json.dumps({"metadata": {"command": "weights"}, "data": weighting.to_dict()}))

        loaded = load_weighting(path)

        assert loaded.per_note == weighting.per_note
        assert loaded.concept_idf == weighting.concept_idf

    def test_malformed_weights(self):
        """Missing tables raise ExtractionError."""
        with pytest.raises(ExtractionError):
            ConceptWeighting.from_dict({"corpus_size": 1})
