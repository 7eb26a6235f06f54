"""
Concept extraction and TF-IDF concept weighting.

Mentions are found by greedy left-to-right longest match of token sequences
against a dictionary built from every concept name and alias. Tokens are
maximal runs of characters that are neither Unicode whitespace nor
punctuation, so matching is deterministic and locale-free.

Concept weights W_CUI combine a concept TF-IDF term with the summed TF-IDF
of the concept's semantic types, both computed with scikit-learn's
TfidfVectorizer over per-note mention lists.
"""

import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

from .errors import ExtractionError
from .kg import Concept

logger = logging.getLogger(__name__)


def _is_token_char(ch: str) -> bool:
    return not (ch.isspace() or unicodedata.category(ch).startswith("P"))


def tokenize(text: str) -> List[Tuple[str, int, int]]:
    """Split text into (token, start, end) triples on whitespace and punctuation."""
    tokens = []
    start = None
    for i, ch in enumerate(text):
        if _is_token_char(ch):
            if start is None:
                start = i
        elif start is not None:
            tokens.append((text[start:i], start, i))
            start = None
    if start is not None:
        tokens.append((text[start:], start, len(text)))
    return tokens


def normalize_surface(surface: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace to single spaces."""
    return " ".join(tok.lower() for tok, _, _ in tokenize(surface))


@dataclass(frozen=True)
class ExtractedMention:
    start: int
    end: int
    surface: str
    cui: str

    def to_dict(self) -> Dict:
        return {"start": self.start, "end": self.end, "surface": self.surface, "cui": self.cui}


@dataclass
class VocabularyIndex:
    """Normalized surface form to candidate CUIs (sorted)."""
    entries: Dict[str, Tuple[str, ...]]
    max_tokens: int
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, surface: str) -> Tuple[str, ...]:
        return self.entries.get(normalize_surface(surface), ())


def build_vocab_index(concepts: Iterable[Concept]) -> VocabularyIndex:
    """
    Index every name and alias of every concept under its normalized form.

    Args:
        concepts: Concepts to index

    Returns:
        VocabularyIndex; concepts whose names all normalize to empty are
        skipped and counted

    Raises:
        ExtractionError: If no concepts are given
    """
    concepts = list(concepts)
    if not concepts:
        raise ExtractionError("Cannot build a vocabulary index from an empty concept list")

    table: Dict[str, set] = {}
    skipped = 0
    for concept in concepts:
        forms = [normalize_surface(name) for name in concept.names]
        forms = [f for f in forms if f]
        if not forms:
            skipped += 1
            continue
        for form in forms:
            table.setdefault(form, set()).add(concept.id)

    if skipped:
        logger.warning(f"Skipped {skipped} concept(s) whose names normalize to empty")

    entries = {form: tuple(sorted(cuis)) for form, cuis in sorted(table.items())}
    max_tokens = max((form.count(" ") + 1 for form in entries), default=0)
    return VocabularyIndex(entries=entries, max_tokens=max_tokens, skipped=skipped)


def extract_concepts(text: str, index: VocabularyIndex) -> List[ExtractedMention]:
    """
    Greedy left-to-right longest match over token boundaries.

    An ambiguous surface yields one mention per candidate CUI at the same span.
    Mentions are sorted by start offset and never overlap.
    """
    tokens = tokenize(text)
    keys = [tok.lower() for tok, _, _ in tokens]
    mentions: List[ExtractedMention] = []
    i = 0
    while i < len(tokens):
        matched = 0
        for length in range(min(index.max_tokens, len(tokens) - i), 0, -1):
            cuis = index.entries.get(" ".join(keys[i:i + length]))
            if cuis:
                start, end = tokens[i][1], tokens[i + length - 1][2]
                surface = text[start:end]
                mentions.extend(ExtractedMention(start, end, surface, cui) for cui in cuis)
                matched = length
                break
        i += matched or 1
    return mentions


def mention_cuis(mentions: Iterable[ExtractedMention]) -> List[str]:
    """Distinct CUIs of a mention list, sorted."""
    return sorted({m.cui for m in mentions})


def _identity(doc):
    return doc


def _fit_tfidf(docs: List[List[str]]) -> Tuple[Dict[str, float], Dict[str, int], List[Dict[str, float]]]:
    """
    Fit raw-count TF x smoothed IDF over term lists.

    Returns:
        Tuple of (idf per term, document frequency per term, per-doc TF-IDF dicts)
    """
    if not any(docs):
        return {}, {}, [{} for _ in docs]

    vectorizer = TfidfVectorizer(
        analyzer=_identity,
        lowercase=False,
        norm=None,
        use_idf=True,
        smooth_idf=True,
        sublinear_tf=False,
    )
    matrix = vectorizer.fit_transform(docs).tocsr()
    terms = vectorizer.get_feature_names_out()
    idf = {str(t): float(v) for t, v in zip(terms, vectorizer.idf_)}
    df_counts = np.asarray((matrix > 0).sum(axis=0)).ravel()
    df = {str(t): int(c) for t, c in zip(terms, df_counts)}

    rows = []
    for r in range(matrix.shape[0]):
        start, end = matrix.indptr[r], matrix.indptr[r + 1]
        rows.append({
            str(terms[j]): float(v)
            for j, v in zip(matrix.indices[start:end], matrix.data[start:end])
        })
    return idf, df, rows


@dataclass
class ConceptWeighting:
    """W_CUI per note and corpus-wide, with the corpus statistics behind them."""
    concept_idf: Dict[str, float]
    type_idf: Dict[str, float]
    concept_df: Dict[str, int]
    type_df: Dict[str, int]
    corpus_size: int
    per_note: Dict[str, Dict[str, float]] = field(default_factory=dict)
    corpus: Dict[str, float] = field(default_factory=dict)
    flagged: List[str] = field(default_factory=list)

    def weight(self, cui: str, note_id: Optional[str] = None) -> float:
        """Per-note weight when `note_id` is given, else the corpus-level weight."""
        if note_id is not None:
            return self.per_note.get(note_id, {}).get(cui, 0.0)
        return self.corpus.get(cui, 0.0)

    def weights_for_mentions(
        self,
        mentions: Sequence[ExtractedMention],
        semantic_types_of: Callable[[str], Sequence[str]],
    ) -> Dict[str, float]:
        """W_CUI for a note outside the fitted corpus, using the stored IDF tables."""
        concept_tf = Counter(m.cui for m in mentions)
        type_tf = Counter(t for m in mentions for t in semantic_types_of(m.cui))
        weights = {}
        for cui, tf in sorted(concept_tf.items()):
            concept_score = tf * self.concept_idf.get(cui, 0.0)
            type_score = sum(type_tf[t] * self.type_idf.get(t, 0.0) for t in semantic_types_of(cui))
            weights[cui] = concept_score * type_score
        return weights

    def for_note(
        self,
        note_id: str,
        mentions: Sequence[ExtractedMention],
        semantic_types_of: Callable[[str], Sequence[str]],
        scope: str = "note",
    ) -> Dict[str, float]:
        """
        W_CUI of the concepts mentioned in one note.

        With scope 'note' the fitted per-note weights are used, or computed
        from the stored IDF tables for notes outside the corpus. Scope
        'corpus' uses the corpus-level weights.
        """
        cuis = mention_cuis(mentions)
        if scope == "corpus":
            return {cui: self.corpus.get(cui, 0.0) for cui in cuis}
        if note_id in self.per_note:
            fitted = self.per_note[note_id]
            return {cui: fitted.get(cui, 0.0) for cui in cuis}
        return self.weights_for_mentions(mentions, semantic_types_of)

    def to_dict(self) -> Dict:
        return {
            "corpus_size": self.corpus_size,
            "concept_idf": self.concept_idf,
            "type_idf": self.type_idf,
            "concept_df": self.concept_df,
            "type_df": self.type_df,
            "per_note": self.per_note,
            "corpus": self.corpus,
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ConceptWeighting":
        try:
            return cls(
                concept_idf={k: float(v) for k, v in data["concept_idf"].items()},
                type_idf={k: float(v) for k, v in data["type_idf"].items()},
                concept_df={k: int(v) for k, v in data["concept_df"].items()},
                type_df={k: int(v) for k, v in data["type_df"].items()},
                corpus_size=int(data["corpus_size"]),
                per_note={n: {k: float(v) for k, v in w.items()} for n, w in data.get("per_note", {}).items()},
                corpus={k: float(v) for k, v in data.get("corpus", {}).items()},
                flagged=list(data.get("flagged", [])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ExtractionError(f"Malformed weights file: {e}")


def compute_tfidf_weights(
    corpus: Sequence[Tuple[str, Sequence[ExtractedMention]]],
    semantic_types_of: Callable[[str], Sequence[str]],
) -> ConceptWeighting:
    """
    Compute W_CUI = TFIDF_concept x sum of TFIDF over the concept's semantic types.

    TF is the raw mention count in a note; IDF = ln((1 + |D|) / (1 + df)) + 1.
    Corpus-level weights are the mean over notes containing the concept.

    Args:
        corpus: (note_id, mentions) pairs
        semantic_types_of: CUI to semantic type codes

    Returns:
        ConceptWeighting

    Raises:
        ExtractionError: On an empty corpus
    """
    if not corpus:
        raise ExtractionError("Cannot compute TF-IDF weights over an empty corpus")

    ordered = sorted(corpus, key=lambda item: item[0])
    concept_docs = [[m.cui for m in mentions] for _, mentions in ordered]
    type_docs = [[t for m in mentions for t in semantic_types_of(m.cui)] for _, mentions in ordered]

    concept_idf, concept_df, concept_rows = _fit_tfidf(concept_docs)
    type_idf, type_df, type_rows = _fit_tfidf(type_docs)

    per_note: Dict[str, Dict[str, float]] = {}
    sums: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    flagged = set()
    for (note_id, _), c_row, t_row in zip(ordered, concept_rows, type_rows):
        weights = {}
        for cui in sorted(c_row):
            types = semantic_types_of(cui)
            if not types:
                flagged.add(cui)
            weights[cui] = c_row[cui] * sum(t_row.get(t, 0.0) for t in types)
            sums[cui] = sums.get(cui, 0.0) + weights[cui]
            counts[cui] = counts.get(cui, 0) + 1
        per_note[note_id] = weights

    if flagged:
        logger.warning(f"{len(flagged)} concept(s) have no semantic types; their weight is 0")

    return ConceptWeighting(
        concept_idf=concept_idf,
        type_idf=type_idf,
        concept_df=concept_df,
        type_df=type_df,
        corpus_size=len(ordered),
        per_note=per_note,
        corpus={cui: sums[cui] / counts[cui] for cui in sorted(sums)},
        flagged=sorted(flagged),
    )


def load_weighting(path) -> ConceptWeighting:
    """Read weights written by the `weights` command (bare or wrapped in an output envelope)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (IOError, json.JSONDecodeError) as e:
        raise ExtractionError(f"Cannot read weights file {path}: {e}")
    if isinstance(data, dict) and "metadata" in data and "data" in data:
        data = data["data"]
    return ConceptWeighting.from_dict(data)
