"""
Weights command - TF-IDF concept weights over the notes corpus.
"""

from typing import Any, Dict

from ..extractor import compute_tfidf_weights
from ..notes import extract_corpus
from .base import BaseCommand


class WeightsCommand(BaseCommand):
    """Fit W_CUI on the configured notes."""

    name = "weights"
    description = "Compute per-note and corpus TF-IDF concept weights"
    aliases = ["tfidf"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        weighting = compute_tfidf_weights(extract_corpus(self.notes, self.index), self.graph.semantic_types_of)
        data = weighting.to_dict()
        rows = [
            {
                "cui": cui,
                "name": self.graph.name_of(cui),
                "corpus_weight": weight,
                "df": weighting.concept_df.get(cui, 0),
                "idf": weighting.concept_idf.get(cui, 0.0),
            }
            for cui, weight in weighting.corpus.items()
        ]
        data["_rows"] = rows
        data["_summary"] = {
            "Notes": weighting.corpus_size,
            "Concepts": len(weighting.corpus),
            "Untyped concepts": len(weighting.flagged),
        }
        return data

    @classmethod
    def get_return_fields(cls):
        return ["corpus_size", "concept_idf", "type_idf", "concept_df", "type_df", "per_note", "corpus", "flagged"]


# Register command
command = WeightsCommand
