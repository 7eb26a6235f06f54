"""
Retrieve command - hop-wise path retrieval for every note.
"""

import logging
from typing import Any, Dict

from ..errors import DatasetError
from ..extractor import extract_concepts, mention_cuis
from ..prompts import serialize_paths
from ..ranker import encode_input, explore
from .base import BaseCommand

logger = logging.getLogger(__name__)


class RetrieveCommand(BaseCommand):
    """Explore the graph from each note's concepts and keep the top-N paths per hop."""

    name = "retrieve"
    description = "Retrieve ranked knowledge paths per note (JSONL with per-hop selections)"
    aliases = ["paths"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        """
        Retrieve paths.

        Args:
            note_id: Restrict to one note
            top_n: Override ranker.top_n

        Returns:
            Final nodes per note; the full records go to retrieval.jsonl
        """
        note_id = kwargs.get("note_id")
        notes = self.notes
        if note_id:
            notes = [n for n in notes if n.note_id == note_id]
            if not notes:
                raise DatasetError(f"Note '{note_id}' not found", {"note_id": note_id})

        ranker_config = self.config.ranker_config(kwargs.get("top_n"))
        model = self.model()
        weighting = self.weighting()
        weighting_section = self.config.section("weighting")

        records, rows, skipped = [], [], []
        for note in notes:
            mentions = extract_concepts(note.text, self.index)
            sources = [c for c in mention_cuis(mentions) if c in self.graph]
            if not sources:
                skipped.append(note.note_id)
                continue
            weights = None
            if weighting is not None:
                weights = weighting.for_note(
                    note.note_id, mentions, self.graph.semantic_types_of, weighting_section["scope"]
                )
            enc = encode_input(
                model, self.provider, self.graph, note.text, sources,
                weights, weighting_section["apply"], note.note_id,
            )
            exploration = explore(self.graph, enc, sources, ranker_config, model)
            record = exploration.to_record(note.note_id)
            record["sources"] = sources
            record["path_text"] = list(serialize_paths(exploration.witness_paths(), self.graph).lines)
            records.append(record)
            rows.append({
                "note_id": note.note_id,
                "sources": sources,
                "final_nodes": list(exploration.final_nodes),
                "final_names": [self.graph.name_of(c) for c in exploration.final_nodes],
            })

        if skipped:
            logger.warning(f"{len(skipped)} note(s) have no concepts in the graph: {skipped[:5]}")
        retrieval = self.writer.write_jsonl("retrieval.jsonl", records)
        return {
            "notes": rows,
            "skipped": skipped,
            "retrieval": retrieval.name,
            "_rows": rows,
            "_summary": {
                "Notes": len(rows),
                "Skipped": len(skipped),
                "Top N": ranker_config.top_n,
                "Variant": ranker_config.variant,
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["notes", "skipped", "retrieval"]


# Register command
command = RetrieveCommand
