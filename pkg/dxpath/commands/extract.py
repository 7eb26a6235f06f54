"""
Extraction command - dictionary concept mentions for every note.
"""

from typing import Any, Dict

from ..extractor import mention_cuis
from ..notes import extract_corpus
from .base import BaseCommand


class ExtractCommand(BaseCommand):
    """Extract concept mentions from the configured notes."""

    name = "extract"
    description = "Dictionary-match concept mentions in every note"
    aliases = []

    def execute(self, **kwargs) -> Dict[str, Any]:
        corpus = extract_corpus(self.notes, self.index)
        mentions = self.writer.write_jsonl(
            "mentions.jsonl",
            (
                {"note_id": note_id, "mentions": [m.to_dict() for m in found], "cuis": mention_cuis(found)}
                for note_id, found in corpus
            ),
        )
        rows = [
            {"note_id": note_id, "mention_count": len(found), "cuis": mention_cuis(found)}
            for note_id, found in corpus
        ]
        empty = sum(1 for row in rows if not row["cuis"])
        return {
            "notes": rows,
            "mentions": mentions.name,
            "_rows": rows,
            "_summary": {
                "Notes": len(rows),
                "Mentions": sum(row["mention_count"] for row in rows),
                "Notes without concepts": empty,
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["notes", "mentions"]


# Register command
command = ExtractCommand
