"""
Template ranking command - order prompt templates by mean perplexity.
"""

from typing import Any, Dict

from ..errors import PromptError
from ..output import read_jsonl
from ..prompts import CharTrigramScorer, load_templates, rank_templates_by_perplexity, serialize_paths
from ..ranker import paths_from_record
from .base import BaseCommand


class RankTemplatesCommand(BaseCommand):
    """Rank the templates in `paths.templates` on a sample of notes."""

    name = "rank-templates"
    description = "Rank prompt templates by character-trigram perplexity (lowest first)"
    aliases = ["perplexity"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        """
        Rank templates.

        Args:
            samples: Number of notes rendered per template (file order)

        Returns:
            Templates with their mean perplexity, ascending
        """
        samples = kwargs.get("samples") or 20
        templates = load_templates(self.config.path("templates"))
        scorer = CharTrigramScorer.from_file(self.config.path("lm_corpus"))
        style = self.config.section("prompt")["style"]

        records = {}
        retrieval = self.config.path("retrieval", required=False)
        if retrieval is not None:
            records = {r["note_id"]: r for r in read_jsonl(retrieval, PromptError) if "note_id" in r}

        sample_inputs = []
        for note in self.notes[:samples]:
            record = records.get(note.note_id)
            paths = serialize_paths(paths_from_record(record), self.graph, style) if record else None
            sample_inputs.append((note.text, paths))

        ranking = [r.to_dict() for r in rank_templates_by_perplexity(templates, sample_inputs, scorer)]
        for position, row in enumerate(ranking, start=1):
            row["rank"] = position
        return {
            "ranking": ranking,
            "samples": len(sample_inputs),
            "_rows": ranking,
            "_summary": {
                "Templates": len(ranking),
                "Samples": len(sample_inputs),
                "Best": ranking[0]["template_id"],
                "Best perplexity": ranking[0]["perplexity"],
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["ranking", "samples"]


# Register command
command = RankTemplatesCommand
