"""
Generation scoring command - ROUGE and concept-set metrics of completions.
"""

from typing import Any, Dict

from ..errors import MetricError
from ..evaluation import evaluate_generation
from ..output import read_jsonl
from .base import BaseCommand


class ScoreGenerationCommand(BaseCommand):
    """Score `paths.completions` against the notes' reference diagnoses."""

    name = "score-generation"
    description = "ROUGE-2/ROUGE-L and concept recall/precision/F1 of completions with CIs"
    aliases = ["rouge"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        eval_section = self.config.section("eval")
        records = read_jsonl(self.config.path("completions"), MetricError)
        report = evaluate_generation(
            records, self.notes, self.index, self.graph,
            resamples=eval_section["resamples"],
            level=eval_section["level"],
            seed=self.config.seed,
        )
        per_note = self.writer.write_jsonl("generation_per_note.jsonl", report.per_note)
        row = report.rows[0]
        rows = [r.to_dict() for r in report.rows]
        return {
            "rows": rows,
            "per_note": per_note.name,
            "_rows": rows,
            "_summary": {
                "Completions": row.count,
                **{name.upper() if name.startswith("rouge") else name: ci.point for name, ci in row.cis.items()},
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["rows", "per_note"]


# Register command
command = ScoreGenerationCommand
