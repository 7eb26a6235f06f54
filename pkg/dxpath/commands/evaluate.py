"""
Evaluate command - retrieval results table with bootstrap confidence intervals.
"""

from typing import Any, Dict

from ..evaluation import evaluate_retrieval
from ..trainer import build_training_examples
from .base import BaseCommand


class EvaluateCommand(BaseCommand):
    """Extractor baseline and ranker rows at every configured top-N."""

    name = "evaluate"
    description = "Recall/precision/F1 at each top-N with 95% bootstrap CIs"
    aliases = ["eval"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        eval_section = self.config.section("eval")
        ranker_config = self.config.ranker_config()
        examples, dataset = build_training_examples(
            self.notes, self.graph, self.index, ranker_config.max_hops,
            self.config.section("train")["gold_types"],
        )
        weighting = self.weighting()
        weighting_section = self.config.section("weighting")

        def weights_for(example):
            if weighting is None:
                return None
            return weighting.for_note(
                example.note_id, example.mentions, self.graph.semantic_types_of, weighting_section["scope"]
            )

        report = evaluate_retrieval(
            examples, self.graph, eval_section["top_n"], ranker_config,
            model=self.model(),
            provider=self.provider,
            weights_for=weights_for,
            weighting_apply=weighting_section["apply"],
            resamples=eval_section["resamples"],
            level=eval_section["level"],
            seed=self.config.seed,
        )
        per_note = self.writer.write_jsonl("evaluate_per_note.jsonl", report.per_note)
        rows = [r.to_dict() for r in report.rows]

        summary = {"Examples": len(examples)}
        for row in report.rows:
            head = row.cis[row.headline]
            summary[f"{row.config} F1"] = f"{head.point:.4f} [{head.lower:.4f}, {head.upper:.4f}]"
        return {
            "rows": rows,
            "dataset": dataset.to_dict(),
            "per_note": per_note.name,
            "_rows": rows,
            "_summary": summary,
        }

    @classmethod
    def get_return_fields(cls):
        return ["rows", "dataset", "per_note"]


# Register command
command = EvaluateCommand
