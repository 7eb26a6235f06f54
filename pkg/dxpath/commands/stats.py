"""
Dataset statistics command.
"""

from typing import Any, Dict

from ..evaluation import dataset_stats
from .base import BaseCommand


class StatsCommand(BaseCommand):
    """Input/gold concept counts and the abstractive rate of the notes."""

    name = "stats"
    description = "Mean input and gold concepts per note, and the share of golds absent from the input"
    aliases = []

    def execute(self, **kwargs) -> Dict[str, Any]:
        stats = dataset_stats(self.notes, self.index)
        return {
            **stats,
            "_summary": {
                "Notes": stats["notes"],
                "Mean input CUIs": stats["mean_input_cuis"],
                "Mean gold CUIs": stats["mean_gold_cuis"],
                "Abstractive rate": stats["abstractive_rate"],
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["notes", "mean_input_cuis", "mean_gold_cuis", "abstractive_rate"]


# Register command
command = StatsCommand
