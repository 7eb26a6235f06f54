"""
Train command - fit the path ranker on the configured notes.
"""

import logging
from dataclasses import replace
from typing import Any, Dict

from ..checkpoint import save_checkpoint
from ..model import build_model
from ..trainer import Trainer, build_training_examples
from .base import BaseCommand

logger = logging.getLogger(__name__)


class TrainCommand(BaseCommand):
    """Train the encoder and ranker and write a checkpoint."""

    name = "train"
    description = "Train the path ranker, write per-epoch metrics and a checkpoint"
    aliases = []

    def execute(self, **kwargs) -> Dict[str, Any]:
        """
        Train from scratch.

        Args:
            epochs: Optional override of train.epochs

        Returns:
            Dataset report, epoch history and checkpoint location
        """
        train_config = self.config.train_config()
        epochs = kwargs.get("epochs")
        if epochs:
            train_config = replace(train_config, epochs=epochs)

        examples, report = build_training_examples(
            self.notes, self.graph, self.index, train_config.max_hops,
            self.config.section("train")["gold_types"],
        )
        weighting_section = self.config.section("weighting")
        model = build_model(self.config, self.graph.relation_vocab)
        trainer = Trainer(
            model, self.provider, self.graph, train_config,
            weighting=self.weighting(),
            weighting_scope=weighting_section["scope"],
            weighting_apply=weighting_section["apply"],
            dump_dir=self.out_dir,
        )

        metrics_path = self.writer.track(self.writer.path_for("train_metrics.jsonl"))
        result = trainer.fit(examples, metrics_path)

        checkpoint_dir = self.writer.track(self.writer.path_for("checkpoint"))
        save_checkpoint(model, checkpoint_dir, extra={"train": {
            "epochs": train_config.epochs,
            "steps": result.steps,
            "seed": train_config.seed,
        }})
        logger.info(f"Wrote checkpoint to {checkpoint_dir}")

        history = [m.to_dict() for m in result.history]
        last = result.history[-1]
        return {
            "dataset": report.to_dict(),
            "history": history,
            "steps": result.steps,
            "checkpoint": checkpoint_dir.name,
            "metrics": metrics_path.name,
            "_rows": history,
            "_summary": {
                "Examples": report.examples,
                "Epochs": train_config.epochs,
                "Final l_pred": last.l_pred,
                "Final l_cl": last.l_cl,
                f"Recall@{train_config.top_n}": last.recall_at_n,
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["dataset", "history", "steps", "checkpoint", "metrics"]


# Register command
command = TrainCommand
