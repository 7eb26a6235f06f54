"""
Synthetic data command - planted-path graph and notes.
"""

from typing import Any, Dict

from ..synth import generate, write_dataset
from .base import BaseCommand


class SynthCommand(BaseCommand):
    """Generate a synthetic concept graph and notes into the output directory."""

    name = "synth"
    description = "Generate concepts.tsv, triples.tsv, relations.txt and notes.jsonl with planted golds"
    aliases = ["synthetic"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        spec = self.config.synth_spec()
        dataset = generate(spec)
        for name in ("concepts.tsv", "triples.tsv", "relations.txt", "notes.jsonl"):
            self.writer.track(self.writer.path_for(name))
        paths = write_dataset(dataset, self.out_dir)

        return {
            "spec": {
                "node_count": spec.node_count,
                "branching": spec.branching,
                "notes": spec.notes,
                "sources_per_note": spec.sources_per_note,
                "noise_rate": spec.noise_rate,
                "extractive_rate": spec.extractive_rate,
                "seed": spec.seed,
            },
            "files": {kind: path.name for kind, path in sorted(paths.items())},
            "concepts": len(dataset.concepts),
            "triples": len(dataset.triples),
            "notes": len(dataset.notes),
            "distinct_golds": len({g for note in dataset.notes for g in note.gold_cuis}),
            "_summary": {
                "Concepts": len(dataset.concepts),
                "Triples": len(dataset.triples),
                "Notes": len(dataset.notes),
                "Seed": spec.seed,
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["spec", "files", "concepts", "triples", "notes", "distinct_golds"]


# Register command
command = SynthCommand
