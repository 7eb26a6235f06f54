"""
Graph build command - load and validate the concept graph.
"""

from typing import Any, Dict

from .base import BaseCommand


class BuildGraphCommand(BaseCommand):
    """Load the concept graph and write its snapshot and load report."""

    name = "build-graph"
    description = "Validate concepts/triples and write a canonical graph snapshot"
    aliases = ["graph"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        graph = self.graph
        report = self.load_report
        snapshot = self.writer.write_json("graph_snapshot.json", graph.snapshot())

        types: Dict[str, int] = {}
        for concept in graph.concepts.values():
            for t in concept.semantic_types:
                types[t] = types.get(t, 0) + 1

        return {
            "concepts": len(graph),
            "edges": graph.edge_count,
            "relation_vocab": list(graph.relation_vocab),
            "semantic_types": dict(sorted(types.items())),
            "report": report.to_dict(),
            "snapshot": snapshot.name,
            "_summary": {
                "Concepts": len(graph),
                "Edges": graph.edge_count,
                "Dropped": report.dropped,
                "Deduped": report.deduped,
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["concepts", "edges", "relation_vocab", "semantic_types", "report", "snapshot"]


# Register command
command = BuildGraphCommand
