"""
Base command class - All commands inherit from this.
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..config import AppConfig
from ..errors import CheckpointError, ConfigError
from ..extractor import ConceptWeighting, VocabularyIndex, build_vocab_index, compute_tfidf_weights, load_weighting
from ..kg import KnowledgeGraph, LoadReport, load_graph_from_config
from ..notes import Note, extract_corpus, load_notes
from ..output import OutputWriter

logger = logging.getLogger(__name__)


class BaseCommand(ABC):
    """Abstract base class for all dxpath commands."""

    # Override in subclasses
    name: str = "base"
    description: str = "Base command"
    aliases: List[str] = []

    def __init__(self, config: AppConfig, out_dir="./output", quiet: bool = False):
        """Initialize command with the resolved config and its output writer."""
        self.config = config
        self.out_dir = Path(out_dir)
        self.quiet = quiet
        self.writer = OutputWriter(self.name, self.out_dir, quiet=quiet)
        self._graph: Optional[KnowledgeGraph] = None
        self._load_report: Optional[LoadReport] = None
        self._index: Optional[VocabularyIndex] = None
        self._notes: Optional[List[Note]] = None
        self._provider = None

    @property
    def graph(self) -> KnowledgeGraph:
        """Lazy-load the concept graph named by the config."""
        if self._graph is None:
            self._graph, self._load_report = load_graph_from_config(self.config)
        return self._graph

    @property
    def load_report(self) -> LoadReport:
        self.graph
        return self._load_report

    @property
    def index(self) -> VocabularyIndex:
        if self._index is None:
            self._index = build_vocab_index(self.graph.concepts.values())
        return self._index

    @property
    def notes(self) -> List[Note]:
        if self._notes is None:
            self._notes = load_notes(self.config.path("notes"))
        return self._notes

    @property
    def provider(self):
        if self._provider is None:
            from ..providers import build_provider

            self._provider = build_provider(self.config)
        return self._provider

    def weighting(self) -> Optional[ConceptWeighting]:
        """
        W_CUI per the `weighting` section: read from `paths.weights` when set,
        otherwise fitted on the configured notes. None when disabled.
        """
        if not self.config.section("weighting")["enabled"]:
            return None
        path = self.config.path("weights", required=False)
        if path is not None:
            return load_weighting(path)
        return compute_tfidf_weights(extract_corpus(self.notes, self.index), self.graph.semantic_types_of)

    def model(self, require_checkpoint: bool = False):
        """
        Model restored from `paths.checkpoint`, or freshly initialized from
        the config when no checkpoint is configured.

        Raises:
            CheckpointError: Checkpoint incompatible with the graph or provider
            ConfigError: `require_checkpoint` set and no checkpoint configured
        """
        from ..checkpoint import load_checkpoint
        from ..model import build_model

        path = self.config.path("checkpoint", required=False)
        if path is None:
            if require_checkpoint:
                raise ConfigError("Config key 'paths.checkpoint' is required for this command")
            logger.warning("No checkpoint configured; using an untrained model")
            return build_model(self.config, self.graph.relation_vocab)

        model = load_checkpoint(path)
        if tuple(model.relation_vocab) != tuple(self.graph.relation_vocab):
            raise CheckpointError(
                f"Checkpoint relation vocabulary does not match the graph ({path})",
                {"checkpoint": str(path)},
            )
        if model.dim != self.provider.dim:
            raise CheckpointError(
                f"Checkpoint dim {model.dim} != provider dim {self.provider.dim}",
                {"checkpoint": str(path)},
            )
        return model

    @abstractmethod
    def execute(self, **kwargs) -> Any:
        """
        Execute the command.

        Args:
            **kwargs: Command options

        Returns:
            Data to write (dict or list). A dict may carry '_summary' (console
            summary) and '_rows' (records for the TSV mirror).
        """
        pass

    def run(self, **kwargs) -> Dict[str, str]:
        """
        Run command and write output.

        Returns:
            Dict with paths to output files
        """
        data = self.execute(**kwargs)

        summary = rows = None
        if isinstance(data, dict):
            summary = data.pop("_summary", None)
            rows = data.pop("_rows", None)

        return self.writer.write(data, summary=summary, rows=rows)

    @classmethod
    def help(cls) -> str:
        """Return help text for this command."""
        return f"{cls.name}: {cls.description}"

    @classmethod
    def get_return_fields(cls) -> List[str]:
        """Get list of top-level fields in this command's JSON data. Override in subclasses."""
        return []
