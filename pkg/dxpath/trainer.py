"""
Trainer - joint prediction + contrastive objective over the hop-wise
exploration, Adam updates and per-epoch metrics.

For every example and every hop the ranker's beta over candidate nodes is
supervised with binary cross entropy against the hop's target nodes (the
golds plus nodes lying on a shortest path to a gold that is still further
away), and path embeddings are pulled towards the note anchor h_x * h_v with
a margin hinge on cosine similarity.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import numerics as nx
from .errors import ConfigError, DxPathError, TrainingError
from .extractor import ConceptWeighting, ExtractedMention, VocabularyIndex, extract_concepts, mention_cuis
from .kg import KnowledgeGraph, distances_from
from .model import PathRankerModel
from .notes import Note
from .numerics import Adam, Tape, Tensor, backward, clip_grad_norm
from .ranker import EncodedInput, Exploration, PathState, RankedPathSet, RankerConfig, encode_input, explore
from .seeding import subsystem_rng

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    margin: float = 0.3
    epochs: int = 20
    batch_size: int = 8
    top_n: int = 4
    max_hops: int = 2
    variant: str = "triattn"
    seed: int = 13
    clip_norm: float = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    def ranker_config(self) -> RankerConfig:
        return RankerConfig(top_n=self.top_n, max_hops=self.max_hops, variant=self.variant, seed=self.seed)


@dataclass(frozen=True)
class TrainingExample:
    note_id: str
    text: str
    source_cuis: Tuple[str, ...]
    gold_cuis: Tuple[str, ...]
    mentions: Tuple[ExtractedMention, ...] = field(default=(), compare=False)


@dataclass
class DatasetReport:
    examples: int = 0
    skipped_no_source: List[str] = field(default_factory=list)
    skipped_no_gold: List[str] = field(default_factory=list)
    dropped_golds: Dict[str, List[str]] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "examples": self.examples,
            "skipped_no_source": self.skipped_no_source,
            "skipped_no_gold": self.skipped_no_gold,
            "dropped_golds": self.dropped_golds,
        }


def build_training_examples(
    notes: Sequence[Note],
    graph: KnowledgeGraph,
    index: VocabularyIndex,
    max_hops: int,
    gold_types: Sequence[str] = ("T047",),
) -> Tuple[List[TrainingExample], DatasetReport]:
    """
    Extract sources and keep the golds a model can reach.

    A gold survives when it is in the graph, carries one of `gold_types`
    (no filter when empty) and lies within `max_hops` of a source.

    Returns:
        Tuple of (examples in note order, DatasetReport)
    """
    report = DatasetReport()
    examples = []
    types = set(gold_types)
    for note in notes:
        mentions = extract_concepts(note.text, index)
        sources = tuple(c for c in mention_cuis(mentions) if c in graph)
        if not sources:
            report.skipped_no_source.append(note.note_id)
            continue
        dist = distances_from(graph, sources, max_hops)
        kept, dropped = [], []
        for cui in note.gold_cuis:
            ok = cui in graph and cui in dist
            if ok and types:
                ok = bool(types & set(graph.semantic_types_of(cui)))
            (kept if ok else dropped).append(cui)
        if dropped:
            report.dropped_golds[note.note_id] = dropped
        if not kept:
            report.skipped_no_gold.append(note.note_id)
            continue
        examples.append(TrainingExample(note.note_id, note.text, sources, tuple(kept), tuple(mentions)))

    report.examples = len(examples)
    if report.skipped_no_source or report.skipped_no_gold:
        logger.warning(
            f"Skipped {len(report.skipped_no_source)} note(s) without sources and "
            f"{len(report.skipped_no_gold)} without reachable golds"
        )
    return examples, report


@dataclass
class LossBreakdown:
    l_pred: float
    l_cl: float
    cl_skipped: bool = False

    @property
    def total(self) -> float:
        return self.l_pred + self.l_cl

    def to_dict(self) -> Dict:
        return {"l_pred": self.l_pred, "l_cl": self.l_cl, "total": self.total}


def bce_prediction_loss(node_ids: Sequence[str], probs: Tensor, gold: Set[str]) -> Tensor:
    """
    Mean binary cross entropy of per-node probabilities against gold membership.

    Probabilities are clamped to [1e-7, 1 - 1e-7].

    Raises:
        TrainingError: On an empty candidate set
    """
    if not node_ids:
        raise TrainingError("Cannot compute prediction loss over no candidates")
    y = np.array([1.0 if cui in gold else 0.0 for cui in node_ids])
    v = nx.clip(probs, PROB_FLOOR, 1.0 - PROB_FLOOR)
    terms = nx.add(nx.mul(y, nx.log(v)), nx.mul(1.0 - y, nx.log(nx.sub(1.0, v))))
    return nx.neg(nx.mean(terms))


def label_paths(ranked: RankedPathSet, targets: Set[str]) -> Tuple[List[PathState], List[PathState]]:
    """Split a hop's candidates by whether their end node is a target."""
    positives = [c for c in ranked.candidates if c.end in targets]
    negatives = [c for c in ranked.candidates if c.end not in targets]
    return positives, negatives


def contrastive_loss(anchor: Tensor, positives: Tensor, negatives: Tensor, margin: float) -> Tensor:
    """
    Mean over (positive, negative) pairs of max(cos(A, f-) - cos(A, f+) + margin, 0).

    Args:
        anchor: Anchor vector A
        positives: (p, d) positive path embeddings
        negatives: (q, d) negative path embeddings
        margin: Desired separation

    Raises:
        TrainingError: On an empty side or a zero anchor
    """
    if positives.shape[0] == 0 or negatives.shape[0] == 0:
        raise TrainingError("Contrastive loss needs at least one positive and one negative")
    try:
        pos = nx.cosine_similarity(anchor, positives)
        neg = nx.cosine_similarity(anchor, negatives)
    except DxPathError as e:
        raise TrainingError(f"Contrastive loss: {e.message}")
    p, q = positives.shape[0], negatives.shape[0]
    gaps = nx.sub(nx.reshape(neg, (1, q)), nx.reshape(pos, (p, 1)))
    return nx.mean(nx.relu(nx.add(gaps, margin)))


def hop_targets(
    graph: KnowledgeGraph,
    sources: Sequence[str],
    gold: Set[str],
    hop: int,
    max_hops: int,
) -> Set[str]:
    """
    Supervision targets of one hop: the golds plus every node at distance
    `hop` from the sources that lies on a shortest path to a farther gold.
    """
    targets = set(gold)
    dist = distances_from(graph, sources, max_hops)
    layer = sorted(u for u, d in dist.items() if d == hop)
    for g in sorted(gold):
        dg = dist.get(g)
        if dg is None or dg <= hop:
            continue
        remaining = dg - hop
        for u in layer:
            if distances_from(graph, [u], remaining).get(g) == remaining:
                targets.add(u)
    return targets


def recall_of(predicted: Sequence[str], gold: Sequence[str]) -> float:
    gold = set(gold)
    return len(set(predicted) & gold) / len(gold) if gold else 0.0


@dataclass
class EpochMetrics:
    epoch: int
    l_pred: float
    l_cl: float
    recall_at_n: float
    cl_skipped: int = 0

    def to_dict(self) -> Dict:
        return {
            "epoch": self.epoch,
            "l_pred": self.l_pred,
            "l_cl": self.l_cl,
            "recall_at_n": self.recall_at_n,
            "cl_skipped": self.cl_skipped,
        }


@dataclass
class TrainResult:
    model: PathRankerModel
    history: List[EpochMetrics]
    steps: int


class Trainer:
    """
    Hop-wise trainer.

    Args:
        model: Model to optimize in place
        provider: Embedding provider (dim must match the model)
        graph: Concept graph
        config: TrainConfig
        weighting: Fitted W_CUI, or None to disable weighting
        weighting_scope: 'note' or 'corpus'
        weighting_apply: 'before' or 'after' the GIN layers
        dump_dir: Where NaN diagnostics are written
    """

    def __init__(
        self,
        model: PathRankerModel,
        provider,
        graph: KnowledgeGraph,
        config: TrainConfig,
        weighting: Optional[ConceptWeighting] = None,
        weighting_scope: str = "note",
        weighting_apply: str = "before",
        dump_dir: Optional[Path] = None,
    ):
        if config.variant != model.variant:
            raise ConfigError(f"Train config variant {config.variant} != model variant {model.variant}")
        self.model = model
        self.provider = provider
        self.graph = graph
        self.config = config
        self.ranker_config = config.ranker_config()
        self.weighting = weighting
        self.weighting_scope = weighting_scope
        self.weighting_apply = weighting_apply
        self.dump_dir = Path(dump_dir) if dump_dir else Path.cwd()
        self.optimizer = Adam(model.parameters(), config.lr, config.beta1, config.beta2, config.eps)
        self.steps = 0

    def note_weights(self, example: TrainingExample) -> Optional[Dict[str, float]]:
        if self.weighting is None:
            return None
        return self.weighting.for_note(
            example.note_id, example.mentions, self.graph.semantic_types_of, self.weighting_scope
        )

    def encode(self, example: TrainingExample) -> EncodedInput:
        return encode_input(
            self.model, self.provider, self.graph, example.text, example.source_cuis,
            self.note_weights(example), self.weighting_apply, example.note_id,
        )

    def example_loss(self, example: TrainingExample) -> Tuple[Tensor, LossBreakdown, Exploration]:
        """Loss of one example, averaged over the hops that were explored."""
        enc = self.encode(example)
        exploration = explore(self.graph, enc, example.source_cuis, self.ranker_config, self.model)
        gold = set(example.gold_cuis)
        anchor = enc.anchor()
        # cosine against a zero anchor is undefined; such notes train on L_pred only
        cl_skipped = not np.any(anchor.data)
        if cl_skipped:
            logger.debug(f"Zero anchor on note {example.note_id}; skipping contrastive term")

        pred_terms, cl_terms = [], []
        for ranked in exploration.hops:
            targets = hop_targets(self.graph, example.source_cuis, gold, ranked.hop, self.config.max_hops)
            pred_terms.append(bce_prediction_loss(ranked.node_ids, ranked.beta, targets))
            positives, negatives = label_paths(ranked, targets)
            if positives and negatives and not cl_skipped:
                cl_terms.append(contrastive_loss(
                    anchor,
                    nx.stack([p.embedding for p in positives]),
                    nx.stack([n.embedding for n in negatives]),
                    self.config.margin,
                ))

        l_pred = nx.mean(nx.stack(pred_terms))
        if cl_terms:
            l_cl = nx.mean(nx.stack(cl_terms))
            total = nx.add(l_pred, l_cl)
            breakdown = LossBreakdown(l_pred.item(), l_cl.item())
        else:
            total = l_pred
            breakdown = LossBreakdown(l_pred.item(), 0.0, cl_skipped)
        return total, breakdown, exploration

    def _dump_nan(self, example: TrainingExample, breakdown: LossBreakdown, exploration: Exploration) -> Path:
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        path = self.dump_dir / f"nan_dump_{example.note_id}.json"
        dump = {
            "note_id": example.note_id,
            "text": example.text,
            "source_cuis": list(example.source_cuis),
            "gold_cuis": list(example.gold_cuis),
            "l_pred": repr(breakdown.l_pred),
            "l_cl": repr(breakdown.l_cl),
            "hops": [
                {
                    "hop": h.hop,
                    "node_ids": h.node_ids,
                    "node_scores": [repr(float(s)) for s in h.node_scores.data],
                    "selected": list(h.selected),
                }
                for h in exploration.hops
            ],
            "step": self.steps,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(dump, f, indent=2, sort_keys=True)
        return path

    def train_step(self, batch: Sequence[TrainingExample]) -> List[Tuple[LossBreakdown, Exploration]]:
        """
        One optimizer step over a batch.

        Examples are reduced in note_id order, each on its own tape, with the
        loss scaled by 1/len(batch).

        Raises:
            TrainingError: On a non-finite loss (after writing a NaN dump)
        """
        if not batch:
            raise TrainingError("Empty batch")
        self.optimizer.zero_grad()
        scale = 1.0 / len(batch)
        outcomes = []
        for example in sorted(batch, key=lambda e: e.note_id):
            with Tape() as tape:
                total, breakdown, exploration = self.example_loss(example)
                scaled = nx.mul(total, scale)
            if not math.isfinite(breakdown.total):
                path = self._dump_nan(example, breakdown, exploration)
                raise TrainingError(
                    f"Non-finite loss on note {example.note_id}; diagnostics in {path}",
                    {"note_id": example.note_id, "dump": str(path)},
                )
            backward(tape, scaled)
            outcomes.append((breakdown, exploration))
        clip_grad_norm(self.optimizer.params, self.config.clip_norm)
        self.optimizer.step()
        self.steps += 1
        return outcomes

    def fit(self, examples: Sequence[TrainingExample], metrics_path: Optional[Path] = None) -> TrainResult:
        """
        Train for the configured number of epochs.

        Args:
            examples: Training examples
            metrics_path: Optional JSONL file receiving one record per epoch

        Returns:
            TrainResult
        """
        if not examples:
            raise TrainingError("Cannot train on an empty dataset")
        ordered = sorted(examples, key=lambda e: e.note_id)
        rng = subsystem_rng(self.config.seed, "shuffle")
        history = []
        metrics_file = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
        try:
            for epoch in range(1, self.config.epochs + 1):
                order = rng.permutation(len(ordered))
                shuffled = [ordered[i] for i in order]
                l_pred, l_cl, recall = [], [], []
                cl_skipped = 0
                for start in range(0, len(shuffled), self.config.batch_size):
                    batch = shuffled[start:start + self.config.batch_size]
                    for (breakdown, exploration), example in zip(
                        self.train_step(batch), sorted(batch, key=lambda e: e.note_id)
                    ):
                        l_pred.append(breakdown.l_pred)
                        l_cl.append(breakdown.l_cl)
                        cl_skipped += breakdown.cl_skipped
                        recall.append(recall_of(exploration.final_nodes, example.gold_cuis))
                metrics = EpochMetrics(
                    epoch=epoch,
                    l_pred=float(np.mean(l_pred)),
                    l_cl=float(np.mean(l_cl)),
                    recall_at_n=float(np.mean(recall)),
                    cl_skipped=cl_skipped,
                )
                if cl_skipped:
                    logger.warning(
                        f"Epoch {epoch}: contrastive term skipped on {cl_skipped} note(s) with a zero anchor"
                    )
                history.append(metrics)
                logger.info(
                    f"Epoch {epoch}: l_pred={metrics.l_pred:.4f} l_cl={metrics.l_cl:.4f} "
                    f"recall@{self.config.top_n}={metrics.recall_at_n:.3f}"
                )
                if metrics_file:
                    metrics_file.write(json.dumps(metrics.to_dict(), sort_keys=True) + "\n")
        finally:
            if metrics_file:
                metrics_file.close()
        return TrainResult(model=self.model, history=history, steps=self.steps)


def train(
    examples: Sequence[TrainingExample],
    graph: KnowledgeGraph,
    provider,
    model: PathRankerModel,
    config: TrainConfig,
    weighting: Optional[ConceptWeighting] = None,
    metrics_path: Optional[Path] = None,
    **kwargs,
) -> TrainResult:
    """Convenience wrapper around Trainer.fit."""
    trainer = Trainer(model, provider, graph, config, weighting=weighting, **kwargs)
    return trainer.fit(examples, metrics_path)
