"""
Evaluation harness - retrieval tables (extractor baseline and ranker
variants at several top-N), generation scoring and dataset statistics.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import MetricError
from .extractor import VocabularyIndex, extract_concepts, mention_cuis
from .kg import KnowledgeGraph
from .metrics import CiReport, bootstrap_ci, rouge_scores, set_metrics
from .notes import Note
from .prompts.parsing import parse_llm_output
from .ranker import PathScorer, RankerConfig, encode_input, explore
from .trainer import TrainingExample

logger = logging.getLogger(__name__)

SET_FIELDS = ("recall", "precision", "f1")


def _ci(values: Sequence[float], resamples: int, level: float, seed: int) -> CiReport:
    if len(values) < 2:
        point = float(np.mean(values)) if len(values) else 0.0
        return CiReport(point, point, point, resamples, level)
    return bootstrap_ci(values, resamples, level, seed)


@dataclass
class ReportRow:
    """One configuration of a results table: metric means with bootstrap CIs."""
    config: str
    n: Optional[int]
    count: int
    cis: Dict[str, CiReport]
    headline: str = "f1"

    def to_dict(self) -> Dict:
        row = {"config": self.config, "n": self.n, "count": self.count}
        for name, ci in self.cis.items():
            row[name] = ci.point
            row[f"{name}_ci"] = [ci.lower, ci.upper]
        head = self.cis[self.headline]
        row["ci_low"] = head.lower
        row["ci_high"] = head.upper
        return row


def _row(config: str, n: Optional[int], per_note: Dict[str, List[float]],
         resamples: int, level: float, seed: int, headline: str = "f1") -> ReportRow:
    count = len(next(iter(per_note.values()), []))
    cis = {name: _ci(values, resamples, level, seed) for name, values in per_note.items()}
    return ReportRow(config=config, n=n, count=count, cis=cis, headline=headline)


@dataclass
class EvaluationReport:
    rows: List[ReportRow] = field(default_factory=list)
    per_note: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {"rows": [r.to_dict() for r in self.rows], "per_note": self.per_note}

    def row(self, config: str) -> ReportRow:
        for r in self.rows:
            if r.config == config:
                return r
        raise MetricError(f"No row named '{config}' in the report")


def evaluate_retrieval(
    examples: Sequence[TrainingExample],
    graph: KnowledgeGraph,
    top_ns: Sequence[int],
    ranker_config: RankerConfig,
    model=None,
    provider=None,
    weights_for: Optional[Callable[[TrainingExample], Optional[Dict[str, float]]]] = None,
    weighting_apply: str = "before",
    scorer_for: Optional[Callable[[TrainingExample], PathScorer]] = None,
    resamples: int = 1000,
    level: float = 95.0,
    seed: int = 0,
) -> EvaluationReport:
    """
    Compare final selected nodes against golds for each N, plus the
    extractor-only baseline (prediction = extracted input concepts).

    Args:
        examples: Examples with sources and golds
        graph: Concept graph
        top_ns: N values, one row each
        ranker_config: Variant and max_hops (top_n is overridden per row)
        model: Model used for scoring (unless `scorer_for` is given)
        provider: Embedding provider for the model
        weights_for: W_CUI per example
        weighting_apply: 'before' or 'after' the GIN layers
        scorer_for: Optional per-example stand-in scorer
        resamples, level, seed: Bootstrap settings

    Returns:
        EvaluationReport with one 'extractor' row and one '<variant>@<n>' row per N
    """
    if not examples:
        raise MetricError("Cannot evaluate an empty dataset")
    report = EvaluationReport()

    baseline = {name: [] for name in SET_FIELDS}
    for ex in examples:
        m = set_metrics(ex.source_cuis, ex.gold_cuis)
        for name in SET_FIELDS:
            baseline[name].append(getattr(m, name))
    report.rows.append(_row("extractor", None, baseline, resamples, level, seed))

    for n in top_ns:
        config = RankerConfig(
            top_n=n,
            max_hops=ranker_config.max_hops,
            variant=ranker_config.variant,
            reduced_dim=ranker_config.reduced_dim,
            heads=ranker_config.heads,
            trilinear_rank=ranker_config.trilinear_rank,
            seed=ranker_config.seed,
        )
        values = {name: [] for name in SET_FIELDS}
        for ex in examples:
            if scorer_for is not None:
                exploration = explore(graph, None, ex.source_cuis, config, scorer=scorer_for(ex))
            else:
                weights = weights_for(ex) if weights_for else None
                enc = encode_input(model, provider, graph, ex.text, ex.source_cuis,
                                   weights, weighting_apply, ex.note_id)
                exploration = explore(graph, enc, ex.source_cuis, config, model)
            m = set_metrics(exploration.final_nodes, ex.gold_cuis)
            for name in SET_FIELDS:
                values[name].append(getattr(m, name))
            report.per_note.append({
                "note_id": ex.note_id,
                "config": f"{config.variant}@{n}",
                "predicted": list(exploration.final_nodes),
                **m.to_dict(),
            })
        report.rows.append(_row(f"{config.variant}@{n}", n, values, resamples, level, seed))
        logger.info(f"Evaluated {config.variant}@{n} on {len(examples)} example(s)")
    return report


def dataset_stats(notes: Sequence[Note], index: VocabularyIndex) -> Dict:
    """
    Mean input and gold CUI counts, and the share of gold CUIs that are not
    among the note's extracted input concepts (abstractive rate).
    """
    if not notes:
        raise MetricError("Cannot summarize an empty dataset")
    inputs, golds, absent, total_gold = [], [], 0, 0
    for note in notes:
        cuis = set(mention_cuis(extract_concepts(note.text, index)))
        inputs.append(len(cuis))
        golds.append(len(note.gold_cuis))
        total_gold += len(note.gold_cuis)
        absent += sum(1 for g in note.gold_cuis if g not in cuis)
    return {
        "notes": len(notes),
        "mean_input_cuis": float(np.mean(inputs)),
        "mean_gold_cuis": float(np.mean(golds)),
        "abstractive_rate": absent / total_gold if total_gold else 0.0,
    }


def reference_text(note: Note, graph: Optional[KnowledgeGraph] = None) -> str:
    """The note's diagnoses text, or its gold concept names joined with '; '."""
    if note.diagnoses:
        return note.diagnoses
    if graph is None:
        return ""
    return "; ".join(graph.name_of(c) for c in note.gold_cuis if c in graph)


def evaluate_generation(
    records: Sequence[Dict],
    notes: Sequence[Note],
    index: VocabularyIndex,
    graph: Optional[KnowledgeGraph] = None,
    resamples: int = 1000,
    level: float = 95.0,
    seed: int = 0,
) -> EvaluationReport:
    """
    Score parsed completions: ROUGE-2/ROUGE-L against the reference
    diagnoses text and set metrics of the concepts found in the predicted
    diagnoses against the gold CUIs.

    Args:
        records: {"note_id", "completion"} dicts
        notes: Notes with references and golds
        index: Vocabulary index used to map diagnoses text to CUIs

    Returns:
        EvaluationReport with a single 'generation' row
    """
    by_id = {n.note_id: n for n in notes}
    values = {name: [] for name in ("rouge2", "rougeL") + SET_FIELDS}
    report = EvaluationReport()
    for record in records:
        note = by_id.get(record.get("note_id"))
        if note is None:
            raise MetricError(f"Completion for unknown note '{record.get('note_id')}'")
        parsed = parse_llm_output(record.get("completion", ""))
        predicted = "; ".join(parsed.diagnoses)
        rouge = rouge_scores(predicted, reference_text(note, graph))
        values["rouge2"].append(rouge.rouge2.f1)
        values["rougeL"].append(rouge.rougeL.f1)
        entry = {"note_id": note.note_id, "rouge2": rouge.rouge2.f1, "rougeL": rouge.rougeL.f1}
        if note.gold_cuis:
            pred_cuis = mention_cuis(extract_concepts(predicted, index))
            m = set_metrics(pred_cuis, note.gold_cuis)
            for name in SET_FIELDS:
                values[name].append(getattr(m, name))
            entry.update(m.to_dict())
        report.per_note.append(entry)
    if not report.per_note:
        raise MetricError("No completions to score")
    values = {k: v for k, v in values.items() if v}
    report.rows.append(_row("generation", None, values, resamples, level, seed, headline="rougeL"))
    return report
