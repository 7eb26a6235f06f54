"""
Synthetic data generator - a concept graph and notes with planted 2-hop golds.

Concepts fall into three roles:

    sources        T184 (sign or symptom), mentioned in note text
    intermediates  T033 (finding)
    diagnoses      T047 (disease or syndrome), the golds

Every source has one planted intermediate reached through "may cause", and
every intermediate one planted diagnosis reached through "definitional
manifestation of". A note's golds are the planted diagnoses of its sources.
Decoy edges with other relations fill each node up to the branching factor.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Set, Tuple

from .errors import SynthError
from .extractor import normalize_surface
from .kg import Concept, KnowledgeGraph, RelationType, Triple, default_allowlist_path, distances_from, load_relation_allowlist
from .notes import Note, write_notes
from .seeding import subsystem_rng

logger = logging.getLogger(__name__)

SOURCE_TYPE = "T184"
INTERMEDIATE_TYPE = "T033"
DIAGNOSIS_TYPE = "T047"
FIRST_RELATION = "may cause"
SECOND_RELATION = "definitional manifestation of"
PLANTED_HOPS = 2

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
FILLER = ("patient", "presents", "with", "and", "reports", "noted", "on", "exam", "assessment", "consider", "history", "of")


@dataclass(frozen=True)
class SyntheticSpec:
    node_count: int = 50
    branching: int = 3
    notes: int = 200
    sources_per_note: int = 2
    noise_rate: float = 0.0
    extractive_rate: float = 0.0
    seed: int = 13

    def __post_init__(self):
        if self.branching < 1:
            raise SynthError("synth.branching must be at least 1")
        if self.sources_per_note < 1:
            raise SynthError("synth.sources_per_note must be at least 1")
        if self.notes < 1:
            raise SynthError("synth.notes must be at least 1")
        for name in ("noise_rate", "extractive_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SynthError(f"synth.{name} must lie in [0, 1]")
        sources, intermediates, diagnoses = self.role_sizes()
        if min(intermediates, diagnoses) < self.branching or sources < self.sources_per_note:
            raise SynthError(
                f"{self.node_count} nodes cannot support branching {self.branching} "
                f"with {self.sources_per_note} source(s) per note"
            )

    def role_sizes(self) -> Tuple[int, int, int]:
        """(sources, intermediates, diagnoses) counts: 40/30/30 split."""
        intermediates = (self.node_count * 3) // 10
        diagnoses = (self.node_count * 3) // 10
        return self.node_count - intermediates - diagnoses, intermediates, diagnoses


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    concepts: Dict[str, Concept]
    triples: List[Triple]
    relations: List[str]
    notes: List[Note]
    planted: Dict[str, str]

    def graph(self) -> KnowledgeGraph:
        return KnowledgeGraph(self.concepts, self.triples, self.relations)

    def planted_gold(self, source: str) -> str:
        """Diagnosis two planted hops away from `source`."""
        return self.planted[self.planted[source]]


def _pseudo_words(rng, count: int, reserved: Set[str]) -> List[str]:
    """Distinct capitalized pseudo-words of two to four syllables."""
    words: List[str] = []
    seen = set(reserved)
    while len(words) < count:
        syllables = int(rng.integers(2, 5))
        word = "".join(
            CONSONANTS[int(rng.integers(len(CONSONANTS)))] + VOWELS[int(rng.integers(len(VOWELS)))]
            for _ in range(syllables)
        )
        if word in seen:
            continue
        seen.add(word)
        words.append(word.capitalize())
    return words


def _misspell(name: str, taken: Set[str]) -> str:
    """A surface form of `name` the extractor will not match."""
    variant = name + name[-1]
    while normalize_surface(variant) in taken:
        variant += "x"
    return variant


def generate(spec: SyntheticSpec) -> SyntheticDataset:
    """
    Generate a synthetic graph and notes, deterministic under `spec.seed`.

    Raises:
        SynthError: A planted gold is unreachable within two hops
    """
    rng = subsystem_rng(spec.seed, "synth")
    relations = load_relation_allowlist(default_allowlist_path())
    decoy_relations = [r for r in relations if r not in (FIRST_RELATION, SECOND_RELATION)]

    n_src, n_mid, n_dx = spec.role_sizes()
    names = _pseudo_words(rng, spec.node_count, set(FILLER))
    cuis = [f"C{i + 1:07d}" for i in range(spec.node_count)]
    sources, intermediates, diagnoses = cuis[:n_src], cuis[n_src:n_src + n_mid], cuis[n_src + n_mid:]

    concepts: Dict[str, Concept] = {}
    for cui, name in zip(cuis, names):
        if cui in sources:
            semtype = SOURCE_TYPE
        elif cui in intermediates:
            semtype = INTERMEDIATE_TYPE
        else:
            semtype = DIAGNOSIS_TYPE
        concepts[cui] = Concept(id=cui, names=(name,), semantic_types=(semtype,))

    planted: Dict[str, str] = {}
    triples: Set[Triple] = set()

    def wire(src: str, planted_dst: str, key_relation: str, pool: List[str]):
        planted[src] = planted_dst
        triples.add(Triple(src, RelationType(key_relation), planted_dst))
        others = [c for c in pool if c != planted_dst]
        picks = rng.choice(len(others), size=spec.branching - 1, replace=False) if spec.branching > 1 else []
        for j in sorted(int(p) for p in picks):
            rel = decoy_relations[int(rng.integers(len(decoy_relations)))]
            triples.add(Triple(src, RelationType(rel), others[j]))

    for mid in intermediates:
        wire(mid, diagnoses[int(rng.integers(n_dx))], SECOND_RELATION, diagnoses)
    for src in sources:
        wire(src, intermediates[int(rng.integers(n_mid))], FIRST_RELATION, intermediates)

    graph = KnowledgeGraph(concepts, triples, relations)
    taken = {normalize_surface(n) for n in names}
    notes: List[Note] = []
    for i in range(spec.notes):
        picks = rng.choice(n_src, size=spec.sources_per_note, replace=False)
        note_sources = [sources[int(p)] for p in sorted(picks)]
        golds = sorted({planted[planted[s]] for s in note_sources})

        reach = distances_from(graph, note_sources, PLANTED_HOPS)
        unreachable = [g for g in golds if g not in reach]
        if unreachable:
            raise SynthError(f"Planted gold(s) {unreachable} unreachable from {note_sources}")

        surfaces = []
        for s in note_sources:
            name = concepts[s].preferred_name
            surfaces.append(_misspell(name, taken) if rng.random() < spec.noise_rate else name)
        text = f"Patient presents with {' and '.join(surfaces)}."
        gold_names = [concepts[g].preferred_name for g in golds]
        if rng.random() < spec.extractive_rate:
            text += f" Assessment: consider {' and '.join(gold_names)}."
        notes.append(Note(
            note_id=f"note-{i:05d}",
            text=text,
            gold_cuis=tuple(golds),
            diagnoses="; ".join(gold_names),
        ))

    logger.info(
        f"Generated {spec.node_count} concepts, {len(triples)} triples and {len(notes)} notes "
        f"(seed={spec.seed})"
    )
    return SyntheticDataset(
        spec=spec,
        concepts=concepts,
        triples=sorted(triples),
        relations=relations,
        notes=notes,
        planted=planted,
    )


def write_dataset(dataset: SyntheticDataset, directory) -> Dict[str, Path]:
    """
    Write concepts.tsv, triples.tsv, relations.txt and notes.jsonl.

    Returns:
        Dict of kind to written path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "concepts": directory / "concepts.tsv",
        "triples": directory / "triples.tsv",
        "relations": directory / "relations.txt",
        "notes": directory / "notes.jsonl",
    }
    with open(paths["concepts"], "w", encoding="utf-8", newline="") as f:
        f.write("# cui\tsemantic_types\tpreferred_name\n")
        for concept in dataset.concepts.values():
            f.write(f"{concept.id}\t{','.join(concept.semantic_types)}\t{concept.preferred_name}\n")
    with open(paths["triples"], "w", encoding="utf-8", newline="") as f:
        f.write("# src\trelation\tdst\n")
        for t in dataset.triples:
            f.write(f"{t.src}\t{t.rel.label}\t{t.dst}\n")
    with open(paths["relations"], "w", encoding="utf-8", newline="") as f:
        f.write("".join(f"{label}\n" for label in dataset.relations))
    write_notes(dataset.notes, paths["notes"])
    return paths
