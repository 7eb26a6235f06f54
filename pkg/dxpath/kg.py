"""
Concept graph store - load, validate and serve CUIs, names, semantic types
and typed relations.

Edges are directed as stored. Every node implicitly admits a self-loop
(v, self, v); self-loops are never materialized in the triple file.
"""

import logging
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Set, Tuple

from .errors import ConceptNotFoundError, DxPathError, GraphFormatError, UnknownConceptError

logger = logging.getLogger(__name__)

CUI_PATTERN = re.compile(r"^C\d{7}$")
SEMTYPE_PATTERN = re.compile(r"^T\d{3}$")
SELF = "self"


@dataclass(frozen=True, order=True)
class RelationType:
    label: str

    @property
    def is_self_loop(self) -> bool:
        return self.label == SELF


SELF_LOOP = RelationType(SELF)


@dataclass(frozen=True)
class Concept:
    id: str
    names: Tuple[str, ...]
    semantic_types: Tuple[str, ...] = ()

    @property
    def preferred_name(self) -> str:
        return self.names[0]


@dataclass(frozen=True, order=True)
class Triple:
    src: str
    rel: RelationType
    dst: str


@dataclass
class LoadReport:
    """Counts gathered while loading the triple file."""
    kept: int = 0
    dropped: int = 0
    deduped: int = 0
    dropped_relations: Counter = field(default_factory=Counter)

    def to_dict(self) -> Dict:
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "deduped": self.deduped,
            "dropped_relations": dict(sorted(self.dropped_relations.items())),
        }


@dataclass(frozen=True)
class Subgraph:
    nodes: Tuple[str, ...]
    edges: Tuple[Triple, ...]


def is_cui(value: str) -> bool:
    return bool(CUI_PATTERN.match(value))


class KnowledgeGraph:
    """Immutable concept graph with deterministic neighbor ordering."""

    def __init__(
        self,
        concepts: Dict[str, Concept],
        triples: Iterable[Triple],
        relation_labels: Iterable[str],
    ):
        self.concepts: Dict[str, Concept] = dict(sorted(concepts.items()))
        labels = set(relation_labels)
        labels.add(SELF)
        self.relation_vocab: Tuple[str, ...] = tuple(sorted(labels))
        self._relation_index = {label: i for i, label in enumerate(self.relation_vocab)}

        adjacency: Dict[str, List[Tuple[RelationType, str]]] = {cui: [] for cui in self.concepts}
        for triple in sorted(set(triples)):
            if triple.rel.label not in self._relation_index:
                raise GraphFormatError(f"Relation '{triple.rel.label}' is not in the relation vocabulary")
            adjacency[triple.src].append((triple.rel, triple.dst))
        self.adjacency: Dict[str, Tuple[Tuple[RelationType, str], ...]] = {
            cui: tuple(edges) for cui, edges in adjacency.items()
        }

    def __contains__(self, cui: str) -> bool:
        return cui in self.concepts

    def __len__(self) -> int:
        return len(self.concepts)

    @property
    def edge_count(self) -> int:
        return sum(len(edges) for edges in self.adjacency.values())

    def concept(self, cui: str) -> Concept:
        try:
            return self.concepts[cui]
        except KeyError:
            raise ConceptNotFoundError(f"Concept not found: {cui}", {"cui": cui})

    def name_of(self, cui: str) -> str:
        return self.concept(cui).preferred_name

    def semantic_types_of(self, cui: str) -> Tuple[str, ...]:
        concept = self.concepts.get(cui)
        return concept.semantic_types if concept else ()

    def relation_index(self, label: str) -> int:
        """One-hot index of `label` (its rank in the sorted vocabulary)."""
        try:
            return self._relation_index[label]
        except KeyError:
            raise GraphFormatError(f"Relation '{label}' is not in the relation vocabulary")

    def has_edge(self, src: str, rel: str, dst: str) -> bool:
        if rel == SELF:
            return src == dst and src in self.concepts
        return (RelationType(rel), dst) in self.adjacency.get(src, ())

    def neighbors(self, cui: str) -> List[Tuple[RelationType, str]]:
        return neighbors(self, cui)

    def snapshot(self) -> Dict:
        """Canonical serializable form (identical files give identical snapshots)."""
        return {
            "relation_vocab": list(self.relation_vocab),
            "concepts": [
                {"cui": c.id, "names": list(c.names), "semantic_types": list(c.semantic_types)}
                for c in self.concepts.values()
            ],
            "edges": [
                [src, rel.label, dst]
                for src, edges in self.adjacency.items()
                for rel, dst in edges
            ],
        }


def neighbors(g: KnowledgeGraph, v: str) -> List[Tuple[RelationType, str]]:
    """
    Out-edges of `v` plus the implicit self-loop.

    Ordered by relation label, then destination id.

    Raises:
        ConceptNotFoundError: If `v` is not in the graph
    """
    if v not in g.concepts:
        raise ConceptNotFoundError(f"Concept not found: {v}", {"cui": v})
    entries = list(g.adjacency[v])
    entries.append((SELF_LOOP, v))
    entries.sort(key=lambda e: (e[0].label, e[1]))
    return entries


def one_hop_subgraph(g: KnowledgeGraph, sources: Iterable[str]) -> Subgraph:
    """
    Sources plus the targets of their out-edges.

    Edges are exactly the out-edges of the sources, including each source's
    implicit self-loop, sorted by (src, relation, dst).

    Raises:
        DxPathError: On an empty source set or an unknown source
    """
    source_set = set(sources)
    if not source_set:
        raise DxPathError("Cannot retrieve a subgraph from an empty source set")

    nodes: Set[str] = set(source_set)
    edges: List[Triple] = []
    for src in sorted(source_set):
        for rel, dst in neighbors(g, src):
            edges.append(Triple(src, rel, dst))
            nodes.add(dst)
    edges.sort(key=lambda t: (t.src, t.rel.label, t.dst))
    return Subgraph(nodes=tuple(sorted(nodes)), edges=tuple(edges))


def distances_from(g: KnowledgeGraph, sources: Iterable[str], max_depth: int) -> Dict[str, int]:
    """Multi-source BFS hop distances, bounded by `max_depth`."""
    dist: Dict[str, int] = {}
    queue = deque()
    for s in sorted(set(sources)):
        if s in g.concepts:
            dist[s] = 0
            queue.append(s)
    while queue:
        node = queue.popleft()
        if dist[node] >= max_depth:
            continue
        for _, dst in g.adjacency[node]:
            if dst not in dist:
                dist[dst] = dist[node] + 1
                queue.append(dst)
    return dist


def _iter_data_lines(path: Path):
    """Yield (line_number, stripped_line) for non-comment, non-blank lines."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def load_relation_allowlist(path) -> List[str]:
    """One relation label per line; comments and blanks ignored."""
    path = Path(path)
    labels = [line.strip() for _, line in _iter_data_lines(path)]
    if not labels:
        raise GraphFormatError(f"Relation allowlist is empty: {path}", str(path), 0)
    return labels


def load_concepts(path) -> Dict[str, Concept]:
    """
    Parse the concepts TSV: CUI, semantic types, preferred name, aliases.

    Raises:
        GraphFormatError: Naming the file and line of the first malformed row
    """
    path = Path(path)
    concepts: Dict[str, Concept] = {}
    for lineno, line in _iter_data_lines(path):
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise GraphFormatError(
                f"{path}:{lineno}: expected 3 or 4 tab-separated columns, got {len(cols)}",
                str(path), lineno,
            )
        cui, types_col, preferred = cols[0].strip(), cols[1].strip(), cols[2].strip()
        if not is_cui(cui):
            raise GraphFormatError(f"{path}:{lineno}: invalid CUI '{cui}'", str(path), lineno)
        if not preferred:
            raise GraphFormatError(f"{path}:{lineno}: empty preferred name", str(path), lineno)
        types = tuple(t.strip() for t in types_col.split(",") if t.strip())
        bad_types = [t for t in types if not SEMTYPE_PATTERN.match(t)]
        if bad_types:
            raise GraphFormatError(
                f"{path}:{lineno}: invalid semantic type(s) {bad_types}", str(path), lineno
            )
        names = [preferred]
        if len(cols) == 4:
            for alias in cols[3].split("|"):
                alias = alias.strip()
                if alias and alias not in names:
                    names.append(alias)
        if cui in concepts:
            raise GraphFormatError(f"{path}:{lineno}: duplicate concept {cui}", str(path), lineno)
        concepts[cui] = Concept(id=cui, names=tuple(names), semantic_types=types)
    return concepts


def load_graph(
    concepts_path,
    triples_path,
    relation_allowlist: List[str],
) -> Tuple[KnowledgeGraph, LoadReport]:
    """
    Load and validate the concept graph.

    Args:
        concepts_path: Concepts TSV
        triples_path: Triples TSV (CUI, relation label, CUI)
        relation_allowlist: Relation labels to keep

    Returns:
        Tuple of (KnowledgeGraph, LoadReport)

    Raises:
        GraphFormatError: Malformed line (file and line number in the message)
        UnknownConceptError: Triples referencing CUIs missing from the concept table
    """
    allow = {label.strip() for label in relation_allowlist if label.strip()}
    allow.discard(SELF)
    if not allow:
        raise GraphFormatError("Relation allowlist is empty")

    concepts = load_concepts(concepts_path)
    triples_path = Path(triples_path)
    report = LoadReport()
    seen: Set[Triple] = set()
    unknown: Set[str] = set()

    for lineno, line in _iter_data_lines(triples_path):
        cols = line.split("\t")
        if len(cols) != 3:
            raise GraphFormatError(
                f"{triples_path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}",
                str(triples_path), lineno,
            )
        src, label, dst = (c.strip() for c in cols)
        if not is_cui(src) or not is_cui(dst) or not label:
            raise GraphFormatError(f"{triples_path}:{lineno}: malformed triple", str(triples_path), lineno)

        if label == SELF:
            if src != dst:
                raise GraphFormatError(
                    f"{triples_path}:{lineno}: 'self' relation between distinct concepts",
                    str(triples_path), lineno,
                )
            report.deduped += 1
            continue
        if label not in allow:
            report.dropped += 1
            report.dropped_relations[label] += 1
            continue

        missing = {c for c in (src, dst) if c not in concepts}
        if missing:
            unknown |= missing
            continue

        triple = Triple(src, RelationType(label), dst)
        if triple in seen:
            report.deduped += 1
            continue
        seen.add(triple)
        report.kept += 1

    if unknown:
        raise UnknownConceptError(
            f"Triples reference {len(unknown)} unknown CUI(s): {', '.join(sorted(unknown)[:10])}",
            unknown,
        )

    graph = KnowledgeGraph(concepts, seen, allow)
    logger.info(
        f"Loaded graph: {len(graph)} concepts, {graph.edge_count} edges "
        f"(dropped={report.dropped}, deduped={report.deduped})"
    )
    return graph, report


def load_graph_from_config(config) -> Tuple[KnowledgeGraph, LoadReport]:
    """Load the graph named by `paths.concepts`, `paths.triples` and `paths.relations`."""
    allowlist = load_relation_allowlist(config.path("relations"))
    return load_graph(config.path("concepts"), config.path("triples"), allowlist)


def default_allowlist_path() -> Path:
    """The 12-relation sample allowlist shipped with the package."""
    return Path(__file__).parent / "data" / "relations_sample.txt"
