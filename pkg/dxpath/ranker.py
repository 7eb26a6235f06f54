"""
Path ranker - recursive path embeddings, path scoring, per-node score
aggregation and the iterative top-N hop expansion.

Each hop extends every non-terminated survivor along all of its out-edges
plus the implicit self-loop. Survivors that already terminated are carried
into the next hop's candidate list and rescored. Candidate scores are summed
per end node, normalized with a softmax (beta) and the top-N nodes survive,
each through its single highest-scoring witness path.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import numerics as nx
from .encoder import NodeEncodings
from .errors import ConfigError, RankerError
from .kg import SELF, KnowledgeGraph, RelationType, Triple
from .model import VARIANTS, NoteSession, PathRankerModel
from .numerics import Tensor

logger = logging.getLogger(__name__)

PathScorer = Callable[[Sequence["PathState"]], np.ndarray]


@dataclass(frozen=True)
class RankerConfig:
    top_n: int = 4
    max_hops: int = 2
    variant: str = "triattn"
    reduced_dim: int = 64
    heads: int = 4
    trilinear_rank: int = 32
    seed: int = 13

    def __post_init__(self):
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if self.max_hops < 1:
            raise ConfigError("max_hops must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"Unknown ranker variant '{self.variant}'")


@dataclass
class EncodedInput:
    """Projected note text (h_x) and source-concept (h_v) embeddings."""
    note_id: str
    h_x: Tensor
    h_v: Tensor
    session: Optional[NoteSession] = None

    def anchor(self) -> Tensor:
        return nx.mul(self.h_x, self.h_v)


@dataclass(eq=False)
class PathState:
    source: str
    hops: Tuple[Triple, ...] = ()
    embedding: Optional[Tensor] = None
    terminated: bool = False

    @property
    def end(self) -> str:
        return self.hops[-1].dst if self.hops else self.source

    @property
    def nodes(self) -> List[str]:
        return [self.source] + [t.dst for t in self.hops]

    @property
    def relations(self) -> List[str]:
        return [t.rel.label for t in self.hops]

    @property
    def key(self) -> Tuple:
        return (self.source,) + tuple((t.rel.label, t.dst) for t in self.hops)

    def __len__(self) -> int:
        return len(self.hops)

    def to_dict(self) -> Dict:
        return {"nodes": self.nodes, "relations": self.relations}


@dataclass
class RankedPathSet:
    """Scored candidates of one hop and the nodes that survive it."""
    hop: int
    candidates: List[PathState]
    scores: Tensor
    node_ids: List[str]
    node_scores: Tensor
    beta: Tensor
    selected: Tuple[str, ...]
    witnesses: Dict[str, int]

    def survivors(self) -> List[PathState]:
        return [self.candidates[self.witnesses[cui]] for cui in self.selected]

    def to_dict(self) -> Dict:
        beta = dict(zip(self.node_ids, self.beta.data.tolist()))
        witness_idx = set(self.witnesses.values())
        paths = []
        for j, state in enumerate(self.candidates):
            entry = state.to_dict()
            entry["score"] = float(self.scores.data[j])
            entry["beta"] = beta[state.end]
            entry["witness"] = j in witness_idx
            paths.append(entry)
        return {"hop": self.hop, "paths": paths, "selected": list(self.selected)}


@dataclass
class Exploration:
    hops: List[RankedPathSet] = field(default_factory=list)
    final_nodes: Tuple[str, ...] = ()

    def witness_paths(self) -> List[PathState]:
        """Witness path of every finally selected node, in rank order."""
        return self.hops[-1].survivors() if self.hops else []

    def to_record(self, note_id: str) -> Dict:
        return {
            "note_id": note_id,
            "hops": [h.to_dict() for h in self.hops],
            "final_nodes": list(self.final_nodes),
        }


@dataclass(frozen=True)
class RetrievedPath:
    """A witness path read back from a retrieval record."""
    nodes: Tuple[str, ...]
    relations: Tuple[str, ...]
    score: float = 0.0


def paths_from_record(record: Dict) -> List[RetrievedPath]:
    """Final-hop witness paths of a retrieval JSONL record, in rank order."""
    hops = record.get("hops") or []
    if not hops:
        return []
    last = hops[-1]
    witnesses = {p["nodes"][-1]: p for p in last["paths"] if p.get("witness")}
    return [
        RetrievedPath(tuple(w["nodes"]), tuple(w["relations"]), float(w["score"]))
        for w in (witnesses.get(cui) for cui in last["selected"]) if w is not None
    ]


def encode_input(
    model: PathRankerModel,
    provider,
    graph: KnowledgeGraph,
    note_text: str,
    source_cuis: Sequence[str],
    weights: Optional[Dict[str, float]] = None,
    apply: str = "before",
    note_id: str = "",
) -> EncodedInput:
    """
    Project the note text and the mean source-concept embedding to the model dim.

    Raises:
        RankerError: On empty note text or no source concepts
    """
    if not note_text or not note_text.strip():
        raise RankerError("Cannot encode an empty note", {"note_id": note_id})
    sources = sorted(set(source_cuis))
    if not sources:
        raise RankerError("Cannot encode a note without source concepts", {"note_id": note_id})
    session = NoteSession(model, graph, provider, weights, apply)
    h_x = model.proj_x(Tensor(provider.embed(note_text)))
    mean_base = np.mean([session.base_vector(cui) for cui in sources], axis=0)
    h_v = model.proj_v(Tensor(mean_base))
    return EncodedInput(note_id=note_id, h_x=h_x, h_v=h_v, session=session)


def init_paths(
    sources: Sequence[str],
    graph: KnowledgeGraph,
    enc: Optional[EncodedInput] = None,
    model: Optional[PathRankerModel] = None,
) -> List[PathState]:
    """
    One zero-hop state per distinct source. With a model, the state's
    embedding is the projected stacked encoding of the source.
    """
    srcs = sorted(set(sources))
    if not srcs:
        raise RankerError("Cannot start exploration from an empty source set")
    for cui in srcs:
        graph.concept(cui)
    if model is None:
        return [PathState(source=cui) for cui in srcs]
    if enc is None or enc.session is None:
        raise RankerError("Path embeddings need an encoded input")
    encodings = enc.session.encode(srcs)
    P = model.proj_node(encodings.rows(srcs))
    return [PathState(source=cui, embedding=nx.take(P, i)) for i, cui in enumerate(srcs)]


def _extend(
    pairs: Sequence[Tuple[PathState, str, str]],
    model: Optional[PathRankerModel],
    encodings: Optional[NodeEncodings],
) -> List[PathState]:
    states = []
    for state, rel, target in pairs:
        if state.terminated:
            raise RankerError(f"Cannot extend a terminated path ending at {state.end}")
        states.append(PathState(
            source=state.source,
            hops=state.hops + (Triple(state.end, RelationType(rel), target),),
            terminated=(rel == SELF),
        ))
    if model is None or not pairs:
        return states
    if encodings is None:
        raise RankerError("Path extension needs node encodings")
    previous = nx.stack([state.embedding for state, _, _ in pairs])
    onehots = model.relation_onehots([rel for _, rel, _ in pairs])
    targets = model.proj_node(encodings.rows([target for _, _, target in pairs]))
    P = model.extend(previous, onehots, targets)
    for j, state in enumerate(states):
        state.embedding = nx.take(P, j)
    return states


def extend_path(
    state: PathState,
    rel: str,
    target: str,
    graph: KnowledgeGraph,
    model: Optional[PathRankerModel] = None,
    encodings: Optional[NodeEncodings] = None,
) -> PathState:
    """
    Extend one path by the edge (end, rel, target).

    Raises:
        RankerError: If the path is terminated or the edge does not exist
    """
    if state.terminated:
        raise RankerError(f"Cannot extend a terminated path ending at {state.end}")
    if not graph.has_edge(state.end, rel, target):
        raise RankerError(f"No edge ({state.end}, {rel}, {target}) in the graph")
    return _extend([(state, rel, target)], model, encodings)[0]


def extend_paths(
    states: Sequence[PathState],
    graph: KnowledgeGraph,
    model: Optional[PathRankerModel] = None,
    encodings: Optional[NodeEncodings] = None,
) -> List[PathState]:
    """All one-edge extensions (self-loop included) of the given states, in neighbor order."""
    pairs = [(s, rel.label, dst) for s in states for rel, dst in graph.neighbors(s.end)]
    return _extend(pairs, model, encodings)


def score_paths(enc: EncodedInput, states: Sequence[PathState], model: PathRankerModel) -> Tensor:
    """Raw scores S of a batch of paths with the model's scorer."""
    if not states:
        raise RankerError("No paths to score")
    if any(s.embedding is None for s in states):
        raise RankerError("Every scored path needs an embedding")
    return model.score(enc.h_x, enc.h_v, nx.stack([s.embedding for s in states]))


def _score_one(enc: EncodedInput, state: PathState, model: PathRankerModel, variant: str) -> Tensor:
    if model.variant != variant:
        raise RankerError(f"Model uses the {model.variant} scorer, not {variant}")
    return nx.take(score_paths(enc, [state], model), 0)


def score_path_multiattn(enc: EncodedInput, state: PathState, model: PathRankerModel) -> Tensor:
    return _score_one(enc, state, model, "multiattn")


def score_path_triattn(enc: EncodedInput, state: PathState, model: PathRankerModel) -> Tensor:
    return _score_one(enc, state, model, "triattn")


def select_top(node_ids: Sequence[str], node_scores: np.ndarray, n: int) -> List[str]:
    """Top-n node ids by score, ties broken by CUI order."""
    order = sorted(range(len(node_ids)), key=lambda i: (-float(node_scores[i]), node_ids[i]))
    return [node_ids[i] for i in order[:n]]


def aggregate_and_select(
    candidates: Sequence[PathState],
    scores,
    n: int,
    hop: int = 1,
) -> RankedPathSet:
    """
    Sum path scores per end node, softmax them into beta and keep the top-n nodes.

    Args:
        candidates: Candidate paths of the hop
        scores: Raw score per candidate (Tensor or array)
        n: Number of nodes to keep
        hop: Hop index recorded on the result

    Returns:
        RankedPathSet
    """
    if not candidates:
        raise RankerError("Cannot aggregate an empty candidate set")
    scores = nx.as_tensor(scores)
    if scores.shape != (len(candidates),):
        raise RankerError(f"Expected {len(candidates)} scores, got shape {scores.shape}")

    node_ids = sorted({c.end for c in candidates})
    position = {cui: i for i, cui in enumerate(node_ids)}
    membership = np.zeros((len(node_ids), len(candidates)))
    for j, c in enumerate(candidates):
        membership[position[c.end], j] = 1.0
    node_scores = nx.matmul(membership, scores)
    beta = nx.softmax(node_scores)
    selected = tuple(select_top(node_ids, node_scores.data, n))

    witnesses = {}
    for cui in selected:
        members = [j for j, c in enumerate(candidates) if c.end == cui]
        witnesses[cui] = min(members, key=lambda j: (-float(scores.data[j]), candidates[j].key))

    return RankedPathSet(
        hop=hop,
        candidates=list(candidates),
        scores=scores,
        node_ids=node_ids,
        node_scores=node_scores,
        beta=beta,
        selected=selected,
        witnesses=witnesses,
    )


def explore(
    graph: KnowledgeGraph,
    enc: Optional[EncodedInput],
    sources: Sequence[str],
    config: RankerConfig,
    model: Optional[PathRankerModel] = None,
    scorer: Optional[PathScorer] = None,
) -> Exploration:
    """
    Iterative top-N hop expansion from the source concepts.

    Args:
        graph: Concept graph
        enc: Encoded note (needed when scoring with `model`)
        sources: Source CUIs
        config: top_n and max_hops
        model: Trained or freshly initialized model
        scorer: Optional stand-in mapping candidate paths to raw scores;
            when set, no path embeddings are computed

    Returns:
        Exploration with one RankedPathSet per executed hop
    """
    if model is None and scorer is None:
        raise RankerError("explore needs a model or a scorer")
    embed = scorer is None
    survivors = init_paths(sources, graph, enc, model if embed else None)

    result = Exploration()
    for hop in range(1, config.max_hops + 1):
        active = [s for s in survivors if not s.terminated]
        if not active:
            break
        carried = [s for s in survivors if s.terminated]
        encodings = enc.session.encode([s.end for s in active]) if embed else None
        candidates = extend_paths(active, graph, model if embed else None, encodings) + carried
        scores = score_paths(enc, candidates, model) if embed else np.asarray(scorer(candidates), dtype=np.float64)
        ranked = aggregate_and_select(candidates, scores, config.top_n, hop)
        result.hops.append(ranked)
        survivors = ranked.survivors()
        logger.debug(f"Hop {hop}: {len(candidates)} candidates, selected {list(ranked.selected)}")

    result.final_nodes = result.hops[-1].selected if result.hops else ()
    return result
