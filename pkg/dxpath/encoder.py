"""
Node encoder - concept name documents, W_CUI-scaled base vectors and stacked
GIN layers over a retrieved subgraph.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import numerics as nx
from .errors import ConfigError, EncodingError
from .kg import Concept, Subgraph
from .numerics import MLP, Linear, Module, Parameter, Tensor

if TYPE_CHECKING:
    from .providers import EmbeddingProvider

logger = logging.getLogger(__name__)

SEP = " [SEP] "


@dataclass(frozen=True)
class ConceptNameDoc:
    cui: str
    doc: str


def build_concept_doc(concept: Concept) -> ConceptNameDoc:
    """Join every name of the concept, in stored order, with ' [SEP] '."""
    if not concept.names:
        raise EncodingError(f"Concept {concept.id} has no names", {"cui": concept.id})
    return ConceptNameDoc(cui=concept.id, doc=SEP.join(concept.names))


def encode_concepts(
    provider: "EmbeddingProvider",
    concepts: Sequence[Concept],
    dim: int,
    weights: Optional[Mapping[str, float]] = None,
) -> Dict[str, np.ndarray]:
    """
    Base vectors h_i for the given concepts.

    Args:
        provider: Embedding provider
        concepts: Concepts to embed
        dim: Configured provider dim D
        weights: W_CUI per concept; concepts absent from the mapping keep
            weight 1. None disables weighting.

    Returns:
        Dict of CUI to vector (dim D)

    Raises:
        ConfigError: If the provider dim differs from `dim`
    """
    if provider.dim != dim:
        raise ConfigError(f"Embedding provider dim {provider.dim} != configured dim {dim}")
    vectors = {}
    for concept in concepts:
        h = provider.embed_concept(concept)
        if weights is not None:
            h = h * float(weights.get(concept.id, 1.0))
        vectors[concept.id] = h
    return vectors


@dataclass
class NodeEncodings:
    """Base, per-layer and stacked states for every node of a working subgraph."""
    nodes: Tuple[str, ...]
    index: Dict[str, int]
    base: Tensor
    layers: List[Tensor]
    stacked: Tensor

    @property
    def stacked_dim(self) -> int:
        return self.stacked.shape[1]

    def row(self, cui: str) -> Tensor:
        try:
            return nx.take(self.stacked, self.index[cui])
        except KeyError:
            raise EncodingError(f"No encoding for {cui} in the working subgraph", {"cui": cui})

    def rows(self, cuis: Sequence[str]) -> Tensor:
        missing = [c for c in cuis if c not in self.index]
        if missing:
            raise EncodingError(f"No encoding for {missing[0]} in the working subgraph", {"cui": missing[0]})
        return nx.take(self.stacked, np.array([self.index[c] for c in cuis], dtype=np.int64))


class GinLayer(Module):
    """
    One relation-aware GIN layer:

        h'_i = MLP((1 + eps) h_i + sum_{s -> i} ReLU(rel_proj([h_s; onehot(rel)])))

    Implicit self-loops carry no message.
    """

    def __init__(self, dim: int, relation_count: int, index: int, rng: np.random.Generator):
        self.index = index
        self.dim = dim
        self.relation_count = relation_count
        self.eps = Parameter("eps", np.zeros(1))
        self.mlp = MLP([dim, 2 * dim, dim], rng)
        self.rel_proj = Linear(dim + relation_count, dim, rng)

    def forward(
        self,
        subgraph: Subgraph,
        H: Tensor,
        node_index: Mapping[str, int],
        relation_index: Callable[[str], int],
    ) -> Tensor:
        n = len(node_index)
        if H.shape != (n, self.dim):
            raise EncodingError(f"GIN layer {self.index}: states have shape {H.shape}, expected {(n, self.dim)}")

        edges = [e for e in subgraph.edges if not e.rel.is_self_loop]
        h = nx.mul(nx.add(1.0, self.eps), H)
        if edges:
            src = np.array([node_index[e.src] for e in edges], dtype=np.int64)
            onehots = np.zeros((len(edges), self.relation_count))
            incidence = np.zeros((n, len(edges)))
            for j, e in enumerate(edges):
                onehots[j, relation_index(e.rel.label)] = 1.0
                incidence[node_index[e.dst], j] = 1.0
            messages = nx.relu(self.rel_proj(nx.concat([nx.take(H, src), onehots], axis=1)))
            h = nx.add(h, nx.matmul(incidence, messages))
        return self.mlp(h)


class GinEncoder(Module):
    """K stacked GIN layers."""

    def __init__(self, dim: int, relation_count: int, layers: int, rng: np.random.Generator):
        if layers < 1:
            raise ConfigError("GIN encoder needs at least one layer")
        self.dim = dim
        self.layers = [GinLayer(dim, relation_count, k, rng) for k in range(layers)]

    @property
    def output_dim(self) -> int:
        return self.dim * len(self.layers)

    def forward(self, subgraph, base, relation_index, post_scale=None) -> NodeEncodings:
        return stack_gin(self.layers, subgraph, base, relation_index, post_scale)


def stack_gin(
    layers: Sequence[GinLayer],
    subgraph: Subgraph,
    base: Mapping[str, np.ndarray],
    relation_index: Callable[[str], int],
    post_scale: Optional[Mapping[str, float]] = None,
) -> NodeEncodings:
    """
    Apply the layers in order and concatenate their outputs per node.

    Args:
        layers: K >= 1 GIN layers
        subgraph: Working subgraph; node order is its sorted node tuple
        base: Base vector per node
        relation_index: Relation label to one-hot index
        post_scale: Optional per-node factor applied to the stacked output

    Returns:
        NodeEncodings with stacked dim K * D
    """
    if not layers:
        raise ConfigError("GIN encoder needs at least one layer")
    missing = [n for n in subgraph.nodes if n not in base]
    if missing:
        raise EncodingError(f"No base vector for {missing[0]}", {"cui": missing[0]})

    nodes = tuple(subgraph.nodes)
    index = {cui: i for i, cui in enumerate(nodes)}
    H0 = Tensor(np.stack([base[cui] for cui in nodes]))
    states = []
    H = H0
    for layer in layers:
        H = layer(subgraph, H, index, relation_index)
        states.append(H)
    stacked = states[0] if len(states) == 1 else nx.concat(states, axis=1)
    if post_scale is not None:
        factors = np.array([[post_scale.get(cui, 1.0)] for cui in nodes])
        stacked = nx.mul(stacked, factors)
    return NodeEncodings(nodes=nodes, index=index, base=H0, layers=states, stacked=stacked)
