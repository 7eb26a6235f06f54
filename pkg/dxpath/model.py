"""
Trainable parameters of the path ranker and the per-note encoding session.

PathRankerModel owns the GIN encoder, the input projections, the path
recursion weights and one of the two path scorers (MultiAttn or TriAttn).
"""

import logging
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from . import numerics as nx
from .encoder import GinEncoder, NodeEncodings
from .errors import ConfigError, EncodingError
from .kg import KnowledgeGraph, one_hop_subgraph
from .numerics import MLP, Linear, Module, MultiheadAttention, Tensor, Trilinear
from .seeding import subsystem_rng

if TYPE_CHECKING:
    from .providers import EmbeddingProvider
    from .ranker import RankerConfig

logger = logging.getLogger(__name__)

VARIANTS = ("multiattn", "triattn")


def _repeat_rows(vec: Tensor, m: int) -> Tensor:
    return nx.matmul(np.ones((m, 1)), nx.reshape(vec, (1, vec.shape[-1])))


def relevancy_matrices(h_x: Tensor, h_v: Tensor, paths: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Context and concept relevancy matrices for m paths.

    Returns:
        (H, Z), each of shape (m, 4, d): rows [c; p; c - p; c * p] with
        c = h_x for H and c = h_v for Z
    """
    m = paths.shape[0]
    X = _repeat_rows(h_x, m)
    V = _repeat_rows(h_v, m)
    H = nx.stack([X, paths, nx.sub(X, paths), nx.mul(X, paths)], axis=1)
    Z = nx.stack([V, paths, nx.sub(V, paths), nx.mul(V, paths)], axis=1)
    return H, Z


class MultiAttnScorer(Module):
    """S = phi(ReLU(sigma(mean-pool(MultiAttn(H * Z)))))."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.attention = MultiheadAttention(dim, heads, rng)
        self.sigma = Linear(dim, dim, rng)
        self.phi = MLP([dim, dim, 1], rng)

    def forward(self, h_x: Tensor, h_v: Tensor, paths: Tensor) -> Tensor:
        H, Z = relevancy_matrices(h_x, h_v, paths)
        HZ = nx.mul(H, Z)
        attended = self.attention(HZ, HZ, HZ)
        pooled = nx.mean(attended, axis=1)
        out = self.phi(nx.relu(self.sigma(pooled)))
        return nx.reshape(out, (paths.shape[0],))


class TriAttnScorer(Module):
    """S = phi(ReLU(sigma(alpha))) with alpha the trilinear form of (h_x, h_v, p)."""

    def __init__(self, dim: int, rank: int, rng: np.random.Generator):
        self.trilinear = Trilinear(dim, rank, rng)
        self.sigma = Linear(1, dim, rng)
        self.phi = MLP([dim, dim, 1], rng)

    def alpha(self, h_x: Tensor, h_v: Tensor, paths: Tensor) -> Tensor:
        return self.trilinear(h_x, h_v, paths)

    def forward(self, h_x: Tensor, h_v: Tensor, paths: Tensor) -> Tensor:
        m = paths.shape[0]
        a = nx.reshape(self.alpha(h_x, h_v, paths), (m, 1))
        out = self.phi(nx.relu(self.sigma(a)))
        return nx.reshape(out, (m,))


class PathRankerModel(Module):
    """
    Every trainable parameter of encoder and ranker.

    Args:
        dim: Provider dim D
        relation_vocab: Sorted relation labels including 'self'
        config: RankerConfig (variant, reduced dim, heads, rank, seed)
        gin_layers: Number of stacked GIN layers K
    """

    def __init__(self, dim: int, relation_vocab: Iterable[str], config: "RankerConfig", gin_layers: int = 2):
        if config.variant not in VARIANTS:
            raise ConfigError(f"Unknown ranker variant '{config.variant}'")
        rng = subsystem_rng(config.seed, "model")
        vocab = tuple(relation_vocab)
        d = config.reduced_dim

        self.dim = dim
        self.relation_vocab = vocab
        self.variant = config.variant
        self.reduced_dim = d
        self.heads = config.heads
        self.trilinear_rank = config.trilinear_rank
        self.gin_layers = gin_layers
        self._relation_index = {label: i for i, label in enumerate(vocab)}

        self.encoder = GinEncoder(dim, len(vocab), gin_layers, rng)
        self.proj_x = Linear(dim, d, rng)
        self.proj_v = Linear(dim, d, rng)
        self.proj_node = Linear(self.encoder.output_dim, d, rng)
        self.path_h = Linear(d, d, rng)
        self.path_t = Linear(len(vocab) + d, d, rng)
        self.path_ffn = MLP([d, d, d], rng)
        if config.variant == "multiattn":
            self.scorer = MultiAttnScorer(d, config.heads, rng)
        else:
            self.scorer = TriAttnScorer(d, config.trilinear_rank, rng)

    def relation_index(self, label: str) -> int:
        try:
            return self._relation_index[label]
        except KeyError:
            raise EncodingError(f"Relation '{label}' is not in the model's relation vocabulary")

    def relation_onehots(self, labels: List[str]) -> np.ndarray:
        out = np.zeros((len(labels), len(self.relation_vocab)))
        for i, label in enumerate(labels):
            out[i, self.relation_index(label)] = 1.0
        return out

    def extend(self, previous: Tensor, onehots: np.ndarray, targets: Tensor) -> Tensor:
        """p' = FFN(W_h p + W_t [onehot(rel); h_target]) for a batch of paths."""
        step = nx.add(self.path_h(previous), self.path_t(nx.concat([onehots, targets], axis=1)))
        return self.path_ffn(step)

    def score(self, h_x: Tensor, h_v: Tensor, paths: Tensor) -> Tensor:
        return self.scorer(h_x, h_v, paths)

    def describe(self) -> Dict:
        """Architecture fields stored in checkpoint manifests."""
        return {
            "dim": self.dim,
            "relation_vocab": list(self.relation_vocab),
            "variant": self.variant,
            "reduced_dim": self.reduced_dim,
            "heads": self.heads,
            "trilinear_rank": self.trilinear_rank,
            "gin_layers": self.gin_layers,
        }

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}


def build_model(config, relation_vocab: Iterable[str], top_n: Optional[int] = None) -> PathRankerModel:
    """Model sized by an AppConfig."""
    return PathRankerModel(
        dim=config.section("provider")["dim"],
        relation_vocab=relation_vocab,
        config=config.ranker_config(top_n),
        gin_layers=config.section("model")["gin_layers"],
    )


class NoteSession:
    """
    Encoding state for one note: provider vectors, W_CUI and the GIN
    encodings of each frontier's 1-hop subgraph.
    """

    def __init__(
        self,
        model: PathRankerModel,
        graph: KnowledgeGraph,
        provider: "EmbeddingProvider",
        weights: Optional[Mapping[str, float]] = None,
        apply: str = "before",
    ):
        if provider.dim != model.dim:
            raise ConfigError(f"Embedding provider dim {provider.dim} != model dim {model.dim}")
        if apply not in ("before", "after"):
            raise ConfigError(f"Unknown weighting placement '{apply}'")
        self.model = model
        self.graph = graph
        self.provider = provider
        self.weights = dict(weights) if weights is not None else None
        self.apply = apply
        self._vectors: Dict[str, np.ndarray] = {}
        self._encodings: Dict[Tuple[str, ...], NodeEncodings] = {}

    def base_vector(self, cui: str) -> np.ndarray:
        vec = self._vectors.get(cui)
        if vec is None:
            vec = self.provider.embed_concept(self.graph.concept(cui))
            if self.weights is not None and self.apply == "before":
                vec = vec * float(self.weights.get(cui, 1.0))
            self._vectors[cui] = vec
        return vec

    def encode(self, frontier: Iterable[str]) -> NodeEncodings:
        key = tuple(sorted(set(frontier)))
        cached = self._encodings.get(key)
        if cached is not None:
            return cached
        subgraph = one_hop_subgraph(self.graph, key)
        base = {cui: self.base_vector(cui) for cui in subgraph.nodes}
        post = self.weights if self.weights is not None and self.apply == "after" else None
        encodings = self.model.encoder(subgraph, base, self.model.relation_index, post)
        self._encodings[key] = encodings
        logger.debug(f"Encoded subgraph of {len(key)} frontier node(s): {len(subgraph.nodes)} nodes")
        return encodings
