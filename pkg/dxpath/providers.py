"""
Embedding providers - turn concept name documents and note text into fixed
dim vectors. All vectors are L2-normalized on ingest.
"""

import json
import logging
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .encoder import SEP, build_concept_doc
from .errors import ConfigError, EncodingError
from .extractor import tokenize
from .kg import Concept
from .seeding import subsystem_seed

logger = logging.getLogger(__name__)


def l2_normalize(vec: np.ndarray, what: str = "vector") -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise EncodingError(f"Cannot normalize a zero or non-finite {what}")
    return vec / norm


class EmbeddingProvider(ABC):
    """Deterministic text-to-vector map of constant dim."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def embed(self, text: str) -> np.ndarray:
        pass

    def embed_concept(self, concept: Concept) -> np.ndarray:
        """Embed the concept's name document."""
        return self.embed(build_concept_doc(concept).doc)


class HashingProvider(EmbeddingProvider):
    """
    Seeded hash-based random projection: each lowercase token maps to a
    fixed Gaussian vector and a text is the normalized sum of its tokens.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ConfigError("Provider dim must be >= 1")
        self._dim = dim
        self.seed = seed
        self._tokens: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self._dim

    def _token_vector(self, token: str) -> np.ndarray:
        with self._lock:
            vec = self._tokens.get(token)
            if vec is None:
                rng = np.random.default_rng(subsystem_seed(self.seed, f"hashing:{token}"))
                vec = rng.standard_normal(self._dim)
                self._tokens[token] = vec
            return vec

    def embed(self, text: str) -> np.ndarray:
        tokens = [tok.lower() for tok, _, _ in tokenize(text.replace(SEP, " "))]
        if not tokens:
            raise EncodingError("Cannot embed empty text")
        total = np.zeros(self._dim)
        for tok in tokens:
            total = total + self._token_vector(tok)
        return l2_normalize(total, f"embedding of '{text[:40]}'")


class CachedProvider(EmbeddingProvider):
    """
    Precomputed vectors keyed by CUI (concepts) or by exact text (notes).

    The cache is a JSONL file of {"cui": ..., "vector": [...]} or
    {"text": ..., "vector": [...]} records, or a checkpoint directory whose
    parameter names are CUIs. Misses go to `fallback` when one is set.
    """

    def __init__(self, path, fallback: Optional[EmbeddingProvider] = None):
        self.path = Path(path)
        self.fallback = fallback
        self._concepts: Dict[str, np.ndarray] = {}
        self._texts: Dict[str, np.ndarray] = {}
        self._dim = self._load()
        if fallback is not None and fallback.dim != self._dim:
            raise ConfigError(f"Fallback provider dim {fallback.dim} != cache dim {self._dim}")
        logger.info(
            f"Loaded embedding cache {self.path}: {len(self._concepts)} concepts, {len(self._texts)} texts"
        )

    def _load(self) -> int:
        if not self.path.exists():
            raise ConfigError(f"Embedding cache not found: {self.path}")
        if self.path.is_dir():
            from .checkpoint import read_arrays

            arrays, _ = read_arrays(self.path)
            for name, arr in arrays.items():
                self._concepts[name] = l2_normalize(arr.reshape(-1), f"cached vector {name}")
        else:
            with open(self.path, "r", encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        vec = l2_normalize(record["vector"], f"cached vector on line {lineno}")
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                        raise EncodingError(f"{self.path}:{lineno}: malformed cache record ({e})")
                    if "cui" in record:
                        self._concepts[record["cui"]] = vec
                    elif "text" in record:
                        self._texts[record["text"]] = vec
                    else:
                        raise EncodingError(f"{self.path}:{lineno}: record needs 'cui' or 'text'")

        dims = {v.shape[0] for v in list(self._concepts.values()) + list(self._texts.values())}
        if not dims:
            raise EncodingError(f"Embedding cache is empty: {self.path}")
        if len(dims) > 1:
            raise EncodingError(f"Embedding cache mixes dims {sorted(dims)}: {self.path}")
        return dims.pop()

    @property
    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        vec = self._texts.get(text)
        if vec is not None:
            return vec
        if self.fallback is not None:
            return self.fallback.embed(text)
        raise EncodingError("Text not in embedding cache and no fallback configured")

    def embed_concept(self, concept: Concept) -> np.ndarray:
        vec = self._concepts.get(concept.id)
        if vec is not None:
            return vec
        if self.fallback is not None:
            return self.fallback.embed_concept(concept)
        raise EncodingError(f"Concept {concept.id} not in embedding cache", {"cui": concept.id})


def build_provider(config) -> EmbeddingProvider:
    """Provider named by the `provider` config section."""
    section = config.section("provider")
    hashing = HashingProvider(section["dim"], seed=config.seed)
    if section["kind"] == "hashing":
        return hashing
    fallback = hashing if section["fallback"] == "hashing" else None
    provider = CachedProvider(config.path("embeddings"), fallback=fallback)
    if provider.dim != section["dim"]:
        raise ConfigError(f"Embedding cache dim {provider.dim} != provider.dim {section['dim']}")
    return provider
