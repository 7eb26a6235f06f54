"""
Template ranking by language-model perplexity.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..errors import DxPathError, PromptError
from .serialize import PathText
from .templates import PromptTemplate, build_prompt

logger = logging.getLogger(__name__)

PAD = "\x02"
UNKNOWN = "\x00"


class LmScorer(ABC):
    """Deterministic language-model likelihood."""

    @abstractmethod
    def log_likelihood(self, text: str) -> float:
        pass

    @abstractmethod
    def token_count(self, text: str) -> int:
        pass

    def perplexity(self, text: str) -> float:
        count = self.token_count(text)
        if count == 0:
            raise PromptError("Perplexity is undefined for empty text")
        return math.exp(-self.log_likelihood(text) / count)


class CharTrigramScorer(LmScorer):
    """
    Character trigram model with add-one smoothing over the training
    character set plus an unknown symbol. Tokens are characters.
    """

    def __init__(self, corpus: Iterable[str]):
        self.trigrams: Counter = Counter()
        self.contexts: Counter = Counter()
        chars = set()
        for text in corpus:
            chars.update(text)
            padded = PAD * 2 + text
            for i in range(2, len(padded)):
                self.trigrams[padded[i - 2:i + 1]] += 1
                self.contexts[padded[i - 2:i]] += 1
        if not chars:
            raise PromptError("Cannot train a trigram scorer on an empty corpus")
        self.charset = frozenset(chars)
        self.vocab_size = len(self.charset) + 1

    @classmethod
    def from_file(cls, path) -> "CharTrigramScorer":
        text = Path(path).read_text(encoding="utf-8")
        return cls(line for line in text.splitlines() if line.strip())

    def _map(self, text: str) -> str:
        return "".join(ch if ch in self.charset else UNKNOWN for ch in text)

    def log_likelihood(self, text: str) -> float:
        padded = PAD * 2 + self._map(text)
        total = 0.0
        for i in range(2, len(padded)):
            tri, ctx = padded[i - 2:i + 1], padded[i - 2:i]
            total += math.log((self.trigrams[tri] + 1) / (self.contexts[ctx] + self.vocab_size))
        return total

    def token_count(self, text: str) -> int:
        return len(text)


@dataclass(frozen=True)
class TemplateRank:
    template_id: str
    perplexity: float

    def to_dict(self) -> Dict:
        return {"template_id": self.template_id, "perplexity": self.perplexity}


def rank_templates_by_perplexity(
    templates: Sequence[PromptTemplate],
    sample_inputs: Sequence[Tuple[str, Optional[PathText]]],
    scorer: LmScorer,
) -> List[TemplateRank]:
    """
    Average perplexity of each template rendered on every sample input,
    ascending, ties broken by template id.

    Raises:
        PromptError: No templates or samples, or a scorer failure (with the template id)
    """
    if not templates:
        raise PromptError("No templates to rank")
    if not sample_inputs:
        raise PromptError("No sample inputs to rank templates on")
    ranks = []
    for template in templates:
        try:
            values = [scorer.perplexity(build_prompt(note, paths, template)) for note, paths in sample_inputs]
        except DxPathError as e:
            raise PromptError(f"Scoring template '{template.id}' failed: {e.message}", {"template_id": template.id})
        except Exception as e:
            raise PromptError(f"Scoring template '{template.id}' failed: {e}", {"template_id": template.id})
        ranks.append(TemplateRank(template.id, sum(values) / len(values)))
        logger.debug(f"Template {template.id}: mean perplexity {ranks[-1].perplexity:.3f}")
    return sorted(ranks, key=lambda r: (r.perplexity, r.template_id))
