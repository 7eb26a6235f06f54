"""
Prompt kit - path serialization, templates, perplexity ranking and output parsing.
"""

from .parsing import ParsedOutput, parse_llm_output
from .perplexity import CharTrigramScorer, LmScorer, TemplateRank, rank_templates_by_perplexity
from .serialize import ARROW, PathText, parse_structural_line, serialize_paths
from .templates import (
    PromptTemplate,
    build_prompt,
    default_template_path,
    format_shots,
    load_shots,
    load_template,
    load_templates,
    parse_template,
)

__all__ = [
    "ARROW", "CharTrigramScorer", "LmScorer", "ParsedOutput", "PathText", "PromptTemplate",
    "TemplateRank", "build_prompt", "default_template_path", "format_shots", "load_shots",
    "load_template", "load_templates", "parse_llm_output", "parse_structural_line",
    "parse_template", "rank_templates_by_perplexity", "serialize_paths",
]
