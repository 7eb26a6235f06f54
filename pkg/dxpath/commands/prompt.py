"""
Prompt command - render one prompt per note from its retrieved paths.
"""

import logging
from dataclasses import replace
from typing import Any, Dict, List, Optional

from ..errors import PromptError, TemplateError
from ..prompts import (
    PromptTemplate,
    build_prompt,
    default_template_path,
    load_shots,
    load_template,
    load_templates,
    serialize_paths,
)
from ..output import read_jsonl
from ..ranker import paths_from_record
from .base import BaseCommand

logger = logging.getLogger(__name__)


def resolve_template(config) -> PromptTemplate:
    """Template named by `paths.templates` (file, or directory plus `prompt.template` id)."""
    section = config.section("prompt")
    location = config.path("templates", required=False)
    if location is None:
        return load_template(default_template_path(), shots=section["shots"])
    if location.is_file():
        return load_template(location, shots=section["shots"])
    templates = {t.id: t for t in load_templates(location)}
    wanted = section["template"] or next(iter(sorted(templates)))
    if wanted not in templates:
        raise TemplateError(f"Template '{wanted}' not found in {location}", {"template": wanted})
    return replace(templates[wanted], shots=section["shots"])


class PromptCommand(BaseCommand):
    """Serialize retrieved paths and render prompts."""

    name = "prompt"
    description = "Render prompts from retrieval records (no-path fallback where nothing was found)"
    aliases = []

    def _shots(self, count: int) -> List:
        if count == 0:
            return []
        path = self.config.path("shots")
        shots = load_shots(path)
        if len(shots) < count:
            raise PromptError(f"{path} holds {len(shots)} shot(s), {count} requested")
        return shots[:count]

    def execute(self, **kwargs) -> Dict[str, Any]:
        """
        Render prompts.

        Args:
            style: Override prompt.style

        Returns:
            Per-note prompt summary; prompts go to prompts.jsonl
        """
        style = kwargs.get("style") or self.config.section("prompt")["style"]
        template = resolve_template(self.config)
        shots = self._shots(template.shots)
        records = {r["note_id"]: r for r in read_jsonl(self.config.path("retrieval"), PromptError) if "note_id" in r}

        prompts, rows = [], []
        for note in self.notes:
            record: Optional[Dict] = records.get(note.note_id)
            paths = serialize_paths(paths_from_record(record), self.graph, style) if record else None
            text = build_prompt(note.text, paths, template, shots)
            prompts.append({"note_id": note.note_id, "template": template.id, "prompt": text})
            rows.append({"note_id": note.note_id, "paths": len(paths.lines) if paths else 0, "chars": len(text)})

        fallback = sum(1 for row in rows if row["paths"] == 0)
        if fallback:
            logger.info(f"{fallback} note(s) use the no-path prompt")
        out = self.writer.write_jsonl("prompts.jsonl", prompts)
        return {
            "notes": rows,
            "template": template.id,
            "style": style,
            "shots": len(shots),
            "prompts": out.name,
            "_rows": rows,
            "_summary": {
                "Prompts": len(rows),
                "No-path prompts": fallback,
                "Template": template.id,
                "Style": style,
                "Shots": len(shots),
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["notes", "template", "style", "shots", "prompts"]


# Register command
command = PromptCommand
