"""
Prompt templates - sectioned text files with {{note}}, {{paths}} and
{{shots}} placeholders, and the prompt renderer.

A template file holds `[section]` header lines followed by their text:

    [id]                 template identifier (defaults to the file stem)
    [persona]            persona sentence used when paths are present
    [persona_no_paths]   persona sentence of the no-path fallback
    [task]               task description appended to the persona
    [input]              note block, may reference {{shots}} and {{note}}
    [paths]              path block, must reference {{paths}}
    [format]             output-format instructions

Lines before the first section starting with '#' are comments.
"""

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import PromptError, TemplateError
from .serialize import PathText

PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")
SECTION = re.compile(r"^\[(\w+)\]\s*$")
REQUIRED = ("persona", "persona_no_paths", "task", "input", "paths", "format")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    persona: str
    persona_no_paths: str
    task: str
    input: str
    paths: str
    format: str
    shots: int = 0


def parse_template(text: str, default_id: str = "template") -> PromptTemplate:
    """
    Parse template text.

    Raises:
        TemplateError: Missing or unknown sections
    """
    sections: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        match = SECTION.match(line)
        if match:
            current = match.group(1)
            if current in sections:
                raise TemplateError(f"Duplicate template section [{current}]")
            sections[current] = []
        elif current is None:
            if line.strip() and not line.startswith("#"):
                raise TemplateError("Template text before the first section")
        else:
            sections[current].append(line)

    unknown = sorted(set(sections) - set(REQUIRED) - {"id"})
    if unknown:
        raise TemplateError(f"Unknown template section [{unknown[0]}]")
    missing = [name for name in REQUIRED if name not in sections]
    if missing:
        raise TemplateError(f"Template lacks section [{missing[0]}]")

    body = {name: "\n".join(lines).strip("\n") for name, lines in sections.items()}
    if "{{paths}}" not in body["paths"]:
        raise TemplateError("Template [paths] section must reference {{paths}}")
    return PromptTemplate(
        id=body.get("id", "").strip() or default_id,
        persona=body["persona"],
        persona_no_paths=body["persona_no_paths"],
        task=body["task"],
        input=body["input"],
        paths=body["paths"],
        format=body["format"],
    )


def load_template(path, shots: int = 0) -> PromptTemplate:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except IOError as e:
        raise TemplateError(f"Cannot read template {path}: {e}")
    template = parse_template(text, default_id=path.stem)
    if shots:
        template = replace(template, shots=shots)
    return template


def default_template_path() -> Path:
    return Path(__file__).parent.parent / "data" / "templates" / "knowledge_graph_persona.txt"


def load_templates(directory) -> List[PromptTemplate]:
    """Every *.txt template in a directory, sorted by id."""
    directory = Path(directory)
    if directory.is_file():
        return [load_template(directory)]
    templates = [load_template(p) for p in sorted(directory.glob("*.txt"))]
    if not templates:
        raise TemplateError(f"No templates in {directory}")
    return sorted(templates, key=lambda t: t.id)


def load_shots(path) -> List[Tuple[str, str]]:
    """Few-shot examples from JSONL {"note": ..., "answer": ...}."""
    shots = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                shots.append((str(record["note"]), str(record["answer"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise PromptError(f"{path}:{lineno}: malformed shot ({e})")
    return shots


def format_shots(shots: Sequence[Tuple[str, str]]) -> str:
    return "".join(f"Input note:\n{note}\nDiagnoses:\n{answer}\n\n" for note, answer in shots)


def resolve(text: str, values: Dict[str, str]) -> str:
    """
    Substitute {{name}} placeholders in a single pass.

    Raises:
        TemplateError: Naming the first placeholder without a value
    """
    def substitute(match):
        name = match.group(1)
        if name not in values:
            raise TemplateError(f"Unresolved template placeholder '{{{{{name}}}}}'", {"placeholder": name})
        return values[name]

    return PLACEHOLDER.sub(substitute, text)


def build_prompt(
    note_text: str,
    paths: Optional[PathText],
    template: PromptTemplate,
    shots: Sequence[Tuple[str, str]] = (),
) -> str:
    """
    Render the prompt for one note.

    With paths: persona + task, the note block, the path block and the
    format instructions. Without paths the path block is omitted and the
    no-path persona is used.
    """
    values = {"note": note_text, "shots": format_shots(shots)}
    has_paths = bool(paths)
    persona = template.persona if has_paths else template.persona_no_paths
    blocks = [resolve(f"{persona} {template.task}", values), resolve(template.input, values)]
    if has_paths:
        blocks.append(resolve(template.paths, {**values, "paths": paths.render()}))
    blocks.append(resolve(template.format, values))
    return "\n".join(blocks)
