"""
Path serialization - structural ("A → rel → B") and clause ("A rel B") text.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from ..errors import PromptError
from ..kg import KnowledgeGraph

ARROW = " → "
PATH_SEPARATOR = "; "
STYLES = ("structural", "clause")


@dataclass(frozen=True)
class PathText:
    style: str
    lines: Tuple[str, ...]

    def __bool__(self) -> bool:
        return bool(self.lines)

    def render(self) -> str:
        """Paths on one line, separated by '; '."""
        return PATH_SEPARATOR.join(self.lines)


def serialize_paths(paths: Sequence, graph: KnowledgeGraph, style: str = "structural") -> PathText:
    """
    One line per path, using preferred names.

    `paths` are objects with `nodes` and `relations` sequences (PathState or
    RetrievedPath). Structural lines alternate names and relation labels
    with ' → '; clause lines render each hop as 'Src relation Dst' and join
    hops with '; '.

    Raises:
        PromptError: Unknown style
        ConceptNotFoundError: A node missing from the graph
    """
    if style not in STYLES:
        raise PromptError(f"Unknown path style '{style}'")
    lines: List[str] = []
    for path in paths:
        names = [graph.name_of(cui) for cui in path.nodes]
        relations = list(path.relations)
        if style == "structural":
            parts = [names[0]]
            for rel, name in zip(relations, names[1:]):
                parts.extend([rel, name])
            lines.append(ARROW.join(parts))
        elif relations:
            lines.append("; ".join(
                f"{src} {rel} {dst}" for src, rel, dst in zip(names, relations, names[1:])
            ))
        else:
            lines.append(names[0])
    return PathText(style=style, lines=tuple(lines))


def parse_structural_line(line: str) -> Tuple[List[str], List[str]]:
    """Split a structural line back into (names, relations)."""
    parts = line.split(ARROW)
    if len(parts) % 2 == 0:
        raise PromptError(f"Malformed structural path: {line!r}")
    return parts[0::2], parts[1::2]
