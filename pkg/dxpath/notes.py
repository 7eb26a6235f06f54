"""
Notes dataset - JSONL records of {"note_id", "text", "gold_cuis", "diagnoses"}.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import DatasetError
from .extractor import ExtractedMention, VocabularyIndex, extract_concepts

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Note:
    note_id: str
    text: str
    gold_cuis: Tuple[str, ...] = ()
    diagnoses: str = ""

    def to_dict(self) -> Dict:
        data = {"note_id": self.note_id, "text": self.text, "gold_cuis": list(self.gold_cuis)}
        if self.diagnoses:
            data["diagnoses"] = self.diagnoses
        return data


def _note_from_record(record, where: str) -> Note:
    if not isinstance(record, dict):
        raise DatasetError(f"{where}: expected a JSON object")
    note_id, text = record.get("note_id"), record.get("text")
    if not isinstance(note_id, str) or not note_id:
        raise DatasetError(f"{where}: missing or empty 'note_id'")
    if not isinstance(text, str):
        raise DatasetError(f"{where}: 'text' must be a string", {"note_id": note_id})
    golds = record.get("gold_cuis", [])
    if not isinstance(golds, list) or not all(isinstance(g, str) for g in golds):
        raise DatasetError(f"{where}: 'gold_cuis' must be a list of strings", {"note_id": note_id})
    diagnoses = record.get("diagnoses", "")
    if not isinstance(diagnoses, str):
        raise DatasetError(f"{where}: 'diagnoses' must be a string", {"note_id": note_id})
    return Note(note_id=note_id, text=text, gold_cuis=tuple(sorted(set(golds))), diagnoses=diagnoses)


def load_notes(path) -> List[Note]:
    """
    Read a notes JSONL file, preserving file order.

    Raises:
        DatasetError: Malformed line or duplicate note id
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Notes file not found: {path}")
    notes: List[Note] = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{where}: invalid JSON ({e.msg})")
            note = _note_from_record(record, where)
            if note.note_id in seen:
                raise DatasetError(f"{where}: duplicate note id '{note.note_id}'", {"note_id": note.note_id})
            seen.add(note.note_id)
            notes.append(note)
    logger.info(f"Loaded {len(notes)} note(s) from {path}")
    return notes


def write_notes(notes: Iterable[Note], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for note in notes:
            f.write(json.dumps(note.to_dict(), sort_keys=True) + "\n")


def extract_corpus(
    notes: Sequence[Note], index: VocabularyIndex
) -> List[Tuple[str, List[ExtractedMention]]]:
    """(note_id, mentions) for every note."""
    return [(note.note_id, extract_concepts(note.text, index)) for note in notes]
