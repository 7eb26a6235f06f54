"""
Completion parsing - semicolon-separated diagnoses followed by an optional
<Reasoning> section.
"""

from dataclasses import dataclass
from typing import Dict, List

REASONING = "<Reasoning>"


@dataclass(frozen=True)
class ParsedOutput:
    diagnoses: List[str]
    reasoning: str = ""

    def to_dict(self) -> Dict:
        return {"diagnoses": list(self.diagnoses), "reasoning": self.reasoning}


def parse_llm_output(text: str) -> ParsedOutput:
    """Split at the first <Reasoning> marker; diagnoses are the non-empty ';' parts."""
    head, marker, tail = text.partition(REASONING)
    diagnoses = [part.strip() for part in head.split(";") if part.strip()]
    return ParsedOutput(diagnoses=diagnoses, reasoning=tail.strip() if marker else "")
