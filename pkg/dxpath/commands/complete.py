"""
Completion command - send rendered prompts to the completion endpoint.
"""

from dataclasses import replace
from typing import Any, Dict

from ..errors import PromptError
from ..llm_client import LLMClient
from ..output import read_jsonl
from ..prompts import parse_llm_output
from .base import BaseCommand


class CompleteCommand(BaseCommand):
    """Complete every prompt of `paths.prompts` and parse the answers."""

    name = "complete"
    description = "Send prompts to the configured endpoint and store parsed completions"
    aliases = ["llm"]

    def execute(self, **kwargs) -> Dict[str, Any]:
        endpoint = self.config.endpoint_config()
        if endpoint.audit_log is not None and not endpoint.audit_log.is_absolute():
            endpoint = replace(endpoint, audit_log=self.out_dir / endpoint.audit_log)

        prompts = read_jsonl(self.config.path("prompts"), PromptError)
        malformed = [i for i, p in enumerate(prompts) if "note_id" not in p or "prompt" not in p]
        if malformed:
            raise PromptError(f"Prompt record {malformed[0] + 1} lacks 'note_id' or 'prompt'")

        client = LLMClient(endpoint)
        completions = client.complete_many([p["prompt"] for p in prompts])

        records, rows = [], []
        for prompt, completion in zip(prompts, completions):
            parsed = parse_llm_output(completion)
            records.append({"note_id": prompt["note_id"], "completion": completion, **parsed.to_dict()})
            rows.append({"note_id": prompt["note_id"], "diagnoses": parsed.diagnoses})
        out = self.writer.write_jsonl("completions.jsonl", records)
        return {
            "notes": rows,
            "completions": out.name,
            "_rows": rows,
            "_summary": {
                "Prompts": len(prompts),
                "Endpoint": endpoint.base_url,
                "Without diagnoses": sum(1 for r in rows if not r["diagnoses"]),
            },
        }

    @classmethod
    def get_return_fields(cls):
        return ["notes", "completions"]


# Register command
command = CompleteCommand
