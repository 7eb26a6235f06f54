"""
Completion audit log - one JSONL record per endpoint request.

Records hold a hash of the prompt rather than the prompt itself:
{"ts", "prompt_sha256", "status", "latency_ms"}.
"""

import hashlib
import json
import logging
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class AuditLog:
    """Append-only JSONL audit file, safe to share across worker threads."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, prompt: str, status: Optional[int], latency_ms: float) -> Dict[str, Any]:
        """
        Append one request record.

        Args:
            prompt: Prompt text sent to the endpoint
            status: HTTP status, or None when no response arrived
            latency_ms: Wall time of the attempt

        Returns:
            The record written
        """
        entry = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "prompt_sha256": prompt_digest(prompt),
            "status": status,
            "latency_ms": round(latency_ms, 3),
        }
        line = json.dumps(entry, sort_keys=True)
        with self._lock:
            try:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line + "\n")
            except IOError as e:
                logger.warning(f"Failed to write audit record to {self.path}: {e}")
        return entry

    def entries(self) -> List[Dict[str, Any]]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
