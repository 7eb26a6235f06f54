"""
Tests for the completion audit log.
"""

import hashlib
import json
import threading

import pytest
from pathlib import Path
from unittest.mock import patch

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.audit import AuditLog, prompt_digest


class TestAuditLog:
    """Tests for AuditLog."""

    def test_record_fields(self, tmp_path):
        """A record holds timestamp, prompt hash, status and latency only."""
        log = AuditLog(tmp_path / "audit.jsonl")

        entry = log.record("Patient with fever.", 200, 12.34567)

        assert set(entry) == {"ts", "prompt_sha256", "status", "latency_ms"}
        assert entry["prompt_sha256"] == hashlib.sha256(b"Patient with fever.").hexdigest()
        assert entry["latency_ms"] == 12.346
        assert log.entries() == [entry]

    def test_missing_status(self, tmp_path):
        """Requests without a response log a null status."""
        log = AuditLog(tmp_path / "audit.jsonl")

        log.record("p", None, 1.0)

        assert log.entries()[0]["status"] is None

    def test_appends(self, tmp_path):
        """Records accumulate across instances."""
        path = tmp_path / "audit.jsonl"
        AuditLog(path).record("a", 200, 1.0)
        AuditLog(path).record("b", 503, 2.0)

        assert [e["prompt_sha256"] for e in AuditLog(path).entries()] == [prompt_digest("a"), prompt_digest("b")]

    def test_creates_parent_directories(self, tmp_path):
        """The log directory is created on demand."""
        path = tmp_path / "runs" / "r1" / "audit.jsonl"

        AuditLog(path).record("a", 200, 1.0)

        assert path.exists()

    def test_no_file_no_entries(self, tmp_path):
        """An unwritten log reads as empty."""
        assert AuditLog(tmp_path / "audit.jsonl").entries() == []

    def test_concurrent_writers(self, tmp_path):
        """Lines from parallel threads never interleave."""
        log = AuditLog(tmp_path / "audit.jsonl")

        threads = [threading.Thread(target=lambda i=i: [log.record(f"p{i}", 200, 1.0) for _ in range(20)])
                   for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        lines = (tmp_path / "audit.jsonl").read_text().splitlines()
        assert len(lines) == 80
        assert all(json.loads(line)["status"] == 200 for line in lines)

    def test_write_failure_is_logged(self, tmp_path):
        """An unwritable log warns instead of failing the request."""
        log = AuditLog(tmp_path / "audit.jsonl")

        with patch("builtins.open", side_effect=IOError("disk full")):
            with patch("dxpath.audit.logger") as logger:
                entry = log.record("p", 200, 1.0)

        assert entry["status"] == 200
        assert logger.warning.called
