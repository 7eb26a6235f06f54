"""
Tests for output handlers.
"""

import pytest
import json
import csv
from pathlib import Path
from unittest.mock import patch

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.errors import DatasetError, DxPathError
from dxpath.output import OutputWriter, dump_json, flatten_dict, read_jsonl, read_output


class TestFlattenDict:
    """Tests for flatten_dict function."""

    def test_flatten_simple_dict(self):
        """Test flattening a simple dict."""
        assert flatten_dict({"a": 1, "b": 2}) == {"a": 1, "b": 2}

    def test_flatten_nested_dict(self):
        """Test flattening a nested dict."""
        data = {"config": "triattn@4", "ci": {"low": 0.1, "high": 0.3}}

        assert flatten_dict(data) == {"config": "triattn@4", "ci.low": 0.1, "ci.high": 0.3}

    def test_flatten_with_list(self):
        """Simple lists are joined with semicolons."""
        assert flatten_dict({"predicted": ["C0032285", "C0243026"]})["predicted"] == "C0032285; C0243026"

    def test_flatten_with_list_of_lists(self):
        """Nested lists are stringified as JSON."""
        assert flatten_dict({"hops": [["a", "b"]]})["hops"] == '[["a", "b"]]'


class TestOutputWriter:
    """Tests for OutputWriter class."""

    def test_write_creates_json_and_tsv(self, tmp_path):
        """Test that write produces both files with an envelope."""
        writer = OutputWriter("evaluate", tmp_path, quiet=True)

        files = writer.write([{"config": "extractor", "recall": 0.5}, {"config": "triattn@4", "recall": 0.7}])

        content = json.loads(Path(files["json"]).read_text())
        assert content["metadata"] == {"command": "evaluate", "count": 2}
        assert content["data"][1]["config"] == "triattn@4"

        with open(files["tsv"], newline="") as f:
            rows = list(csv.DictReader(f, delimiter="\t"))
        assert [r["config"] for r in rows] == ["extractor", "triattn@4"]

    def test_write_dict_with_rows(self, tmp_path):
        """A dict payload can carry its own TSV rows."""
        writer = OutputWriter("train", tmp_path, quiet=True)

        files = writer.write({"epochs": 2}, rows=[{"epoch": 1}, {"epoch": 2}])

        assert Path(files["tsv"]).read_text() == "epoch\n1\n2\n"
        assert read_output(files["json"]) == {"epochs": 2}

    def test_empty_rows(self, tmp_path):
        """Empty results write a placeholder TSV."""
        writer = OutputWriter("retrieve", tmp_path, quiet=True)

        files = writer.write([])

        assert Path(files["tsv"]).read_text() == "no_results\n"

    def test_write_is_byte_stable(self, tmp_path):
        """Key order never depends on insertion order."""
        a = OutputWriter("stats", tmp_path / "a", quiet=True).write({"b": 1, "a": 2})
        b = OutputWriter("stats", tmp_path / "b", quiet=True).write({"a": 2, "b": 1})

        assert Path(a["json"]).read_bytes() == Path(b["json"]).read_bytes()
        assert Path(a["tsv"]).read_bytes() == Path(b["tsv"]).read_bytes()

    def test_summary_printed_unless_quiet(self, tmp_path):
        """The console summary is skipped in quiet mode."""
        with patch("dxpath.ui.display.print_result_summary") as show:
            OutputWriter("stats", tmp_path, quiet=True).write({"a": 1})
            assert not show.called

            OutputWriter("stats", tmp_path, quiet=False).write({"a": 1}, summary={"notes": 4})
            show.assert_called_once()
            assert show.call_args.args[3] == {"notes": 4}

    def test_write_jsonl(self, tmp_path):
        """One sorted JSON object per line."""
        writer = OutputWriter("prompt", tmp_path, quiet=True)

        path = writer.write_jsonl("prompts.jsonl", [{"z": 1, "a": 2}, {"note_id": "n1"}])

        assert path.read_text() == '{"a": 2, "z": 1}\n{"note_id": "n1"}\n'

    def test_cleanup_removes_created_files(self, tmp_path):
        """Partial outputs of a failing command are removed."""
        writer = OutputWriter("train", tmp_path, quiet=True)
        writer.write_json("metrics.json", {"epoch": 1})
        checkpoint = tmp_path / "checkpoint"
        checkpoint.mkdir()
        (checkpoint / "weights.bin").write_bytes(b"\x00")
        writer.track(checkpoint)
        keep = tmp_path / "unrelated.txt"
        keep.write_text("x")

        removed = writer.cleanup()

        assert set(removed) == {tmp_path / "metrics.json", checkpoint}
        assert keep.exists()
        assert writer.created == []


class TestReaders:
    """Tests for reading outputs back."""

    def test_read_output_unwraps_envelope(self, tmp_path):
        """Envelope files return their payload; bare JSON is returned as is."""
        files = OutputWriter("weights", tmp_path, quiet=True).write({"n1": {"C0015967": 1.5}})
        bare = tmp_path / "bare.json"
        bare.write_text(dump_json([1, 2]))

        assert read_output(files["json"]) == {"n1": {"C0015967": 1.5}}
        assert read_output(bare) == [1, 2]

    def test_read_jsonl(self, tmp_path):
        """Blank lines are skipped."""
        path = tmp_path / "records.jsonl"
        path.write_text('{"a": 1}\n\n{"a": 2}\n')

        assert read_jsonl(path) == [{"a": 1}, {"a": 2}]

    def test_read_jsonl_invalid_line(self, tmp_path):
        """Invalid JSON is reported with file and line, using the caller's error type."""
        path = tmp_path / "records.jsonl"
        path.write_text('{"a": 1}\nnot json\n')

        with pytest.raises(DatasetError) as exc_info:
            read_jsonl(path, error=DatasetError)

        assert f"{path}:2:" in exc_info.value.message

    def test_read_jsonl_missing_file(self, tmp_path):
        """Unreadable files raise the default error."""
        with pytest.raises(DxPathError):
            read_jsonl(tmp_path / "missing.jsonl")
