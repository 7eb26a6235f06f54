"""
Output writers - every command result goes to JSON plus a TSV mirror.

Files carry no timestamps, so rerunning a command with the same inputs and
seed rewrites byte-identical files. The writer remembers every file it
creates; a failing command calls `cleanup()` to remove partial outputs.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from .errors import DxPathError

logger = logging.getLogger(__name__)


def flatten_dict(d: Dict, parent_key: str = "", sep: str = ".") -> Dict:
    """
    Flatten nested dict for TSV output.

    Args:
        d: Dictionary to flatten
        parent_key: Prefix for nested keys
        sep: Separator between key levels

    Returns:
        Flattened dictionary
    """
    items = []
    for k, v in d.items():
        new_key = f"{parent_key}{sep}{k}" if parent_key else k

        if isinstance(v, dict):
            items.extend(flatten_dict(v, new_key, sep).items())
        elif isinstance(v, list):
            if v and isinstance(v[0], (dict, list)):
                # Nested structures - stringify
                items.append((new_key, json.dumps(v, sort_keys=True)))
            else:
                # Simple list - join with semicolons
                items.append((new_key, "; ".join(str(i) for i in v)))
        else:
            items.append((new_key, v))

    return dict(items)


def dump_json(data: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, default=str) + "\n"


def read_output(path) -> Any:
    """Payload of a JSON output file; bare JSON is returned unchanged."""
    with open(path, "r", encoding="utf-8") as f:
        content = json.load(f)
    if isinstance(content, dict) and set(content) == {"metadata", "data"}:
        return content["data"]
    return content


class OutputWriter:
    """Handles writing command output to JSON, TSV and JSONL files."""

    def __init__(self, command_name: str, output_dir: Union[str, Path] = "./output", quiet: bool = False):
        """
        Initialize output writer.

        Args:
            command_name: Name of the command (used in filenames)
            output_dir: Directory receiving every file
            quiet: Suppress console output
        """
        self.command_name = command_name
        self.output_dir = Path(output_dir)
        self.quiet = quiet
        self.created: List[Path] = []

        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str) -> Path:
        return self.output_dir / name

    def track(self, path: Union[str, Path]) -> Path:
        """Register a file written outside the writer so cleanup() covers it."""
        path = Path(path)
        if path not in self.created:
            self.created.append(path)
        return path

    def _write_text(self, path: Path, text: str) -> Path:
        self.track(path)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except IOError as e:
            raise IOError(f"Failed to write output to {path}: {e}")
        return path

    def write(
        self,
        data: Union[Dict, List],
        summary: Optional[Dict] = None,
        rows: Optional[List[Dict]] = None,
    ) -> Dict[str, str]:
        """
        Write data to `<command>.json` and `<command>.tsv`.

        Args:
            data: The data to write (dict or list of dicts)
            summary: Optional summary for console display
            rows: Records for the TSV mirror (defaults to the data itself)

        Returns:
            Dict with paths to generated files {'json': path, 'tsv': path}
        """
        if rows is None:
            rows = [data] if isinstance(data, dict) else list(data or [])
        count = len(data) if isinstance(data, list) else len(rows)

        json_path = self._write_text(
            self.path_for(f"{self.command_name}.json"),
            dump_json({"metadata": {"command": self.command_name, "count": count}, "data": data}),
        )
        tsv_path = self.write_tsv(f"{self.command_name}.tsv", rows)

        files = {"json": str(json_path.absolute()), "tsv": str(tsv_path.absolute())}
        self._print_summary(count, files, summary)
        return files

    def write_tsv(self, name: str, rows: List[Dict]) -> Path:
        path = self.path_for(name)
        self.track(path)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                if rows:
                    flat_rows = [flatten_dict(r) for r in rows]
                    fieldnames = sorted({k for r in flat_rows for k in r})
                    writer = csv.DictWriter(f, fieldnames=fieldnames, delimiter="\t", lineterminator="\n")
                    writer.writeheader()
                    writer.writerows(flat_rows)
                else:
                    f.write("no_results\n")
        except IOError as e:
            raise IOError(f"Failed to write TSV output to {path}: {e}")
        return path

    def write_jsonl(self, name: str, records: Iterable[Dict]) -> Path:
        """One canonical JSON object per line."""
        lines = [json.dumps(r, sort_keys=True, default=str) + "\n" for r in records]
        return self._write_text(self.path_for(name), "".join(lines))

    def write_json(self, name: str, data: Any) -> Path:
        return self._write_text(self.path_for(name), dump_json(data))

    def cleanup(self) -> List[Path]:
        """Remove every file this writer created. Returns the removed paths."""
        removed = []
        for path in reversed(self.created):
            if path.is_dir():
                for child in sorted(path.iterdir()):
                    child.unlink()
                path.rmdir()
                removed.append(path)
            elif path.exists():
                path.unlink()
                removed.append(path)
        if removed:
            logger.info(f"Removed {len(removed)} partial output file(s)")
        self.created = []
        return removed

    def _print_summary(self, count: int, files: Dict[str, str], summary: Optional[Dict] = None):
        """Print console summary unless in quiet mode."""
        if not self.quiet:
            from .ui.display import print_result_summary

            print_result_summary(self.command_name, count, files, summary)


def read_jsonl(path, error=DxPathError) -> List[Dict]:
    """
    Records of a JSONL file, skipping blank lines.

    Raises:
        error: Unreadable file or invalid line (file and line in the message)
    """
    records = []
    lineno = 0
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if line.strip():
                    records.append(json.loads(line))
    except json.JSONDecodeError as e:
        raise error(f"{path}:{lineno}: invalid JSON ({e.msg})")
    except IOError as e:
        raise error(f"Cannot read {path}: {e}")
    return records
