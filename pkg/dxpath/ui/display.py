"""
Console rendering for command summaries.
"""

from typing import Dict, Optional

from rich.console import Console
from rich.table import Table

console = Console()


def print_result_summary(command: str, count: int, files: Dict[str, str], summary: Optional[Dict] = None):
    """Print command result summary."""
    table = Table(title=f"dxpath {command}", show_header=False, title_justify="left")
    table.add_column("key", style="bold")
    table.add_column("value")
    table.add_row("Results", f"{count} record(s)")
    for key, value in (summary or {}).items():
        table.add_row(str(key), _fmt(value))
    for kind, path in files.items():
        table.add_row(kind.upper(), f"[green]{path}[/green]")
    console.print(table)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
