"""
dxpath command line.

Usage:
    dxpath --config run.json [--seed N] [--out DIR] [-q] [-v|-vv] <command> [options]

Every command writes <command>.json and <command>.tsv (plus command-specific
files) to --out. Errors print a single-line JSON object on stderr and exit 1.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from . import numerics
from .commands import get_command
from .config import load_config
from .errors import DxPathError

logger = logging.getLogger(__name__)


def print_error(message: str, details: Optional[dict] = None):
    """Print error in JSON format on stderr and exit 1."""
    error_obj = {"error": message}
    if details:
        error_obj.update(details)
    print(json.dumps(error_obj, sort_keys=True, default=str), file=sys.stderr)
    sys.exit(1)


def setup_logging(verbose: int) -> None:
    """RichHandler on the root logger: WARNING, INFO with -v, DEBUG with -vv."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False))
    root.setLevel(level)


def _run_command(ctx: click.Context, cmd_name: str, **kwargs):
    """Execute a registered command with the group options."""
    opts = ctx.obj
    cmd = None
    try:
        config = load_config(opts["config"], seed=opts["seed"])
        logger.info(f"Resolved config: {config.to_json()}")
        numerics.set_checked(config.section("numerics")["checked"])

        cmd_class = get_command(cmd_name)
        if not cmd_class:
            print_error(f"Unknown command: {cmd_name}")

        cmd = cmd_class(config, out_dir=opts["out"], quiet=opts["quiet"])
        result = cmd.run(**kwargs)

        if opts["quiet"]:
            # Output just the JSON file path
            print(result["json"])

    except DxPathError as e:
        logger.debug("Command failed", exc_info=True)
        if cmd is not None:
            cmd.writer.cleanup()
        print_error(e.message, e.details)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        if cmd is not None:
            cmd.writer.cleanup()
        print_error(str(e), {"type": type(e).__name__})


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="JSON run config")
@click.option("--seed", type=int, default=None, help="Override the root seed")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="./output", show_default=True,
              help="Output directory")
@click.option("--quiet", "-q", is_flag=True, help="Print only the primary output path")
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG logging")
@click.version_option(__version__, prog_name="dxpath")
@click.pass_context
def cli(ctx, config_path, seed, out_dir, quiet, verbose):
    """dxpath - knowledge-graph path retrieval and ranking for diagnosis prediction."""
    setup_logging(verbose)
    ctx.obj = {"config": Path(config_path), "seed": seed, "out": Path(out_dir), "quiet": quiet}


@cli.command("build-graph")
@click.pass_context
def build_graph(ctx):
    """Validate the graph and write a snapshot with the load report."""
    _run_command(ctx, "build-graph")


@cli.command()
@click.pass_context
def extract(ctx):
    """Extract concept mentions from every note."""
    _run_command(ctx, "extract")


@cli.command()
@click.pass_context
def weights(ctx):
    """Compute TF-IDF concept weights over the notes."""
    _run_command(ctx, "weights")


@cli.command()
@click.option("--epochs", type=int, default=None, help="Override train.epochs")
@click.pass_context
def train(ctx, epochs):
    """Train the path ranker and write a checkpoint."""
    _run_command(ctx, "train", epochs=epochs)


@cli.command()
@click.option("--note-id", default=None, help="Retrieve for a single note")
@click.option("--top-n", type=int, default=None, help="Override ranker.top_n")
@click.pass_context
def retrieve(ctx, note_id, top_n):
    """Retrieve ranked knowledge paths for every note."""
    _run_command(ctx, "retrieve", note_id=note_id, top_n=top_n)


@cli.command()
@click.pass_context
def evaluate(ctx):
    """Evaluate the extractor baseline and the ranker at every eval.top_n."""
    _run_command(ctx, "evaluate")


@cli.command()
@click.option("--style", type=click.Choice(["structural", "clause"]), default=None, help="Override prompt.style")
@click.pass_context
def prompt(ctx, style):
    """Render prompts from retrieval records."""
    _run_command(ctx, "prompt", style=style)


@cli.command("rank-templates")
@click.option("--samples", type=int, default=20, show_default=True, help="Notes rendered per template")
@click.pass_context
def rank_templates(ctx, samples):
    """Rank prompt templates by perplexity."""
    _run_command(ctx, "rank-templates", samples=samples)


@cli.command()
@click.pass_context
def complete(ctx):
    """Send prompts to the completion endpoint."""
    _run_command(ctx, "complete")


@cli.command("score-generation")
@click.pass_context
def score_generation(ctx):
    """Score completions with ROUGE and concept-set metrics."""
    _run_command(ctx, "score-generation")


@cli.command()
@click.pass_context
def synth(ctx):
    """Generate a synthetic graph and notes with planted golds."""
    _run_command(ctx, "synth")


@cli.command()
@click.pass_context
def stats(ctx):
    """Dataset statistics of the configured notes."""
    _run_command(ctx, "stats")


def main():
    """Main entry point."""
    cli()
