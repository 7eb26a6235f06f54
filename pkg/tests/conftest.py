"""
Pytest configuration and fixtures for dxpath tests.
"""

import json
import sys
from pathlib import Path

import pytest

# Add package root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.extractor import build_vocab_index
from dxpath.kg import default_allowlist_path, load_graph, load_relation_allowlist
from dxpath.model import PathRankerModel
from dxpath.notes import Note, write_notes
from dxpath.providers import HashingProvider
from dxpath.ranker import RankerConfig

FEVER = "C0015967"
COUGH = "C0010200"
LEUKOCYTOSIS = "C0023518"
PNEUMONIA = "C0032285"
SEPSIS = "C0243026"
BACTERIAL = "C0004623"

CONCEPTS_TSV = (
    "# cui\tsemantic_types\tpreferred_name\taliases\n"
    f"{FEVER}\tT184\tFever\tpyrexia|febrile\n"
    f"{COUGH}\tT184\tCough\n"
    f"{LEUKOCYTOSIS}\tT033\tLeukocytosis\n"
    f"{PNEUMONIA}\tT047\tPneumonia\n"
    f"{SEPSIS}\tT047\tSepsis\n"
    f"{BACTERIAL}\tT047\tBacterial infection\n"
)

TRIPLES_TSV = (
    "# src\trelation\tdst\n"
    f"{FEVER}\tmay cause\t{PNEUMONIA}\n"
    f"{FEVER}\tmay cause\t{SEPSIS}\n"
    f"{COUGH}\tassociated with\t{PNEUMONIA}\n"
    f"{LEUKOCYTOSIS}\tdefinitional manifestation of\t{SEPSIS}\n"
    f"{PNEUMONIA}\tcause of\t{SEPSIS}\n"
    f"{PNEUMONIA}\thas causative agent\t{BACTERIAL}\n"
    f"{FEVER}\tisa\t{COUGH}\n"
    f"{FEVER}\tmay cause\t{PNEUMONIA}\n"
)

SAMPLE_NOTES = [
    Note("n1", "Patient with fever and cough.", (PNEUMONIA,), "Pneumonia"),
    Note("n2", "Pyrexia noted; leukocytosis on labs.", (SEPSIS,), "Sepsis"),
    Note("n3", "Cough for three days.", (PNEUMONIA,), "Pneumonia"),
    Note("n4", "Fever and leukocytosis.", (BACTERIAL, SEPSIS), "Sepsis; Bacterial infection"),
]


@pytest.fixture
def sample_files(tmp_path):
    """Concept, triple, allowlist and notes files of the six-concept sample graph."""
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    files = {
        "concepts": data_dir / "concepts.tsv",
        "triples": data_dir / "triples.tsv",
        "relations": data_dir / "relations.txt",
        "notes": data_dir / "notes.jsonl",
    }
    files["concepts"].write_text(CONCEPTS_TSV, encoding="utf-8")
    files["triples"].write_text(TRIPLES_TSV, encoding="utf-8")
    files["relations"].write_text(default_allowlist_path().read_text(encoding="utf-8"), encoding="utf-8")
    write_notes(SAMPLE_NOTES, files["notes"])
    return files


@pytest.fixture
def loaded_graph(sample_files):
    """(graph, report) of the sample files."""
    allowlist = load_relation_allowlist(sample_files["relations"])
    return load_graph(sample_files["concepts"], sample_files["triples"], allowlist)


@pytest.fixture
def sample_graph(loaded_graph):
    return loaded_graph[0]


@pytest.fixture
def sample_index(sample_graph):
    return build_vocab_index(sample_graph.concepts.values())


@pytest.fixture
def sample_notes():
    return list(SAMPLE_NOTES)


@pytest.fixture
def provider():
    """Deterministic 8-dim hashing provider."""
    return HashingProvider(8, seed=13)


@pytest.fixture
def tiny_ranker_config():
    return RankerConfig(top_n=3, max_hops=2, reduced_dim=8, heads=2, trilinear_rank=4, seed=13)


@pytest.fixture
def make_model(sample_graph):
    """Factory for small models over the sample graph."""

    def _make(variant="triattn", seed=13, dim=8, gin_layers=1, reduced_dim=8):
        config = RankerConfig(
            variant=variant, reduced_dim=reduced_dim, heads=2, trilinear_rank=4, seed=seed,
        )
        return PathRankerModel(dim, sample_graph.relation_vocab, config, gin_layers=gin_layers)

    return _make


@pytest.fixture
def run_config_data():
    """Run config (relative paths) sized for fast tests."""
    return {
        "seed": 13,
        "paths": {
            "concepts": "data/concepts.tsv",
            "triples": "data/triples.tsv",
            "relations": "data/relations.txt",
            "notes": "data/notes.jsonl",
        },
        "provider": {"kind": "hashing", "dim": 8},
        "model": {"reduced_dim": 8, "gin_layers": 1, "heads": 2, "trilinear_rank": 4},
        "ranker": {"top_n": 3, "max_hops": 2, "variant": "triattn"},
        "train": {"epochs": 2, "batch_size": 2, "lr": 0.01},
        "eval": {"top_n": [2, 3], "resamples": 50},
        "synth": {"nodes": 20, "branching": 2, "notes": 12, "sources_per_note": 2},
    }


@pytest.fixture
def write_run_config(tmp_path, sample_files, run_config_data):
    """Write run.json next to the sample data; keyword sections update the base config."""

    def _write(**sections):
        data = json.loads(json.dumps(run_config_data))
        for name, values in sections.items():
            if isinstance(values, dict) and isinstance(data.get(name), dict):
                data[name].update(values)
            else:
                data[name] = values
        path = tmp_path / "run.json"
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return _write
