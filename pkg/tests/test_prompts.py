"""
Tests for path serialization, templates, perplexity ranking and output parsing.
"""

import json
import math
from dataclasses import replace
from types import SimpleNamespace

import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from dxpath.errors import ConceptNotFoundError, PromptError, TemplateError
from dxpath.prompts import (
    CharTrigramScorer,
    LmScorer,
    build_prompt,
    default_template_path,
    format_shots,
    load_shots,
    load_template,
    load_templates,
    parse_llm_output,
    parse_structural_line,
    parse_template,
    rank_templates_by_perplexity,
    serialize_paths,
)
from dxpath.prompts.templates import resolve

from .conftest import COUGH, FEVER, LEUKOCYTOSIS, PNEUMONIA, SEPSIS

GOLDEN = Path(__file__).parent / "golden"

MINIMAL_TEMPLATE = """# comment
[persona]
P with paths,
[persona_no_paths]
P alone,
[task]
do the task.
[input]
{{shots}}Note: {{note}}
[paths]
Paths:
{{paths}}
[format]
Answer with semicolons.
"""


def path(nodes, relations):
    return SimpleNamespace(nodes=list(nodes), relations=list(relations))


@pytest.fixture
def sample_paths():
    return [
        path([FEVER, PNEUMONIA], ["may cause"]),
        path([LEUKOCYTOSIS, LEUKOCYTOSIS], ["self"]),
    ]


class TestSerialize:
    """Tests for path text."""

    def test_structural(self, sample_graph, sample_paths):
        """Names and relations alternate with arrows; self loops stay visible."""
        text = serialize_paths(sample_paths, sample_graph)

        assert text.lines == ("Fever → may cause → Pneumonia", "Leukocytosis → self → Leukocytosis")

    def test_clause(self, sample_graph):
        """Clause style renders hops as short sentences."""
        two_hop = path([COUGH, PNEUMONIA, SEPSIS], ["associated with", "cause of"])

        text = serialize_paths([two_hop, path([FEVER], [])], sample_graph, "clause")

        assert text.lines == ("Cough associated with Pneumonia; Pneumonia cause of Sepsis", "Fever")

    def test_render_joins_paths_on_one_line(self, sample_graph, sample_paths):
        """The path block lists paths separated by semicolons."""
        text = serialize_paths(sample_paths, sample_graph)

        assert text.render() == "Fever → may cause → Pneumonia; Leukocytosis → self → Leukocytosis"

    def test_empty_is_falsy(self, sample_graph):
        """No paths, no path block."""
        assert not serialize_paths([], sample_graph)

    def test_unknown_style(self, sample_graph, sample_paths):
        """Only the two styles exist."""
        with pytest.raises(PromptError):
            serialize_paths(sample_paths, sample_graph, "graphviz")

    def test_unknown_node(self, sample_graph):
        """Nodes must be graph concepts."""
        with pytest.raises(ConceptNotFoundError):
            serialize_paths([path(["C9999999"], [])], sample_graph)

    def test_parse_structural_line(self):
        """A structural line splits back into names and relations."""
        names, relations = parse_structural_line("Cough → associated with → Pneumonia → cause of → Sepsis")

        assert names == ["Cough", "Pneumonia", "Sepsis"]
        assert relations == ["associated with", "cause of"]

    def test_parse_malformed_line(self):
        """A dangling relation is malformed."""
        with pytest.raises(PromptError):
            parse_structural_line("Cough → associated with")


class TestTemplates:
    """Tests for template parsing and prompt rendering."""

    def test_zero_shot_prompt_matches_golden(self, sample_graph, sample_paths):
        """The bundled template renders byte-identically to the golden prompt."""
        template = load_template(default_template_path())

        prompt = build_prompt("Patient with fever and cough.", serialize_paths(sample_paths, sample_graph), template)

        assert prompt == (GOLDEN / "zero_shot_prompt.txt").read_text(encoding="utf-8")

    def test_no_path_prompt_matches_golden(self):
        """Without paths the bundled template falls back to the plain persona."""
        template = load_template(default_template_path())

        prompt = build_prompt("Patient with fever and cough.", None, template)

        assert prompt == (GOLDEN / "no_path_prompt.txt").read_text(encoding="utf-8")
        assert "knowledge" not in prompt

    def test_no_paths_fallback(self):
        """Without paths the path block disappears and the plain persona is used."""
        template = parse_template(MINIMAL_TEMPLATE)

        prompt = build_prompt("chest pain", None, template)

        assert prompt == "P alone, do the task.\nNote: chest pain\nAnswer with semicolons."
        assert template.id == "template"

    def test_few_shot_block(self):
        """Shots precede the note in the input block."""
        template = parse_template(MINIMAL_TEMPLATE)

        prompt = build_prompt("x", None, template, shots=[("a note", "Flu")])

        assert "Input note:\na note\nDiagnoses:\nFlu\n\nNote: x" in prompt

    def test_format_shots(self):
        """Each shot is a note and its diagnoses followed by a blank line."""
        assert format_shots([("n1", "A"), ("n2", "B")]) == (
            "Input note:\nn1\nDiagnoses:\nA\n\nInput note:\nn2\nDiagnoses:\nB\n\n"
        )
        assert format_shots([]) == ""

    def test_load_shots(self, tmp_path):
        """Shots are read from JSONL records."""
        shots_file = tmp_path / "shots.jsonl"
        shots_file.write_text(json.dumps({"note": "n", "answer": "A"}) + "\n\n", encoding="utf-8")

        assert load_shots(shots_file) == [("n", "A")]

    def test_load_shots_malformed(self, tmp_path):
        """A record without an answer is rejected with its line."""
        shots_file = tmp_path / "shots.jsonl"
        shots_file.write_text(json.dumps({"note": "n"}) + "\n", encoding="utf-8")

        with pytest.raises(PromptError) as exc_info:
            load_shots(shots_file)

        assert ":1:" in exc_info.value.message

    @pytest.mark.parametrize("text", [
        MINIMAL_TEMPLATE.replace("[format]\nAnswer with semicolons.\n", ""),
        MINIMAL_TEMPLATE + "[extra]\nx\n",
        MINIMAL_TEMPLATE + "[task]\nagain\n",
        MINIMAL_TEMPLATE.replace("{{paths}}", "nothing"),
        "stray text\n" + MINIMAL_TEMPLATE,
    ])
    def test_invalid_templates(self, text):
        """Missing, unknown or duplicate sections and a path block without {{paths}}."""
        with pytest.raises(TemplateError):
            parse_template(text)

    def test_unresolved_placeholder(self):
        """Placeholders without a value name themselves."""
        with pytest.raises(TemplateError) as exc_info:
            resolve("Hello {{who}}", {})

        assert exc_info.value.details["placeholder"] == "who"

    def test_single_pass_substitution(self):
        """Substituted values are not scanned again."""
        assert resolve("{{note}}", {"note": "{{paths}}"}) == "{{paths}}"

    def test_load_templates_directory(self, tmp_path):
        """Templates load sorted by id; the file stem is the default id."""
        (tmp_path / "b.txt").write_text(MINIMAL_TEMPLATE, encoding="utf-8")
        (tmp_path / "a.txt").write_text(MINIMAL_TEMPLATE + "[id]\nzeta\n", encoding="utf-8")

        assert [t.id for t in load_templates(tmp_path)] == ["b", "zeta"]

    def test_empty_template_directory(self, tmp_path):
        """A directory without templates is an error."""
        with pytest.raises(TemplateError):
            load_templates(tmp_path)


class TestPerplexity:
    """Tests for the trigram scorer and template ranking."""

    def test_familiar_text_is_less_perplexing(self):
        """Text seen in training scores lower perplexity than unseen text."""
        scorer = CharTrigramScorer(["the patient has a fever", "the patient has a cough"])

        assert scorer.perplexity("the patient has a fever") < scorer.perplexity("zxq vwk jjp")

    def test_add_one_smoothing(self):
        """Counts are smoothed over the character set plus the unknown symbol."""
        scorer = CharTrigramScorer(["ab"])

        # vocab a, b, unknown: p(b | start) = 1/4, p(a | start b) = 1/3 (unseen context)
        assert scorer.perplexity("ba") == pytest.approx(math.sqrt(12.0))

    def test_empty_inputs(self):
        """Neither training nor scoring works on empty text."""
        with pytest.raises(PromptError):
            CharTrigramScorer([])
        with pytest.raises(PromptError):
            CharTrigramScorer(["abc"]).perplexity("")

    def test_rank_templates(self, sample_graph, sample_paths):
        """Templates are ordered by mean perplexity, most familiar first."""
        plain = load_template(default_template_path())
        odd = replace(plain, id="odd", persona="Qzx vvk jjw pqz,", task="xqz zzv kkq.")
        samples = [("Patient with fever and cough.", serialize_paths(sample_paths, sample_graph)),
                   ("Cough for three days.", None)]
        scorer = CharTrigramScorer([build_prompt(note, paths, plain) for note, paths in samples])

        ranks = rank_templates_by_perplexity([odd, plain], samples, scorer)

        assert [r.template_id for r in ranks] == ["knowledge_graph_persona", "odd"]
        assert all(math.isfinite(r.perplexity) for r in ranks)

    def test_scorer_failure_names_template(self):
        """A failing scorer is reported against the template being scored."""
        class Broken(LmScorer):
            def log_likelihood(self, text):
                raise RuntimeError("model offline")

            def token_count(self, text):
                return len(text)

        template = parse_template(MINIMAL_TEMPLATE)

        with pytest.raises(PromptError) as exc_info:
            rank_templates_by_perplexity([template], [("note", None)], Broken())

        assert exc_info.value.details["template_id"] == "template"

    def test_nothing_to_rank(self):
        """Templates and samples are both required."""
        scorer = CharTrigramScorer(["abc"])
        with pytest.raises(PromptError):
            rank_templates_by_perplexity([], [("n", None)], scorer)
        with pytest.raises(PromptError):
            rank_templates_by_perplexity([parse_template(MINIMAL_TEMPLATE)], [], scorer)


class TestParsing:
    """Tests for completion parsing."""

    def test_diagnoses_and_reasoning(self):
        """Diagnoses precede the first <Reasoning> marker."""
        parsed = parse_llm_output("Pneumonia; Sepsis ;\n<Reasoning> fever <Reasoning> again")

        assert parsed.diagnoses == ["Pneumonia", "Sepsis"]
        assert parsed.reasoning == "fever <Reasoning> again"

    def test_without_marker(self):
        """No marker: everything is diagnoses and reasoning is empty."""
        parsed = parse_llm_output("Influenza")

        assert parsed.to_dict() == {"diagnoses": ["Influenza"], "reasoning": ""}
