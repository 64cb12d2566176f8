"""Tests for box and game files and report rendering."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.corrbox import JointProbBox, cereceda_box, pr_box, random_nosignaling_box, stats, validate
from src.errors import MalformedInputError
from src.fine import bell_values, fine_construct
from src.gamecore import NashSet, enumerate_nash, matching_pennies, prisoners_dilemma
from src.paperlab import MATCH, MISMATCH, IdentityCheck, PaperLab
from src.report_formatter import ReportFormatter


class TestBoxFiles:
    """Test suite for the box file format."""

    def test_box_round_trip_is_exact(self, tmp_path: Path) -> None:
        """Test that a saved box loads back bit for bit."""
        box = random_nosignaling_box(11)
        path = tmp_path / "box.json"

        ReportFormatter.save_box(box, path)
        loaded = ReportFormatter.load_box(path)

        assert np.array_equal(loaded.probs, box.probs)

    def test_box_layout(self) -> None:
        """Test the pair and outcome keys."""
        data = json.loads(ReportFormatter.box_to_json(pr_box()))

        assert set(data["probs"]) == {"11", "12", "21", "22"}
        assert data["probs"]["22"] == {"++": 0.0, "+-": 0.5, "-+": 0.5, "--": 0.0}

    def test_missing_entry(self) -> None:
        """Test that a missing outcome is named."""
        data = json.loads(ReportFormatter.box_to_json(pr_box()))
        del data["probs"]["11"]["++"]

        with pytest.raises(MalformedInputError, match=r"Missing box entry: probs\.11\.\+\+"):
            ReportFormatter.parse_box(json.dumps(data))

    def test_invalid_json(self) -> None:
        """Test that broken JSON is reported."""
        with pytest.raises(MalformedInputError, match="Invalid JSON in box file"):
            ReportFormatter.parse_box("{probs:")

    def test_wrong_top_level(self) -> None:
        """Test that the box must sit under "probs"."""
        with pytest.raises(MalformedInputError, match='"probs" object'):
            ReportFormatter.parse_box("[]")

    def test_non_numeric_entry(self) -> None:
        """Test that entries must be numbers."""
        data = json.loads(ReportFormatter.box_to_json(pr_box()))
        data["probs"]["12"]["-+"] = "half"

        with pytest.raises(MalformedInputError, match="Expected a number"):
            ReportFormatter.parse_box(json.dumps(data))

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that unreadable paths raise a library error."""
        with pytest.raises(MalformedInputError, match="Cannot read"):
            ReportFormatter.load_box(tmp_path / "absent.json")


class TestGameFiles:
    """Test suite for the game file format."""

    def test_parse_game(self) -> None:
        """Test a well-formed game file."""
        game = ReportFormatter.parse_game('{"a": [3, 0, 5, 1], "b": [3, 5, 0, 1], "name": "pd"}')

        assert game.a == prisoners_dilemma().a
        assert game.b == prisoners_dilemma().b
        assert game.name == "pd"

    def test_game_round_trip(self, tmp_path: Path) -> None:
        """Test writing and loading a game."""
        path = tmp_path / "game.json"
        path.write_text(ReportFormatter.game_to_json(matching_pennies()), encoding="utf-8")

        game = ReportFormatter.load_game(path)

        assert (game.a, game.b) == (matching_pennies().a, matching_pennies().b)

    def test_short_payoff_vector(self) -> None:
        """Test that payoff vectors need four numbers."""
        with pytest.raises(MalformedInputError, match='needs "b" as a list of four numbers'):
            ReportFormatter.parse_game('{"a": [1, 2, 3, 4], "b": [1, 2]}')

    def test_not_an_object(self) -> None:
        """Test the top-level type check."""
        with pytest.raises(MalformedInputError, match="must be a JSON object"):
            ReportFormatter.parse_game("[1, 2, 3, 4]")


class TestReports:
    """Test suite for JSON reports and text rendering."""

    def test_parse_report_kinds(self) -> None:
        """Test that JSON output parses back into its report type."""
        box = cereceda_box(1)
        nash_set = enumerate_nash(matching_pennies(), box)

        nash_text = ReportFormatter.to_json(nash_set.to_dict())
        bell_text = ReportFormatter.to_json(bell_values(box).to_dict())
        validation_text = ReportFormatter.to_json(validate(box).to_dict())

        assert ReportFormatter.parse_report(nash_text, "nash") == nash_set
        assert ReportFormatter.parse_report(bell_text, "bell") == bell_values(box)
        assert ReportFormatter.parse_report(validation_text, "validation").valid

    def test_parse_audit_report(self) -> None:
        """Test that an audit parses into a list of checks."""
        checks = PaperLab().audit_identities(cereceda_box(2), matching_pennies())
        text = ReportFormatter.to_json([c.to_dict() for c in checks])

        assert ReportFormatter.parse_report(text, "audit") == checks

    def test_unknown_report_kind(self) -> None:
        """Test that unknown kinds are refused."""
        with pytest.raises(MalformedInputError, match="Unknown report kind"):
            ReportFormatter.parse_report("{}", "weather")

    def test_format_bell_marks_violation(self) -> None:
        """Test the text form of a violated system."""
        text = ReportFormatter.format_bell(bell_values(cereceda_box(1)))

        assert text.startswith("Bell system violated")
        assert text.count("VIOLATED") == 1
        assert "(1221) upper" in text

    def test_format_nash(self) -> None:
        """Test the text forms of the equilibrium sets."""
        segment = enumerate_nash(matching_pennies(), cereceda_box(1))

        assert ReportFormatter.format_nash(segment) == "NE segment x=1, y in [0, 1]"
        assert ReportFormatter.format_nash(NashSet()) == "no equilibria"

    def test_format_construction_failure(self) -> None:
        """Test that the certificate is printed for a violating box."""
        text = ReportFormatter.format_construction(fine_construct(cereceda_box(1)))

        assert text.startswith("not constructible:")
        assert "violated (1221) upper" in text

    def test_format_stats(self) -> None:
        """Test the statistics summary."""
        text = ReportFormatter.format_stats(stats(pr_box()))

        assert "P(A1)=0.5" in text
        assert "max |CHSH| = 4" in text

    def test_format_validation(self) -> None:
        """Test the validation summary for an invalid box."""
        probs = np.array(pr_box().probs)
        probs[0, 0, 0, 0] += 0.1

        text = ReportFormatter.format_validation(validate(JointProbBox(probs)))

        assert text.startswith("valid: no")
        assert "failing channels:" in text


class TestHtmlReport:
    """Test suite for HTML report generation."""

    def test_generate_html_report(self, tmp_path: Path) -> None:
        """Test that the page holds the table, the counts and escaped text."""
        checks = [
            IdentityCheck("Eq-A", 1.0, 1.0, 0.0, MATCH, 1e-12, "direct-payoff"),
            IdentityCheck(
                "Eq-B", 1.0, 0.5, 0.5, MISMATCH, 1e-12, "box-probabilities", "fine-literal"
            ),
        ]

        html = ReportFormatter.generate_html_report(
            "Audit <box>", checks, extra_sections=[("Notes", "a < b")]
        )
        path = tmp_path / "audit.html"
        path.write_text(html, encoding="utf-8")

        assert "<title>Audit &lt;box&gt;</title>" in html
        assert "<strong>MATCH</strong>: 1" in html
        assert "<strong>MISMATCH</strong>: 1" in html
        assert "<strong>SKIPPED</strong>: 0" in html
        assert '<tr class="mismatch">' in html
        assert "<pre>a &lt; b</pre>" in html
        assert path.read_text(encoding="utf-8") == html

    def test_empty_report(self) -> None:
        """Test the placeholder when nothing is reported."""
        html = ReportFormatter.generate_html_report("Empty", [])

        assert "Nothing to report." in html
