"""Tests for main module."""

import json
import os
from pathlib import Path
from unittest.mock import patch

import pytest
from pytest_mock import MockerFixture

from src.corrbox import cereceda_box, product_box
from src.errors import SolverFailureError
from src.main import EXIT_NEGATIVE, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, dispatch
from src.report_formatter import ReportFormatter


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in list(os.environ):
        if name.startswith("BELLGAMES_"):
            monkeypatch.delenv(name)
    monkeypatch.setattr("src.config.load_dotenv", lambda: False)


def _box_file(tmp_path: Path, name: str, *args: str) -> Path:
    path = tmp_path / f"{name}.json"
    assert dispatch(["box", "gen", *args, "-o", str(path)]) == EXIT_OK
    return path


class TestBoxCommands:
    """Test suite for box generation and inspection."""

    def test_gen_then_bell_check(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that the first Cereceda set fails the Bell check."""
        path = _box_file(tmp_path, "cereceda", "cereceda", "--set", "1")

        code = dispatch(["bell", "check", str(path)])

        assert code == EXIT_NEGATIVE
        out = capsys.readouterr().out
        assert "Bell system violated" in out
        assert "0.2071" in out

    def test_gen_writes_loadable_box(self, tmp_path: Path) -> None:
        """Test that a generated file parses back into the same box."""
        path = _box_file(tmp_path, "product", "product", "--params", "0.2,0.4,0.6,0.8")

        assert ReportFormatter.load_box(path).isclose(product_box(0.2, 0.4, 0.6, 0.8))

    def test_gen_to_stdout(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that without -o the box goes to stdout."""
        code = dispatch(["box", "gen", "deterministic", "--signs=+,-,+,-"])

        assert code == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["probs"]["11"]["++"] == 1.0

    def test_gen_missing_option(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a variant without its parameters is a usage error."""
        code = dispatch(["box", "gen", "deterministic"])

        assert code == EXIT_USAGE
        assert "requires --signs" in capsys.readouterr().err

    def test_gen_infeasible_parameters(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that free parameters outside the polytope are refused."""
        code = dispatch(["box", "gen", "free", "--params", "0.5,0.5,0.5,0.5,0.9,0.9,0.9,0.9"])

        assert code == EXIT_USAGE
        assert capsys.readouterr().err.startswith("Error:")

    def test_validate_invalid_box(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the validation exit code and JSON output."""
        data = json.loads(ReportFormatter.box_to_json(cereceda_box(1)))
        data["probs"]["11"]["++"] += 0.1
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data), encoding="utf-8")

        code = dispatch(["box", "validate", str(path), "--json"])

        assert code == EXIT_NEGATIVE
        report = ReportFormatter.parse_report(capsys.readouterr().out, "validation")
        assert "normalization" in report.failing_channels()[0]

    def test_invalid_box_in_analysis(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that analysis commands reject invalid boxes."""
        data = json.loads(ReportFormatter.box_to_json(cereceda_box(1)))
        data["probs"]["22"]["--"] = 0.9
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data), encoding="utf-8")

        code = dispatch(["bell", "check", str(path)])

        assert code == EXIT_NEGATIVE
        assert capsys.readouterr().err.startswith("Invalid box:")

    def test_missing_box_file(self, tmp_path: Path) -> None:
        """Test that a missing file is a usage error."""
        assert dispatch(["box", "stats", str(tmp_path / "absent.json")]) == EXIT_USAGE


class TestLocalityCommands:
    """Test suite for the construction and LP commands."""

    def test_lp_feasible_exit_codes(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test local and nonlocal verdicts."""
        local = _box_file(tmp_path, "local", "random-local", "--seed", "3")
        nonlocal_ = _box_file(tmp_path, "pr", "pr")

        assert dispatch(["lp", "feasible", str(local)]) == EXIT_OK
        assert dispatch(["lp", "feasible", str(nonlocal_)]) == EXIT_NEGATIVE
        out = capsys.readouterr().out
        assert "local (" in out
        assert "nonlocal (" in out

    def test_solver_failure(
        self, tmp_path: Path, mocker: MockerFixture, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that a solver failure maps to its own exit code."""
        path = _box_file(tmp_path, "local", "random-local", "--seed", "3")
        mocker.patch(
            "src.main.lp_feasible", side_effect=SolverFailureError("Simplex did not converge")
        )

        code = dispatch(["lp", "feasible", str(path)])

        assert code == EXIT_SOLVER
        assert "did not converge" in capsys.readouterr().err

    def test_fine_construct_writes_distribution(self, tmp_path: Path) -> None:
        """Test that a constructed distribution is saved as JSON."""
        box = _box_file(tmp_path, "local", "random-local", "--seed", "5")
        output = tmp_path / "dist.json"

        code = dispatch(["fine", "construct", str(box), "-o", str(output)])

        assert code == EXIT_OK
        q = json.loads(output.read_text(encoding="utf-8"))["q"]
        assert len(q) == 16
        assert sum(q.values()) == pytest.approx(1.0)

    def test_fine_construct_refuses_violating_box(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test the negative exit code for a nonlocal box."""
        box = _box_file(tmp_path, "cereceda", "cereceda", "--set", "2")

        assert dispatch(["fine", "construct", str(box)]) == EXIT_NEGATIVE
        assert "not constructible" in capsys.readouterr().out


class TestGameCommands:
    """Test suite for payoff and equilibrium commands."""

    def test_nash_on_classical_box(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test the mixed equilibrium of Matching Pennies on the deterministic box."""
        box = _box_file(tmp_path, "det", "deterministic", "--signs=+,-,+,-")

        code = dispatch(["game", "nash", "-g", "mp", "-b", str(box), "--grid", "51"])

        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "NE (0.5, 0.5)" in out
        assert "(confirmed)" in out

    def test_payoff_from_game_file(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test payoffs with a game read from a file."""
        box = _box_file(tmp_path, "det", "deterministic", "--signs=+,-,+,-")
        game = tmp_path / "pd.json"
        game.write_text('{"a": [3, 0, 5, 1], "b": [3, 5, 0, 1]}', encoding="utf-8")

        code = dispatch(["game", "payoff", "-g", str(game), "-b", str(box), "-x", "0", "-y", "0"])

        assert code == EXIT_OK
        assert "Alice 1, Bob 1" in capsys.readouterr().out

    def test_profile_out_of_range(self, tmp_path: Path) -> None:
        """Test that mixed strategies must be probabilities."""
        box = _box_file(tmp_path, "pr", "pr")

        code = dispatch(["game", "payoff", "-g", "pd", "-b", str(box), "-x", "2", "-y", "0"])

        assert code == EXIT_USAGE


class TestQuantumCommand:
    """Test suite for quantum box generation."""

    def test_optimal_angles_violate(self, tmp_path: Path) -> None:
        """Test a Born-rule box at the optimal angles."""
        path = tmp_path / "q.json"

        code = dispatch(
            ["quantum", "box", "--state", "phi+", "--angles=0,90,45,-45", "-o", str(path)]
        )

        assert code == EXIT_OK
        assert ReportFormatter.load_box(path).isclose(cereceda_box(1), atol=1e-12)
        assert dispatch(["bell", "check", str(path)]) == EXIT_NEGATIVE

    def test_rounded_amplitudes_are_normalized(self, tmp_path: Path) -> None:
        """Test that amplitudes typed to eight digits still give a valid box."""
        path = tmp_path / "q.json"

        code = dispatch(
            [
                "quantum",
                "box",
                "--state",
                "0.70710678,0,0,0.70710678",
                "--angles=0,90,45,-45",
                "-o",
                str(path),
            ]
        )

        assert code == EXIT_OK
        assert ReportFormatter.load_box(path).isclose(cereceda_box(1), atol=1e-12)

    def test_zero_amplitudes(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that an all-zero state is a usage error."""
        code = dispatch(["quantum", "box", "--state", "0,0,0,0", "--angles=0,0,0,0"])

        assert code == EXIT_USAGE
        assert "nonzero norm" in capsys.readouterr().err

    def test_unknown_state(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that unknown state names are usage errors."""
        code = dispatch(["quantum", "box", "--state", "chi", "--angles=0,0,0,0"])

        assert code == EXIT_USAGE
        assert "Unknown Bell state" in capsys.readouterr().err


class TestReportCommands:
    """Test suite for the reproduction and audit commands."""

    def test_reproduce_pd(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test a small Prisoner's Dilemma reproduction."""
        code = dispatch(["reproduce", "pd", "--seeds", "5"])

        assert code == EXIT_OK
        assert "all checks passed: yes" in capsys.readouterr().out

    def test_reproduce_mp_json(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the Matching Pennies report as JSON with an HTML copy."""
        html = tmp_path / "mp.html"

        code = dispatch(["reproduce", "mp", "--seeds", "5", "--json", "--html", str(html)])

        assert code == EXIT_OK
        report = ReportFormatter.parse_report(capsys.readouterr().out, "mp")
        assert report.batch.n_boxes == 5
        assert "cereceda-1 Omega" in {c.name for c in report.discrepancies}
        assert "Matching Pennies reproduction" in html.read_text(encoding="utf-8")

    def test_audit_html(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the identity audit with an HTML report."""
        box = _box_file(tmp_path, "local", "random-local", "--seed", "8")
        html = tmp_path / "audit.html"

        code = dispatch(["audit", "-b", str(box), "-g", "mp", "--html", str(html)])

        assert code == EXIT_OK
        assert "Eq-HHpayoff2" in capsys.readouterr().out
        assert "Identity audit" in html.read_text(encoding="utf-8")

    def test_audit_json(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that the audit JSON parses into checks."""
        box = _box_file(tmp_path, "fair", "product", "--params", "0.5,0.5,0.5,0.5")

        assert dispatch(["audit", "-b", str(box), "--json"]) == EXIT_OK
        checks = ReportFormatter.parse_report(capsys.readouterr().out, "audit")
        assert {c.name: c.status for c in checks}["Eq-HHpayoff3"] == "mismatch"


class TestDispatch:
    """Test suite for argument handling and configuration errors."""

    def test_unknown_command(self) -> None:
        """Test that argparse errors become the usage exit code."""
        assert dispatch(["teleport"]) == EXIT_USAGE

    def test_invalid_configuration(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a bad environment variable stops before any command runs."""
        with patch.dict(os.environ, {"BELLGAMES_GRID_SIZE": "0"}):
            code = dispatch(["reproduce", "mp"])

        assert code == EXIT_USAGE
        assert "BELLGAMES_GRID_SIZE" in capsys.readouterr().err
