"""Box and game file formats, JSON output, and text and HTML rendering of reports."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from datetime import datetime, timezone
from html import escape
from pathlib import Path
from typing import Any

import numpy as np

from src.corrbox import BoxStats, JointProbBox, ValidationReport
from src.errors import MalformedInputError
from src.fine import (
    BellSystemReport,
    FineConstruction,
    FineIntermediates,
    JointDist16,
    Local,
    Nonlocal,
    NotConstructible,
)
from src.gamecore import Game2x2, NashComparison, NashSet
from src.paperlab import IdentityCheck, MpReport, PdReport

PAIR_KEYS = ("11", "12", "21", "22")
OUTCOME_KEYS = ("++", "+-", "-+", "--")

REPORT_TYPES: dict[str, Any] = {
    "validation": ValidationReport,
    "stats": BoxStats,
    "bell": BellSystemReport,
    "nash": NashSet,
    "pd": PdReport,
    "mp": MpReport,
}


def _number(value: float) -> str:
    """17 significant digits: parses back to the same double."""
    if not math.isfinite(value):
        raise MalformedInputError(f"Cannot serialize non-finite value {value!r}")
    return format(float(value), ".17g")


def _fmt(value: float | None, digits: int = 6) -> str:
    return "-" if value is None else f"{value:.{digits}g}"


def _real(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise MalformedInputError(f"Expected a number at {where}, got {value!r}")
    return float(value)


def _loads(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"Invalid JSON in {what}: {e}") from e


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise MalformedInputError(f"Cannot read {path}: {e}") from e


class ReportFormatter:
    """Reads and writes the box and game files and renders reports."""

    @staticmethod
    def _load_template(template_name: str) -> str:
        """Load an HTML template from the data directory."""
        template_path = Path(__file__).parent.parent / "data" / f"{template_name}.html"
        with template_path.open(encoding="utf-8") as f:
            return f.read()

    @staticmethod
    def box_to_json(box: JointProbBox) -> str:
        """Serialize a box as {"probs": {"11": {"++": v, ...}, ...}}."""
        p = box.probs
        pairs = []
        for i, j in np.ndindex(2, 2):
            entries = ", ".join(
                f'"{key}": {_number(p[i, j, a, b])}'
                for key, (a, b) in zip(OUTCOME_KEYS, np.ndindex(2, 2), strict=True)
            )
            pairs.append(f'    "{i + 1}{j + 1}": {{{entries}}}')
        return '{\n  "probs": {\n' + ",\n".join(pairs) + "\n  }\n}\n"

    @staticmethod
    def parse_box(text: str) -> JointProbBox:
        """Parse a box file.

        Raises:
            MalformedInputError: If the JSON is invalid or an entry is missing or not numeric
        """
        data = _loads(text, "box file")
        if not isinstance(data, dict) or not isinstance(data.get("probs"), dict):
            raise MalformedInputError('Box file must be an object with a "probs" object')
        probs = np.empty((2, 2, 2, 2))
        for pair_key, (i, j) in zip(PAIR_KEYS, np.ndindex(2, 2), strict=True):
            table = data["probs"].get(pair_key)
            if not isinstance(table, dict):
                raise MalformedInputError(f"Missing box entry: probs.{pair_key}")
            for outcome_key, (a, b) in zip(OUTCOME_KEYS, np.ndindex(2, 2), strict=True):
                if outcome_key not in table:
                    raise MalformedInputError(f"Missing box entry: probs.{pair_key}.{outcome_key}")
                probs[i, j, a, b] = _real(table[outcome_key], f"probs.{pair_key}.{outcome_key}")
        return JointProbBox(probs)

    @staticmethod
    def load_box(path: Path) -> JointProbBox:
        return ReportFormatter.parse_box(_read(path))

    @staticmethod
    def save_box(box: JointProbBox, path: Path) -> None:
        path.write_text(ReportFormatter.box_to_json(box), encoding="utf-8")

    @staticmethod
    def game_to_json(game: Game2x2) -> str:
        return json.dumps(game.to_dict(), indent=2) + "\n"

    @staticmethod
    def parse_game(text: str) -> Game2x2:
        """Parse a game file {"a": [a1..a4], "b": [b1..b4]}.

        Raises:
            MalformedInputError: If the JSON is invalid or a payoff vector is malformed
        """
        data = _loads(text, "game file")
        if not isinstance(data, dict):
            raise MalformedInputError("Game file must be a JSON object")
        vectors = []
        for key in ("a", "b"):
            values = data.get(key)
            if not isinstance(values, list) or len(values) != 4:
                raise MalformedInputError(f'Game file needs "{key}" as a list of four numbers')
            vectors.append(tuple(_real(v, f"{key}[{k}]") for k, v in enumerate(values)))
        name = str(data.get("name", "custom"))
        return Game2x2(vectors[0], vectors[1], name)  # type: ignore[arg-type]

    @staticmethod
    def load_game(path: Path) -> Game2x2:
        return ReportFormatter.parse_game(_read(path))

    @staticmethod
    def distribution_to_json(dist: JointDist16) -> str:
        """Serialize q(a1, a2, b1, b2) keyed by sign patterns such as "+-++"."""
        entries = ",\n".join(
            f'    "{"".join("+" if k == 0 else "-" for k in idx)}": {_number(dist.probs[idx])}'
            for idx in np.ndindex(2, 2, 2, 2)
        )
        return '{\n  "q": {\n' + entries + "\n  }\n}\n"

    @staticmethod
    def to_json(data: Any) -> str:
        return json.dumps(data, indent=2)

    @staticmethod
    def parse_report(text: str, kind: str) -> Any:
        """Parse JSON written by ``--json`` back into its report type."""
        if kind == "audit":
            data = _loads(text, "audit report")
            return [IdentityCheck.from_dict(item) for item in data]
        try:
            report_type = REPORT_TYPES[kind]
        except KeyError as e:
            raise MalformedInputError(f"Unknown report kind: {kind!r}") from e
        return report_type.from_dict(_loads(text, f"{kind} report"))

    # Text rendering

    @staticmethod
    def format_validation(report: ValidationReport) -> str:
        lines = [f"valid: {'yes' if report.valid else 'no'} (tolerance {report.tolerance:g})"]
        failing = report.failing_channels()
        if failing:
            lines.append("failing channels: " + ", ".join(failing))
        return "\n".join(lines)

    @staticmethod
    def format_stats(stats: BoxStats) -> str:
        return "\n".join(
            [
                f"P(A1)={_fmt(stats.pa[0])}  P(A2)={_fmt(stats.pa[1])}",
                f"P(B1)={_fmt(stats.pb[0])}  P(B2)={_fmt(stats.pb[1])}",
                f"E11={_fmt(stats.e[0][0])}  E12={_fmt(stats.e[0][1])}  "
                f"E21={_fmt(stats.e[1][0])}  E22={_fmt(stats.e[1][1])}",
                "CHSH: " + "  ".join(_fmt(s) for s in stats.chsh),
                f"max |CHSH| = {_fmt(stats.chsh_max_abs, 12)}",
            ]
        )

    @staticmethod
    def format_bell(report: BellSystemReport) -> str:
        lines = [f"Bell system {'satisfied' if report.satisfied else 'violated'}"]
        for inequality in report.inequalities:
            index = "".join(map(str, inequality.index))
            mark = "  VIOLATED" if inequality in report.violated else ""
            lines.append(
                f"  ({index}) {inequality.bound:<5} value={_fmt(inequality.value, 10)} "
                f"residual={_fmt(inequality.residual, 10)}{mark}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_intermediates(interm: FineIntermediates) -> str:
        lines = [
            f"gamma mode: {interm.gamma_mode.value}",
            f"gamma = {_fmt(interm.gamma, 12)} (candidates: "
            + ", ".join(_fmt(c, 8) for c in interm.gamma_candidates)
            + ")",
            f"alpha = {_fmt(interm.alpha, 12)}  beta = {_fmt(interm.beta, 12)}",
        ]
        if interm.alpha_adjusted:
            lines.append(
                f"weights used in the triples: alpha = {_fmt(interm.triple_alpha, 12)}  "
                f"beta = {_fmt(interm.triple_beta, 12)}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_construction(result: FineConstruction | NotConstructible) -> str:
        if isinstance(result, FineConstruction):
            return ReportFormatter.format_intermediates(result.intermediates) + "\nconstructed"
        lines = [f"not constructible: {result.reason}"]
        if result.offending_entry is not None:
            lines.append(f"  {result.offending_entry} = {_fmt(result.offending_value, 10)}")
        for inequality in result.bell_certificate:
            lines.append(
                f"  violated ({''.join(map(str, inequality.index))}) {inequality.bound}: "
                f"value {_fmt(inequality.value, 10)}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_feasibility(verdict: Local | Nonlocal) -> str:
        if isinstance(verdict, Local):
            weights = ", ".join(_fmt(w, 6) for w in verdict.weights)
            return f"local (infeasibility {_fmt(verdict.infeasibility, 3)})\nweights: {weights}"
        lines = [f"nonlocal (infeasibility {_fmt(verdict.infeasibility, 6)})"]
        lines.extend(
            f"  violated ({''.join(map(str, i.index))}) {i.bound}: value {_fmt(i.value, 10)}"
            for i in verdict.certificate
        )
        return "\n".join(lines)

    @staticmethod
    def format_nash(nash_set: NashSet) -> str:
        if nash_set.full_square:
            return "every profile is a Nash equilibrium"
        lines = []
        for point in nash_set.points:
            lines.append(
                f"NE ({_fmt(point.x, 10)}, {_fmt(point.y, 10)}) payoffs "
                f"({_fmt(point.payoff_a, 10)}, {_fmt(point.payoff_b, 10)})"
            )
        for segment in nash_set.segments:
            free = "y" if segment.fixed_axis == "x" else "x"
            lo, hi = segment.interval
            lines.append(
                f"NE segment {segment.fixed_axis}={_fmt(segment.fixed_value, 10)}, "
                f"{free} in [{_fmt(lo, 10)}, {_fmt(hi, 10)}]"
            )
        return "\n".join(lines) or "no equilibria"

    @staticmethod
    def format_comparison(comparison: NashComparison) -> str:
        verdict = "confirmed" if comparison.confirmed else "NOT confirmed"
        return (
            f"{comparison.label}: {ReportFormatter.format_nash(comparison.nash_set)}\n"
            f"  grid oracle: {comparison.grid_points} points, Hausdorff distance "
            f"{_fmt(comparison.hausdorff, 4)} ({verdict})"
        )

    @staticmethod
    def format_checks(checks: Sequence[IdentityCheck]) -> str:
        header = f"{'identity':<22} {'status':<9} {'lhs':>14} {'rhs':>14} {'residual':>11}  mode"
        lines = [header, "-" * len(header)]
        for check in checks:
            name = f"{check.subject} {check.name}".strip()
            lines.append(
                f"{name:<22} {check.status:<9} {_fmt(check.lhs, 10):>14} "
                f"{_fmt(check.rhs, 10):>14} {_fmt(check.residual, 3):>11}  {check.gamma_mode or ''}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_pd_report(report: PdReport) -> str:
        failed = [r for r in report.results if not r.passed]
        skipped = [r for r in report.results if not r.conclusion_asserted]
        lines = [
            f"Prisoner's Dilemma a={list(report.game.a)} b={list(report.game.b)}",
            f"boxes checked: {len(report.results)} (seed {report.seed}), "
            f"conclusion asserted on {report.asserted_count}",
            f"all checks passed: {'yes' if report.all_passed else 'no'}",
        ]
        lines.extend(f"  constraints violated, not asserted: {r.label}" for r in skipped)
        lines.extend(f"  FAILED: {r.label}" for r in failed)
        if report.results:
            lines.append(ReportFormatter.format_comparison(report.results[0].nash))
        return "\n".join(lines)

    @staticmethod
    def format_mp_report(report: MpReport) -> str:
        lines = ["Matching Pennies", ReportFormatter.format_comparison(report.classical)]
        lines.append(
            f"  payoffs at (1/2, 1/2): ({_fmt(report.classical_payoff[0])}, "
            f"{_fmt(report.classical_payoff[1])})"
        )
        lines.append(ReportFormatter.format_comparison(report.full_square_witness))
        lines.extend(ReportFormatter.format_comparison(n) for n in report.entangled)
        lines.append("")
        lines.append(
            f"{'box':<12} {'mode':<16} {'gamma':>12} {'alpha':>12} {'beta':>12} {'Omega':>12}"
        )
        for entry in report.gamma_table:
            interm = entry.intermediates
            lines.append(
                f"{entry.label:<12} {interm.gamma_mode.value:<16} {_fmt(interm.gamma, 8):>12} "
                f"{_fmt(interm.alpha, 8):>12} {_fmt(interm.beta, 8):>12} {_fmt(entry.omega, 8):>12}"
            )
        lines.append("")
        lines.append(ReportFormatter.format_checks(report.constraint_checks))
        lines.append("")
        lines.append("claims:")
        for claim in report.claims:
            mode = f" [{claim.gamma_mode}]" if claim.gamma_mode else ""
            lines.append(
                f"  {claim.name}{mode}: claimed {_fmt(claim.claimed)}, recomputed "
                f"{_fmt(claim.recomputed, 10)} -> {claim.status}"
            )
        batch = report.batch
        lines.append("")
        lines.append(
            f"random boxes: {batch.n_boxes} local, {batch.nosignaling_kept} Bell-satisfying "
            f"no-signaling ({batch.constructed} constructed, round trip "
            f"{_fmt(batch.max_round_trip_error, 3)}); "
            f"max residual MPNE1 {_fmt(batch.max_mpne1_residual, 3)}, "
            f"MPNE2 {_fmt(batch.max_mpne2_residual, 3)}, "
            f"HHpayoff2 {_fmt(batch.max_hhpayoff2_residual, 3)}, "
            f"HHpayoff3 {_fmt(batch.max_hhpayoff3_residual, 3)} "
            f"(mean {_fmt(batch.mean_hhpayoff3_residual, 3)})"
        )
        return "\n".join(lines)

    # HTML rendering

    @staticmethod
    def _checks_table(checks: Iterable[IdentityCheck]) -> str:
        rows = []
        for check in checks:
            rows.append(f"""<tr class="{escape(check.status)}">
    <td>{escape(check.subject)}</td>
    <td>{escape(check.name)}</td>
    <td class="status">{escape(check.status)}</td>
    <td class="num">{escape(_fmt(check.lhs, 12))}</td>
    <td class="num">{escape(_fmt(check.rhs, 12))}</td>
    <td class="num">{escape(_fmt(check.residual, 3))}</td>
    <td>{escape(check.oracle)}</td>
    <td>{escape(check.gamma_mode or "")}</td>
</tr>""")
        return (
            "<table>\n<tr><th>Box</th><th>Identity</th><th>Status</th><th>Independent</th>"
            "<th>Reduced form</th><th>Residual</th><th>Oracle</th><th>Gamma mode</th></tr>\n"
            + "\n".join(rows)
            + "\n</table>"
        )

    @staticmethod
    def generate_html_report(
        title: str,
        checks: Sequence[IdentityCheck],
        extra_sections: Sequence[tuple[str, str]] = (),
    ) -> str:
        """Standalone HTML page with an identity table and optional preformatted sections.

        Args:
            title: Page title
            checks: Identity checks to tabulate
            extra_sections: (heading, plain text) pairs rendered as preformatted blocks

        Returns:
            HTML report as string
        """
        template = ReportFormatter._load_template("report_template")

        counts = {"match": 0, "mismatch": 0, "skipped": 0}
        for check in checks:
            counts[check.status] = counts.get(check.status, 0) + 1
        summary_cards_html = "\n".join(
            f"<div><strong>{status.upper()}</strong>: {count}</div>"
            for status, count in counts.items()
        )

        parts = []
        if checks:
            parts.append("<h2>Identities</h2>")
            parts.append(ReportFormatter._checks_table(checks))
        for heading, body in extra_sections:
            parts.append(f"<h2>{escape(heading)}</h2>\n<pre>{escape(body)}</pre>")
        content_html = "\n".join(parts) or "<p>Nothing to report.</p>"

        return template.format(
            title=escape(title),
            generated_time=datetime.now(timezone.utc).strftime(  # noqa: UP017
                "%Y-%m-%d %H:%M:%S UTC"
            ),
            summary_cards=summary_cards_html,
            content=content_html,
        )
