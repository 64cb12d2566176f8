"""Main entry point for the bellgames command line."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import numpy.typing as npt

from src.config import BellGamesConfig, load_config
from src.corrbox import (
    BoxSpec,
    CerecedaSpec,
    DeterministicSpec,
    FreeParams8,
    FreeParamsSpec,
    PrBoxSpec,
    ProductSpec,
    RandomLocalSpec,
    RandomNoSignalingSpec,
    make_box,
    stats,
    validate,
)
from src.errors import (
    InfeasibleParametersError,
    InvalidBoxError,
    MalformedInputError,
    MalformedStateError,
    SignalingBoxError,
    SolverFailureError,
)
from src.fine import FineConstruction, GammaMode, Local, bell_values, fine_construct, lp_feasible
from src.gamecore import (
    Game2x2,
    MixedProfile,
    compare_with_grid,
    matching_pennies,
    payoff,
    prisoners_dilemma,
)
from src.paperlab import PaperLab
from src.quantum import QuantumSetup, bell_state, born_box
from src.report_formatter import ReportFormatter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

BOX_VARIANTS = ("product", "deterministic", "cereceda", "pr", "free", "random-local", "random-ns")
GAME_ALIASES: dict[str, Callable[[], Game2x2]] = {"pd": prisoners_dilemma, "mp": matching_pennies}

Handler = Callable[[argparse.Namespace, BellGamesConfig], int]


def _floats(text: str, count: int, what: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise MalformedInputError(f"{what} needs {count} comma-separated values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise MalformedInputError(f"{what} must be numeric: {text!r}") from e


def _signs(text: str) -> list[int]:
    mapping = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4 or any(p not in mapping for p in parts):
        raise MalformedInputError(
            f"--signs needs four comma-separated signs such as +,-,+,-, got {text!r}"
        )
    return [mapping[p] for p in parts]


def _require(value: object, flag: str, variant: str) -> None:
    if value is None:
        raise MalformedInputError(f"Variant {variant!r} requires {flag}")


def _box_spec(args: argparse.Namespace) -> BoxSpec:
    variant = args.variant
    if variant == "product":
        _require(args.params, "--params", variant)
        return ProductSpec(*_floats(args.params, 4, "--params"))
    if variant == "deterministic":
        _require(args.signs, "--signs", variant)
        return DeterministicSpec(*_signs(args.signs))
    if variant == "cereceda":
        return CerecedaSpec(args.set)
    if variant == "pr":
        return PrBoxSpec()
    if variant == "free":
        _require(args.params, "--params", variant)
        return FreeParamsSpec(FreeParams8(*_floats(args.params, 8, "--params")))
    _require(args.seed, "--seed", variant)
    if variant == "random-local":
        return RandomLocalSpec(args.seed)
    return RandomNoSignalingSpec(args.seed)


def _load_game(value: str) -> Game2x2:
    alias = GAME_ALIASES.get(value.lower())
    return alias() if alias is not None else ReportFormatter.load_game(Path(value))


def _write(text: str, output: str | None) -> None:
    if output is None:
        print(text, end="" if text.endswith("\n") else "\n")
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Saved %s", path)


def cmd_box_gen(args: argparse.Namespace, config: BellGamesConfig) -> int:
    box = make_box(_box_spec(args), config.tolerance)
    _write(ReportFormatter.box_to_json(box), args.output)
    return EXIT_OK


def cmd_box_validate(args: argparse.Namespace, config: BellGamesConfig) -> int:
    tol = args.tol if args.tol is not None else config.tolerance
    report = validate(ReportFormatter.load_box(Path(args.box)), tol)
    if args.json:
        print(ReportFormatter.to_json(report.to_dict()))
    else:
        print(ReportFormatter.format_validation(report))
    return EXIT_OK if report.valid else EXIT_NEGATIVE


def cmd_box_stats(args: argparse.Namespace, config: BellGamesConfig) -> int:
    box_stats = stats(ReportFormatter.load_box(Path(args.box)), config.tolerance)
    if args.json:
        print(ReportFormatter.to_json(box_stats.to_dict()))
    else:
        print(ReportFormatter.format_stats(box_stats))
    return EXIT_OK


def cmd_bell_check(args: argparse.Namespace, config: BellGamesConfig) -> int:
    report = bell_values(ReportFormatter.load_box(Path(args.box)), config.tolerance)
    if args.json:
        print(ReportFormatter.to_json(report.to_dict()))
    else:
        print(ReportFormatter.format_bell(report))
    return EXIT_OK if report.satisfied else EXIT_NEGATIVE


def cmd_fine_construct(args: argparse.Namespace, config: BellGamesConfig) -> int:
    box = ReportFormatter.load_box(Path(args.box))
    result = fine_construct(
        box, GammaMode.parse(args.gamma_mode), strict=not args.no_strict, tol=config.tolerance
    )
    print(ReportFormatter.format_construction(result))
    if not isinstance(result, FineConstruction):
        return EXIT_NEGATIVE
    if args.output is not None:
        _write(ReportFormatter.distribution_to_json(result.distribution), args.output)
    return EXIT_OK


def cmd_lp_feasible(args: argparse.Namespace, config: BellGamesConfig) -> int:
    verdict = lp_feasible(ReportFormatter.load_box(Path(args.box)), config.tolerance)
    print(ReportFormatter.format_feasibility(verdict))
    return EXIT_OK if isinstance(verdict, Local) else EXIT_NEGATIVE


def cmd_game_payoff(args: argparse.Namespace, config: BellGamesConfig) -> int:
    game = _load_game(args.game)
    box = ReportFormatter.load_box(Path(args.box))
    pay_a, pay_b = payoff(game, box, MixedProfile(args.x, args.y), config.tolerance)
    print(f"payoffs at ({args.x:g}, {args.y:g}): Alice {pay_a:.12g}, Bob {pay_b:.12g}")
    return EXIT_OK


def cmd_game_nash(args: argparse.Namespace, config: BellGamesConfig) -> int:
    game = _load_game(args.game)
    box = ReportFormatter.load_box(Path(args.box))
    grid = args.grid if args.grid is not None else config.grid_size
    comparison = compare_with_grid(game.name, game, box, grid, config.tolerance)
    if args.json:
        print(ReportFormatter.to_json(comparison.to_dict()))
    else:
        print(ReportFormatter.format_comparison(comparison))
    return EXIT_OK


def _state(text: str) -> npt.ArrayLike:
    if "," not in text:
        return bell_state(text)
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise MalformedStateError(f"State needs four comma-separated amplitudes, got {len(parts)}")
    try:
        amplitudes = np.array([complex(p) for p in parts], dtype=np.complex128)
    except ValueError as e:
        raise MalformedStateError(f"Amplitudes must be numeric: {text!r}") from e
    norm = float(np.linalg.norm(amplitudes))
    if not math.isfinite(norm) or norm == 0.0:
        raise MalformedStateError(f"Amplitudes must have a finite nonzero norm: {text!r}")
    if abs(norm - 1.0) > 1e-9:
        logger.info("Normalizing state amplitudes with norm %.12g", norm)
    return amplitudes / norm


def cmd_quantum_box(args: argparse.Namespace, config: BellGamesConfig) -> int:
    angles = _floats(args.angles, 4, "--angles")
    box = born_box(QuantumSetup.from_planar_angles(_state(args.state), angles))
    _write(ReportFormatter.box_to_json(box), args.output)
    return EXIT_OK


def _lab(config: BellGamesConfig) -> PaperLab:
    return PaperLab(config.tolerance, config.audit_tolerance, config.grid_size)


def cmd_reproduce(args: argparse.Namespace, config: BellGamesConfig) -> int:
    lab = _lab(config)
    if args.which == "pd":
        n_boxes = 1000 if args.seeds is None else args.seeds
        pd = lab.pd_report(n_boxes=n_boxes, seed=args.seed)
        text, data, code = (
            ReportFormatter.format_pd_report(pd),
            pd.to_dict(),
            EXIT_OK if pd.all_passed else EXIT_NEGATIVE,
        )
        title = "Prisoner's Dilemma reproduction"
        checks = ()
    else:
        n_boxes = 200 if args.seeds is None else args.seeds
        mp = lab.mp_report(seed=args.seed, n_boxes=n_boxes)
        text, data, code = ReportFormatter.format_mp_report(mp), mp.to_dict(), EXIT_OK
        title = "Matching Pennies reproduction"
        checks = mp.constraint_checks

    print(ReportFormatter.to_json(data) if args.json else text)
    if args.html is not None:
        _write(ReportFormatter.generate_html_report(title, checks, [("Summary", text)]), args.html)
    return code


def cmd_audit(args: argparse.Namespace, config: BellGamesConfig) -> int:
    box = ReportFormatter.load_box(Path(args.box))
    game = _load_game(args.game)
    checks = _lab(config).audit_identities(box, game, args.gamma_mode)
    if args.json:
        print(ReportFormatter.to_json([check.to_dict() for check in checks]))
    else:
        print(ReportFormatter.format_checks(checks))
    if args.html is not None:
        html = ReportFormatter.generate_html_report(f"Identity audit: {args.box}", checks)
        _write(html, args.html)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bellgames",
        description="Correlation boxes, Bell inequalities and 2x2 games played through them.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    box = commands.add_parser("box", help="generate and inspect boxes").add_subparsers(
        dest="box_command", required=True
    )
    gen = box.add_parser("gen", help="generate a box file")
    gen.add_argument("variant", choices=BOX_VARIANTS)
    gen.add_argument(
        "--params", help="comma-separated marginals (product) or eight free parameters (free)"
    )
    gen.add_argument(
        "--signs", help="outcomes of A1,A2,B1,B2 for the deterministic box, e.g. --signs=+,-,+,-"
    )
    gen.add_argument("--set", type=int, choices=(1, 2), default=1, help="which Cereceda set")
    gen.add_argument("--seed", type=int, help="seed for the random variants")
    gen.add_argument("-o", "--output", help="output file (default: stdout)")
    gen.set_defaults(handler=cmd_box_gen)

    val = box.add_parser("validate", help="check normalization, no-signaling and range")
    val.add_argument("box")
    val.add_argument("--tol", type=float)
    val.add_argument("--json", action="store_true")
    val.set_defaults(handler=cmd_box_validate)

    st = box.add_parser("stats", help="marginals, correlations and CHSH sums")
    st.add_argument("box")
    st.add_argument("--json", action="store_true")
    st.set_defaults(handler=cmd_box_stats)

    bell = commands.add_parser("bell", help="Bell inequalities").add_subparsers(
        dest="bell_command", required=True
    )
    check = bell.add_parser("check", help="evaluate the eight Clauser-Horne inequalities")
    check.add_argument("box")
    check.add_argument("--json", action="store_true")
    check.set_defaults(handler=cmd_bell_check)

    fine = commands.add_parser("fine", help="joint distribution construction").add_subparsers(
        dest="fine_command", required=True
    )
    construct = fine.add_parser("construct", help="build the four-variable joint distribution")
    construct.add_argument("box")
    construct.add_argument(
        "--gamma-mode", default=GammaMode.FINE_LITERAL.value, help="fine or paper"
    )
    construct.add_argument(
        "--no-strict", action="store_true", help="attempt construction on violating boxes"
    )
    construct.add_argument("-o", "--output", help="write the distribution as JSON")
    construct.set_defaults(handler=cmd_fine_construct)

    lp = commands.add_parser("lp", help="local polytope membership").add_subparsers(
        dest="lp_command", required=True
    )
    feasible = lp.add_parser("feasible", help="decide locality by linear feasibility")
    feasible.add_argument("box")
    feasible.set_defaults(handler=cmd_lp_feasible)

    game = commands.add_parser("game", help="payoffs and equilibria").add_subparsers(
        dest="game_command", required=True
    )
    pay = game.add_parser("payoff", help="expected payoffs at a mixed profile")
    pay.add_argument("-g", "--game", required=True, help="game file, or pd / mp")
    pay.add_argument("-b", "--box", required=True)
    pay.add_argument("-x", type=float, required=True)
    pay.add_argument("-y", type=float, required=True)
    pay.set_defaults(handler=cmd_game_payoff)

    nash = game.add_parser("nash", help="all Nash equilibria, confirmed on a grid")
    nash.add_argument("-g", "--game", required=True, help="game file, or pd / mp")
    nash.add_argument("-b", "--box", required=True)
    nash.add_argument("--grid", type=int, help="grid size of the brute-force oracle")
    nash.add_argument("--json", action="store_true")
    nash.set_defaults(handler=cmd_game_nash)

    quantum = commands.add_parser("quantum", help="boxes from spin measurements").add_subparsers(
        dest="quantum_command", required=True
    )
    qbox = quantum.add_parser("box", help="Born-rule box for a state and planar angles")
    qbox.add_argument(
        "--state",
        required=True,
        help="phi+, phi-, psi+, psi- or four comma-separated amplitudes (normalized on input)",
    )
    qbox.add_argument("--angles", required=True, help="degrees for A1,A2,B1,B2 in the x-z plane")
    qbox.add_argument("-o", "--output")
    qbox.set_defaults(handler=cmd_quantum_box)

    reproduce = commands.add_parser(
        "reproduce", help="Prisoner's Dilemma or Matching Pennies report"
    )
    reproduce.add_argument("which", choices=("pd", "mp"))
    reproduce.add_argument("--seeds", type=int, help="number of random boxes")
    reproduce.add_argument("--seed", type=int, default=0)
    reproduce.add_argument("--json", action="store_true")
    reproduce.add_argument("--html", help="also write an HTML report")
    reproduce.set_defaults(handler=cmd_reproduce)

    audit = commands.add_parser("audit", help="evaluate every derived identity on a box")
    audit.add_argument("-b", "--box", required=True)
    audit.add_argument("-g", "--game", default="pd", help="game file, or pd / mp")
    audit.add_argument("--gamma-mode", default=GammaMode.FINE_LITERAL.value)
    audit.add_argument("--json", action="store_true")
    audit.add_argument("--html", help="also write an HTML report")
    audit.set_defaults(handler=cmd_audit)

    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    try:
        config = load_config()
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=config.log_level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    handler: Handler = args.handler
    try:
        return handler(args, config)
    except SolverFailureError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidBoxError, SignalingBoxError) as e:
        print(f"Invalid box: {e}", file=sys.stderr)
        return EXIT_NEGATIVE
    except (MalformedInputError, MalformedStateError, InfeasibleParametersError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
