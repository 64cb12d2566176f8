"""Reproduction of the Prisoner's Dilemma and Matching Pennies analyses.

Every algebraic reduction of the quantum-game derivation is evaluated twice:
once through an independent recomputation (direct payoffs, the constructed
joint distribution, or the box itself) and once in the reduced form as it is
printed, with alpha and beta taken as gamma times the marginals. The two
values are compared and reported; nothing is corrected.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from functools import partial
from typing import Any

import numpy as np

from src.config import DEFAULT_AUDIT_TOL, DEFAULT_GRID_SIZE, DEFAULT_TOL
from src.corrbox import (
    FreeParams8,
    JointProbBox,
    cereceda_box,
    deterministic_box,
    from_free_params,
    marginals,
    product_box,
    random_local_box,
    random_nosignaling_box,
)
from src.errors import MalformedInputError
from src.fine import (
    FineConstruction,
    FineIntermediates,
    GammaMode,
    JointDist16,
    bell_values,
    fine_construct,
    fine_intermediates,
    marginalize,
)
from src.gamecore import (
    Game2x2,
    MixedProfile,
    NashComparison,
    compare_with_grid,
    corner_payoffs,
    deltas,
    is_nash,
    is_prisoners_dilemma,
    matching_pennies,
    omega,
    payoff,
    prisoners_dilemma,
    response_coefficients,
)

logger = logging.getLogger(__name__)

MATCH = "match"
MISMATCH = "mismatch"
SKIPPED = "skipped"

ORACLE_PAYOFF = "direct-payoff"
ORACLE_DISTRIBUTION = "fine-distribution"
ORACLE_BOX = "box-probabilities"
ORACLE_RESPONSE = "response-coefficients"

IDENTITY_BLOCK = ("S5-identity-1", "S5-identity-2", "S5-identity-3", "S5-identity-4")
CONSTRAINT_CHECKS = (
    "Eq-MPConstraints1",
    "Eq-MPConstraints2",
    "Eq-MPConstraints3",
    "Eq-ConstA",
    "Eq-ConstB",
    "Eq-ConstC",
)

# Outcome patterns (a1, a2, b1, b2) summed for each payoff entry at (0, 0).
_PAYOFF_BEFORE_PATTERNS = (
    ("++++", "++-+", "-+++", "-+-+"),
    ("+++-", "++--", "-++-", "-+--"),
    ("+-++", "+--+", "--++", "---+"),
    ("+-+-", "+---", "--+-", "----"),
)


@dataclass(frozen=True)
class IdentityCheck:
    """One derived identity evaluated on both sides.

    ``lhs`` is the independent recomputation named by ``oracle``; ``rhs`` is
    the reduced form. Checks that need the joint distribution of a box that
    could not be constructed are ``skipped`` with both sides empty.
    """

    name: str
    lhs: float | None
    rhs: float | None
    residual: float | None
    status: str
    tolerance: float
    oracle: str
    gamma_mode: str | None = None
    subject: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "subject": self.subject,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "status": self.status,
            "tolerance": self.tolerance,
            "oracle": self.oracle,
            "gamma_mode": self.gamma_mode,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> IdentityCheck:
        def optional(key: str) -> float | None:
            return None if data[key] is None else float(data[key])

        return cls(
            name=str(data["name"]),
            lhs=optional("lhs"),
            rhs=optional("rhs"),
            residual=optional("residual"),
            status=str(data["status"]),
            tolerance=float(data["tolerance"]),
            oracle=str(data["oracle"]),
            gamma_mode=data.get("gamma_mode"),
            subject=str(data.get("subject", "")),
        )


def _compare(
    name: str,
    lhs: float,
    rhs: float,
    tol: float,
    oracle: str,
    gamma_mode: GammaMode | None = None,
) -> IdentityCheck:
    residual = abs(lhs - rhs)
    return IdentityCheck(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        residual=float(residual),
        status=MATCH if residual <= tol else MISMATCH,
        tolerance=tol,
        oracle=oracle,
        gamma_mode=gamma_mode.value if gamma_mode is not None else None,
    )


def _skipped(name: str, tol: float) -> IdentityCheck:
    return IdentityCheck(name, None, None, None, SKIPPED, tol, ORACLE_DISTRIBUTION)


def _q(dist: JointDist16, pattern: str) -> float:
    """q(a1, a2, b1, b2) for a sign pattern such as "+-++"."""
    return float(dist.probs[tuple(0 if c == "+" else 1 for c in pattern)])


def _printed_corr(box: JointProbBox, i: int, j: int) -> float:
    """P(AiBj) - P(AiB'j) - P(A'iBj) + P(A'iB'j) with primes for the -1 outcome."""
    return (
        box.joint(i, j, 1, 1)
        - box.joint(i, j, 1, -1)
        - box.joint(i, j, -1, 1)
        + box.joint(i, j, -1, -1)
    )


class PaperForms:
    """Reduced forms exactly as printed, including the ones that do not hold in general."""

    @staticmethod
    def identity_block(
        pa1: float, pa2: float, pb1: float, pb2: float
    ) -> tuple[float, float, float, float]:
        return (
            (pa1 - pa2) * pb2,
            (pa1 - pa2) * (1.0 - pb2),
            (pb1 - pb2) * pa2,
            (pb1 - pb2) * (1.0 - pa2),
        )

    @staticmethod
    def nash_differences(dist: JointDist16, d1: float, d2: float) -> tuple[float, float]:
        """Nash differences at (0, 0) written in the joint distribution (per unit x or y)."""
        q = partial(_q, dist)
        x = d1 * (q("+-++") - q("-+++") - q("-+-+") + q("+--+")) + d2 * (
            q("+-+-") - q("-++-") - q("-+--") + q("+---")
        )
        y = d1 * (q("+++-") - q("++-+") - q("-+-+") + q("-++-")) + d2 * (
            q("+-+-") - q("+--+") - q("---+") + q("--+-")
        )
        return x, y

    @staticmethod
    def constraints(
        pa1: float, pa2: float, pb1: float, pb2: float, d1: float, d2: float
    ) -> tuple[float, float]:
        """[P(A1)-P(A2)][(d1/d2 - 1)P(B2) + 1]d2 and its Bob mirror, multiplied out."""
        return (
            (pa1 - pa2) * ((d1 - d2) * pb2 + d2),
            (pb1 - pb2) * ((d1 - d2) * pa2 + d2),
        )

    @staticmethod
    def payoff_origin(box: JointProbBox, vector: Sequence[float]) -> float:
        return (
            vector[0] * box.joint(2, 2, 1, 1)
            + vector[1] * box.joint(2, 2, 1, -1)
            + vector[2] * box.joint(2, 2, -1, 1)
            + vector[3] * box.joint(2, 2, -1, -1)
        )

    @staticmethod
    def payoff_before(dist: JointDist16, vector: Sequence[float]) -> float:
        return sum(
            weight * sum(_q(dist, p) for p in patterns)
            for weight, patterns in zip(vector, _PAYOFF_BEFORE_PATTERNS, strict=True)
        )

    @staticmethod
    def payoff_after(pa2: float, pb2: float, p22: float, vector: Sequence[float]) -> float:
        v1, v2, v3, v4 = vector
        return (v2 - v4) * pa2 + (v3 - v4) * pb2 + (v1 - v2 - v3 + v4) * p22 + v4

    @staticmethod
    def new_ne(
        pa1: float, pb1: float, d1: float, d2: float
    ) -> tuple[float, float, float, float]:
        """Slope and offset of the deviation gains after inserting the constraints."""
        return (d2 - d1) * pb1 * pa1, -d2 * pa1, (d2 - d1) * pa1 * pb1, -d2 * pb1

    @staticmethod
    def mp_nash_x(box: JointProbBox) -> float:
        return 0.5 * (
            _printed_corr(box, 1, 1)
            - _printed_corr(box, 2, 1)
            + _printed_corr(box, 1, 2)
            - _printed_corr(box, 2, 2)
        )

    @staticmethod
    def mp_nash_y(box: JointProbBox) -> float:
        return 0.5 * (
            -_printed_corr(box, 1, 1)
            + _printed_corr(box, 1, 2)
            - _printed_corr(box, 2, 1)
            + _printed_corr(box, 2, 2)
        )

    @staticmethod
    def mp_nash_distribution(dist: JointDist16) -> tuple[float, float]:
        q = partial(_q, dist)
        return (
            2.0 * (q("+-++") - q("+---") - q("-+++") + q("-+--")),
            2.0 * (q("++-+") - q("+++-") - q("---+") + q("--+-")),
        )

    @staticmethod
    def mp_nash_reduced(pa1: float, pa2: float, pb1: float, pb2: float) -> tuple[float, float]:
        return 2.0 * (pa2 - pa1) * (1.0 - pb1 - pb2), 2.0 * (pb1 - pb2) * (1.0 - pa1 - pa2)

    @staticmethod
    def hh_payoff(box: JointProbBox) -> float:
        concordant = sum(box.joint(i, j, s, s) for i in (1, 2) for j in (1, 2) for s in (1, -1))
        discordant = sum(box.joint(i, j, s, -s) for i in (1, 2) for j in (1, 2) for s in (1, -1))
        return 0.25 * (concordant - discordant)

    @staticmethod
    def hh_payoff_distribution(dist: JointDist16) -> float:
        return _q(dist, "++++") - _q(dist, "++--") - _q(dist, "--++") + _q(dist, "----")

    @staticmethod
    def mp_constraint3_sides(
        pa1: float, pa2: float, pb1: float, pb2: float, alpha: float, beta: float
    ) -> tuple[float, float]:
        return (pb1 + pb2) * (pa1 + pa2 - 1.0), (1.0 + beta) * pa1 + (1.0 - alpha) * pa2

    @staticmethod
    def const_predictions(
        pa1: float, pa2: float, pb1: float, pb2: float, p11: float, alpha: float, beta: float
    ) -> tuple[float, float, float]:
        """Predicted P(A1B2), P(A2B1), P(A2B2)."""
        return (
            ((2.0 + beta) * pa1 + pb1 + pb2 - alpha * pa2) / 2.0 - p11,
            ((1.0 - alpha) * pa2 + 2.0 * pb1 + (1.0 + beta) * pa1 - 2.0 * p11) / 2.0,
            (2.0 * p11 + pa2 + pb2 - pa1 - pb1) / 2.0,
        )

    @staticmethod
    def diff_a(
        pa1: float, pa2: float, p11: float, p12: float, p21: float, p22: float
    ) -> tuple[float, float]:
        return 4.0 * (p11 - p21 - p12), 2.0 * (2.0 * (p12 - p22) + (pa2 - pa1))


def _section5_checks(
    box: JointProbBox,
    game: Game2x2,
    construction: FineConstruction | None,
    tol: float,
    box_tol: float,
) -> list[IdentityCheck]:
    (pa1, pa2), (pb1, pb2) = marginals(box, box_tol)
    corners = corner_payoffs(game, box, box_tol)
    c, d = corners.pi_a, corners.pi_b
    coeffs = response_coefficients(corners)
    dl = deltas(game)
    direct_x = float(c[1, 1] - c[0, 1])
    direct_y = float(d[1, 1] - d[1, 0])
    origin = payoff(game, box, MixedProfile(0.0, 0.0), box_tol)

    checks: list[IdentityCheck] = []
    if construction is not None:
        dist = construction.distribution
        block_lhs = (
            _q(dist, "+-++") + _q(dist, "+--+") - _q(dist, "-+++") - _q(dist, "-+-+"),
            _q(dist, "+-+-") + _q(dist, "+---") - _q(dist, "-++-") - _q(dist, "-+--"),
            _q(dist, "+++-") + _q(dist, "-++-") - _q(dist, "++-+") - _q(dist, "-+-+"),
            _q(dist, "+-+-") + _q(dist, "--+-") - _q(dist, "---+") - _q(dist, "+--+"),
        )
        block_rhs = PaperForms.identity_block(pa1, pa2, pb1, pb2)
        checks.extend(
            _compare(name, lhs, rhs, tol, ORACLE_DISTRIBUTION)
            for name, lhs, rhs in zip(IDENTITY_BLOCK, block_lhs, block_rhs, strict=True)
        )
        nes_x, nes_y = PaperForms.nash_differences(dist, dl.d1, dl.d2)
        checks.append(_compare("Eq-NEs-x", direct_x, nes_x, tol, ORACLE_PAYOFF))
        checks.append(_compare("Eq-NEs-y", direct_y, nes_y, tol, ORACLE_PAYOFF))
    else:
        checks.extend(_skipped(name, tol) for name in (*IDENTITY_BLOCK, "Eq-NEs-x", "Eq-NEs-y"))

    cons_x, cons_y = PaperForms.constraints(pa1, pa2, pb1, pb2, dl.d1, dl.d2)
    checks.append(_compare("Eq-Constraints-x", direct_x, cons_x, tol, ORACLE_PAYOFF))
    checks.append(_compare("Eq-Constraints-y", direct_y, cons_y, tol, ORACLE_PAYOFF))

    for player, vector, value in (("A", game.a, origin[0]), ("B", game.b, origin[1])):
        checks.append(
            _compare(
                f"Eq-00payoff-{player}",
                value,
                PaperForms.payoff_origin(box, vector),
                tol,
                ORACLE_PAYOFF,
            )
        )
        if construction is not None:
            before = PaperForms.payoff_before(construction.distribution, vector)
            checks.append(_compare(f"Eq-PayoffBefore-{player}", value, before, tol, ORACLE_PAYOFF))
        else:
            checks.append(_skipped(f"Eq-PayoffBefore-{player}", tol))
        after = PaperForms.payoff_after(pa2, pb2, box.pp(2, 2), vector)
        checks.append(_compare(f"Eq-PayoffAfter-{player}", value, after, tol, ORACLE_PAYOFF))

    slope_x, offset_x, slope_y, offset_y = PaperForms.new_ne(pa1, pb1, dl.d1, dl.d2)
    checks.extend(
        [
            _compare("Eq-NewNE-x-slope", coeffs.kappa_a, slope_x, tol, ORACLE_RESPONSE),
            _compare("Eq-NewNE-x-offset", coeffs.lambda_a, offset_x, tol, ORACLE_RESPONSE),
            _compare("Eq-NewNE-y-slope", coeffs.kappa_b, slope_y, tol, ORACLE_RESPONSE),
            _compare("Eq-NewNE-y-offset", coeffs.lambda_b, offset_y, tol, ORACLE_RESPONSE),
        ]
    )
    return checks


def _section6_checks(
    box: JointProbBox,
    interm: FineIntermediates,
    construction: FineConstruction | None,
    tol: float,
    box_tol: float,
) -> list[IdentityCheck]:
    mp = matching_pennies()
    (pa1, pa2), (pb1, pb2) = marginals(box, box_tol)
    p11, p12, p21, p22 = box.pp(1, 1), box.pp(1, 2), box.pp(2, 1), box.pp(2, 2)
    corners = corner_payoffs(mp, box, box_tol)
    coeffs = response_coefficients(corners)
    center = payoff(mp, box, MixedProfile(0.5, 0.5), box_tol)[0]
    mode = interm.gamma_mode
    alpha, beta = interm.alpha, interm.beta
    om = omega(box, interm, box_tol)

    checks = [
        _compare("Eq-MPNEx", coeffs.gain_a(0.5), PaperForms.mp_nash_x(box), tol, ORACLE_RESPONSE),
        _compare("Eq-MPNEy", coeffs.gain_b(0.5), PaperForms.mp_nash_y(box), tol, ORACLE_RESPONSE),
    ]
    if construction is not None:
        ne1, ne2 = PaperForms.mp_nash_distribution(construction.distribution)
        checks.append(_compare("Eq-MPNE1", coeffs.gain_a(0.5), ne1, tol, ORACLE_RESPONSE))
        checks.append(_compare("Eq-MPNE2", coeffs.gain_b(0.5), ne2, tol, ORACLE_RESPONSE))
    else:
        checks.extend([_skipped("Eq-MPNE1", tol), _skipped("Eq-MPNE2", tol)])

    red1, red2 = PaperForms.mp_nash_reduced(pa1, pa2, pb1, pb2)
    checks.append(_compare("Eq-MPNE1-reduced", coeffs.gain_a(0.5), red1, tol, ORACLE_RESPONSE))
    checks.append(_compare("Eq-MPNE2-reduced", coeffs.gain_b(0.5), red2, tol, ORACLE_RESPONSE))
    checks.append(
        _compare("Eq-MPConstraints1", (pa2 - pa1) * (1.0 - pb1 - pb2), 0.0, tol, ORACLE_BOX)
    )
    checks.append(
        _compare("Eq-MPConstraints2", (pb1 - pb2) * (1.0 - pa1 - pa2), 0.0, tol, ORACLE_BOX)
    )
    checks.append(
        _compare("Eq-MPNEpayoffs1", center, float(corners.pi_a.mean()), tol, ORACLE_PAYOFF)
    )
    checks.append(_compare("Eq-HHpayoff", center, PaperForms.hh_payoff(box), tol, ORACLE_PAYOFF))
    if construction is not None:
        hh2 = PaperForms.hh_payoff_distribution(construction.distribution)
        checks.append(_compare("Eq-HHpayoff2", center, hh2, tol, ORACLE_PAYOFF))
    else:
        checks.append(_skipped("Eq-HHpayoff2", tol))

    left3, right3 = PaperForms.mp_constraint3_sides(pa1, pa2, pb1, pb2, alpha, beta)
    checks.append(_compare("Eq-HHpayoff3", center, left3 - right3, tol, ORACLE_PAYOFF, mode))
    checks.append(_compare("Eq-MPConstraints3", left3, right3, tol, ORACLE_BOX, mode))

    pred_a, pred_b, pred_c = PaperForms.const_predictions(pa1, pa2, pb1, pb2, p11, alpha, beta)
    checks.append(_compare("Eq-ConstA", p12, pred_a, tol, ORACLE_BOX, mode))
    checks.append(_compare("Eq-ConstB", p21, pred_b, tol, ORACLE_BOX, mode))
    checks.append(_compare("Eq-ConstC", p22, pred_c, tol, ORACLE_BOX, mode))

    diff1, diff2 = PaperForms.diff_a(pa1, pa2, p11, p12, p21, p22)
    checks.append(_compare("Eq-DiffA-1", coeffs.kappa_a, diff1, tol, ORACLE_RESPONSE))
    checks.append(_compare("Eq-DiffA-2", coeffs.lambda_a, diff2, tol, ORACLE_RESPONSE))
    checks.extend(
        [
            _compare("Eq-QNE1-slope", coeffs.kappa_a, 4.0 * om, tol, ORACLE_RESPONSE, mode),
            _compare("Eq-QNE1-offset", coeffs.lambda_a, -2.0 * om, tol, ORACLE_RESPONSE, mode),
            _compare("Eq-QNE2-slope", coeffs.kappa_b, -4.0 * om, tol, ORACLE_RESPONSE, mode),
            _compare("Eq-QNE2-offset", coeffs.lambda_b, 2.0 * om, tol, ORACLE_RESPONSE, mode),
        ]
    )
    return checks


def _construct(box: JointProbBox, mode: GammaMode, box_tol: float) -> FineConstruction | None:
    result = fine_construct(box, mode, strict=True, tol=box_tol)
    if isinstance(result, FineConstruction):
        return result
    logger.warning("Joint distribution unavailable: %s", result.reason)
    return None


def pd_family_box(rng: np.random.Generator) -> JointProbBox:
    """Box with P(A2) = P(B2) = 0 and a uniformly drawn (A1, B1) table."""
    p_pp, p_pm, p_mp, _ = rng.dirichlet(np.ones(4))
    params = FreeParams8(
        pa1=float(p_pp + p_pm),
        pa2=0.0,
        pb1=float(p_pp + p_mp),
        pb2=0.0,
        p11=float(p_pp),
        p12=0.0,
        p21=0.0,
        p22=0.0,
    )
    return from_free_params(params)


@dataclass(frozen=True)
class PdBoxResult:
    """All Prisoner's Dilemma checks for one box.

    The equilibrium conclusion is asserted only when both constraint sets hold.
    """

    label: str
    bell_satisfied: bool
    constraints_a: bool
    constraints_b: bool
    origin_is_nash: bool
    payoff_origin: tuple[float, float]
    payoff_matches: bool
    identity_residual: float | None
    constraints_residual: float
    constraints_sign_ok: bool
    payoff_after_residual: float
    nash: NashComparison
    origin_only: bool
    audit_tolerance: float = DEFAULT_AUDIT_TOL

    @property
    def conclusion_asserted(self) -> bool:
        return self.constraints_a and self.constraints_b

    @property
    def passed(self) -> bool:
        if not self.conclusion_asserted:
            return True
        return (
            self.bell_satisfied
            and self.origin_is_nash
            and self.payoff_matches
            and self.identity_residual is not None
            and self.identity_residual <= self.audit_tolerance
            and self.constraints_residual <= self.audit_tolerance
            and self.payoff_after_residual <= self.audit_tolerance
            and self.constraints_sign_ok
            and self.nash.confirmed
            and self.origin_only
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "bell_satisfied": self.bell_satisfied,
            "constraints_a": self.constraints_a,
            "constraints_b": self.constraints_b,
            "origin_is_nash": self.origin_is_nash,
            "payoff_origin": list(self.payoff_origin),
            "payoff_matches": self.payoff_matches,
            "identity_residual": self.identity_residual,
            "constraints_residual": self.constraints_residual,
            "constraints_sign_ok": self.constraints_sign_ok,
            "payoff_after_residual": self.payoff_after_residual,
            "nash": self.nash.to_dict(),
            "origin_only": self.origin_only,
            "audit_tolerance": self.audit_tolerance,
            "conclusion_asserted": self.conclusion_asserted,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PdBoxResult:
        identity = data["identity_residual"]
        return cls(
            label=str(data["label"]),
            bell_satisfied=bool(data["bell_satisfied"]),
            constraints_a=bool(data["constraints_a"]),
            constraints_b=bool(data["constraints_b"]),
            origin_is_nash=bool(data["origin_is_nash"]),
            payoff_origin=(float(data["payoff_origin"][0]), float(data["payoff_origin"][1])),
            payoff_matches=bool(data["payoff_matches"]),
            identity_residual=None if identity is None else float(identity),
            constraints_residual=float(data["constraints_residual"]),
            constraints_sign_ok=bool(data["constraints_sign_ok"]),
            payoff_after_residual=float(data["payoff_after_residual"]),
            nash=NashComparison.from_dict(data["nash"]),
            origin_only=bool(data["origin_only"]),
            audit_tolerance=float(data["audit_tolerance"]),
        )


@dataclass(frozen=True)
class PdReport:
    game: Game2x2
    seed: int
    n_boxes: int
    audit_tolerance: float
    results: tuple[PdBoxResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def asserted_count(self) -> int:
        return sum(result.conclusion_asserted for result in self.results)

    def to_dict(self) -> dict[str, Any]:
        return {
            "game": self.game.to_dict(),
            "seed": self.seed,
            "n_boxes": self.n_boxes,
            "audit_tolerance": self.audit_tolerance,
            "all_passed": self.all_passed,
            "asserted_count": self.asserted_count,
            "results": [result.to_dict() for result in self.results],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PdReport:
        game = data["game"]
        return cls(
            game=Game2x2(tuple(game["a"]), tuple(game["b"]), game["name"]),
            seed=int(data["seed"]),
            n_boxes=int(data["n_boxes"]),
            audit_tolerance=float(data["audit_tolerance"]),
            results=tuple(PdBoxResult.from_dict(r) for r in data["results"]),
        )


@dataclass(frozen=True)
class GammaEntry:
    """Gamma, alpha, beta and Omega of one box under one gamma mode."""

    label: str
    intermediates: FineIntermediates
    omega: float

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "omega": self.omega, **self.intermediates.to_dict()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GammaEntry:
        return cls(str(data["label"]), FineIntermediates.from_dict(data), float(data["omega"]))


@dataclass(frozen=True)
class PaperClaim:
    """A value stated in the derivation next to its recomputation."""

    name: str
    claimed: float
    recomputed: float
    oracle: str
    status: str
    gamma_mode: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "claimed": self.claimed,
            "recomputed": self.recomputed,
            "oracle": self.oracle,
            "status": self.status,
            "gamma_mode": self.gamma_mode,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PaperClaim:
        return cls(
            name=str(data["name"]),
            claimed=float(data["claimed"]),
            recomputed=float(data["recomputed"]),
            oracle=str(data["oracle"]),
            status=str(data["status"]),
            gamma_mode=data.get("gamma_mode"),
        )


@dataclass(frozen=True)
class MpBatchSummary:
    """Distribution-based identities over random boxes inside the local polytope.

    n_boxes local boxes are drawn, plus n_boxes no-signaling boxes of which only
    the Bell-satisfying ones are kept.
    """

    n_boxes: int
    nosignaling_kept: int
    constructed: int
    max_mpne1_residual: float
    max_mpne2_residual: float
    max_hhpayoff2_residual: float
    max_hhpayoff3_residual: float
    mean_hhpayoff3_residual: float
    max_round_trip_error: float
    tolerance: float

    @property
    def hhpayoff2_ok(self) -> bool:
        return self.max_hhpayoff2_residual < self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_boxes": self.n_boxes,
            "nosignaling_kept": self.nosignaling_kept,
            "constructed": self.constructed,
            "max_mpne1_residual": self.max_mpne1_residual,
            "max_mpne2_residual": self.max_mpne2_residual,
            "max_hhpayoff2_residual": self.max_hhpayoff2_residual,
            "max_hhpayoff3_residual": self.max_hhpayoff3_residual,
            "mean_hhpayoff3_residual": self.mean_hhpayoff3_residual,
            "max_round_trip_error": self.max_round_trip_error,
            "tolerance": self.tolerance,
            "hhpayoff2_ok": self.hhpayoff2_ok,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MpBatchSummary:
        return cls(
            n_boxes=int(data["n_boxes"]),
            nosignaling_kept=int(data["nosignaling_kept"]),
            constructed=int(data["constructed"]),
            max_mpne1_residual=float(data["max_mpne1_residual"]),
            max_mpne2_residual=float(data["max_mpne2_residual"]),
            max_hhpayoff2_residual=float(data["max_hhpayoff2_residual"]),
            max_hhpayoff3_residual=float(data["max_hhpayoff3_residual"]),
            mean_hhpayoff3_residual=float(data["mean_hhpayoff3_residual"]),
            max_round_trip_error=float(data["max_round_trip_error"]),
            tolerance=float(data["tolerance"]),
        )


@dataclass(frozen=True)
class MpReport:
    seed: int
    classical: NashComparison
    classical_payoff: tuple[float, float]
    full_square_witness: NashComparison
    entangled: tuple[NashComparison, ...]
    gamma_table: tuple[GammaEntry, ...]
    constraint_checks: tuple[IdentityCheck, ...]
    claims: tuple[PaperClaim, ...]
    batch: MpBatchSummary

    @property
    def discrepancies(self) -> tuple[PaperClaim, ...]:
        return tuple(claim for claim in self.claims if claim.status == MISMATCH)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "classical": self.classical.to_dict(),
            "classical_payoff": list(self.classical_payoff),
            "full_square_witness": self.full_square_witness.to_dict(),
            "entangled": [nash.to_dict() for nash in self.entangled],
            "gamma_table": [entry.to_dict() for entry in self.gamma_table],
            "constraint_checks": [check.to_dict() for check in self.constraint_checks],
            "claims": [claim.to_dict() for claim in self.claims],
            "discrepancies": [claim.name for claim in self.discrepancies],
            "batch": self.batch.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MpReport:
        return cls(
            seed=int(data["seed"]),
            classical=NashComparison.from_dict(data["classical"]),
            classical_payoff=(
                float(data["classical_payoff"][0]),
                float(data["classical_payoff"][1]),
            ),
            full_square_witness=NashComparison.from_dict(data["full_square_witness"]),
            entangled=tuple(NashComparison.from_dict(n) for n in data["entangled"]),
            gamma_table=tuple(GammaEntry.from_dict(e) for e in data["gamma_table"]),
            constraint_checks=tuple(IdentityCheck.from_dict(c) for c in data["constraint_checks"]),
            claims=tuple(PaperClaim.from_dict(c) for c in data["claims"]),
            batch=MpBatchSummary.from_dict(data["batch"]),
        )


def _claim(
    name: str, claimed: float, recomputed: float, oracle: str, tol: float, mode: GammaMode | None
) -> PaperClaim:
    status = MATCH if abs(claimed - recomputed) <= tol else MISMATCH
    if status == MISMATCH:
        logger.warning("%s: claimed %.6g, recomputed %.6g", name, claimed, recomputed)
    return PaperClaim(name, claimed, recomputed, oracle, status, mode.value if mode else None)


class PaperLab:
    """Runs the reproduction reports and the identity audit with shared tolerances."""

    def __init__(
        self,
        tolerance: float = DEFAULT_TOL,
        audit_tolerance: float = DEFAULT_AUDIT_TOL,
        grid_size: int = DEFAULT_GRID_SIZE,
    ) -> None:
        self.tolerance = tolerance
        self.audit_tolerance = audit_tolerance
        self.grid_size = grid_size

    def audit_identities(
        self,
        box: JointProbBox,
        game: Game2x2,
        gamma_mode: GammaMode | str = GammaMode.FINE_LITERAL,
    ) -> list[IdentityCheck]:
        """Evaluate every derived identity on both sides.

        The Prisoner's Dilemma reductions use ``game``; the Matching Pennies
        reductions always use Matching Pennies.

        Raises:
            InvalidBoxError: If the box fails validation
        """
        mode = GammaMode.parse(gamma_mode)
        interm = fine_intermediates(box, mode, self.tolerance)
        construction = _construct(box, mode, self.tolerance)
        checks = _section5_checks(box, game, construction, self.audit_tolerance, self.tolerance)
        checks.extend(
            _section6_checks(box, interm, construction, self.audit_tolerance, self.tolerance)
        )
        mismatches = sum(check.status == MISMATCH for check in checks)
        logger.info("Audited %d identities, %d mismatches", len(checks), mismatches)
        return checks

    def _pd_box(self, label: str, box: JointProbBox, game: Game2x2) -> PdBoxResult:
        tol = self.tolerance
        (pa1, pa2), (pb1, pb2) = marginals(box, tol)
        constraints_a = abs(pa2) <= tol and abs(pb2) <= tol
        constraints_b = pa1 >= pa2 - tol and pb1 >= pb2 - tol
        bell = bell_values(box, tol)
        origin = MixedProfile(0.0, 0.0)
        origin_payoff = payoff(game, box, origin, tol)
        payoff_matches = (
            abs(origin_payoff[0] - game.a[3]) <= tol and abs(origin_payoff[1] - game.b[3]) <= tol
        )

        construction = _construct(box, GammaMode.FINE_LITERAL, tol) if bell.satisfied else None
        checks = {
            check.name: check
            for check in _section5_checks(box, game, construction, self.audit_tolerance, tol)
        }
        identity = [checks[name].residual for name in IDENTITY_BLOCK]
        identity_residual = (
            None if any(r is None for r in identity) else max(r for r in identity if r is not None)
        )
        constraints_x, constraints_y = checks["Eq-Constraints-x"], checks["Eq-Constraints-y"]
        after = (checks["Eq-PayoffAfter-A"], checks["Eq-PayoffAfter-B"])

        nash = compare_with_grid(label, game, box, self.grid_size, tol)
        origin_only = (
            nash.nash_set.kind == "points"
            and len(nash.nash_set.points) == 1
            and nash.nash_set.contains(0.0, 0.0, tol)
        )
        return PdBoxResult(
            label=label,
            bell_satisfied=bell.satisfied,
            constraints_a=constraints_a,
            constraints_b=constraints_b,
            origin_is_nash=is_nash(game, box, origin, tol).ok,
            payoff_origin=origin_payoff,
            payoff_matches=payoff_matches,
            identity_residual=identity_residual,
            constraints_residual=max(constraints_x.residual or 0.0, constraints_y.residual or 0.0),
            constraints_sign_ok=(
                (constraints_x.rhs or 0.0) >= -tol and (constraints_y.rhs or 0.0) >= -tol
            ),
            payoff_after_residual=max(after[0].residual or 0.0, after[1].residual or 0.0),
            nash=nash,
            origin_only=origin_only,
            audit_tolerance=self.audit_tolerance,
        )

    def pd_report(
        self,
        game: Game2x2 | None = None,
        n_boxes: int = 1000,
        seed: int = 0,
        extra_boxes: Sequence[tuple[str, JointProbBox]] = (),
    ) -> PdReport:
        """Check the Prisoner's Dilemma equilibrium over boxes with P(A2) = P(B2) = 0.

        Args:
            game: Game with a3 > a1 > a4 > a2; defaults to (3, 0, 5, 1)
            n_boxes: Number of random boxes from the constrained family
            seed: Seed of the box generator
            extra_boxes: Additional labelled boxes, checked but not assumed to satisfy
                the constraints

        Raises:
            MalformedInputError: If the game does not have the Prisoner's Dilemma ordering
        """
        game = game or prisoners_dilemma()
        if not is_prisoners_dilemma(game):
            raise MalformedInputError("Game must satisfy a3 > a1 > a4 > a2")
        rng = np.random.default_rng(seed)
        boxes: list[tuple[str, JointProbBox]] = [
            ("deterministic(+,-,+,-)", deterministic_box(1, -1, 1, -1))
        ]
        boxes.extend((f"family-{k}", pd_family_box(rng)) for k in range(n_boxes))
        boxes.extend(extra_boxes)

        results = []
        for index, (label, box) in enumerate(boxes, start=1):
            results.append(self._pd_box(label, box, game))
            if index % 250 == 0:
                logger.info("Checked %d of %d boxes", index, len(boxes))
        report = PdReport(game, seed, n_boxes, self.audit_tolerance, tuple(results))
        for result in results:
            if not result.conclusion_asserted:
                logger.warning(
                    "Box %s violates the constraints; conclusion not asserted", result.label
                )
            elif not result.passed:
                logger.warning("Box %s failed a Prisoner's Dilemma check", result.label)
        return report

    def _gamma_entries(self, label: str, box: JointProbBox) -> list[GammaEntry]:
        entries = []
        for mode in GammaMode:
            interm = fine_intermediates(box, mode, self.tolerance)
            entries.append(GammaEntry(label, interm, omega(box, interm, self.tolerance)))
        return entries

    def _batch(self, seed: int, n_boxes: int) -> MpBatchSummary:
        rng = np.random.default_rng(seed)
        local_seeds = rng.integers(0, 2**32, size=n_boxes)
        ns_seeds = rng.integers(0, 2**32, size=n_boxes)
        boxes = [random_local_box(int(s)) for s in local_seeds]
        ns_kept = 0
        for box_seed in ns_seeds:
            box = random_nosignaling_box(int(box_seed))
            if bell_values(box, self.tolerance).satisfied:
                boxes.append(box)
                ns_kept += 1

        ne1, ne2, hh2, hh3, round_trip = [], [], [], [], []
        for box in boxes:
            checks = {
                check.name: check
                for check in self.audit_identities(box, matching_pennies())
                if check.residual is not None
            }
            hh3.append(checks["Eq-HHpayoff3"].residual)
            if "Eq-HHpayoff2" in checks:
                ne1.append(checks["Eq-MPNE1"].residual)
                ne2.append(checks["Eq-MPNE2"].residual)
                hh2.append(checks["Eq-HHpayoff2"].residual)
            result = fine_construct(box, tol=self.tolerance)
            if isinstance(result, FineConstruction):
                round_trip.append(marginalize(result.distribution).max_abs_diff(box))
        logger.info(
            "Evaluated %d local and %d Bell-satisfying no-signaling boxes, %d constructed",
            n_boxes,
            ns_kept,
            len(hh2),
        )
        return MpBatchSummary(
            n_boxes=n_boxes,
            nosignaling_kept=ns_kept,
            constructed=len(hh2),
            max_mpne1_residual=float(max(ne1, default=0.0)),
            max_mpne2_residual=float(max(ne2, default=0.0)),
            max_hhpayoff2_residual=float(max(hh2, default=0.0)),
            max_hhpayoff3_residual=float(max(hh3, default=0.0)),
            mean_hhpayoff3_residual=float(np.mean(hh3)) if hh3 else 0.0,
            max_round_trip_error=float(max(round_trip, default=0.0)),
            tolerance=self.audit_tolerance,
        )

    def mp_report(self, seed: int = 0, n_boxes: int = 200) -> MpReport:
        """Matching Pennies: classical embedding, the two maximally violating sets, and Omega."""
        mp = matching_pennies()
        tol = self.tolerance
        classical_box = deterministic_box(1, -1, 1, -1)
        classical = compare_with_grid(
            "deterministic(+,-,+,-)", mp, classical_box, self.grid_size, tol
        )
        classical_payoff = payoff(mp, classical_box, MixedProfile(0.5, 0.5), tol)
        witness = compare_with_grid(
            "product(1/2,1/2,1/2,1/2)", mp, product_box(0.5, 0.5, 0.5, 0.5), self.grid_size, tol
        )

        entangled = []
        gamma_table: list[GammaEntry] = []
        constraint_checks: list[IdentityCheck] = []
        claims: list[PaperClaim] = []
        for which in (1, 2):
            label = f"cereceda-{which}"
            box = cereceda_box(which)
            nash = compare_with_grid(label, mp, box, self.grid_size, tol)
            entangled.append(nash)
            claims.append(
                _claim(
                    f"{label} every profile is a NE",
                    1.0,
                    float(nash.nash_set.full_square),
                    "grid-oracle",
                    0.0,
                    None,
                )
            )
            for entry in self._gamma_entries(label, box):
                mode = entry.intermediates.gamma_mode
                gamma_table.append(entry)
                claims.append(
                    _claim(f"{label} gamma", 1.0, entry.intermediates.gamma, ORACLE_BOX, tol, mode)
                )
                claims.append(_claim(f"{label} Omega", 0.0, entry.omega, ORACLE_BOX, tol, mode))
                checks = _section6_checks(box, entry.intermediates, None, self.audit_tolerance, tol)
                for check in checks:
                    if check.name in CONSTRAINT_CHECKS:
                        constraint_checks.append(
                            replace(check, subject=label)
                        )
                        if check.name.startswith("Eq-Const"):
                            claims.append(
                                _claim(
                                    f"{label} {check.name} satisfied",
                                    0.0,
                                    check.residual or 0.0,
                                    ORACLE_BOX,
                                    self.audit_tolerance,
                                    mode,
                                )
                            )

        report = MpReport(
            seed=seed,
            classical=classical,
            classical_payoff=classical_payoff,
            full_square_witness=witness,
            entangled=tuple(entangled),
            gamma_table=tuple(gamma_table),
            constraint_checks=tuple(constraint_checks),
            claims=tuple(claims),
            batch=self._batch(seed, n_boxes),
        )
        logger.info("Matching Pennies report: %d discrepancies", len(report.discrepancies))
        return report
