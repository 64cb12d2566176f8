"""Locality tests for no-signaling boxes and the explicit hidden-variable construction.

Three independent routes decide whether a box admits a joint distribution
of the four observables A1, A2, B1, B2 that reproduces it:

* the eight Clauser-Horne inequalities (``bell_values``),
* an explicit construction of that joint distribution (``fine_construct``),
* a linear-programming search over mixtures of deterministic boxes
  (``lp_feasible``).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from src.config import DEFAULT_TOL
from src.corrbox import (
    OUTCOMES,
    JointProbBox,
    deterministic_boxes,
    marginals,
    outcome_index,
    require_valid,
)
from src.errors import MalformedInputError
from src.simplex import phase_one

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
BellIndex = tuple[int, int, int, int]

BELL_INDICES: tuple[BellIndex, ...] = ((1, 1, 2, 2), (1, 2, 2, 1), (2, 1, 1, 2), (2, 2, 1, 1))


class GammaMode(str, Enum):
    """How the pairwise weight P(B1 B2) is chosen."""

    FINE_LITERAL = "fine-literal"
    PAPER_SECTION6 = "paper-section6"

    @classmethod
    def parse(cls, value: str | GammaMode) -> GammaMode:
        if isinstance(value, GammaMode):
            return value
        aliases = {"fine": cls.FINE_LITERAL, "paper": cls.PAPER_SECTION6}
        try:
            return aliases.get(value) or cls(value)
        except ValueError as e:
            raise MalformedInputError(f"Unknown gamma mode: {value!r}") from e


@dataclass(frozen=True)
class BellInequality:
    """One side of a Clauser-Horne expression.

    ``residual`` is nonpositive when the inequality holds: value minus 0 for
    the upper bound and -1 minus value for the lower bound.
    """

    index: BellIndex
    bound: Literal["lower", "upper"]
    value: float
    residual: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": list(self.index),
            "bound": self.bound,
            "value": self.value,
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BellInequality:
        return cls(
            index=tuple(int(k) for k in data["index"]),  # type: ignore[arg-type]
            bound=data["bound"],
            value=float(data["value"]),
            residual=float(data["residual"]),
        )


@dataclass(frozen=True)
class BellSystemReport:
    """The four Clauser-Horne expressions and their eight inequalities."""

    values: tuple[float, float, float, float]
    inequalities: tuple[BellInequality, ...]
    tolerance: float
    satisfied: bool
    violated: tuple[BellInequality, ...] = ()

    def value(self, i: int, j: int) -> float:
        """Expression value for leading setting pair (i, j)."""
        return self.values[BELL_INDICES.index((i, j, 3 - i, 3 - j))]

    @property
    def violated_indices(self) -> tuple[BellIndex, ...]:
        return tuple(inequality.index for inequality in self.violated)

    def to_dict(self) -> dict[str, Any]:
        return {
            "satisfied": self.satisfied,
            "tolerance": self.tolerance,
            "values": {
                "".join(map(str, index)): value
                for index, value in zip(BELL_INDICES, self.values, strict=True)
            },
            "inequalities": [inequality.to_dict() for inequality in self.inequalities],
            "violated": [inequality.to_dict() for inequality in self.violated],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BellSystemReport:
        return cls(
            values=tuple(  # type: ignore[arg-type]
                float(data["values"]["".join(map(str, k))]) for k in BELL_INDICES
            ),
            inequalities=tuple(BellInequality.from_dict(d) for d in data["inequalities"]),
            tolerance=float(data["tolerance"]),
            satisfied=bool(data["satisfied"]),
            violated=tuple(BellInequality.from_dict(d) for d in data["violated"]),
        )


@dataclass(frozen=True)
class TripleSystemReport:
    """Residuals of the four triple inequalities; each is nonpositive when it holds."""

    residuals: tuple[float, float, float, float]
    tolerance: float
    satisfied: bool


@dataclass(frozen=True)
class FineIntermediates:
    """Quantities computed on the way to the joint distribution.

    ``alpha``/``beta`` are gamma times P(A1)/P(A2); ``triple_alpha`` and
    ``triple_beta`` are the weights actually placed on P(A_n B1 B2), clipped
    into the interval where every entry of the triple is nonnegative.
    """

    gamma_mode: GammaMode
    gamma: float
    gamma_candidates: tuple[float, ...]
    alpha: float
    beta: float
    b_pair: tuple[float, float, float, float]
    triple_alpha: float
    triple_beta: float

    @property
    def alpha_adjusted(self) -> bool:
        return self.triple_alpha != self.alpha or self.triple_beta != self.beta

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma_mode": self.gamma_mode.value,
            "gamma": self.gamma,
            "gamma_candidates": list(self.gamma_candidates),
            "alpha": self.alpha,
            "beta": self.beta,
            "b_pair": list(self.b_pair),
            "triple_alpha": self.triple_alpha,
            "triple_beta": self.triple_beta,
            "alpha_adjusted": self.alpha_adjusted,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FineIntermediates:
        return cls(
            gamma_mode=GammaMode(data["gamma_mode"]),
            gamma=float(data["gamma"]),
            gamma_candidates=tuple(float(v) for v in data["gamma_candidates"]),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            b_pair=tuple(float(v) for v in data["b_pair"]),  # type: ignore[arg-type]
            triple_alpha=float(data["triple_alpha"]),
            triple_beta=float(data["triple_beta"]),
        )


@dataclass(frozen=True, eq=False)
class JointDist16:
    """Joint distribution q(a1, a2, b1, b2) of the four observables, indexed like a box."""

    probs: FloatArray

    def __post_init__(self) -> None:
        try:
            array = np.array(self.probs, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise MalformedInputError(f"Joint distribution must contain real numbers: {e}") from e
        if array.shape != (2, 2, 2, 2):
            raise MalformedInputError(
                f"Joint distribution must have shape (2, 2, 2, 2), got {array.shape}"
            )
        if not np.all(np.isfinite(array)):
            raise MalformedInputError("Joint distribution contains non-finite entries")
        array.setflags(write=False)
        object.__setattr__(self, "probs", array)

    def prob(self, a1: int, a2: int, b1: int, b2: int) -> float:
        return float(
            self.probs[outcome_index(a1), outcome_index(a2), outcome_index(b1), outcome_index(b2)]
        )

    def is_valid(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.all(self.probs >= -tol) and abs(self.probs.sum() - 1.0) <= tol)


@dataclass(frozen=True)
class FineConstruction:
    """A successful construction: the intermediates and the joint distribution."""

    intermediates: FineIntermediates
    distribution: JointDist16


@dataclass(frozen=True)
class NotConstructible:
    """The construction could not produce a nonnegative joint distribution."""

    reason: str
    intermediates: FineIntermediates | None = None
    offending_entry: str | None = None
    offending_value: float | None = None
    bell_certificate: tuple[BellInequality, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Local:
    """The box is a mixture of deterministic boxes with these weights."""

    weights: tuple[float, ...]
    infeasibility: float

    @property
    def is_local(self) -> bool:
        return True


@dataclass(frozen=True)
class Nonlocal:
    """No mixture of deterministic boxes reproduces the box."""

    infeasibility: float
    certificate: tuple[BellInequality, ...]

    @property
    def is_local(self) -> bool:
        return False


@dataclass(frozen=True)
class _BoxQuantities:
    pa: tuple[float, float]
    pb: tuple[float, float]
    pp: tuple[tuple[float, float], tuple[float, float]]


def _quantities(box: JointProbBox, tol: float) -> _BoxQuantities:
    require_valid(box, tol)
    pa, pb = marginals(box, tol)
    p = box.probs
    pp = (
        (float(p[0, 0, 0, 0]), float(p[0, 1, 0, 0])),
        (float(p[1, 0, 0, 0]), float(p[1, 1, 0, 0])),
    )
    return _BoxQuantities(pa, pb, pp)


def bell_values(box: JointProbBox, tol: float = DEFAULT_TOL) -> BellSystemReport:
    """Evaluate the Clauser-Horne system -1 <= expr(i,j) <= 0.

    expr(i,j) = P(AiBj) + P(AiBj') + P(Ai'Bj') - P(Ai'Bj) - P(Ai) - P(Bj'),
    with i' = 3 - i and j' = 3 - j.

    Raises:
        InvalidBoxError: If the box fails validation
    """
    q = _quantities(box, tol)
    values = []
    inequalities = []
    for i, j, i2, j2 in BELL_INDICES:
        value = (
            q.pp[i - 1][j - 1]
            + q.pp[i - 1][j2 - 1]
            + q.pp[i2 - 1][j2 - 1]
            - q.pp[i2 - 1][j - 1]
            - q.pa[i - 1]
            - q.pb[j2 - 1]
        )
        values.append(value)
        inequalities.append(BellInequality((i, j, i2, j2), "lower", value, -1.0 - value))
        inequalities.append(BellInequality((i, j, i2, j2), "upper", value, value))
    violated = tuple(inequality for inequality in inequalities if inequality.residual > tol)
    return BellSystemReport(
        values=tuple(values),  # type: ignore[arg-type]
        inequalities=tuple(inequalities),
        tolerance=tol,
        satisfied=not violated,
        violated=violated,
    )


def triple_values(
    p_a: float,
    p_b: float,
    p_b2: float,
    p_ab: float,
    p_ab2: float,
    p_bb2: float,
    tol: float = DEFAULT_TOL,
) -> TripleSystemReport:
    """Residuals of the four inequalities that make (P(A), P(B), P(B'), P(AB), P(AB'), P(BB'))
    the marginals of a joint distribution of three +/-1 variables.

    Raises:
        MalformedInputError: If an input lies outside [0, 1]
    """
    for name, value in (
        ("P(A)", p_a),
        ("P(B)", p_b),
        ("P(B')", p_b2),
        ("P(AB)", p_ab),
        ("P(AB')", p_ab2),
        ("P(BB')", p_bb2),
    ):
        if not -tol <= value <= 1.0 + tol:
            raise MalformedInputError(f"{name} must lie in [0, 1], got {value!r}")
    residuals = (
        p_a + p_b + p_b2 - 1.0 - p_ab - p_ab2 - p_bb2,
        p_ab + p_ab2 - p_a - p_bb2,
        p_ab + p_bb2 - p_b - p_ab2,
        p_ab2 + p_bb2 - p_b2 - p_ab,
    )
    return TripleSystemReport(residuals, tol, all(r <= tol for r in residuals))


def triple_values_for_pair(
    box: JointProbBox, n: int, gamma: float, tol: float = DEFAULT_TOL
) -> TripleSystemReport:
    """Triple inequalities for (A_n, B_1, B_2) with P(B1 B2) set to gamma."""
    if n not in (1, 2):
        raise MalformedInputError(f"Alice's setting must be 1 or 2, got {n!r}")
    q = _quantities(box, tol)
    return triple_values(
        q.pa[n - 1], q.pb[0], q.pb[1], q.pp[n - 1][0], q.pp[n - 1][1], gamma, tol
    )


def _gamma_candidates(box: JointProbBox, q: _BoxQuantities, mode: GammaMode) -> tuple[float, ...]:
    if mode is GammaMode.FINE_LITERAL:
        candidates = [
            q.pp[n][m] + q.pb[k] - q.pp[n][k]
            for n in range(2)
            for m, k in ((0, 1), (1, 0))
        ]
        return (*candidates, q.pb[0], q.pb[1])
    # Marginals summed over both of the other party's settings, as the
    # product form of the pairwise probabilities is written out.
    p = box.probs
    sum_a = p[:, :, 0, :].sum(axis=(1, 2))
    sum_b = p[:, :, :, 0].sum(axis=(0, 2))
    candidates = [
        float(sum_a[n] * sum_b[m] + sum_b[k] - sum_a[n] * sum_b[k])
        for n in range(2)
        for m, k in ((0, 1), (1, 0))
    ]
    return (*candidates, float(sum_b[0]), float(sum_b[1]))


def _triple_weight_bounds(
    p_a: float, pb1: float, pb2: float, p1: float, p2: float, gamma: float
) -> tuple[float, float]:
    low = max(0.0, p1 + p2 - p_a, p1 + gamma - pb1, p2 + gamma - pb2)
    high = min(p1, p2, gamma, 1.0 - p_a - pb1 - pb2 + p1 + p2 + gamma)
    return low, high


def fine_intermediates(
    box: JointProbBox,
    gamma_mode: GammaMode | str = GammaMode.FINE_LITERAL,
    tol: float = DEFAULT_TOL,
) -> FineIntermediates:
    """Compute gamma, alpha, beta and the B-pair distribution of a valid box."""
    mode = GammaMode.parse(gamma_mode)
    q = _quantities(box, tol)
    candidates = _gamma_candidates(box, q, mode)
    gamma = min(candidates)
    pb1, pb2 = q.pb
    alpha = gamma * q.pa[0]
    beta = gamma * q.pa[1]

    weights = []
    for n, paper_weight in ((0, alpha), (1, beta)):
        low, high = _triple_weight_bounds(q.pa[n], pb1, pb2, q.pp[n][0], q.pp[n][1], gamma)
        weight = min(max(paper_weight, low), high)
        if weight != paper_weight:
            logger.debug("Triple weight %.6g clipped to %.6g for A%d", paper_weight, weight, n + 1)
        weights.append(weight)

    return FineIntermediates(
        gamma_mode=mode,
        gamma=gamma,
        gamma_candidates=candidates,
        alpha=alpha,
        beta=beta,
        b_pair=(gamma, pb1 - gamma, pb2 - gamma, 1.0 - pb1 - pb2 + gamma),
        triple_alpha=weights[0],
        triple_beta=weights[1],
    )


def _triple(
    p_a: float, pb1: float, pb2: float, p1: float, p2: float, gamma: float, w: float
) -> FloatArray:
    # [a][b1][b2] with outcome index 0 for +1
    t = np.empty((2, 2, 2))
    t[0, 0, 0] = w
    t[0, 0, 1] = p1 - w
    t[0, 1, 0] = p2 - w
    t[0, 1, 1] = p_a - p1 - p2 + w
    t[1, 0, 0] = gamma - w
    t[1, 0, 1] = pb1 - p1 - gamma + w
    t[1, 1, 0] = pb2 - p2 - gamma + w
    t[1, 1, 1] = 1.0 - p_a - pb1 - pb2 + p1 + p2 + gamma - w
    return t


def _sign(index: int) -> str:
    return "+" if OUTCOMES[index] == 1 else "-"


def _first_negative(
    table: FloatArray, names: tuple[str, ...], tol: float
) -> tuple[str, float] | None:
    for idx in itertools.product(range(2), repeat=table.ndim):
        if table[idx] < -tol:
            label = ", ".join(f"{name}={_sign(k)}" for name, k in zip(names, idx, strict=True))
            return f"P({label})", float(table[idx])
    return None


def fine_construct(
    box: JointProbBox,
    gamma_mode: GammaMode | str = GammaMode.FINE_LITERAL,
    *,
    strict: bool = True,
    tol: float = DEFAULT_TOL,
) -> FineConstruction | NotConstructible:
    """Build the joint distribution of A1, A2, B1, B2 reproducing a local box.

    The pair (B1, B2) gets weight gamma on (+, +); each triple (A_n, B1, B2)
    is filled from the box's pairwise probabilities; the two triples are
    glued conditionally independently given (B1, B2).

    Args:
        box: Valid no-signaling box
        gamma_mode: Choice of gamma
        strict: Refuse boxes that violate a Clauser-Horne inequality
        tol: Tolerance for validation and for clamping tiny negative entries

    Returns:
        FineConstruction, or NotConstructible with the reason and offending entry

    Raises:
        InvalidBoxError: If the box fails validation
    """
    bell = bell_values(box, tol)
    if strict and not bell.satisfied:
        return NotConstructible(
            reason="Box violates a Clauser-Horne inequality",
            bell_certificate=bell.violated,
        )

    interm = fine_intermediates(box, gamma_mode, tol)
    q = _quantities(box, tol)
    pb1, pb2 = q.pb

    b_pair = np.array(interm.b_pair).reshape(2, 2)
    triples = [
        _triple(q.pa[n], pb1, pb2, q.pp[n][0], q.pp[n][1], interm.gamma, w)
        for n, w in ((0, interm.triple_alpha), (1, interm.triple_beta))
    ]
    checks: list[tuple[FloatArray, tuple[str, ...]]] = [
        (b_pair, ("B1", "B2")),
        (triples[0], ("A1", "B1", "B2")),
        (triples[1], ("A2", "B1", "B2")),
    ]
    for table, names in checks:
        negative = _first_negative(table, names, tol)
        if negative is not None:
            entry, value = negative
            logger.info("Construction failed at %s = %.6g", entry, value)
            return NotConstructible(
                reason="Construction produced a negative probability",
                intermediates=interm,
                offending_entry=entry,
                offending_value=value,
                bell_certificate=bell.violated,
            )

    t1 = np.clip(triples[0], 0.0, None)
    t2 = np.clip(triples[1], 0.0, None)
    denominator = np.clip(b_pair, 0.0, None)
    numerator = np.einsum("xuv,yuv->xyuv", t1, t2)
    joint = np.divide(
        numerator,
        denominator[None, None, :, :],
        out=np.zeros_like(numerator),
        where=denominator[None, None, :, :] > 0.0,
    )
    total = joint.sum()
    if total <= 0.0:
        return NotConstructible(
            reason="Construction produced an empty distribution",
            intermediates=interm,
            bell_certificate=bell.violated,
        )
    return FineConstruction(interm, JointDist16(joint / total))


def marginalize(dist: JointDist16, tol: float = DEFAULT_TOL) -> JointProbBox:
    """The box whose pair (i, j) is the (A_i, B_j) marginal of the joint distribution."""
    if not dist.is_valid(tol):
        raise MalformedInputError("Joint distribution must be nonnegative and sum to 1")
    q = dist.probs  # axes a1, a2, b1, b2
    probs = np.empty((2, 2, 2, 2))
    probs[0, 0] = q.sum(axis=(1, 3))
    probs[0, 1] = q.sum(axis=(1, 2))
    probs[1, 0] = q.sum(axis=(0, 3))
    probs[1, 1] = q.sum(axis=(0, 2))
    return JointProbBox(probs)


def _deterministic_matrix() -> FloatArray:
    columns = [box.probs.ravel() for box in deterministic_boxes()]
    return np.stack(columns, axis=1)


def lp_feasible(box: JointProbBox, tol: float = DEFAULT_TOL) -> Local | Nonlocal:
    """Decide whether the box is a convex mixture of the sixteen deterministic boxes.

    Raises:
        InvalidBoxError: If the box fails validation
        SolverFailureError: If the simplex exceeds its pivot budget
    """
    require_valid(box, tol)
    result = phase_one(_deterministic_matrix(), box.probs.ravel())
    if result.infeasibility <= tol:
        weights = np.clip(result.x, 0.0, None)
        return Local(tuple(float(w) for w in weights), result.infeasibility)
    logger.info("Box is outside the local polytope (infeasibility %.3g)", result.infeasibility)
    return Nonlocal(result.infeasibility, bell_values(box, tol).violated)


