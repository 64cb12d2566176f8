"""Joint probability boxes: data model, validation, statistics and generators.

A box holds the sixteen joint probabilities P(A_i = a, B_j = b) of a
two-party, two-setting, two-outcome correlation experiment. Arrays are
indexed ``probs[i][j][a][b]`` with setting indices 0/1 for settings 1/2 and
outcome indices 0/1 for outcomes +1/-1.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from src.config import DEFAULT_TOL
from src.errors import (
    InfeasibleParametersError,
    InvalidBoxError,
    MalformedInputError,
    SignalingBoxError,
)

logger = logging.getLogger(__name__)

Outcome = Literal[1, -1]
FloatArray = npt.NDArray[np.float64]

OUTCOMES: tuple[Outcome, Outcome] = (1, -1)
SETTING_PAIRS: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 2))

SQRT2 = math.sqrt(2.0)
CERECEDA_HIGH = (2.0 + SQRT2) / 8.0
CERECEDA_LOW = (2.0 - SQRT2) / 8.0

NOSIGNALING_LABELS: tuple[str, ...] = ("A1+", "B1+", "A2+", "B2+", "A1-", "A2-", "B1-", "B2-")

DEFAULT_MAX_ATTEMPTS = 10_000
_BATCH_SIZE = 512


def outcome_index(sign: int) -> int:
    """Map an outcome +1/-1 to its array index 0/1."""
    if sign == 1:
        return 0
    if sign == -1:
        return 1
    raise MalformedInputError(f"Outcome must be +1 or -1, got {sign!r}")


def _setting_index(setting: int) -> int:
    if setting not in (1, 2):
        raise MalformedInputError(f"Setting must be 1 or 2, got {setting!r}")
    return setting - 1


def _frozen_array(values: Any, shape: tuple[int, ...], what: str) -> FloatArray:
    try:
        array = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise MalformedInputError(f"{what} must contain real numbers: {e}") from e
    if array.shape != shape:
        raise MalformedInputError(f"{what} must have shape {shape}, got {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class JointProbBox:
    """The sixteen joint probabilities for the four setting pairs."""

    probs: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _frozen_array(self.probs, (2, 2, 2, 2), "Box"))

    def joint(self, i: int, j: int, a: int, b: int) -> float:
        """P(A_i = a, B_j = b) for settings i, j in {1, 2} and outcomes a, b in {+1, -1}."""
        return float(
            self.probs[_setting_index(i), _setting_index(j), outcome_index(a), outcome_index(b)]
        )

    def pp(self, i: int, j: int) -> float:
        """P(A_i B_j): both observables take the value +1."""
        return self.joint(i, j, 1, 1)

    def pair(self, i: int, j: int) -> FloatArray:
        """The 2x2 table of setting pair (i, j), rows Alice's outcome, columns Bob's."""
        return self.probs[_setting_index(i), _setting_index(j)]

    def isclose(self, other: JointProbBox, atol: float = 1e-12) -> bool:
        """Entrywise comparison within an absolute tolerance."""
        return bool(np.allclose(self.probs, other.probs, rtol=0.0, atol=atol))

    def max_abs_diff(self, other: JointProbBox) -> float:
        return float(np.max(np.abs(self.probs - other.probs)))


@dataclass(frozen=True)
class RangeViolation:
    """An entry outside [0, 1]."""

    i: int
    j: int
    a: int
    b: int
    value: float

    @property
    def channel(self) -> str:
        sign_a = "+" if self.a == 1 else "-"
        sign_b = "+" if self.b == 1 else "-"
        return f"range[{self.i}{self.j}{sign_a}{sign_b}]"


@dataclass(frozen=True)
class ValidationReport:
    """Residuals of the normalization and no-signaling constraints."""

    normalization_residuals: tuple[float, ...]
    nosignaling_residuals: tuple[float, ...]
    range_violations: tuple[RangeViolation, ...]
    tolerance: float
    valid: bool

    def failing_channels(self) -> list[str]:
        """Names of the residual channels that exceed the tolerance."""
        channels = [
            f"normalization[{i}{j}]"
            for (i, j), residual in zip(SETTING_PAIRS, self.normalization_residuals, strict=True)
            if abs(residual) > self.tolerance
        ]
        channels.extend(
            f"nosignaling[{label}]"
            for label, residual in zip(NOSIGNALING_LABELS, self.nosignaling_residuals, strict=True)
            if abs(residual) > self.tolerance
        )
        channels.extend(violation.channel for violation in self.range_violations)
        return channels

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "tolerance": self.tolerance,
            "normalization_residuals": {
                f"{i}{j}": r
                for (i, j), r in zip(SETTING_PAIRS, self.normalization_residuals, strict=True)
            },
            "nosignaling_residuals": dict(
                zip(NOSIGNALING_LABELS, self.nosignaling_residuals, strict=True)
            ),
            "range_violations": [
                {"i": v.i, "j": v.j, "a": v.a, "b": v.b, "value": v.value}
                for v in self.range_violations
            ],
            "failing_channels": self.failing_channels(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ValidationReport:
        return cls(
            normalization_residuals=tuple(
                float(data["normalization_residuals"][f"{i}{j}"]) for i, j in SETTING_PAIRS
            ),
            nosignaling_residuals=tuple(
                float(data["nosignaling_residuals"][label]) for label in NOSIGNALING_LABELS
            ),
            range_violations=tuple(
                RangeViolation(
                    int(v["i"]), int(v["j"]), int(v["a"]), int(v["b"]), float(v["value"])
                )
                for v in data["range_violations"]
            ),
            tolerance=float(data["tolerance"]),
            valid=bool(data["valid"]),
        )


@dataclass(frozen=True)
class BoxStats:
    """Marginals, correlations and CHSH sums of a box.

    ``chsh[k]`` is the sum of the four correlations with the minus sign on
    the k-th setting pair in the order (1,1), (1,2), (2,1), (2,2).
    """

    pa: tuple[float, float]
    pb: tuple[float, float]
    e: tuple[tuple[float, float], tuple[float, float]]
    chsh: tuple[float, float, float, float]
    chsh_max_abs: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "pa": list(self.pa),
            "pb": list(self.pb),
            "e": [list(row) for row in self.e],
            "chsh": list(self.chsh),
            "chsh_max_abs": self.chsh_max_abs,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BoxStats:
        e = data["e"]
        return cls(
            pa=(float(data["pa"][0]), float(data["pa"][1])),
            pb=(float(data["pb"][0]), float(data["pb"][1])),
            e=((float(e[0][0]), float(e[0][1])), (float(e[1][0]), float(e[1][1]))),
            chsh=tuple(float(s) for s in data["chsh"]),  # type: ignore[arg-type]
            chsh_max_abs=float(data["chsh_max_abs"]),
        )


@dataclass(frozen=True)
class FreeParams8:
    """The eight independent probabilities a no-signaling box is rebuilt from.

    Marginals P(A_1), P(A_2), P(B_1), P(B_2) and the four joints P(A_i B_j)
    in which both observables take the value +1.
    """

    pa1: float
    pa2: float
    pb1: float
    pb2: float
    p11: float
    p12: float
    p21: float
    p22: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.pa1, self.pa2, self.pb1, self.pb2, self.p11, self.p12, self.p21, self.p22)


@dataclass(frozen=True)
class ProductSpec:
    pa1: float
    pa2: float
    pb1: float
    pb2: float


@dataclass(frozen=True)
class DeterministicSpec:
    sa1: int
    sa2: int
    sb1: int
    sb2: int


@dataclass(frozen=True)
class CerecedaSpec:
    which: int


@dataclass(frozen=True)
class PrBoxSpec:
    pass


@dataclass(frozen=True)
class FreeParamsSpec:
    params: FreeParams8


@dataclass(frozen=True)
class RandomLocalSpec:
    seed: int


@dataclass(frozen=True)
class RandomNoSignalingSpec:
    seed: int
    max_attempts: int = DEFAULT_MAX_ATTEMPTS


BoxSpec = (
    ProductSpec
    | DeterministicSpec
    | CerecedaSpec
    | PrBoxSpec
    | FreeParamsSpec
    | RandomLocalSpec
    | RandomNoSignalingSpec
)


def validate(box: JointProbBox, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check normalization, no-signaling and the [0, 1] range of every entry.

    Args:
        box: Box to check
        tol: Absolute tolerance applied to every residual

    Returns:
        Report with signed residuals (sum minus one; left minus right side)

    Raises:
        MalformedInputError: If any entry is NaN or infinite
    """
    p = box.probs
    if not np.all(np.isfinite(p)):
        raise MalformedInputError("Box contains non-finite entries")

    normalization = tuple(float(p[i - 1, j - 1].sum() - 1.0) for i, j in SETTING_PAIRS)

    # Alice's reading of setting i from Bob's setting 1 vs 2, and Bob's from Alice's.
    a_read = p.sum(axis=3)  # [i][j][a]
    b_read = p.sum(axis=2)  # [i][j][b]
    nosignaling = (
        float(a_read[0, 0, 0] - a_read[0, 1, 0]),
        float(b_read[0, 0, 0] - b_read[1, 0, 0]),
        float(a_read[1, 0, 0] - a_read[1, 1, 0]),
        float(b_read[0, 1, 0] - b_read[1, 1, 0]),
        float(a_read[0, 0, 1] - a_read[0, 1, 1]),
        float(a_read[1, 0, 1] - a_read[1, 1, 1]),
        float(b_read[0, 0, 1] - b_read[1, 0, 1]),
        float(b_read[0, 1, 1] - b_read[1, 1, 1]),
    )

    violations = tuple(
        RangeViolation(i + 1, j + 1, OUTCOMES[a], OUTCOMES[b], float(p[i, j, a, b]))
        for i, j, a, b in itertools.product(range(2), repeat=4)
        if p[i, j, a, b] < -tol or p[i, j, a, b] > 1.0 + tol
    )

    valid = (
        all(abs(r) <= tol for r in normalization)
        and all(abs(r) <= tol for r in nosignaling)
        and not violations
    )
    return ValidationReport(normalization, nosignaling, violations, tol, valid)


def require_valid(box: JointProbBox, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Validate a box and raise if it is not a valid joint probability box."""
    report = validate(box, tol)
    if not report.valid:
        raise InvalidBoxError(
            "Box is not a valid joint probability box: " + ", ".join(report.failing_channels()),
            report,
        )
    return report


def marginals(
    box: JointProbBox, tol: float = DEFAULT_TOL
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Marginals P(A_i) and P(B_j), each averaged over the other party's two settings.

    Raises:
        SignalingBoxError: If the two readings of a marginal differ by more than tol
    """
    p = box.probs
    pa_read = p[:, :, 0, :].sum(axis=2)  # [i][j]: P(A_i=+) read with Bob's setting j
    pb_read = p[:, :, :, 0].sum(axis=2)  # [i][j]: P(B_j=+) read with Alice's setting i
    for i in range(2):
        gap = abs(pa_read[i, 0] - pa_read[i, 1])
        if gap > tol:
            raise SignalingBoxError(
                f"Marginal P(A{i + 1}) depends on Bob's setting (difference {gap:.3g})"
            )
    for j in range(2):
        gap = abs(pb_read[0, j] - pb_read[1, j])
        if gap > tol:
            raise SignalingBoxError(
                f"Marginal P(B{j + 1}) depends on Alice's setting (difference {gap:.3g})"
            )
    pa = pa_read.mean(axis=1)
    pb = pb_read.mean(axis=0)
    return (float(pa[0]), float(pa[1])), (float(pb[0]), float(pb[1]))


def correlations(box: JointProbBox) -> FloatArray:
    """E_ij = p(+,+) + p(-,-) - p(+,-) - p(-,+) for every setting pair."""
    p = box.probs
    return p[:, :, 0, 0] + p[:, :, 1, 1] - p[:, :, 0, 1] - p[:, :, 1, 0]


def stats(box: JointProbBox, tol: float = DEFAULT_TOL) -> BoxStats:
    """Marginals, correlations and the four CHSH sign placements of a box.

    Raises:
        SignalingBoxError: If a marginal's two readings disagree beyond tol
        InvalidBoxError: If the box fails validation for any other reason
    """
    pa, pb = marginals(box, tol)
    require_valid(box, tol)
    e = correlations(box)
    flat = e.ravel()
    chsh = tuple(float(flat.sum() - 2.0 * flat[k]) for k in range(4))
    return BoxStats(
        pa=pa,
        pb=pb,
        e=((float(e[0, 0]), float(e[0, 1])), (float(e[1, 0]), float(e[1, 1]))),
        chsh=chsh,  # type: ignore[arg-type]
        chsh_max_abs=max(abs(s) for s in chsh),
    )


def _reconstruct(params: FreeParams8) -> FloatArray:
    pa = (params.pa1, params.pa2)
    pb = (params.pb1, params.pb2)
    joint = ((params.p11, params.p12), (params.p21, params.p22))
    probs = np.empty((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        pij = joint[i][j]
        probs[i, j, 0, 0] = pij
        probs[i, j, 0, 1] = pa[i] - pij
        probs[i, j, 1, 0] = pb[j] - pij
        probs[i, j, 1, 1] = 1.0 - pa[i] - pb[j] + pij
    return probs


def from_free_params(params: FreeParams8, tol: float = DEFAULT_TOL) -> JointProbBox:
    """Rebuild the sixteen entries from the eight free parameters.

    Raises:
        MalformedInputError: If a parameter is not finite
        InfeasibleParametersError: If a rebuilt entry falls outside [0, 1] by more than tol
    """
    values = params.as_tuple()
    if not all(math.isfinite(v) for v in values):
        raise MalformedInputError("Free parameters must be finite")
    probs = _reconstruct(params)
    low, high = float(probs.min()), float(probs.max())
    if low < -tol or high > 1.0 + tol:
        raise InfeasibleParametersError(
            f"Free parameters rebuild an entry outside [0, 1] (min {low:.6g}, max {high:.6g})"
        )
    return JointProbBox(probs)


def extract_free_params(box: JointProbBox) -> FreeParams8:
    """Read the eight free parameters of a box.

    Alice's marginals are read from Bob's setting 1, Bob's from Alice's setting 1.
    """
    p = box.probs
    return FreeParams8(
        pa1=float(p[0, 0, 0, 0] + p[0, 0, 0, 1]),
        pa2=float(p[1, 0, 0, 0] + p[1, 0, 0, 1]),
        pb1=float(p[0, 0, 0, 0] + p[0, 0, 1, 0]),
        pb2=float(p[0, 1, 0, 0] + p[0, 1, 1, 0]),
        p11=float(p[0, 0, 0, 0]),
        p12=float(p[0, 1, 0, 0]),
        p21=float(p[1, 0, 0, 0]),
        p22=float(p[1, 1, 0, 0]),
    )


def product_box(pa1: float, pa2: float, pb1: float, pb2: float) -> JointProbBox:
    for name, value in (("pa1", pa1), ("pa2", pa2), ("pb1", pb1), ("pb2", pb2)):
        if not 0.0 <= value <= 1.0:
            raise InfeasibleParametersError(f"Product marginal {name} must lie in [0, 1]")
    alice = np.array([[pa1, 1.0 - pa1], [pa2, 1.0 - pa2]])
    bob = np.array([[pb1, 1.0 - pb1], [pb2, 1.0 - pb2]])
    return JointProbBox(np.einsum("ia,jb->ijab", alice, bob))


def deterministic_box(sa1: int, sa2: int, sb1: int, sb2: int) -> JointProbBox:
    """Point-mass box in which every observable takes a fixed value."""
    alice = (outcome_index(sa1), outcome_index(sa2))
    bob = (outcome_index(sb1), outcome_index(sb2))
    probs = np.zeros((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        probs[i, j, alice[i], bob[j]] = 1.0
    return JointProbBox(probs)


def deterministic_boxes() -> list[JointProbBox]:
    """The sixteen deterministic boxes ordered by (a1, a2, b1, b2), + before -."""
    return [deterministic_box(*signs) for signs in itertools.product(OUTCOMES, repeat=4)]


def cereceda_box(which: int) -> JointProbBox:
    """The two maximally CHSH-violating probability sets of a maximally entangled state.

    Set 1 gives the correlated entries (mu) (2+sqrt2)/8 and the others (nu)
    (2-sqrt2)/8; set 2 swaps the two values.
    """
    if which not in (1, 2):
        raise InfeasibleParametersError(f"Cereceda set must be 1 or 2, got {which!r}")
    mu, nu = (CERECEDA_HIGH, CERECEDA_LOW) if which == 1 else (CERECEDA_LOW, CERECEDA_HIGH)
    probs = np.empty((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        anti = (i, j) == (1, 1)
        same, different = (nu, mu) if anti else (mu, nu)
        probs[i, j] = [[same, different], [different, same]]
    return JointProbBox(probs)


def pr_box() -> JointProbBox:
    """Perfectly correlated outcomes, anticorrelated for setting pair (2, 2)."""
    probs = np.zeros((2, 2, 2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        if (i, j) == (1, 1):
            probs[i, j, 0, 1] = probs[i, j, 1, 0] = 0.5
        else:
            probs[i, j, 0, 0] = probs[i, j, 1, 1] = 0.5
    return JointProbBox(probs)


def mixture(boxes: Sequence[JointProbBox], weights: Sequence[float]) -> JointProbBox:
    """Convex combination of boxes."""
    w = np.asarray(weights, dtype=np.float64)
    if len(boxes) != w.size or w.size == 0:
        raise MalformedInputError("Mixture needs one weight per box")
    if np.any(w < 0) or not math.isclose(float(w.sum()), 1.0, abs_tol=1e-12):
        raise MalformedInputError("Mixture weights must be nonnegative and sum to 1")
    stacked = np.stack([box.probs for box in boxes])
    return JointProbBox(np.tensordot(w, stacked, axes=1))


def random_local_box(seed: int) -> JointProbBox:
    """Uniform (flat Dirichlet) mixture of the sixteen deterministic boxes."""
    rng = np.random.default_rng(_check_seed(seed))
    weights = rng.dirichlet(np.ones(16))
    return mixture(deterministic_boxes(), weights)


def random_nosignaling_box(seed: int, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> JointProbBox:
    """Rejection-sample the eight free parameters uniformly from [0, 1].

    Raises:
        InfeasibleParametersError: If no valid box is found within max_attempts draws
    """
    rng = np.random.default_rng(_check_seed(seed))
    attempts = 0
    while attempts < max_attempts:
        batch = min(_BATCH_SIZE, max_attempts - attempts)
        draws = rng.random((batch, 8))
        pa, pb, joint = draws[:, 0:2], draws[:, 2:4], draws[:, 4:8].reshape(batch, 2, 2)
        pm = pa[:, :, None] - joint
        mp = pb[:, None, :] - joint
        mm = 1.0 - pa[:, :, None] - pb[:, None, :] + joint
        ok = np.all((pm >= 0) & (mp >= 0) & (mm >= 0) & (mm <= 1), axis=(1, 2))
        hits = np.flatnonzero(ok)
        if hits.size:
            row = draws[hits[0]]
            logger.debug("No-signaling box accepted after %d draws", attempts + hits[0] + 1)
            return from_free_params(FreeParams8(*(float(v) for v in row)))
        attempts += batch
    raise InfeasibleParametersError(
        f"No valid no-signaling box found within {max_attempts} attempts"
    )


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int | np.integer) or seed < 0:
        raise MalformedInputError(f"Seed must be an unsigned integer, got {seed!r}")
    return int(seed)


def make_box(spec: BoxSpec, tol: float = DEFAULT_TOL) -> JointProbBox:
    """Build a box from one of the generator specifications."""
    match spec:
        case ProductSpec(pa1, pa2, pb1, pb2):
            return product_box(pa1, pa2, pb1, pb2)
        case DeterministicSpec(sa1, sa2, sb1, sb2):
            return deterministic_box(sa1, sa2, sb1, sb2)
        case CerecedaSpec(which):
            return cereceda_box(which)
        case PrBoxSpec():
            return pr_box()
        case FreeParamsSpec(params):
            return from_free_params(params, tol)
        case RandomLocalSpec(seed):
            return random_local_box(seed)
        case RandomNoSignalingSpec(seed, max_attempts):
            return random_nosignaling_box(seed, max_attempts)
    raise MalformedInputError(f"Unknown box specification: {spec!r}")


def relabel_settings(box: JointProbBox) -> JointProbBox:
    """Swap settings 1 and 2 for both parties at once."""
    return JointProbBox(box.probs[::-1, ::-1, :, :])


def flip_outcomes(box: JointProbBox, party: Literal["A", "B"]) -> JointProbBox:
    """Exchange the +1 and -1 labels of one party's outcomes."""
    if party == "A":
        return JointProbBox(box.probs[:, :, ::-1, :])
    if party == "B":
        return JointProbBox(box.probs[:, :, :, ::-1])
    raise MalformedInputError(f"Party must be 'A' or 'B', got {party!r}")
