"""Two-player, two-strategy games played through a joint probability box.

Alice's strategy S1 is observable A1 and S2 is A2; Bob's S1' is B1 and S2'
is B2. A mixed profile (x, y) gives the probabilities of S1 and S1'. Each
corner payoff is the game's payoff vector weighted by the four joint
probabilities of the matching setting pair, and the payoff at (x, y) is
bilinear in the corners.
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
from src.corrbox import JointProbBox, marginals, require_valid
from src.errors import MalformedInputError
from src.fine import FineIntermediates

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
Interval = tuple[float, float]

_MERGE_TOL = 1e-12


def _payoff_vector(values: Sequence[float], name: str) -> tuple[float, float, float, float]:
    vector = tuple(float(v) for v in values)
    if len(vector) != 4:
        raise MalformedInputError(f"Payoff vector {name} must have four entries")
    if not all(math.isfinite(v) for v in vector):
        raise MalformedInputError(f"Payoff vector {name} must be finite")
    return vector  # type: ignore[return-value]


@dataclass(frozen=True)
class Game2x2:
    """Payoff vectors indexed by the outcome pair (+,+), (+,-), (-,+), (-,-)."""

    a: tuple[float, float, float, float]
    b: tuple[float, float, float, float]
    name: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _payoff_vector(self.a, "a"))
        object.__setattr__(self, "b", _payoff_vector(self.b, "b"))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        """Bob's payoffs are Alice's with the roles swapped: b = (a1, a3, a2, a4)."""
        mirrored = (self.a[0], self.a[2], self.a[1], self.a[3])
        return all(abs(x - y) <= tol for x, y in zip(self.b, mirrored, strict=True))

    def is_zero_sum(self, tol: float = 0.0) -> bool:
        return all(abs(x + y) <= tol for x, y in zip(self.a, self.b, strict=True))

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "a": list(self.a), "b": list(self.b)}


def prisoners_dilemma(
    reward: float = 3.0, sucker: float = 0.0, temptation: float = 5.0, punishment: float = 1.0
) -> Game2x2:
    """Symmetric Prisoner's Dilemma with a = (R, S, T, P).

    Raises:
        MalformedInputError: Unless T > R > P > S
    """
    if not temptation > reward > punishment > sucker:
        raise MalformedInputError(
            "Prisoner's Dilemma needs temptation > reward > punishment > sucker"
        )
    return Game2x2(
        a=(reward, sucker, temptation, punishment),
        b=(reward, temptation, sucker, punishment),
        name="prisoners-dilemma",
    )


def matching_pennies() -> Game2x2:
    """Zero-sum game: Alice wins on matching outcomes, Bob on differing ones."""
    return Game2x2(a=(1.0, -1.0, -1.0, 1.0), b=(-1.0, 1.0, 1.0, -1.0), name="matching-pennies")


def is_prisoners_dilemma(game: Game2x2) -> bool:
    """Alice's payoffs follow the ordering a3 > a1 > a4 > a2."""
    a1, a2, a3, a4 = game.a
    return a3 > a1 > a4 > a2


@dataclass(frozen=True)
class MixedProfile:
    """Probabilities x of Alice's S1 and y of Bob's S1'."""

    x: float
    y: float

    def __post_init__(self) -> None:
        for name, value in (("x", self.x), ("y", self.y)):
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise MalformedInputError(
                    f"Profile coordinate {name} must lie in [0, 1], got {value!r}"
                )


@dataclass(frozen=True)
class Deltas:
    d1: float
    d2: float
    d3: float


def deltas(game: Game2x2) -> Deltas:
    """Payoff gaps d1 = a3 - a1 and d2 = a4 - a2 of Alice's vector, with d3 = d2 - d1."""
    a1, a2, a3, a4 = game.a
    d1, d2 = a3 - a1, a4 - a2
    return Deltas(d1, d2, d2 - d1)


@dataclass(frozen=True)
class CornerPayoffs:
    """Payoffs at the four pure profiles; index [k][l] uses setting pair (k+1, l+1)."""

    pi_a: FloatArray
    pi_b: FloatArray

    def to_dict(self) -> dict[str, Any]:
        return {"pi_a": self.pi_a.tolist(), "pi_b": self.pi_b.tolist()}


def corner_payoffs(game: Game2x2, box: JointProbBox, tol: float = DEFAULT_TOL) -> CornerPayoffs:
    """Corner payoffs of both players.

    Raises:
        InvalidBoxError: If the box fails validation
    """
    require_valid(box, tol)
    weights = box.probs.reshape(2, 2, 4)
    return CornerPayoffs(weights @ np.array(game.a), weights @ np.array(game.b))


def _bilinear(corners: FloatArray, x: float, y: float) -> float:
    return float(np.array([x, 1.0 - x]) @ corners @ np.array([y, 1.0 - y]))


def payoff(
    game: Game2x2, box: JointProbBox, profile: MixedProfile, tol: float = DEFAULT_TOL
) -> tuple[float, float]:
    """Expected payoffs (Alice, Bob) at a mixed profile."""
    corners = corner_payoffs(game, box, tol)
    x, y = profile.x, profile.y
    return _bilinear(corners.pi_a, x, y), _bilinear(corners.pi_b, x, y)


@dataclass(frozen=True)
class ResponseCoefficients:
    """Deviation gains g_A(y) = kappa_a*y + lambda_a and g_B(x) = kappa_b*x + lambda_b.

    g_A(y) is Alice's payoff gain from playing S1 rather than S2 when Bob
    plays y; g_B(x) is the analogue for Bob.
    """

    kappa_a: float
    lambda_a: float
    kappa_b: float
    lambda_b: float

    def gain_a(self, y: float) -> float:
        return self.kappa_a * y + self.lambda_a

    def gain_b(self, x: float) -> float:
        return self.kappa_b * x + self.lambda_b


def response_coefficients(corners: CornerPayoffs) -> ResponseCoefficients:
    c, d = corners.pi_a, corners.pi_b
    return ResponseCoefficients(
        kappa_a=float(c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1]),
        lambda_a=float(c[0, 1] - c[1, 1]),
        kappa_b=float(d[0, 0] - d[0, 1] - d[1, 0] + d[1, 1]),
        lambda_b=float(d[1, 0] - d[1, 1]),
    )


@dataclass(frozen=True)
class NashCheck:
    """Best unilateral gain of each player.

    The profile is an equilibrium when both gains are within tol.
    """

    ok: bool
    worst_deviation_a: float
    worst_deviation_b: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "worst_deviation_a": self.worst_deviation_a,
            "worst_deviation_b": self.worst_deviation_b,
        }


def is_nash(
    game: Game2x2, box: JointProbBox, profile: MixedProfile, tol: float = DEFAULT_TOL
) -> NashCheck:
    """Check a profile against all unilateral deviations.

    A bilinear payoff is maximized at a pure strategy, so the pure deviations suffice.
    """
    corners = corner_payoffs(game, box, tol)
    x, y = profile.x, profile.y
    here_a = _bilinear(corners.pi_a, x, y)
    here_b = _bilinear(corners.pi_b, x, y)
    gain_a = max(_bilinear(corners.pi_a, 1.0, y), _bilinear(corners.pi_a, 0.0, y)) - here_a
    gain_b = max(_bilinear(corners.pi_b, x, 1.0), _bilinear(corners.pi_b, x, 0.0)) - here_b
    return NashCheck(gain_a <= tol and gain_b <= tol, gain_a, gain_b)


@dataclass(frozen=True)
class NashPoint:
    x: float
    y: float
    payoff_a: float
    payoff_b: float


@dataclass(frozen=True)
class EdgeSegment:
    """Equilibria along a line with one coordinate fixed."""

    fixed_axis: Literal["x", "y"]
    fixed_value: float
    interval: Interval

    def endpoints(self) -> tuple[tuple[float, float], tuple[float, float]]:
        lo, hi = self.interval
        if self.fixed_axis == "x":
            return (self.fixed_value, lo), (self.fixed_value, hi)
        return (lo, self.fixed_value), (hi, self.fixed_value)

    def distance(self, x: float, y: float) -> float:
        lo, hi = self.interval
        if self.fixed_axis == "x":
            return math.hypot(x - self.fixed_value, y - min(max(y, lo), hi))
        return math.hypot(x - min(max(x, lo), hi), y - self.fixed_value)

    def sample(self, step: float) -> FloatArray:
        lo, hi = self.interval
        count = max(2, math.ceil((hi - lo) / step) + 1)
        free = np.linspace(lo, hi, count)
        fixed = np.full(count, self.fixed_value)
        return np.column_stack((fixed, free) if self.fixed_axis == "x" else (free, fixed))


@dataclass(frozen=True)
class NashSet:
    """All Nash equilibria: isolated points, axis-parallel segments, or the whole square."""

    points: tuple[NashPoint, ...] = ()
    segments: tuple[EdgeSegment, ...] = ()
    full_square: bool = False

    @property
    def kind(self) -> str:
        if self.full_square:
            return "full-square"
        if self.segments:
            return "segments"
        return "points" if self.points else "empty"

    def distance(self, x: float, y: float) -> float:
        """Euclidean distance from (x, y) to the set."""
        if self.full_square:
            return 0.0
        candidates = [math.hypot(x - p.x, y - p.y) for p in self.points]
        candidates.extend(segment.distance(x, y) for segment in self.segments)
        return min(candidates, default=math.inf)

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return self.distance(x, y) <= tol

    def sample(self, step: float) -> FloatArray:
        """Points of the set spaced at most ``step`` apart along every segment."""
        if self.full_square:
            count = max(2, math.ceil(1.0 / step) + 1)
            axis = np.linspace(0.0, 1.0, count)
            xs, ys = np.meshgrid(axis, axis, indexing="ij")
            return np.column_stack((xs.ravel(), ys.ravel()))
        parts = [np.array([[p.x, p.y] for p in self.points]).reshape(-1, 2)]
        parts.extend(segment.sample(step) for segment in self.segments)
        return np.concatenate(parts, axis=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "full_square": self.full_square,
            "points": [
                {"x": p.x, "y": p.y, "payoff_a": p.payoff_a, "payoff_b": p.payoff_b}
                for p in self.points
            ],
            "segments": [
                {
                    "fixed_axis": s.fixed_axis,
                    "fixed_value": s.fixed_value,
                    "interval": list(s.interval),
                }
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NashSet:
        return cls(
            points=tuple(
                NashPoint(float(p["x"]), float(p["y"]), float(p["payoff_a"]), float(p["payoff_b"]))
                for p in data["points"]
            ),
            segments=tuple(
                EdgeSegment(
                    s["fixed_axis"],
                    float(s["fixed_value"]),
                    (float(s["interval"][0]), float(s["interval"][1])),
                )
                for s in data["segments"]
            ),
            full_square=bool(data["full_square"]),
        )


@dataclass(frozen=True)
class _Response:
    """Where one player's best response is S1 (up), S2 (down), or mixed (root)."""

    up: Interval | None = None
    down: Interval | None = None
    root: float | None = None
    indifferent: bool = False


def _best_response(kappa: float, lam: float, tol: float) -> _Response:
    if abs(kappa) <= tol:
        if abs(lam) <= tol:
            return _Response(indifferent=True)
        return _Response(up=(0.0, 1.0)) if lam > 0 else _Response(down=(0.0, 1.0))
    root = -lam / kappa
    slack = tol / abs(kappa)
    if root < -slack or root > 1.0 + slack:
        return _Response(up=(0.0, 1.0)) if kappa * 0.5 + lam > 0 else _Response(down=(0.0, 1.0))
    r = min(max(root, 0.0), 1.0)
    if kappa > 0:
        return _Response(up=(r, 1.0), down=(0.0, r), root=r)
    return _Response(up=(0.0, r), down=(r, 1.0), root=r)


def _rectangles(
    response: _Response, own_axis: Literal["x", "y"]
) -> list[tuple[Interval, Interval]]:
    """Best-response graph as (x-interval, y-interval) rectangles."""
    full = (0.0, 1.0)
    pieces: list[tuple[Interval, Interval]] = []
    if response.indifferent:
        return [(full, full)]
    # (own-coordinate interval, other-coordinate interval)
    if response.up is not None:
        pieces.append(((1.0, 1.0), response.up))
    if response.down is not None:
        pieces.append(((0.0, 0.0), response.down))
    if response.root is not None:
        pieces.append((full, (response.root, response.root)))
    if own_axis == "x":
        return pieces
    return [(other, own) for own, other in pieces]


def _intersect(first: Interval, second: Interval) -> Interval | None:
    lo, hi = max(first[0], second[0]), min(first[1], second[1])
    return (lo, hi) if lo <= hi else None


def _merge(intervals: list[Interval]) -> list[Interval]:
    merged: list[Interval] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + _MERGE_TOL:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def enumerate_nash(game: Game2x2, box: JointProbBox, tol: float = DEFAULT_TOL) -> NashSet:
    """Every Nash equilibrium of the game played through the box.

    The set is the intersection of the two best-response graphs; each graph
    is a union of axis-parallel rectangles, so the intersection is a union of
    points, segments, or the whole square.
    """
    corners = corner_payoffs(game, box, tol)
    coeffs = response_coefficients(corners)
    alice = _rectangles(_best_response(coeffs.kappa_a, coeffs.lambda_a, tol), "x")
    bob = _rectangles(_best_response(coeffs.kappa_b, coeffs.lambda_b, tol), "y")

    raw_points: list[tuple[float, float]] = []
    lines: dict[tuple[str, float], list[Interval]] = {}
    for (ax, ay), (bx, by) in itertools.product(alice, bob):
        xs, ys = _intersect(ax, bx), _intersect(ay, by)
        if xs is None or ys is None:
            continue
        x_fixed, y_fixed = xs[0] == xs[1], ys[0] == ys[1]
        if x_fixed and y_fixed:
            raw_points.append((xs[0], ys[0]))
        elif x_fixed:
            lines.setdefault(("x", xs[0]), []).append(ys)
        elif y_fixed:
            lines.setdefault(("y", ys[0]), []).append(xs)
        else:
            logger.debug("Both players are indifferent everywhere")
            return NashSet(full_square=True)

    segments = [
        EdgeSegment(axis, value, interval)  # type: ignore[arg-type]
        for (axis, value), intervals in sorted(lines.items())
        for interval in _merge(intervals)
    ]
    points: list[NashPoint] = []
    for x, y in sorted(set(raw_points)):
        if any(s.distance(x, y) <= _MERGE_TOL for s in segments):
            continue
        if any(math.hypot(x - p.x, y - p.y) <= _MERGE_TOL for p in points):
            continue
        points.append(
            NashPoint(x, y, _bilinear(corners.pi_a, x, y), _bilinear(corners.pi_b, x, y))
        )
    return NashSet(points=tuple(points), segments=tuple(segments))


@dataclass(frozen=True, eq=False)
class GridNashResult:
    """Grid profiles at which neither player gains more than eps by a pure deviation."""

    points: FloatArray
    grid_size: int
    eps: float

    @property
    def step(self) -> float:
        return 1.0 / (self.grid_size - 1)


def grid_bruteforce_nash(
    game: Game2x2, box: JointProbBox, n: int, eps: float = DEFAULT_TOL, tol: float = DEFAULT_TOL
) -> GridNashResult:
    """Brute-force equilibria on the n-by-n grid of [0, 1]^2.

    Independent of the closed-form enumeration; used to confirm its output.
    """
    if n < 2:
        raise MalformedInputError(f"Grid size must be at least 2, got {n}")
    corners = corner_payoffs(game, box, tol)
    axis = np.linspace(0.0, 1.0, n)
    u = np.stack([axis, 1.0 - axis])  # (2, n)
    pay_a = u.T @ corners.pi_a @ u  # [x][y]
    pay_b = u.T @ corners.pi_b @ u
    gain_a = pay_a.max(axis=0, keepdims=True) - pay_a
    gain_b = pay_b.max(axis=1, keepdims=True) - pay_b
    xi, yi = np.nonzero((gain_a <= eps) & (gain_b <= eps))
    return GridNashResult(np.column_stack((axis[xi], axis[yi])), n, eps)


def _nearest_distances(samples: FloatArray, targets: FloatArray, chunk: int = 1024) -> FloatArray:
    target_norms = (targets**2).sum(axis=1)
    out = np.empty(samples.shape[0])
    for start in range(0, samples.shape[0], chunk):
        block = samples[start : start + chunk]
        squared = (block**2).sum(axis=1)[:, None] + target_norms[None, :] - 2.0 * block @ targets.T
        out[start : start + chunk] = np.sqrt(np.clip(squared.min(axis=1), 0.0, None))
    return out


def hausdorff_to_grid(nash_set: NashSet, grid: GridNashResult) -> float:
    """Hausdorff distance between an exact equilibrium set and a grid result."""
    if grid.points.size == 0:
        return 0.0 if nash_set.kind == "empty" else math.inf
    step = grid.step if nash_set.full_square else grid.step / 4.0
    samples = nash_set.sample(step)
    exact_to_grid = float(_nearest_distances(samples, grid.points).max()) if samples.size else 0.0
    grid_to_exact = max(nash_set.distance(float(x), float(y)) for x, y in grid.points)
    return max(exact_to_grid, grid_to_exact)


def omega(box: JointProbBox, interm: FineIntermediates, tol: float = DEFAULT_TOL) -> float:
    """Omega = 4 P(A1B1) - (2 + beta) P(A1) + alpha P(A2) - 2 P(B1).

    Uses the intermediates' alpha and beta as gamma times the marginals.
    """
    require_valid(box, tol)
    (pa1, pa2), (pb1, _) = marginals(box, tol)
    return 4.0 * box.pp(1, 1) - (2.0 + interm.beta) * pa1 + interm.alpha * pa2 - 2.0 * pb1


@dataclass(frozen=True)
class NashComparison:
    """Exact equilibrium set next to the grid oracle's result."""

    label: str
    nash_set: NashSet
    grid_points: int
    hausdorff: float
    confirmed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "nash_set": self.nash_set.to_dict(),
            "grid_points": self.grid_points,
            "hausdorff": self.hausdorff,
            "confirmed": self.confirmed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NashComparison:
        return cls(
            label=str(data["label"]),
            nash_set=NashSet.from_dict(data["nash_set"]),
            grid_points=int(data["grid_points"]),
            hausdorff=float(data["hausdorff"]),
            confirmed=bool(data["confirmed"]),
        )


def compare_with_grid(
    label: str,
    game: Game2x2,
    box: JointProbBox,
    grid_size: int,
    tol: float = DEFAULT_TOL,
) -> NashComparison:
    """Enumerate equilibria exactly and confirm them against the grid oracle."""
    exact = enumerate_nash(game, box, tol)
    grid = grid_bruteforce_nash(game, box, grid_size, tol, tol)
    distance = hausdorff_to_grid(exact, grid)
    confirmed = distance <= grid.step + tol
    if not confirmed:
        logger.warning(
            "Grid oracle disagrees with exact equilibria for %s (distance %.3g)", label, distance
        )
    return NashComparison(label, exact, int(grid.points.shape[0]), distance, confirmed)
