"""Boxes produced by projective spin measurements on two qubits."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from src.corrbox import JointProbBox
from src.errors import MalformedStateError

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

IDENTITY_2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

STATE_TOL = 1e-9
DIRECTION_TOL = 1e-12

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
BELL_STATES: dict[str, tuple[complex, complex, complex, complex]] = {
    "phi+": (_INV_SQRT2, 0.0, 0.0, _INV_SQRT2),
    "phi-": (_INV_SQRT2, 0.0, 0.0, -_INV_SQRT2),
    "psi+": (0.0, _INV_SQRT2, _INV_SQRT2, 0.0),
    "psi-": (0.0, _INV_SQRT2, -_INV_SQRT2, 0.0),
}


def bell_state(name: str) -> ComplexArray:
    """Amplitudes of a Bell state in the basis |00>, |01>, |10>, |11>."""
    try:
        return np.array(BELL_STATES[name.lower()], dtype=np.complex128)
    except KeyError as e:
        raise MalformedStateError(
            f"Unknown Bell state {name!r}; expected one of {', '.join(BELL_STATES)}"
        ) from e


def planar_direction(theta_degrees: float) -> FloatArray:
    """Unit vector (sin t, 0, cos t) in the x-z plane."""
    theta = math.radians(theta_degrees)
    return np.array([math.sin(theta), 0.0, math.cos(theta)])


def _density_matrix(state: npt.ArrayLike) -> ComplexArray:
    array = np.asarray(state, dtype=np.complex128)
    if not np.all(np.isfinite(array)):
        raise MalformedStateError("State contains non-finite entries")
    if array.shape == (4,):
        norm = float(np.vdot(array, array).real)
        if abs(norm - 1.0) > STATE_TOL:
            raise MalformedStateError(f"State vector must have unit norm, got {norm:.12g}")
        return np.outer(array, array.conj())
    if array.shape == (4, 4):
        if np.max(np.abs(array - array.conj().T)) > STATE_TOL:
            raise MalformedStateError("Density matrix must be Hermitian")
        trace = float(np.trace(array).real)
        if abs(trace - 1.0) > STATE_TOL:
            raise MalformedStateError(f"Density matrix must have unit trace, got {trace:.12g}")
        if float(np.linalg.eigvalsh(array).min()) < -STATE_TOL:
            raise MalformedStateError("Density matrix must be positive semidefinite")
        return array
    raise MalformedStateError(f"State must be a 4-vector or a 4x4 matrix, got shape {array.shape}")


def _direction(vector: npt.ArrayLike, name: str) -> FloatArray:
    array = np.asarray(vector, dtype=np.float64)
    if array.shape != (3,) or not np.all(np.isfinite(array)):
        raise MalformedStateError(f"Direction {name} must be three finite numbers")
    norm = float(np.linalg.norm(array))
    if abs(norm - 1.0) > DIRECTION_TOL:
        raise MalformedStateError(f"Direction {name} must be a unit vector, got norm {norm:.15g}")
    return array


@dataclass(frozen=True, eq=False)
class QuantumSetup:
    """A two-qubit state and the measurement directions of A1, A2, B1, B2."""

    state: ComplexArray
    directions: tuple[FloatArray, FloatArray, FloatArray, FloatArray]

    def __post_init__(self) -> None:
        density = _density_matrix(self.state)
        if len(self.directions) != 4:
            raise MalformedStateError("Exactly four measurement directions are required")
        names = ("A1", "A2", "B1", "B2")
        directions = tuple(_direction(v, n) for v, n in zip(self.directions, names, strict=True))
        object.__setattr__(self, "state", density)
        object.__setattr__(self, "directions", directions)
        logger.debug(
            "Quantum setup: purity %.6g, directions %s",
            float(np.trace(density @ density).real),
            ", ".join(np.array2string(d, precision=4) for d in directions),
        )

    @classmethod
    def from_planar_angles(cls, state: npt.ArrayLike, angles: Sequence[float]) -> QuantumSetup:
        """Directions given as x-z plane angles in degrees, in the order A1, A2, B1, B2."""
        if len(angles) != 4:
            raise MalformedStateError("Exactly four measurement angles are required")
        return cls(state, tuple(planar_direction(a) for a in angles))  # type: ignore[arg-type]


def projector(direction: FloatArray, outcome: int) -> ComplexArray:
    """(I + s n.sigma) / 2 for outcome s = +1 or -1."""
    spin = direction[0] * PAULI_X + direction[1] * PAULI_Y + direction[2] * PAULI_Z
    return (IDENTITY_2 + outcome * spin) / 2.0


def born_box(setup: QuantumSetup) -> JointProbBox:
    """Outcome probabilities tr(rho (P_a x P_b)) for every setting pair."""
    a_dirs, b_dirs = setup.directions[:2], setup.directions[2:]
    probs = np.empty((2, 2, 2, 2))
    for i, a_dir in enumerate(a_dirs):
        for j, b_dir in enumerate(b_dirs):
            for a, sa in enumerate((1, -1)):
                for b, sb in enumerate((1, -1)):
                    operator = np.kron(projector(a_dir, sa), projector(b_dir, sb))
                    probs[i, j, a, b] = float(np.trace(setup.state @ operator).real)
    return JointProbBox(probs)


def chsh_optimal_setup(which: int) -> QuantumSetup:
    """Phi+ with angles A = (0, 90), B = (45, -45) degrees.

    The second setup flips Bob's directions.
    """
    if which not in (1, 2):
        raise MalformedStateError(f"Setup must be 1 or 2, got {which!r}")
    setup = QuantumSetup.from_planar_angles(bell_state("phi+"), (0.0, 90.0, 45.0, -45.0))
    if which == 1:
        return setup
    a1, a2, b1, b2 = setup.directions
    return QuantumSetup(bell_state("phi+"), (a1, a2, -b1, -b2))
