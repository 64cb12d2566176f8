"""Tests for Born-rule boxes."""

import logging
import math

import numpy as np
import pytest

from src.corrbox import cereceda_box, stats, validate
from src.errors import MalformedStateError
from src.fine import bell_values
from src.quantum import (
    QuantumSetup,
    bell_state,
    born_box,
    chsh_optimal_setup,
    planar_direction,
    projector,
)


class TestSetup:
    """Test suite for states and measurement directions."""

    def test_bell_states_are_normalized(self) -> None:
        """Test the four Bell states."""
        for name in ("phi+", "phi-", "psi+", "psi-"):
            state = bell_state(name)
            assert np.vdot(state, state).real == pytest.approx(1.0)

    def test_unknown_bell_state(self) -> None:
        """Test that unknown names are refused."""
        with pytest.raises(MalformedStateError, match="Unknown Bell state"):
            bell_state("chi+")

    def test_unnormalized_state(self) -> None:
        """Test the state norm check."""
        with pytest.raises(MalformedStateError, match="unit norm"):
            QuantumSetup.from_planar_angles([1.0, 0.0, 0.0, 1.0], (0.0, 90.0, 45.0, -45.0))

    def test_non_unit_direction(self) -> None:
        """Test the direction norm check."""
        planar = tuple(planar_direction(a) for a in (0.0, 0.0, 0.0))
        directions = (np.array([0.0, 0.0, 2.0]),) + planar

        with pytest.raises(MalformedStateError, match="A1 must be a unit vector"):
            QuantumSetup(bell_state("phi+"), directions)  # type: ignore[arg-type]

    def test_density_matrix_input(self) -> None:
        """Test that a mixed state is accepted and must be positive."""
        mixed = np.eye(4) / 4.0
        setup = QuantumSetup.from_planar_angles(mixed, (0.0, 0.0, 0.0, 0.0))

        box = born_box(setup)

        assert np.allclose(box.probs, 0.25)
        not_positive = np.diag([0.5, 0.5, 0.5, -0.5])
        with pytest.raises(MalformedStateError, match="positive semidefinite"):
            QuantumSetup.from_planar_angles(not_positive, (0.0, 0.0, 0.0, 0.0))

    def test_projectors_resolve_identity(self) -> None:
        """Test that the two outcome projectors sum to the identity."""
        direction = planar_direction(30.0)

        total = projector(direction, 1) + projector(direction, -1)

        assert np.allclose(total, np.eye(2))


class TestBornBox:
    """Test suite for born_box."""

    def test_optimal_setups_match_cereceda(self) -> None:
        """Test that the two optimal setups give the two Cereceda sets."""
        first = born_box(chsh_optimal_setup(1))
        second = born_box(chsh_optimal_setup(2))

        assert first.isclose(cereceda_box(1), atol=1e-12)
        assert second.isclose(cereceda_box(2), atol=1e-12)
        assert stats(first).chsh_max_abs == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)

    def test_quantum_boxes_are_no_signaling(self) -> None:
        """Test random planar settings on every Bell state."""
        rng = np.random.default_rng(1)
        for name in ("phi+", "phi-", "psi+", "psi-"):
            for _ in range(20):
                angles = tuple(float(a) for a in rng.uniform(-180.0, 180.0, size=4))
                box = born_box(QuantumSetup.from_planar_angles(bell_state(name), angles))

                assert validate(box).valid
                assert stats(box).chsh_max_abs <= 2.0 * math.sqrt(2.0) + 1e-12

    def test_random_pure_states_and_directions(self) -> None:
        """Test general complex states with directions off the x-z plane."""
        rng = np.random.default_rng(2)
        for _ in range(1000):
            state = rng.normal(size=4) + 1j * rng.normal(size=4)
            state /= np.linalg.norm(state)
            vectors = rng.normal(size=(4, 3))
            vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)

            box = born_box(QuantumSetup(state, tuple(vectors)))  # type: ignore[arg-type]

            assert validate(box).valid
            assert stats(box).chsh_max_abs <= 2.0 * math.sqrt(2.0) + 1e-9

    def test_setup_logs_at_debug(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test that building a setup is logged."""
        with caplog.at_level(logging.DEBUG, logger="src.quantum"):
            chsh_optimal_setup(1)

        assert "Quantum setup: purity 1" in caplog.text

    def test_optimal_box_violates_bell_system(self) -> None:
        """Test that the optimal setup leaves the local polytope."""
        assert not bell_values(born_box(chsh_optimal_setup(1))).satisfied

    def test_singlet_anticorrelation(self) -> None:
        """Test perfect anticorrelation of the singlet along equal directions."""
        box = born_box(QuantumSetup.from_planar_angles(bell_state("psi-"), (0.0, 90.0, 0.0, 90.0)))

        assert box.joint(1, 1, 1, -1) == pytest.approx(0.5)
        assert box.joint(1, 1, 1, 1) == pytest.approx(0.0, abs=1e-15)

    def test_setup_index(self) -> None:
        """Test that only two optimal setups exist."""
        with pytest.raises(MalformedStateError, match="1 or 2"):
            chsh_optimal_setup(3)
