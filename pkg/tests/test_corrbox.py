"""Tests for joint probability boxes."""

import math

import numpy as np
import pytest

from src.corrbox import (
    BoxStats,
    CerecedaSpec,
    DeterministicSpec,
    FreeParams8,
    FreeParamsSpec,
    JointProbBox,
    PrBoxSpec,
    ProductSpec,
    RandomLocalSpec,
    RandomNoSignalingSpec,
    ValidationReport,
    cereceda_box,
    correlations,
    deterministic_box,
    deterministic_boxes,
    extract_free_params,
    flip_outcomes,
    from_free_params,
    make_box,
    marginals,
    mixture,
    pr_box,
    product_box,
    random_local_box,
    random_nosignaling_box,
    relabel_settings,
    require_valid,
    stats,
    validate,
)
from src.errors import (
    InfeasibleParametersError,
    InvalidBoxError,
    MalformedInputError,
    SignalingBoxError,
)


class TestJointProbBox:
    """Test suite for the box data model."""

    def test_rejects_wrong_shape(self) -> None:
        """Test that a box must have sixteen entries in a 2x2x2x2 array."""
        with pytest.raises(MalformedInputError, match="must have shape"):
            JointProbBox(np.zeros((4, 4)))

    def test_probs_are_read_only(self) -> None:
        """Test that the stored array cannot be modified."""
        box = pr_box()

        with pytest.raises(ValueError, match="read-only"):
            box.probs[0, 0, 0, 0] = 1.0

    def test_joint_uses_setting_and_sign_labels(self) -> None:
        """Test the labelled accessors."""
        box = deterministic_box(1, -1, 1, -1)

        assert box.joint(1, 1, 1, 1) == 1.0
        assert box.joint(2, 2, -1, -1) == 1.0
        assert box.pp(1, 2) == 0.0
        assert box.pair(2, 1).tolist() == [[0.0, 0.0], [1.0, 0.0]]

    def test_joint_rejects_bad_labels(self) -> None:
        """Test that settings and outcomes outside their ranges raise."""
        box = pr_box()

        with pytest.raises(MalformedInputError, match="Setting must be 1 or 2"):
            box.joint(3, 1, 1, 1)
        with pytest.raises(MalformedInputError, match="Outcome must be"):
            box.joint(1, 1, 0, 1)


class TestValidate:
    """Test suite for box validation."""

    def test_valid_boxes(self) -> None:
        """Test that every generator produces a valid box."""
        boxes = [
            product_box(0.3, 0.7, 0.1, 0.9),
            cereceda_box(1),
            cereceda_box(2),
            pr_box(),
            random_local_box(3),
            random_nosignaling_box(3),
            *deterministic_boxes(),
        ]

        for box in boxes:
            report = validate(box)
            assert report.valid
            assert report.failing_channels() == []

    def test_nan_raises(self) -> None:
        """Test that non-finite entries are a malformed input, not a report."""
        probs = np.full((2, 2, 2, 2), 0.25)
        probs[1, 0, 1, 1] = np.nan

        with pytest.raises(MalformedInputError, match="non-finite"):
            validate(JointProbBox(probs))

    def test_signaling_box_names_channels(self) -> None:
        """Test a normalized box whose Alice marginal depends on Bob's setting."""
        probs = np.full((2, 2, 2, 2), 0.25)
        probs[0, 1] = [[0.5, 0.0], [0.0, 0.5]]
        probs[0, 0] = [[0.5, 0.25], [0.25, 0.0]]

        report = validate(JointProbBox(probs))

        assert not report.valid
        channels = report.failing_channels()
        assert "nosignaling[A1+]" in channels
        assert not any(c.startswith("normalization") for c in channels)

    def test_range_violation_channel(self) -> None:
        """Test that negative entries are reported by position."""
        probs = np.array(pr_box().probs)
        probs[0, 0, 0, 1] = -0.1
        probs[0, 0, 0, 0] = 0.6

        report = validate(JointProbBox(probs))

        assert "range[11+-]" in report.failing_channels()

    def test_perturbed_boxes_identify_pair(self) -> None:
        """Test that single-entry bumps of 1e-3 are rejected on the bumped pair."""
        rng = np.random.default_rng(2024)

        for k in range(1000):
            box = random_local_box(k)
            i, j, a, b = (int(v) for v in rng.integers(0, 2, size=4))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            probs = np.array(box.probs)
            probs[i, j, a, b] += sign * 1e-3

            report = validate(JointProbBox(probs))
            channels = report.failing_channels()

            assert not report.valid
            normalization = [c for c in channels if c.startswith("normalization")]
            assert normalization == [f"normalization[{i + 1}{j + 1}]"]
            if probs[i, j, a, b] < -1e-9:
                assert any(c.startswith("range") for c in channels)

    def test_require_valid_carries_report(self) -> None:
        """Test that the raised error holds the failing report."""
        probs = np.full((2, 2, 2, 2), 0.3)

        with pytest.raises(InvalidBoxError, match="normalization") as exc_info:
            require_valid(JointProbBox(probs))

        assert not exc_info.value.report.valid

    def test_report_dict_parses_back(self) -> None:
        """Test the report's JSON form."""
        probs = np.array(product_box(0.5, 0.5, 0.5, 0.5).probs)
        probs[1, 1, 0, 0] = 0.3
        report = validate(JointProbBox(probs))

        restored = ValidationReport.from_dict(report.to_dict())

        assert restored == report
        assert report.to_dict()["failing_channels"] == report.failing_channels()


class TestStatistics:
    """Test suite for marginals, correlations and CHSH sums."""

    def test_marginals_of_product_box(self) -> None:
        """Test that a product box returns its own marginals."""
        pa, pb = marginals(product_box(0.2, 0.4, 0.6, 0.8))

        assert pa == pytest.approx((0.2, 0.4))
        assert pb == pytest.approx((0.6, 0.8))

    def test_marginals_reject_signaling(self) -> None:
        """Test that disagreeing readings raise."""
        probs = np.full((2, 2, 2, 2), 0.25)
        probs[1, 1] = [[0.5, 0.0], [0.5, 0.0]]

        with pytest.raises(SignalingBoxError, match="depends on"):
            marginals(JointProbBox(probs))

    def test_cereceda_reaches_tsirelson_bound(self) -> None:
        """Test |CHSH| = 2 sqrt 2 for both Cereceda sets."""
        for which in (1, 2):
            box_stats = stats(cereceda_box(which))

            assert box_stats.chsh_max_abs == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)
            assert box_stats.pa == pytest.approx((0.5, 0.5))
            assert box_stats.pb == pytest.approx((0.5, 0.5))

    def test_pr_box_reaches_four(self) -> None:
        """Test that the PR box attains the no-signaling maximum."""
        box_stats = stats(pr_box())

        assert box_stats.e == ((1.0, 1.0), (1.0, -1.0))
        assert box_stats.chsh[3] == pytest.approx(4.0)
        assert box_stats.chsh_max_abs == pytest.approx(4.0)

    def test_local_boxes_stay_within_two(self) -> None:
        """Test the classical CHSH bound on random local boxes."""
        for seed in range(200):
            assert stats(random_local_box(seed)).chsh_max_abs <= 2.0 + 1e-12

    def test_correlations_of_deterministic_box(self) -> None:
        """Test that a deterministic box has correlations equal to sign products."""
        e = correlations(deterministic_box(1, -1, 1, -1))

        assert e.tolist() == [[1.0, -1.0], [-1.0, 1.0]]

    def test_stats_dict_parses_back(self) -> None:
        """Test the stats JSON form."""
        box_stats = stats(cereceda_box(2))

        assert BoxStats.from_dict(box_stats.to_dict()) == box_stats


class TestFreeParameters:
    """Test suite for the eight-parameter representation."""

    def test_round_trip(self) -> None:
        """Test that extracting and rebuilding returns the same box."""
        for seed in range(50):
            box = random_nosignaling_box(seed)

            rebuilt = from_free_params(extract_free_params(box))

            assert rebuilt.isclose(box, atol=1e-15)

    def test_infeasible_parameters(self) -> None:
        """Test that a joint larger than its marginal is refused."""
        params = FreeParams8(0.2, 0.5, 0.5, 0.5, 0.3, 0.1, 0.1, 0.1)

        with pytest.raises(InfeasibleParametersError, match="outside"):
            from_free_params(params)

    def test_non_finite_parameters(self) -> None:
        """Test that NaN parameters are malformed."""
        params = FreeParams8(math.nan, 0.5, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1)

        with pytest.raises(MalformedInputError, match="finite"):
            from_free_params(params)


class TestGenerators:
    """Test suite for the box generators."""

    def test_deterministic_boxes_order(self) -> None:
        """Test the sixteen point masses, + before -."""
        boxes = deterministic_boxes()

        assert len(boxes) == 16
        assert boxes[0].joint(1, 1, 1, 1) == 1.0
        assert boxes[-1].joint(2, 2, -1, -1) == 1.0

    def test_cereceda_entries(self) -> None:
        """Test the two explicit maximally violating sets."""
        high, low = (2 + math.sqrt(2)) / 8, (2 - math.sqrt(2)) / 8
        first, second = cereceda_box(1), cereceda_box(2)

        assert first.joint(1, 1, 1, 1) == pytest.approx(high)
        assert first.joint(2, 2, 1, 1) == pytest.approx(low)
        assert second.joint(1, 1, 1, 1) == pytest.approx(low)
        assert second.joint(2, 2, 1, -1) == pytest.approx(low)

    def test_cereceda_rejects_other_sets(self) -> None:
        """Test that only sets 1 and 2 exist."""
        with pytest.raises(InfeasibleParametersError, match="1 or 2"):
            cereceda_box(3)

    def test_product_box_rejects_out_of_range(self) -> None:
        """Test marginal range checks."""
        with pytest.raises(InfeasibleParametersError, match="pb1"):
            product_box(0.5, 0.5, 1.5, 0.5)

    def test_mixture_weights(self) -> None:
        """Test convex combination and its weight checks."""
        half = mixture(
            [deterministic_box(1, 1, 1, 1), deterministic_box(-1, -1, -1, -1)], [0.5, 0.5]
        )

        assert half.joint(1, 2, 1, 1) == 0.5
        with pytest.raises(MalformedInputError, match="sum to 1"):
            mixture([pr_box(), pr_box()], [0.7, 0.7])
        with pytest.raises(MalformedInputError, match="one weight per box"):
            mixture([pr_box()], [0.5, 0.5])

    def test_random_generators_are_seeded(self) -> None:
        """Test that equal seeds give equal boxes."""
        assert random_local_box(11).isclose(random_local_box(11), atol=0.0)
        assert random_nosignaling_box(11).isclose(random_nosignaling_box(11), atol=0.0)
        assert not random_local_box(11).isclose(random_local_box(12))

    def test_rejection_cap(self) -> None:
        """Test that the rejection sampler gives up after its attempt budget."""
        with pytest.raises(InfeasibleParametersError, match="within 0 attempts"):
            random_nosignaling_box(5, max_attempts=0)

    def test_negative_seed(self) -> None:
        """Test that seeds must be unsigned."""
        with pytest.raises(MalformedInputError, match="unsigned"):
            random_local_box(-1)

    def test_make_box_dispatch(self) -> None:
        """Test building boxes from specifications."""
        params = extract_free_params(product_box(0.5, 0.25, 0.75, 0.5))

        assert make_box(CerecedaSpec(1)).isclose(cereceda_box(1), atol=0.0)
        assert make_box(PrBoxSpec()).isclose(pr_box(), atol=0.0)
        assert make_box(ProductSpec(0.5, 0.25, 0.75, 0.5)).isclose(from_free_params(params))
        assert make_box(FreeParamsSpec(params)).isclose(product_box(0.5, 0.25, 0.75, 0.5))
        assert make_box(DeterministicSpec(1, -1, 1, -1)).isclose(deterministic_box(1, -1, 1, -1))
        assert make_box(RandomLocalSpec(4)).isclose(random_local_box(4), atol=0.0)
        assert make_box(RandomNoSignalingSpec(4)).isclose(random_nosignaling_box(4), atol=0.0)


class TestSymmetries:
    """Test suite for relabelling operations."""

    def test_relabel_twice_is_identity(self) -> None:
        """Test that swapping settings is an involution."""
        box = random_nosignaling_box(8)

        assert relabel_settings(relabel_settings(box)).isclose(box, atol=0.0)

    def test_flip_preserves_chsh_magnitude(self) -> None:
        """Test that relabelling outcomes keeps the largest CHSH value."""
        for party in ("A", "B"):
            flipped = flip_outcomes(cereceda_box(1), party)

            assert validate(flipped).valid
            assert stats(flipped).chsh_max_abs == pytest.approx(2.0 * math.sqrt(2.0))

    def test_flip_rejects_unknown_party(self) -> None:
        """Test party names."""
        with pytest.raises(MalformedInputError, match="Party must be"):
            flip_outcomes(pr_box(), "C")  # type: ignore[arg-type]
