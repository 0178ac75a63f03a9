"""
Unit tests for late fusion and mass composition.

Tests cover:
- average_probs: element-wise mean, identity on one input, input order, mixed class counts rejected
- decode_label: argmax with ties to the lowest index
- filling_mass: configured densities, empty filling → 0 g, negative capacity rejected
- apply_consistency: box never holds water, empty forces level 0 %
- DensityTable: YAML defaults, partial overrides, non-positive densities rejected
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.fusion.mass import DensityTable, apply_consistency, average_probs, decode_label, filling_mass
from src.models.labels import ClassProbs, FillingLevel, FillingType
from src.utils.exceptions import DomainError


def probs(*values: float) -> ClassProbs:
    return ClassProbs(p=np.array(values))


# ========================================
# Test: Probability averaging
# ========================================

class TestAverageProbs:

    def test_two_one_hots(self):
        assert np.allclose(average_probs([probs(1, 0, 0), probs(0, 1, 0)]).p, [0.5, 0.5, 0.0])

    def test_single_input_is_identity(self):
        p = probs(0.2, 0.3, 0.5)
        assert np.allclose(average_probs([p]).p, p.p)

    def test_copies_are_idempotent(self):
        p = probs(0.1, 0.6, 0.3)
        assert np.allclose(average_probs([p, p, p]).p, p.p)

    def test_mixed_class_counts(self):
        with pytest.raises(DomainError):
            average_probs([probs(0.5, 0.5), probs(1, 0, 0)])

    def test_empty(self):
        with pytest.raises(DomainError):
            average_probs([])

    @pytest.mark.parametrize("seed", range(4))
    def test_input_order_does_not_matter(self, seed):
        rng = np.random.default_rng(seed)
        inputs = [probs(*rng.dirichlet(np.ones(4))) for _ in range(5)]
        shuffled = [inputs[i] for i in rng.permutation(len(inputs))]
        assert np.allclose(average_probs(shuffled).p, average_probs(inputs).p)


class TestDecodeLabel:

    @pytest.mark.parametrize(
        "values, expected",
        [((0.2, 0.5, 0.3), 1), ((0.5, 0.5, 0.0), 0), ((0.0, 0.0, 0.0, 1.0), 3)],
    )
    def test_argmax(self, values, expected):
        assert decode_label(probs(*values)) == expected


# ========================================
# Test: Mass
# ========================================

class TestFillingMass:

    @pytest.fixture
    def densities(self):
        return DensityTable(pasta=0.41, rice=0.85, water=1.0)

    def test_half_full_water(self, densities):
        assert filling_mass(500.0, FillingLevel.HALF, FillingType.WATER, densities) == pytest.approx(250.0)

    def test_ninety_percent_rice(self, densities):
        assert filling_mass(400.0, FillingLevel.NINETY, FillingType.RICE, densities) == pytest.approx(306.0)

    def test_empty_is_zero(self, densities):
        assert filling_mass(1234.0, FillingLevel.NINETY, FillingType.EMPTY, densities) == 0.0

    def test_accepts_plain_indices(self, densities):
        assert filling_mass(100.0, 1, 1, densities) == pytest.approx(100 * 0.5 * 0.41)

    def test_negative_capacity(self, densities):
        with pytest.raises(DomainError):
            filling_mass(-1.0, FillingLevel.HALF, FillingType.WATER, densities)


class TestDensityTable:

    def test_defaults_from_yaml(self):
        table = DensityTable()
        assert table.density(FillingType.RICE) == pytest.approx(0.85)
        assert table.density(FillingType.EMPTY) == 0.0

    def test_partial_override(self):
        table = DensityTable(water=0.997)
        assert table.water == 0.997
        assert table.pasta == pytest.approx(0.41)

    def test_non_positive_density(self):
        with pytest.raises(ValidationError):
            DensityTable(rice=0.0)


# ========================================
# Test: Consistency rules
# ========================================

class TestApplyConsistency:

    def test_box_with_water_takes_runner_up(self):
        filling_type, level = apply_consistency(probs(0.1, 0.3, 0.0, 0.6), probs(0.1, 0.8, 0.1), "box")
        assert filling_type is FillingType.PASTA
        assert level is FillingLevel.HALF

    def test_cup_keeps_water(self):
        filling_type, _ = apply_consistency(probs(0.1, 0.3, 0.0, 0.6), probs(0.1, 0.8, 0.1), "cup")
        assert filling_type is FillingType.WATER

    def test_empty_forces_zero_level(self):
        filling_type, level = apply_consistency(probs(0.7, 0.1, 0.1, 0.1), probs(0.0, 0.1, 0.9), "glass")
        assert filling_type is FillingType.EMPTY
        assert level is FillingLevel.EMPTY
