import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from twophase import DesignSpec, Substream, ValidationError, draw_two_phase, factors
from twophase.design import draw_indices, stream_keys, uniforms


def test_factors_paper_design():
    f = factors(DesignSpec(25, 10, 7))
    assert f.f1 == pytest.approx(float(Fraction(18, 175)), abs=1e-15)
    assert f.f2 == pytest.approx(0.06, abs=1e-15)
    assert f.f3 == pytest.approx(float(Fraction(3, 70)), abs=1e-15)


def test_factors_census():
    f = factors(DesignSpec(10, 10, 10))
    assert (f.f1, f.f2, f.f3) == (0.0, 0.0, 0.0)


def test_factors_arithmetic():
    f = factors(DesignSpec(100, 50, 25))
    assert f.f1 == pytest.approx(0.03, abs=1e-15)
    assert f.f2 == pytest.approx(0.01, abs=1e-15)
    assert f.f3 == pytest.approx(0.02, abs=1e-15)


@pytest.mark.parametrize("N,n1,n", [(25, 10, 7), (1000, 333, 17), (7, 7, 2), (12, 6, 3)])
def test_factor_identity(N, n1, n):
    f = factors(DesignSpec(N, n1, n))
    assert abs(f.f1 - (f.f2 + f.f3)) <= 1e-15
    assert f.f1 >= f.f3 >= 0 and f.f2 >= 0


@pytest.mark.parametrize("N,n1,n", [(10, 7, 10), (5, 6, 3), (10, 5, 1), (10, 2.5, 2)])
def test_invalid_designs(N, n1, n):
    with pytest.raises(ValidationError):
        DesignSpec(N, n1, n)


def test_census_draw(six_units):
    s = draw_two_phase(six_units, DesignSpec(6, 6, 6), Substream(1))
    assert s.first_indices == s.second_indices == tuple(range(6))
    assert s.mean_x_second == s.mean_x_first == float(np.mean(six_units.x))
    assert s.mean_z_first == float(np.mean(six_units.z))


def test_draw_is_deterministic_and_nested(six_units):
    spec = DesignSpec(6, 4, 2)
    a = draw_two_phase(six_units, spec, Substream(42, 5))
    b = draw_two_phase(six_units, spec, Substream(42, 5))
    assert a == b
    assert set(a.second_indices) <= set(a.first_indices)
    assert len(set(a.first_indices)) == 4 and len(a.second_indices) == 2
    assert a.mean_y_second == pytest.approx(np.mean(six_units.y[list(a.second_indices)]), rel=1e-12)
    assert a.mean_z_first == pytest.approx(np.mean(six_units.z[list(a.first_indices)]), rel=1e-12)


def test_single_draw_matches_batch_replication(six_units):
    spec = DesignSpec(6, 4, 2)
    first, second = draw_indices(spec, 9, 0, 50)
    for r in (0, 17, 49):
        s = draw_two_phase(six_units, spec, Substream(9, r))
        assert s.first_indices == tuple(first[r]) and s.second_indices == tuple(second[r])


def test_batch_split_does_not_change_draws():
    spec = DesignSpec(30, 12, 5)
    whole = draw_indices(spec, 123, 0, 1000)
    parts = [draw_indices(spec, 123, s, 250) for s in range(0, 1000, 250)]
    assert np.array_equal(whole[0], np.vstack([p[0] for p in parts]))
    assert np.array_equal(whole[1], np.vstack([p[1] for p in parts]))


def test_seed_bounds():
    stream_keys(2**64 - 1, np.arange(3))
    with pytest.raises(ValidationError):
        Substream(2**64)
    with pytest.raises(ValidationError):
        Substream(-1)


def test_uniforms_in_unit_interval():
    u = uniforms(stream_keys(0, np.arange(2000)), 50)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_first_phase_subsets_uniform():
    """Every 4-subset of 6 units appears with probability 1/15."""
    spec = DesignSpec(6, 4, 2)
    reps = 90_000
    first, second = draw_indices(spec, 2024, 0, reps)
    counts = Counter(map(tuple, first))
    p = 1 / math.comb(6, 4)
    se = math.sqrt(reps * p * (1 - p))
    assert set(counts) == set(itertools.combinations(range(6), 4))
    for subset, c in counts.items():
        assert abs(c - reps * p) < 3 * se, subset
    # second phase: uniform over the 6 pairs of each first-phase subset
    pairs = Counter((tuple(f), tuple(s)) for f, s in zip(first, second))
    q = p / math.comb(4, 2)
    se2 = math.sqrt(reps * q * (1 - q))
    assert len(pairs) == 90
    assert max(abs(c - reps * q) for c in pairs.values()) < 4 * se2


def test_inclusion_frequencies():
    spec = DesignSpec(20, 8, 3)
    reps = 100_000
    first, second = draw_indices(spec, 77, 0, reps)
    assert all(np.isin(s, f).all() for f, s in zip(first[:1000], second[:1000]))
    for sample, size in ((first, 8), (second, 3)):
        freq = np.bincount(sample.ravel(), minlength=20) / reps
        p = size / 20
        se = math.sqrt(p * (1 - p) / reps)
        assert np.all(np.abs(freq - p) < 4 * se)
