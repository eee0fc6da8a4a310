import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import cosine_mp
from vpkit.core import (
    VPKitError,
    as_vector,
    cosine_distance,
    cosine_similarity,
    substream,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, width=32)


def vec_pairs(min_dim=1, max_dim=16):
    return st.integers(min_dim, max_dim).flatmap(
        lambda d: st.tuples(st.lists(finite, min_size=d, max_size=d), st.lists(finite, min_size=d, max_size=d))
    ).filter(lambda p: any(p[0]) and any(p[1]))


def test_self_similarity():
    v = [0.3, -1.2, 4.0]
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-15)
    assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-15)


def test_orthogonal():
    assert cosine_similarity((1, 0), (0, 1)) == 0.0
    assert cosine_distance((1, 0), (0, 1)) == 1.0


def test_antipodal():
    v = np.array([1.0, 2.0, -3.0])
    assert cosine_distance(v, -v) == pytest.approx(2.0, abs=1e-15)


def test_against_high_precision_oracle():
    expected = cosine_mp((1, 2, 3), (4, 5, 6))
    assert abs(cosine_similarity((1, 2, 3), (4, 5, 6)) - expected) <= 1e-12


@pytest.mark.parametrize("a,b", [((1, 2), (1, 2, 3)), ((0, 0), (1, 1)), ((1, 1), (0, 0))])
def test_rejects_bad_pairs(a, b):
    with pytest.raises(VPKitError):
        cosine_similarity(a, b)


def test_as_vector_rejects_zero_and_nonfinite():
    with pytest.raises(VPKitError, match="zero-norm"):
        as_vector([0.0, 0.0])
    with pytest.raises(VPKitError, match="non-finite"):
        as_vector([1.0, float("nan")])
    with pytest.raises(VPKitError):
        as_vector([])


@given(vec_pairs())
def test_symmetry(pair):
    a, b = pair
    assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) <= 1e-12


@given(vec_pairs(), st.floats(min_value=1e-3, max_value=1e3))
def test_positive_scale_invariance(pair, c):
    a, b = pair
    scaled = [c * x for x in a]
    assert abs(cosine_similarity(scaled, b) - cosine_similarity(a, b)) <= 1e-9


@given(vec_pairs())
def test_distance_range_and_oracle(pair):
    a, b = pair
    d = cosine_distance(a, b)
    assert 0.0 <= d <= 2.0
    assert abs(cosine_similarity(a, b) - cosine_mp(a, b)) <= 1e-12


def test_substreams_are_keyed():
    a = substream(7, "speaker", "s1").random(4)
    assert np.array_equal(a, substream(7, "speaker", "s1").random(4))
    assert not np.array_equal(a, substream(7, "speaker", "s2").random(4))
    assert not np.array_equal(a, substream(8, "speaker", "s1").random(4))
