import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from filtann import Dataset, DistanceCounter, DistanceKind, DomainError, UsageError
from filtann import cosine_distance, distance, l2_squared


def test_l2_examples():
    assert l2_squared([0, 0], [3, 4]) == 25.0
    assert l2_squared([1, 2, 3], [4, 6, 3]) == 25.0
    v = [0.5, -1.25, 3.0]
    assert l2_squared(v, v) == 0.0


def test_cosine_examples():
    assert cosine_distance([1, 0], [0, 1]) == pytest.approx(1.0)
    assert cosine_distance([1, 0], [-1, 0]) == 2.0
    assert cosine_distance([0.3, 4.0], [0.3, 4.0]) == pytest.approx(0.0, abs=1e-15)


def test_cosine_rejects_zero_vector():
    with pytest.raises(DomainError):
        cosine_distance([0, 0], [1, 0])


def test_dimension_mismatch():
    with pytest.raises(UsageError):
        l2_squared([1, 2], [1, 2, 3])


def test_distance_dispatch_and_counter():
    c = DistanceCounter()
    assert distance(DistanceKind.L2_SQUARED, [0, 0], [3, 4], c) == 25.0
    assert distance("cosine", [2, 1], [2, 1], c) == pytest.approx(0.0, abs=1e-15)
    distance(0, [1], [2], c)
    assert c.count == 3


def test_kind_parse():
    assert DistanceKind.parse("l2") == DistanceKind.L2_SQUARED
    assert DistanceKind.parse("cosine") == DistanceKind.COSINE
    assert DistanceKind.parse(1) == DistanceKind.COSINE
    with pytest.raises(UsageError):
        DistanceKind.parse("manhattan")


def test_dataset_validation():
    ds = Dataset(np.arange(12, dtype=np.float64).reshape(3, 4))
    assert ds.data.dtype == np.float32 and ds.data.flags.c_contiguous
    assert ds.n == 3 and ds.dim == 4
    assert ds.ids.tolist() == [0, 1, 2]
    with pytest.raises(UsageError):
        Dataset(np.zeros(5, dtype=np.float32))
    with pytest.raises(UsageError):
        Dataset(np.zeros((3, 2), dtype=np.float32), labels=np.zeros(2, dtype=np.uint32))


def test_cosine_dataset_with_zero_row_is_rejected():
    ds = Dataset(np.array([[0, 0], [1, 1]], dtype=np.float32))
    with pytest.raises(DomainError):
        ds.check_kind(DistanceKind.COSINE)
    ds.check_kind(DistanceKind.L2_SQUARED)


def test_norms_match_numpy(rng):
    x = rng.standard_normal((50, 7)).astype(np.float32)
    np.testing.assert_allclose(Dataset(x).norms(), np.linalg.norm(x.astype(np.float64), axis=1), rtol=1e-12)


vec = arrays(np.float64, 6, elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(vec, vec)
def test_l2_properties(a, b):
    d = l2_squared(a, b)
    assert d >= 0
    assert d == pytest.approx(l2_squared(b, a), rel=1e-12, abs=1e-9)
    assert d == pytest.approx(float(((a - b) ** 2).sum()), rel=1e-9, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(vec, vec)
def test_cosine_range(a, b):
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        with pytest.raises(DomainError):
            cosine_distance(a, b)
        return
    d = cosine_distance(a, b)
    assert 0.0 <= d <= 2.0
