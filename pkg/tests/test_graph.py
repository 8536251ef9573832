import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filtann import AdjacencyStore, Layer, UsageError
from filtann.graph import neighbors, set_neighbors


def test_empty_store_has_no_neighbors():
    s = AdjacencyStore(5, 4, 5)
    assert all(s.neighbors(v) == [] for v in range(5))


def test_set_neighbors_round_trip_and_cap():
    s = AdjacencyStore(6, 3, 6)
    set_neighbors(s, 1, [4, 2])
    assert s.neighbors(1) == [4, 2]
    set_neighbors(s, 1, [])
    assert s.degree(1) == 0
    set_neighbors(s, 2, [0, 1, 3])
    assert s.degree(2) == 3
    with pytest.raises(UsageError):
        set_neighbors(s, 3, [0, 1, 2, 4])
    with pytest.raises(UsageError):
        s.neighbors(6)


def test_remapped_store_accepts_only_members():
    members = np.array([2, 5, 7])
    remap = np.full(10, -1, dtype=np.int64)
    remap[members] = np.arange(3)
    s = AdjacencyStore(3, 2, 10, remap)
    s.set_neighbors(5, [2, 7])
    assert s.neighbors(5) == [2, 7]
    with pytest.raises(UsageError):
        s.neighbors(3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.lists(st.integers(0, 9), max_size=6)), max_size=30))
def test_degree_never_exceeds_cap_and_csr_round_trips(ops):
    s = AdjacencyStore(10, 4, 10)
    for v, nbrs in ops:
        try:
            s.set_neighbors(v, nbrs)
        except UsageError:
            assert len(nbrs) > 4 or v in nbrs
        assert (s.degrees <= 4).all()
    off, edges = s.to_csr()
    back = AdjacencyStore.from_csr(off, edges, 4, 10)
    assert back.lists() == s.lists()


def test_graph_neighbors_by_layer(small_graph):
    g = small_graph
    m = int(g.upper_members[0])
    assert neighbors(g, Layer.UPPER, m) == g.upper.neighbors(m)
    assert neighbors(g, Layer.LOWER, 3) == g.lower.neighbors(3)
    non_member = next(v for v in range(g.n) if not g.is_upper(v))
    with pytest.raises(UsageError):
        neighbors(g, Layer.UPPER, non_member)
