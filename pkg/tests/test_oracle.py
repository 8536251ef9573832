import math

import numpy as np
import pytest

from filtann import Dataset, Semimask, UsageError, brute_force_knn, recall
from filtann.oracle import GT_MAGIC, read_ground_truth, truth_ids, write_ground_truth


def scan(points, selected, q, k, kind):
    """Plain double loop; (distance, id) ordering."""
    found = []
    for v, row in enumerate(points):
        if not selected[v]:
            continue
        if kind == "l2":
            d = sum((float(a) - float(b)) ** 2 for a, b in zip(row, q))
        else:
            dot = sum(float(a) * float(b) for a, b in zip(row, q))
            na = math.sqrt(sum(float(a) ** 2 for a in row))
            nb = math.sqrt(sum(float(b) ** 2 for b in q))
            d = min(2.0, max(0.0, 1.0 - dot / (na * nb)))
        found.append((d, v))
    found.sort()
    return found[:k]


@pytest.mark.parametrize("kind", ["l2", "cosine"])
def test_agrees_with_double_loop(kind):
    rng = np.random.default_rng(7)
    for _ in range(100):
        n, dim, k = int(rng.integers(1, 40)), int(rng.integers(1, 5)), int(rng.integers(1, 12))
        # small integer grid: plenty of exact ties
        pts = rng.integers(-3, 4, size=(n, dim)).astype(np.float32)
        if kind == "cosine":
            pts[(pts == 0).all(1)] = 1
        q = rng.integers(-3, 4, size=dim).astype(np.float32)
        if kind == "cosine" and not q.any():
            q[0] = 1
        sel = rng.random(n) < 0.6
        want = scan(pts, sel, q, k, kind)
        got = brute_force_knn(Dataset(pts), Semimask(sel), q, k, kind)
        assert got.ids.tolist() == [v for _, v in want]
        np.testing.assert_allclose(got.distances, [d for d, _ in want], rtol=1e-12, atol=1e-12)


def test_single_selected_node_wins():
    pts = np.array([[0, 0], [100, 100], [1, 1]], dtype=np.float32)
    t = brute_force_knn(Dataset(pts), Semimask.from_ids(3, [1]), [0, 0], 2)
    assert t.ids.tolist() == [1] and t.distances.tolist() == [20000.0]


def test_query_equal_to_selected_vector_ranks_first(small_ds):
    t = brute_force_knn(small_ds, None, small_ds.data[17], 5)
    assert t.ids[0] == 17 and t.distances[0] == 0.0


def test_full_mask_equals_no_mask(small_ds):
    q = small_ds.data[3] + 0.01
    a = brute_force_knn(small_ds, Semimask.full(small_ds.n), q, 10)
    b = brute_force_knn(small_ds, None, q, 10)
    assert a.ids.tolist() == b.ids.tolist()


def test_empty_selection_and_bad_k(small_ds):
    assert len(brute_force_knn(small_ds, Semimask(np.zeros(small_ds.n, bool)), small_ds.data[0], 5)) == 0
    with pytest.raises(UsageError):
        brute_force_knn(small_ds, None, small_ds.data[0], 0)


def test_recall():
    assert recall([1, 2, 3], np.array([3, 2, 1])) == 1.0
    assert recall([4, 5], np.array([1, 2])) == 0.0
    assert recall(list(range(95)) + [1000 + i for i in range(5)], np.arange(100)) == 0.95
    with pytest.raises(UsageError):
        recall([1], np.array([], dtype=np.int64))


def test_ground_truth_file_round_trip(tmp_path, small_ds):
    qs = small_ds.data[:3]
    truths = [brute_force_knn(small_ds, None, qs[0], 4),
              brute_force_knn(small_ds, Semimask.from_ids(small_ds.n, [5, 6]), qs[1], 4),
              brute_force_knn(small_ds, None, qs[2], 4)]
    p = tmp_path / "gt.bin"
    write_ground_truth(truths, 4, p)
    assert p.read_bytes()[:8] == GT_MAGIC
    rows = read_ground_truth(p)
    assert rows.shape == (3, 4)
    for row, t in zip(rows, truths):
        assert truth_ids(row).tolist() == t.ids.tolist()
