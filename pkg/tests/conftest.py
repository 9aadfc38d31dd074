import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from p2hnns import ball_tree, bc_tree
from p2hnns.data import clustered_points, gaussian_points, generate_queries

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_gauss():
    return gaussian_points(200, 7, seed=3)


@pytest.fixture(scope="session")
def clustered_2k():
    return clustered_points(2000, 6, seed=5, clusters=20)


@pytest.fixture(scope="session")
def clustered_trees(clustered_2k):
    return ball_tree.build(clustered_2k, 40, seed=1), bc_tree.build(clustered_2k, 40, seed=1)


@pytest.fixture(scope="session")
def clustered_queries(clustered_2k):
    return generate_queries(clustered_2k, 30, seed=9)


def dists(topk):
    return np.array([d for _, d in topk])


def check_structure(tree, rel=1e-5):
    """Verify size/disjointness/radius/center invariants on every node; return #nodes checked."""
    n0 = tree.leaf_size
    pts = tree.data.values.astype(np.float64)
    assert sorted(tree.order.tolist()) == list(range(tree.data.n))
    np.testing.assert_array_equal(pts[tree.order], tree.points)
    for node in range(tree.num_nodes):
        ids = tree.node_ids(node)
        assert len(ids) == tree.sizes[node]
        member = pts[ids]
        c = tree.centers[node]
        scale = max(1.0, float(np.abs(member).max()))
        assert np.abs(c - member.mean(axis=0)).max() <= rel * scale
        far = np.linalg.norm(member - c, axis=1).max()
        assert far <= tree.radii[node] * (1 + rel) + 1e-12
        lc, rc = tree.left[node], tree.right[node]
        if lc < 0:
            assert rc < 0 and tree.sizes[node] <= n0
        else:
            assert tree.sizes[node] > n0
            assert tree.sizes[lc] + tree.sizes[rc] == tree.sizes[node]
            left_ids, right_ids = set(tree.node_ids(lc).tolist()), set(tree.node_ids(rc).tolist())
            assert not left_ids & right_ids
            assert left_ids | right_ids == set(ids.tolist())
    return tree.num_nodes
