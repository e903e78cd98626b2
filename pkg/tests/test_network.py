import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_hawkes import FollowerGraph, event_reach, generate_network, reach_weight
from cascade_hawkes.network import UnknownUserError, audience

from conftest import ORI, QUO, RPLY, S, ev


@pytest.fixture
def star() -> FollowerGraph:
    # followers of "hub": f0..f99; followers of "root": r0..r39 plus f0..f4
    edges = [(f"f{i}", "hub") for i in range(100)]
    edges += [(f"r{i}", "root") for i in range(40)] + [(f"f{i}", "root") for i in range(5)]
    edges += [("hub", "root")]
    return FollowerGraph.from_edges(edges, users=["loner"])


def test_reach_weight_cases(star):
    post = ev("e", 1.0, S, ORI, user="hub")
    assert reach_weight(star, "f3", post) == 0.95
    assert reach_weight(star, "r3", post) == 0.0
    reply = ev("e", 1.0, S, RPLY, user="hub")
    assert reach_weight(star, "r3", reply, parent_author="root") == 0.05
    # following the author takes precedence over the reply-viewer tier
    assert reach_weight(star, "f3", reply, parent_author="root") == 0.95
    # the author is never in their own audience
    assert reach_weight(star, "hub", reply, parent_author="root") == 0.0
    # quotes do not carry the reply-viewer tier
    assert reach_weight(star, "r3", ev("e", 1.0, S, QUO, user="hub"), parent_author="root") == 0.0


def test_reach_weight_unknown_user(star):
    with pytest.raises(UnknownUserError):
        reach_weight(star, "nobody", ev("e", 1.0, user="hub"))
    with pytest.raises(UnknownUserError):
        reach_weight(star, "f1", ev("e", 1.0, user="nobody"))


def test_event_reach_examples(star):
    assert event_reach(star, ev("e", 1.0, user="hub")) == pytest.approx(95.0)
    assert event_reach(star, ev("e", 1.0, user="loner")) == 0.0


def test_event_reach_reply_hand_count():
    # author with 10 followers replying to an author with 40 disjoint followers
    edges = [(f"a{i}", "author") for i in range(10)] + [(f"p{i}", "parent") for i in range(40)]
    g = FollowerGraph.from_edges(edges)
    reply = ev("e", 1.0, S, RPLY, user="author")
    assert event_reach(g, reply, "parent") == pytest.approx(0.95 * 10 + 0.05 * 40)


def test_event_reach_equals_sum_of_weights(star):
    reply = ev("e", 1.0, S, RPLY, user="hub")
    total = sum(reach_weight(star, u, reply, "root") for u in star.labels)
    assert event_reach(star, reply, "root") == pytest.approx(total)
    users, w = audience(star, "hub", RPLY, "root")
    assert len(set(users.tolist())) == users.size


def test_graph_dedupes_and_drops_self_loops():
    g = FollowerGraph.from_edges([("a", "b"), ("a", "b"), ("c", "c"), ("c", "b")])
    assert g.n_edges == 2
    assert g.dropped_self_loops == 1
    assert g.edges() == {("a", "b"), ("c", "b")}
    assert g.follows("a", "b") and not g.follows("b", "a")


def test_graph_user_count_not_below_labels():
    with pytest.raises(ValueError):
        FollowerGraph.from_edges([("a", "b")], user_count=1)
    assert FollowerGraph.from_edges([("a", "b")], user_count=10).user_count == 10


def test_generate_single_user_is_empty():
    g = generate_network(1, 5, seed=0)
    assert g.n_edges == 0 and g.user_count == 1


def test_generate_hits_mean_follower_target():
    g = generate_network(5000, 20, seed=11)
    mean = g.n_edges / g.user_count
    assert 18 <= mean <= 22


def test_generate_heavy_tailed_followers():
    counts = generate_network(5000, 20, seed=11).follower_counts()
    assert counts.max() > 10 * np.median(counts)


def test_generate_is_seed_deterministic():
    a, b = generate_network(400, 15, seed=3), generate_network(400, 15, seed=3)
    assert np.array_equal(a.edge_arrays()[0], b.edge_arrays()[0])
    assert np.array_equal(a.edge_arrays()[1], b.edge_arrays()[1])
    assert a.edges() != generate_network(400, 15, seed=4).edges()


@pytest.mark.parametrize("users, mean", [(10, 10), (10, 12), (0, 1), (10, -1)])
def test_generate_rejects_bad_arguments(users, mean):
    with pytest.raises(ValueError):
        generate_network(users, mean, seed=0)


@given(users=st.integers(2, 60), frac=st.floats(0, 0.9), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_generated_graphs_have_no_self_loops(users, frac, seed):
    g = generate_network(users, frac * (users - 1), seed=seed)
    follower, followee = g.edge_arrays()
    assert not np.any(follower == followee)
    assert len(g.edges()) == g.n_edges
