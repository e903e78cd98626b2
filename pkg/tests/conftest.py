import numpy as np
import pytest

from cascade_hawkes import Cascade, Event, FollowerGraph, ModelParams, Stance, TweetType
from cascade_hawkes.io import load_preset
from cascade_hawkes.network import generate_network

S, N = Stance.SUPPORTING, Stance.NOT_SUPPORTING
ORI, RET, QUO, RPLY = TweetType.ORIGINAL, TweetType.RETWEET, TweetType.QUOTE, TweetType.REPLY


def make_params(**overrides) -> ModelParams:
    base = dict(
        mu=[0.15, 0.015],
        x_scale=1000.0,
        delta=[1.5e-3, 2e-5, 2.5e-6, 5e-6],
        gamma=[[0.9, 0.1], [0.5, 0.5]],
        omega=[3.0, 1.5],
        p_type=[0.7, 0.1, 0.2],
        horizon=6000.0,
    )
    base.update(overrides)
    return ModelParams(**base)


def ev(id, t, stance=S, kind=ORI, parent=None, reach=None, user=None):
    return Event(id=str(id), time=float(t), user=str(user if user is not None else id),
                 tweet_type=kind, stance=stance, parent_id=parent, reach=reach)


@pytest.fixture
def truth() -> ModelParams:
    return load_preset("recovery_truth")


@pytest.fixture
def toy_cascade() -> Cascade:
    """Ten hand-placed events on a 20-hour window with reach already cached."""
    events = [
        ev("a", 0.5, S, ORI, reach=40.0),
        ev("b", 1.1, S, RET, "a", reach=12.0),
        ev("c", 1.7, N, ORI, reach=25.0),
        ev("d", 2.0, N, RPLY, "c", reach=6.5),
        ev("e", 3.4, S, QUO, "b", reach=18.0),
        ev("f", 4.0, S, RET, "e", reach=3.0),
        ev("g", 6.25, N, RET, "d", reach=9.0),
        ev("h", 9.0, S, ORI, reach=30.0),
        ev("i", 9.3, N, RPLY, "h", reach=11.5),
        ev("j", 14.0, S, RET, "h", reach=7.0),
    ]
    return Cascade(events, horizon=20.0)


@pytest.fixture
def toy_params() -> ModelParams:
    return make_params(
        mu=[0.4, 0.2], x_scale=8.0, delta=[0.02, 0.015, 0.01, 0.03],
        gamma=[[0.8, 0.2], [0.35, 0.65]], omega=[1.3, 0.7], horizon=20.0,
    )


@pytest.fixture(scope="session")
def small_graph() -> FollowerGraph:
    return generate_network(300, 40, seed=7)


REFERENCE_USERS, REFERENCE_FOLLOWERS, REFERENCE_GRAPH_SEED = 5000, 1660, 1


@pytest.fixture(scope="session")
def reference_graph() -> FollowerGraph:
    """5000 users; mean follower count chosen so the expected cascade size is about 3470."""
    return generate_network(REFERENCE_USERS, REFERENCE_FOLLOWERS, seed=REFERENCE_GRAPH_SEED)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance lines collected by ``test_acceptance``."""
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
