"""
Simulating a cascade on a follower network
==========================================

Generate a heavy-tailed follower graph, check that the parameters give a
cascade that dies out, then simulate one and tabulate it by stance and type.
"""

# %%
# The bundled ``recovery_truth`` parameters describe a story seeded mostly by
# supporting tweets over a 6000-hour window.
import numpy as np

from cascade_hawkes import SimConfig, branching_ratio, generate_network, load_preset, simulate_cascade
from cascade_hawkes import Stance, TweetType
from cascade_hawkes.simulate import offspring_means

truth = load_preset("recovery_truth")
print(truth)

# %%
# A graph of 2000 users with 300 followers on average. Follower counts are
# heavy tailed, so a few accounts reach far more users than the rest.
graph = generate_network(2000, 300, seed=1)
fc = graph.follower_counts()
print(graph, f"median followers {np.median(fc):.0f}, max {fc.max()}")

# %%
# Expected direct children of one tweet of each type, and the branching
# ratio. A ratio of one or more means the cascade would not die out, and the
# simulator refuses to run unless forced.
means = offspring_means(truth, graph)
print("expected children per parent type:", {r.label: round(float(m), 4) for r, m in zip(TweetType, means)})
print(f"branching ratio {branching_ratio(truth, graph):.4f}")

# %%
# Simulate. The same seed always gives the same log.
report = simulate_cascade(SimConfig(truth, graph, seed=0))
cascade = report.cascade
print(f"{len(cascade)} events")
for stance, row in report.counts_table().items():
    print(f"{stance:>15}: {row}")

# %%
# Every retweet carries its parent's stance; quotes and replies may switch,
# following the stance-transfer matrix.
stance_of = {e.id: e.stance for e in cascade}
switches = {r: [0, 0] for r in (TweetType.RETWEET, TweetType.QUOTE, TweetType.REPLY)}
for e in cascade:
    if e.parent_id is not None:
        switches[e.tweet_type][0] += 1
        switches[e.tweet_type][1] += e.stance != stance_of[e.parent_id]
for r, (n, s) in switches.items():
    print(f"{r.label:>8}: {s} of {n} children differ from their parent's stance")

# %%
# Originals arrive early: their times follow a truncated exponential with
# scale x, so about 63% land in the first x hours.
ori = cascade.times[cascade.types == TweetType.ORIGINAL]
print(f"originals before t=x: {np.mean(ori < truth.x_scale):.2%}")
supporting = np.sum((cascade.types == TweetType.ORIGINAL) & (cascade.stances == Stance.SUPPORTING))
print(f"supporting originals {supporting} (expected mu_s * T = {truth.mu[0] * truth.horizon:.0f})")
