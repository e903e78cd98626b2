"""
Intensity, compensator and log-likelihood
=========================================

Build a ten-tweet cascade by hand, look at the stance intensities it
produces, and check the closed-form compensator against numerical
integration.
"""

# %%
# A cascade is a list of events. Each event records its time (hours), author,
# stance, tweet type, parent tweet and reach: the audience weight of its
# author. Here the reach is written in directly; with a follower graph it is
# computed by ``resolve_influence``.
import numpy as np
from scipy import integrate

from cascade_hawkes import Cascade, Event, ModelParams, Stance, TweetType
from cascade_hawkes import compensator, log_likelihood, total_intensity
from cascade_hawkes.intensity import intensity_curves

S, N = Stance.SUPPORTING, Stance.NOT_SUPPORTING
ORI, RET, QUO, RPLY = TweetType.ORIGINAL, TweetType.RETWEET, TweetType.QUOTE, TweetType.REPLY

rows = [
    ("a", 0.5, S, ORI, None, 40.0), ("b", 1.1, S, RET, "a", 12.0), ("c", 1.7, N, ORI, None, 25.0),
    ("d", 2.0, N, RPLY, "c", 6.5), ("e", 3.4, S, QUO, "b", 18.0), ("f", 4.0, S, RET, "e", 3.0),
    ("g", 6.25, N, RET, "d", 9.0), ("h", 9.0, S, ORI, None, 30.0), ("i", 9.3, N, RPLY, "h", 11.5),
    ("j", 14.0, S, RET, "h", 7.0),
]
cascade = Cascade([Event(id=i, time=t, user=f"user_{i}", stance=k, tweet_type=r, parent_id=p, reach=n)
                   for i, t, k, r, p, n in rows], horizon=20.0)
print(cascade)

# %%
# Parameters: background rates per stance, the arrival-profile scale x, a
# strength per parent tweet type, the stance-transfer matrix gamma and a
# decay rate per child stance.
params = ModelParams(
    mu=[0.4, 0.2], x_scale=8.0, delta=[0.02, 0.015, 0.01, 0.03],
    gamma=[[0.8, 0.2], [0.35, 0.65]], omega=[1.3, 0.7], p_type=[0.7, 0.1, 0.2], horizon=20.0,
)

# %%
# The intensity splits into a background part and a part excited by earlier
# tweets. Right after "a" is posted the supporting excitation jumps.
for t in (0.4, 0.6, 2.0, 9.1):
    b = total_intensity(params, cascade, t)
    print(f"t={t:5.2f}  background={b.immigrant.round(4)}  excitation={b.excitation.round(4)}  total={b.total:.4f}")

# %%
# Stance curves on a grid, the same numbers the ``intensity`` subcommand
# writes to CSV.
grid = np.linspace(0, 20, 9)
imm, exc = intensity_curves(params, cascade, grid)
lam = imm + exc
for t, (ls, ln) in zip(grid, lam):
    print(f"t={t:5.1f}  supporting={ls:.4f}  not supporting={ln:.4f}")

# %%
# The compensator is available in closed form. Integrate the intensity
# numerically between event times to confirm it.
f = lambda s: total_intensity(params, cascade, s).total  # noqa: E731
cuts = [0.0, *cascade.times, 20.0]
numeric = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(cuts[:-1], cuts[1:]))
print(f"compensator closed form {compensator(params, cascade, 20.0):.10f}  quadrature {numeric:.10f}")

# %%
# The log-likelihood: log intensities at the events minus the compensator.
# ``marked=True`` scores each event's stance as well as its time.
print(f"log-likelihood (times)        {log_likelihood(params, cascade):.6f}")
print(f"log-likelihood (times+stance) {log_likelihood(params, cascade, marked=True):.6f}")
