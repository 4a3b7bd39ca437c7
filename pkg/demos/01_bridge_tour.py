"""Endpoint-conditioned paths and transition probabilities on a small chain.

Run with ``python demos/01_bridge_tour.py``.
"""
import numpy as np

from msmbayes import PanelSeries, build_rate_matrix, sample_full_proposal, transition_probability
from msmbayes.bridge import sample_conditioned_segment
from msmbayes.ctmc import uniformize

# illness-death chain with recovery; state 3 absorbing
P = np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.0, 0.0, 0.0]])
G = build_rate_matrix(P, [0.30, 0.14, 0.0])
print("exp(5G) =\n", np.round(transition_probability(G, 5.0), 4))

rng = np.random.default_rng(1)
chain = uniformize(G)
seg = sample_conditioned_segment(chain, G, 0.0, 5.0, 0, 1, rng)


def show(times, states):
    return ", ".join(f"{t:.3f}->{s + 1}" for t, s in zip(times, states))


print("a path from 1 at t=0 to 2 at t=5:", show(seg.jump_times, seg.jump_states))

# conditional jump counts between the same endpoints
counts = [len(sample_conditioned_segment(chain, G, 0.0, 5.0, 0, 1, rng).jump_times)
          for _ in range(20_000)]
print("jump-count frequencies:", np.round(np.bincount(counts)[:6] / len(counts), 4))

# a whole panel: death known to lie between the last two visits
panel = PanelSeries([0, 3, 6, 12], [0, 1, 1, 2], "death_interval")
y = sample_full_proposal(G, panel, rng)
print("latent trajectory:", show(y.jump_times, y.jump_states))
