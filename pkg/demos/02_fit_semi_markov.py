"""Simulate a Weibull semi-Markov panel study, fit it and summarize.

Run with ``python demos/02_fit_semi_markov.py``; takes well under a minute.
"""
import numpy as np

from msmbayes.diagnostics import effective_sample_size, posterior_summary, predictive_death_distribution
from msmbayes.gibbs import SamplerConfig, run_gibbs
from msmbayes.scenarios import SCENARIOS

sc = SCENARIOS["sm-death-known"]
rng = np.random.default_rng(3)
data, truth_paths = sc.simulate(100, rng)
print(f"{len(data)} individuals, {sum(len(p.times) for p in data.series)} observations")

draws = run_gibbs(data, sc.model, config=SamplerConfig(iterations=3000, seed=3))
truth = sc.truth_values()
print(f"{'parameter':>10} {'truth':>7} {'mean':>7} {'sd':>7} {'ess':>6}")
for row in posterior_summary(draws):
    if row.parameter in truth:
        ess = effective_sample_size(draws, row.parameter)
        print(f"{row.parameter:>10} {truth[row.parameter]:7.3f} {row.mean:7.3f} {row.sd:7.3f} {ess:6.0f}")
print("trajectory acceptance:", draws.trajectory_accept_rate[draws.config.burn_in:].mean().round(3))

# predictive probability of death by each horizon, starting healthy
curve = predictive_death_distribution(draws.params[::10], 0, np.linspace(0, 60, 7), rng, 20_000)
for t, c in zip(curve.grid, curve.cdf):
    print(f"P(dead by {t:4.0f}) = {c:.3f}")
