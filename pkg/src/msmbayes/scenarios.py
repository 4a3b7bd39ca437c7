"""Panel simulation and the built-in simulation-study designs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import GompertzIMParams, PanelSeries, WeibullSMParams, simulate_forward
from .panel import PanelDataset

__all__ = ["SCENARIOS", "Scenario", "observe_on_schedule", "simulate_panel"]


def observe_on_schedule(y, schedule, death="exact", id=None) -> PanelSeries:
    """Thin a complete path to a fixed observation schedule.

    A path absorbed before the last scheduled time is observed at every
    scheduled time before death and then either at the death time itself
    (``death="exact"``) or at the first scheduled time after it
    (``death="interval"``).
    """
    schedule = np.asarray(schedule, float)
    if y.censored:
        return PanelSeries(schedule, [y.state_at(t) for t in schedule], "censored", id)
    d = y.end_time
    before = schedule[schedule < d]
    states = [y.state_at(t) for t in before] + [y.final_state]
    if death == "exact":
        return PanelSeries(np.append(before, d), states, "death_exact", id)
    after = schedule[schedule >= d]
    return PanelSeries(np.append(before, after[0]), states, "death_interval", id)


def simulate_panel(theta, n, schedule, rng, death="exact", initial_state=0, labels=None,
                   mask=None):
    """Forward-simulate ``n`` individuals and observe them on ``schedule``.

    Returns ``(dataset, trajectories)``; trajectories are the complete
    paths (absorbed ones end at the death time, which the schedule may not
    reveal).
    """
    schedule = np.asarray(schedule, float)
    horizon = float(schedule[-1])
    trajs, series = [], []
    for i in range(int(n)):
        y = simulate_forward(theta, initial_state, horizon, rng)
        trajs.append(y)
        series.append(observe_on_schedule(y, schedule, death, str(i + 1)))
    S = theta.n_states
    labels = [str(i + 1) for i in range(S)] if labels is None else labels
    if mask is None:
        mask = theta.P > 0
    return PanelDataset(series, labels, tuple(sorted(theta.absorbing)), mask), trajs


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    truth: object
    schedule: tuple
    death: str
    reported: tuple
    initial_state: int = 0

    def truth_values(self):
        from .gibbs import parameter_names, parameter_vector

        mask = self.truth.P > 0
        values = dict(zip(parameter_names(self.model, mask),
                          parameter_vector(self.truth, mask)))
        return {k: float(values[k]) for k in self.reported}

    def simulate(self, n, rng):
        return simulate_panel(self.truth, n, self.schedule, rng, self.death,
                              self.initial_state)


def _weibull_truth():
    # healthy / ill / dead with recovery; intensities gamma_rs, shapes alpha_r
    rates = np.array([[0.0, 0.25, 0.05], [0.04, 0.0, 0.1], [0.0, 0.0, 0.0]])
    gamma = rates.sum(axis=1)
    P = np.divide(rates, gamma[:, None], out=np.zeros_like(rates), where=gamma[:, None] > 0)
    return WeibullSMParams(P, np.array([1.4, 0.7, 1.0]), gamma)


def _gompertz_truth():
    P = np.array([[0.0, 0.8, 0.2], [0.2, 0.0, 0.8], [0.0, 0.0, 0.0]])
    return GompertzIMParams(P, np.array([-0.69, -2.30, 0.0]), np.array([0.2, 0.2, 0.0]))


_SM_REPORTED = ("gamma_1_2", "alpha_1", "gamma_1_3", "gamma_2_1", "alpha_2", "gamma_2_3")
_SM_SCHEDULE = (0.0, 3.0, 6.0, 12.0, 24.0, 60.0)

SCENARIOS = {
    "sm-death-unknown": Scenario("sm-death-unknown", "weibull-sm", _weibull_truth(),
                                 _SM_SCHEDULE, "interval", _SM_REPORTED),
    "sm-death-known": Scenario("sm-death-known", "weibull-sm", _weibull_truth(),
                               _SM_SCHEDULE, "exact", _SM_REPORTED),
    "im": Scenario("im", "gompertz-im", _gompertz_truth(),
                   (0.0, 1.0, 2.0, 3.0, 4.5, 6.0, 9.0, 12.0, 20.0), "exact",
                   ("beta0_1", "beta1_1", "beta0_2", "beta1_2",
                    "p_1_2", "p_1_3", "p_2_1", "p_2_3")),
}
