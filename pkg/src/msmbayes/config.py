"""INI run configuration.

Only ``[model] kind`` is required. A full file looks like::

    [model]
    kind = weibull-sm          ; markov | weibull-sm | gompertz-im
    states = 1, 2, 3           ; label order (default: labels in the data)
    absorbing = 3              ; default: final states of death series
    forbid = 1>3               ; structural zeros, comma separated
    data = panel.csv           ; used when --data is not given

    [prior]                    ; PriorSpec fields
    eta_shape = 0.001

    [sampler]                  ; SamplerConfig fields
    iterations = 5000
    seed = 1

    [predictive]
    initial_state = 1
    horizon = 60
    grid_points = 20
    n_simulations = 100000
    bin_width = 3

    [simulate]                 ; used by the simulate command
    n = 100
    schedule = 0, 3, 6, 12, 24, 60
    death = exact              ; exact | interval
    initial_state = 1

    [truth]                    ; true parameters for simulate
    gamma_1_2 = 0.25
    alpha_1 = 1.4

Truth keys follow the parameter names of the draws file: ``gamma_r_s``
(transition intensities; exit rate and jump probabilities are derived),
``gamma_r`` with ``p_r_s``, ``alpha_r``, ``beta0_r`` and ``beta1_r``.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from .gibbs import MODEL_KINDS, PriorSpec, SamplerConfig
from .models import GompertzIMParams, MarkovParams, WeibullSMParams
from .panel import InputError

__all__ = [
    "PredictiveSpec",
    "RunConfig",
    "SimulateSpec",
    "load_config",
    "parse_config",
    "truth_from_section",
]


@dataclass(frozen=True)
class PredictiveSpec:
    initial_state: str | None = None
    horizon: float | None = None
    grid_points: int = 20
    n_simulations: int = 100_000
    bin_width: float | None = None
    enabled: bool = True


@dataclass(frozen=True)
class SimulateSpec:
    n: int = 100
    schedule: tuple = (0.0, 1.0)
    death: str = "exact"
    initial_state: str | None = None


@dataclass
class RunConfig:
    model: str
    labels: list | None = None
    absorbing: list | None = None
    forbid: list = field(default_factory=list)
    data: str | None = None
    prior: PriorSpec = field(default_factory=PriorSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    predictive: PredictiveSpec = field(default_factory=PredictiveSpec)
    simulate: SimulateSpec | None = None
    truth: dict | None = None
    source: str | None = None

    def mask(self, labels, absorbing_idx):
        """Permitted-transition matrix over ``labels``."""
        S = len(labels)
        index = {lab: i for i, lab in enumerate(labels)}
        m = ~np.eye(S, dtype=bool)
        m[list(absorbing_idx)] = False
        for r, s in self.forbid:
            if r not in index or s not in index:
                raise InputError(f"forbidden transition {r}>{s} uses an unknown state",
                                 self.source, column="forbid")
            m[index[r], index[s]] = False
        for r in range(S):
            if r not in absorbing_idx and not m[r].any():
                raise InputError(f"state {labels[r]} is left without any exit",
                                 self.source, column="forbid")
        return m


def _split(value):
    return [x.strip() for x in value.replace(";", ",").split(",") if x.strip()]


def _coerce(cls, section, path):
    out = {}
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key not in types:
            raise InputError(f"unknown key {key!r} in [{section.name}]", path, column=key)
        t = str(types[key])
        try:
            if raw.lower() == "none" and "None" in t:
                out[key] = None
            elif t == "bool":
                out[key] = section.getboolean(key)
            elif t.startswith("int"):
                out[key] = int(raw)
            elif t == "str | float":
                out[key] = raw if raw == "midpoint" else float(raw)
            elif t.startswith("float"):
                out[key] = float(raw)
            else:
                out[key] = raw
        except ValueError:
            raise InputError(f"bad value {raw!r} for {key}", path, column=key) from None
    try:
        return cls(**out)
    except (TypeError, ValueError) as e:
        raise InputError(str(e), path, column=section.name) from None


def parse_config(text, source=None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as e:
        raise InputError(str(e), source) from None
    if not cp.has_option("model", "kind"):
        raise InputError("[model] kind is required", source, column="kind")
    m = cp["model"]
    kind = m["kind"].strip()
    if kind not in MODEL_KINDS:
        raise InputError(f"model kind must be one of {', '.join(MODEL_KINDS)}", source,
                         column="kind")
    unknown = set(m) - {"kind", "states", "absorbing", "forbid", "data"}
    if unknown:
        raise InputError(f"unknown key(s) in [model]: {', '.join(sorted(unknown))}", source)
    forbid = []
    for item in _split(m.get("forbid", "")):
        parts = [x.strip() for x in item.split(">")]
        if len(parts) != 2 or not all(parts):
            raise InputError(f"forbid entries look like 1>3, got {item!r}", source,
                             column="forbid")
        forbid.append(tuple(parts))
    data = m.get("data")
    if data and source and not os.path.isabs(data):
        data = os.path.join(os.path.dirname(os.path.abspath(source)), data)
    cfg = RunConfig(
        model=kind,
        labels=_split(m["states"]) if "states" in m else None,
        absorbing=_split(m["absorbing"]) if "absorbing" in m else None,
        forbid=forbid,
        data=data,
        source=source,
    )
    if cp.has_section("prior"):
        cfg.prior = _coerce(PriorSpec, cp["prior"], source)
    if cp.has_section("sampler"):
        cfg.sampler = _coerce(SamplerConfig, cp["sampler"], source)
    if cp.has_section("predictive"):
        cfg.predictive = _coerce(PredictiveSpec, cp["predictive"], source)
    if cp.has_section("simulate"):
        s = dict(cp["simulate"])
        try:
            sched = tuple(float(x) for x in _split(s.pop("schedule", "")))
            spec = SimulateSpec(n=int(s.pop("n", 100)), schedule=sched or (0.0, 1.0),
                                death=s.pop("death", "exact"),
                                initial_state=s.pop("initial_state", None))
        except ValueError as e:
            raise InputError(f"[simulate]: {e}", source) from None
        if s:
            raise InputError(f"unknown key(s) in [simulate]: {', '.join(sorted(s))}", source)
        if spec.death not in ("exact", "interval"):
            raise InputError("[simulate] death must be exact or interval", source,
                             column="death")
        if spec.schedule[0] != 0 or np.any(np.diff(spec.schedule) <= 0):
            raise InputError("[simulate] schedule must start at 0 and increase", source,
                             column="schedule")
        if spec.n < 0:
            raise InputError("[simulate] n must be nonnegative", source, column="n")
        cfg.simulate = spec
    if cp.has_section("truth"):
        try:
            cfg.truth = {k: float(v) for k, v in cp["truth"].items()}
        except ValueError as e:
            raise InputError(f"[truth]: {e}", source) from None
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def truth_from_section(kind, truth, labels, absorbing_idx):
    """Build parameters from ``[truth]`` keys; returns ``(theta, conversion)``.

    ``conversion`` lists the derived canonical quantities so they can be
    echoed to a report.
    """
    S = len(labels)
    live = [r for r in range(S) if r not in absorbing_idx]
    used = set()

    def get(name, default=None):
        if name in truth:
            used.add(name)
            return truth[name]
        return default

    rates = np.zeros((S, S))
    P = np.zeros((S, S))
    have_rates = any(k.count("_") == 2 and k.startswith("gamma_") for k in truth)
    for r in live:
        for s in range(S):
            if s == r:
                continue
            rates[r, s] = get(f"gamma_{labels[r]}_{labels[s]}", 0.0)
            P[r, s] = get(f"p_{labels[r]}_{labels[s]}", 0.0)
    if have_rates:
        exit_rate = rates.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            P = np.where(exit_rate[:, None] > 0, rates / exit_rate[:, None], 0.0)
    else:
        exit_rate = np.array([get(f"gamma_{labels[r]}", 0.0) if r in live else 0.0
                              for r in range(S)])
    for r in live:
        if not P[r].sum() > 0:
            raise InputError(f"[truth] gives state {labels[r]} no way out")
    conversion = {}
    if kind == "markov":
        theta = MarkovParams(P, exit_rate)
    elif kind == "weibull-sm":
        alpha = np.array([get(f"alpha_{labels[r]}", 1.0) if r in live else 1.0
                          for r in range(S)])
        theta = WeibullSMParams(P, alpha, exit_rate)
        conversion["eta"] = {labels[r]: float(theta.eta[r]) for r in live}
    else:
        b0 = np.array([get(f"beta0_{labels[r]}", 0.0) if r in live else 0.0 for r in range(S)])
        b1 = np.array([get(f"beta1_{labels[r]}", 0.0) if r in live else 0.0 for r in range(S)])
        theta = GompertzIMParams(P, b0, b1)
    unused = set(truth) - used
    if unused:
        raise InputError(f"[truth] keys not used by a {kind} model: {', '.join(sorted(unused))}")
    conversion["P"] = {f"p_{labels[r]}_{labels[s]}": float(P[r, s])
                       for r in live for s in range(S) if P[r, s] > 0}
    if kind != "gompertz-im":
        conversion["gamma"] = {labels[r]: float(exit_rate[r]) for r in live}
    return theta, conversion
