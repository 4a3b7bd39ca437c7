"""Panel datasets and their CSV format.

One row per observation, header ``id,time,state,end_kind``. ``end_kind``
is filled only on the last row of each series with ``censored``,
``death_exact`` or ``death_interval``; rows of one series are contiguous
and in time order. Floats are written with 17 significant digits so a
file re-reads to the same bits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .models import PANEL_END_KINDS, PanelSeries, Trajectory

__all__ = [
    "InputError",
    "PanelDataset",
    "fmt_float",
    "load_panel",
    "load_trajectories",
    "write_panel",
    "write_trajectories",
]

HEADER = ["id", "time", "state", "end_kind"]


class InputError(ValueError):
    """Malformed input file; ``row`` is 1-based counting the header as row 1."""

    def __init__(self, message, path=None, row=None, column=None):
        where = ", ".join(x for x in (
            str(path) if path is not None else None,
            f"row {row}" if row is not None else None,
            f"column {column!r}" if column is not None else None) if x)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.row, self.column = path, row, column


def fmt_float(x):
    return format(float(x), ".17g")


def _sort_labels(labels):
    try:
        return sorted(labels, key=lambda s: (float(s), s))
    except ValueError:
        return sorted(labels)


@dataclass
class PanelDataset:
    """Panel series over a labelled state space.

    States inside each :class:`PanelSeries` are 0-based indices into
    ``labels``. ``mask`` is the permitted-transition matrix; by default every
    move out of a non-absorbing state.
    """

    series: list
    labels: list
    absorbing: tuple = ()
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.labels = [str(x) for x in self.labels]
        self.absorbing = tuple(sorted(int(a) for a in self.absorbing))
        S = len(self.labels)
        if self.mask is None:
            m = ~np.eye(S, dtype=bool)
            m[list(self.absorbing)] = False
            self.mask = m
        else:
            self.mask = np.asarray(self.mask, bool)
            if self.mask.shape != (S, S):
                raise ValueError("mask shape does not match the number of states")
            if np.any(self.mask[list(self.absorbing)]):
                raise ValueError("absorbing states cannot have exits in the mask")
            for r in range(S):
                if r not in self.absorbing and not self.mask[r].any():
                    raise ValueError(f"state {self.labels[r]} has no permitted exit "
                                     "but is not declared absorbing")
        for p in self.series:
            last = int(p.states[-1])
            if p.end_kind != "censored" and last not in self.absorbing:
                raise ValueError(f"series {p.id!r} ends in a death but its last "
                                 "state is not absorbing")
            if any(int(s) in self.absorbing for s in p.states[:-1]):
                raise ValueError(f"series {p.id!r} is observed after absorption")
            if p.end_kind == "censored" and last in self.absorbing:
                raise ValueError(f"series {p.id!r} ends absorbed but is flagged censored")

    @property
    def n_states(self):
        return len(self.labels)

    def __len__(self):
        return len(self.series)

    def label_index(self):
        return {lab: i for i, lab in enumerate(self.labels)}


def load_panel(path, labels=None, absorbing=None, mask=None) -> PanelDataset:
    """Read and validate a panel CSV.

    ``labels`` fixes the state space and its order; when omitted it is the
    sorted set of labels seen. ``absorbing`` (labels) defaults to the final
    states of series ending in a death.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty file, header required", path) from None
        header = [h.strip() for h in header]
        if header != HEADER:
            raise InputError(f"header must be {','.join(HEADER)}, got {','.join(header)}",
                             path, 1)
        raw = []
        for k, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise InputError(f"expected 4 fields, got {len(row)}", path, k)
            sid, t, state, end = (c.strip() for c in row)
            if not sid:
                raise InputError("missing id", path, k, "id")
            try:
                t = float(t)
            except ValueError:
                raise InputError(f"time {t!r} is not a number", path, k, "time") from None
            if not np.isfinite(t):
                raise InputError("time must be finite", path, k, "time")
            if not state:
                raise InputError("missing state", path, k, "state")
            if end and end not in PANEL_END_KINDS:
                raise InputError(f"unknown end_kind {end!r}", path, k, "end_kind")
            raw.append((k, sid, t, state, end))

    seen = set(r[3] for r in raw)
    if labels is None:
        labels = _sort_labels(seen)
    labels = [str(x) for x in labels]
    index = {lab: i for i, lab in enumerate(labels)}
    for k, _, _, state, _ in raw:
        if state not in index:
            raise InputError(f"unknown state label {state!r}", path, k, "state")

    groups = {}
    order = []
    for rec in raw:
        sid = rec[1]
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        elif order[-1] != sid:
            raise InputError(f"rows of series {sid!r} are not contiguous", path, rec[0], "id")
        groups[sid].append(rec)

    series = []
    for sid in order:
        recs = groups[sid]
        for rec in recs[:-1]:
            if rec[4]:
                raise InputError("end_kind is only allowed on the last row of a series",
                                 path, rec[0], "end_kind")
        last = recs[-1]
        if not last[4]:
            raise InputError(f"last row of series {sid!r} needs an end_kind",
                             path, last[0], "end_kind")
        times = [r[2] for r in recs]
        if times[0] != 0:
            raise InputError(f"series {sid!r} must start at time 0", path, recs[0][0], "time")
        for a, b in zip(recs, recs[1:]):
            if not b[2] > a[2]:
                raise InputError(f"times of series {sid!r} are not strictly increasing",
                                 path, b[0], "time")
        if len(recs) < 2:
            raise InputError(f"series {sid!r} has a single observation", path, last[0])
        series.append(PanelSeries(np.array(times), np.array([index[r[3]] for r in recs]),
                                  last[4], sid))

    if absorbing is None:
        absorbing_idx = sorted({int(p.states[-1]) for p in series if p.end_kind != "censored"})
    else:
        absorbing_idx = []
        for a in absorbing:
            if str(a) not in index:
                raise InputError(f"absorbing state {a!r} is not a known label", path)
            absorbing_idx.append(index[str(a)])
    try:
        return PanelDataset(series, labels, tuple(absorbing_idx), mask)
    except ValueError as e:
        raise InputError(str(e), path) from None


def write_panel(dataset: PanelDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i, p in enumerate(dataset.series):
            sid = p.id if p.id is not None else str(i + 1)
            n = len(p.times)
            for k in range(n):
                w.writerow([sid, fmt_float(p.times[k]), dataset.labels[p.states[k]],
                            p.end_kind if k == n - 1 else ""])


def write_trajectories(trajectories, labels, path, ids=None):
    """Sidecar file of complete paths: a time-0 row, one row per jump, an end row.

    The end row carries the trajectory end kind; for an exact absorption it
    repeats the last jump.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i, y in enumerate(trajectories):
            sid = ids[i] if ids is not None else str(i + 1)
            w.writerow([sid, fmt_float(0.0), labels[y.initial_state], ""])
            for t, s in zip(y.jump_times, y.jump_states):
                w.writerow([sid, fmt_float(t), labels[s], ""])
            w.writerow([sid, fmt_float(y.end_time), labels[y.final_state], y.end_kind])


def load_trajectories(path, labels):
    index = {str(lab): i for i, lab in enumerate(labels)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        cur = []
        for row in reader:
            cur.append(row)
            if row[3]:
                s0 = index[cur[0][2]]
                jumps = cur[1:-1]
                out.append(Trajectory(s0, [float(r[1]) for r in jumps],
                                      [index[r[2]] for r in jumps], float(row[1]), row[3]))
                cur = []
    return out
