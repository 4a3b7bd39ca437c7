"""Command-line interface: ``msmbayes {simulate,fit,summarize,replicate}``.

Exit codes are 0 on success, 2 for bad input (files, config, data) and 3
for numerical failures during sampling. Failures also print a one-line
JSON error record on stderr and, when an output directory is known, write
it to ``error.json`` there.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_config, truth_from_section
from .ctmc import ConvergenceError
from .diagnostics import (
    MIN_ESS_DRAWS,
    effective_sample_size,
    posterior_summary,
    predictive_death_distribution,
)
from .gibbs import PosteriorDraws, SamplerConfig, SamplerError, run_gibbs
from .panel import InputError, PanelDataset, fmt_float, load_panel, write_panel, write_trajectories
from .scenarios import SCENARIOS, simulate_panel

log = logging.getLogger("msmbayes")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SUMMARY_HEADER = ["parameter", "mean", "sd", "q025", "q975"]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    return str(x)


def write_draws(draws: PosteriorDraws, path):
    _write_csv(path, ["iteration"] + draws.names,
               ([str(it)] + [fmt_float(v) for v in row]
                for it, row in zip(draws.iterations, draws.values)))


def read_draws(path):
    """Read a draws CSV back as ``(names, iterations, values)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty draws file", path) from None
        if not header or header[0] != "iteration":
            raise InputError("draws file must start with an iteration column", path, 1)
        its, vals = [], []
        for k, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"expected {len(header)} fields", path, k)
            try:
                its.append(int(row[0]))
                vals.append([float(x) for x in row[1:]])
            except ValueError:
                raise InputError("non-numeric value", path, k) from None
    return header[1:], np.array(its, dtype=np.int64), np.array(vals).reshape(len(its), len(header) - 1)


def write_summary(rows, path):
    _write_csv(path, SUMMARY_HEADER,
               ([r.parameter] + [fmt_float(x) for x in (r.mean, r.sd, r.q025, r.q975)]
                for r in rows))


def _resolve_dataset(cfg: RunConfig, data_path):
    path = data_path or cfg.data
    if not path:
        raise InputError("no data file: pass --data or set [model] data")
    ds = load_panel(path, labels=cfg.labels, absorbing=cfg.absorbing)
    mask = cfg.mask(ds.labels, ds.absorbing)
    try:
        return PanelDataset(ds.series, ds.labels, ds.absorbing, mask), path
    except ValueError as e:
        raise InputError(str(e), path) from None


def _sampler_config(cfg, args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "iterations", None) is not None:
        overrides["iterations"] = args.iterations
        if cfg.sampler.burn_in == cfg.sampler.iterations // 5:
            overrides["burn_in"] = None
    if not overrides:
        return cfg.sampler
    fields = {f: getattr(cfg.sampler, f) for f in cfg.sampler.__dataclass_fields__}
    fields.update(overrides)
    return SamplerConfig(**fields)


def _ess(draws):
    if len(draws) < MIN_ESS_DRAWS:
        return {}
    return {n: effective_sample_size(draws.values[:, j]) for j, n in enumerate(draws.names)}


def _predictive(cfg, ds, draws, sampler_cfg, out):
    spec = cfg.predictive
    if not spec.enabled or not ds.absorbing:
        return None
    index = ds.label_index()
    if spec.initial_state is not None:
        if spec.initial_state not in index:
            raise InputError(f"unknown predictive initial state {spec.initial_state!r}",
                             cfg.source, column="initial_state")
        s0 = index[spec.initial_state]
    else:
        s0 = int(np.bincount([p.states[0] for p in ds.series]).argmax())
    horizon = spec.horizon or max(p.end_time for p in ds.series)
    grid = np.linspace(0.0, horizon, spec.grid_points)
    rng = np.random.default_rng(np.random.SeedSequence([sampler_cfg.seed, 1]))
    curve = predictive_death_distribution(draws, s0, grid, rng, spec.n_simulations,
                                          spec.bin_width)
    se = curve.cdf_standard_error()
    _write_csv(os.path.join(out, "predictive.csv"), ["time", "cdf", "cdf_se"],
               ([fmt_float(t), fmt_float(c), fmt_float(s)]
                for t, c, s in zip(curve.grid, curve.cdf, se)))
    _write_csv(os.path.join(out, "predictive_density.csv"), ["bin_lo", "bin_hi", "density"],
               ([fmt_float(a), fmt_float(b), fmt_float(d)]
                for a, b, d in zip(curve.bin_edges[:-1], curve.bin_edges[1:], curve.density)))
    return {"initial_state": ds.labels[s0], "horizon": horizon,
            "n_simulated": curve.n_simulated, "death_probability_at_horizon": float(curve.cdf[-1])}


def _trace_rows(draws):
    for j in range(draws.trajectory_accept_rate.shape[0]):
        yield ([str(j), fmt_float(draws.trajectory_accept_rate[j]), str(draws.latent_jumps[j]),
                str(draws.failed_proposals[j])]
               + [str(int(x)) for x in draws.param_accept[j]])


def cmd_fit(args):
    out = _outdir(args)
    cfg = load_config(args.config)
    ds, data_path = _resolve_dataset(cfg, args.data)
    scfg = _sampler_config(cfg, args)
    level = logging.WARNING if args.quiet else logging.INFO
    log.setLevel(level)
    t0 = time.perf_counter()
    every = max(1, scfg.iterations // 10)

    def progress(j, theta):
        if (j + 1) % every == 0:
            log.info("sweep %d / %d", j + 1, scfg.iterations)

    draws = run_gibbs(ds, cfg.model, cfg.prior, scfg, progress=progress)
    wall = time.perf_counter() - t0
    write_draws(draws, os.path.join(out, "draws.csv"))
    write_summary(posterior_summary(draws), os.path.join(out, "summary.csv"))
    _write_csv(os.path.join(out, "trace.csv"),
               ["iteration", "trajectory_accept_rate", "latent_jumps", "failed_proposals"]
               + [f"accept_{b}" for b in draws.param_blocks], _trace_rows(draws))
    pred = _predictive(cfg, ds, draws, scfg, out)
    post = slice(scfg.burn_in, None)
    report = {
        "version": __version__,
        "model": cfg.model,
        "data": os.path.abspath(data_path),
        "config": os.path.abspath(args.config),
        "seed": scfg.seed,
        "threads": scfg.threads,
        "iterations": scfg.iterations,
        "burn_in": scfg.burn_in,
        "thinning": scfg.thinning,
        "retained_draws": len(draws),
        "n_individuals": len(ds),
        "states": ds.labels,
        "absorbing": [ds.labels[a] for a in ds.absorbing],
        "wall_time_seconds": wall,
        "trajectory_acceptance_rate": float(draws.trajectory_accept_rate[post].mean()),
        "parameter_acceptance_rates": dict(zip(
            draws.param_blocks, map(float, draws.param_accept[post].mean(axis=0)))),
        "failed_proposals": int(draws.failed_proposals.sum()),
        "ess": _ess(draws),
        "predictive": pred,
    }
    _write_json(os.path.join(out, "run_report.json"), report)
    if not args.quiet:
        print(f"fit {cfg.model}: {len(draws)} draws in {wall:.1f}s, "
              f"trajectory acceptance {report['trajectory_acceptance_rate']:.3f}; "
              f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args):
    out = _outdir(args)
    cfg = load_config(args.config)
    if cfg.simulate is None or cfg.truth is None:
        raise InputError("simulate needs [simulate] and [truth] sections", cfg.source)
    spec = cfg.simulate
    if cfg.labels is None:
        raise InputError("simulate needs [model] states", cfg.source, column="states")
    labels = cfg.labels
    index = {lab: i for i, lab in enumerate(labels)}
    if cfg.absorbing is None:
        raise InputError("simulate needs [model] absorbing", cfg.source, column="absorbing")
    absorbing = tuple(index[a] for a in cfg.absorbing)
    mask = cfg.mask(labels, absorbing)
    try:
        theta, conversion = truth_from_section(cfg.model, cfg.truth, labels, absorbing)
    except ValueError as e:
        raise InputError(str(e), cfg.source) from None
    if np.any(theta.P[~mask] > 0):
        raise InputError("[truth] uses a forbidden transition", cfg.source)
    s0 = index[spec.initial_state] if spec.initial_state is not None else 0
    n = args.n if args.n is not None else spec.n
    seed = args.seed if args.seed is not None else cfg.sampler.seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    ds, trajs = simulate_panel(theta, n, spec.schedule, rng,
                               "exact" if spec.death == "exact" else "interval",
                               s0, labels, mask)
    write_panel(ds, os.path.join(out, "panel.csv"))
    write_trajectories(trajs, labels, os.path.join(out, "true_trajectories.csv"),
                       [p.id for p in ds.series])
    _write_json(os.path.join(out, "run_report.json"), {
        "version": __version__, "model": cfg.model, "seed": seed, "n": n,
        "schedule": list(spec.schedule), "death": spec.death,
        "truth": cfg.truth, "canonical": conversion,
    })
    if not args.quiet:
        print(f"simulated {n} series; wrote {out}")
    return EXIT_OK


def cmd_summarize(args):
    names, _, vals = read_draws(args.data)
    if vals.shape[0] == 0:
        raise InputError("draws file has no rows", args.data)
    rows = posterior_summary(vals, names)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_summary(rows, os.path.join(args.out, "summary.csv"))
    if not args.quiet or not args.out:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([r.parameter] + [_cell(x) for x in (r.mean, r.sd, r.q025, r.q975)])
    return EXIT_OK


def replicate(scenario, n, replicates, seed, iterations=5000, threads=1, progress=None):
    """Simulate-and-fit ``replicates`` datasets; returns ``(names, truth, means)``.

    ``means[k]`` holds the posterior means of the reported parameters for
    replicate k. Data and sampler seeds of each replicate are derived from
    ``seed``.
    """
    if scenario not in SCENARIOS:
        raise InputError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    if replicates < 1 or n < 1:
        raise InputError("n and replicates must be positive")
    sc = SCENARIOS[scenario]
    children = np.random.SeedSequence(seed).spawn(replicates)
    means = np.empty((replicates, len(sc.reported)))
    for k, child in enumerate(children):
        data_ss, fit_ss = child.spawn(2)
        ds, _ = sc.simulate(n, np.random.default_rng(data_ss))
        cfg = SamplerConfig(iterations=iterations, seed=int(fit_ss.generate_state(1)[0]),
                            threads=threads)
        draws = run_gibbs(ds, sc.model, config=cfg)
        m = draws.mean()
        means[k] = [m[name] for name in sc.reported]
        if progress is not None:
            progress(k, means[k])
    truth = sc.truth_values()
    return list(sc.reported), np.array([truth[x] for x in sc.reported]), means


def cmd_replicate(args):
    out = _outdir(args)
    seed = args.seed if args.seed is not None else 0

    def progress(k, m):
        if not args.quiet:
            print(f"replicate {k + 1}/{args.replicates} done", file=sys.stderr)

    names, truth, means = replicate(args.scenario, args.n, args.replicates, seed,
                                    args.iterations or 5000, args.threads or 1, progress)
    sd = means.std(axis=0, ddof=1) if len(means) > 1 else None
    rows = [[name, fmt_float(truth[j]), fmt_float(means[:, j].mean()),
             fmt_float(sd[j]) if sd is not None else "", str(len(means))]
            for j, name in enumerate(names)]
    _write_csv(os.path.join(out, "replicate.csv"),
               ["parameter", "truth", "mean", "sd", "replicates"], rows)
    _write_csv(os.path.join(out, "replicate_means.csv"), ["replicate"] + names,
               ([str(k)] + [fmt_float(x) for x in row] for k, row in enumerate(means)))
    if not args.quiet:
        for r in rows:
            sd_txt = f" ({float(r[3]):.3f})" if r[3] else ""
            print(f"{r[0]:>10}  truth {float(r[1]):.3f}  mean {float(r[2]):.3f}{sd_txt}")
    return EXIT_OK


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def build_parser():
    p = argparse.ArgumentParser(prog="msmbayes", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data_help=None):
        if data_help:
            sp.add_argument("--data", help=data_help)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")

    sp = sub.add_parser("simulate", help="simulate a panel dataset from [truth]")
    sp.add_argument("--config", required=True)
    sp.add_argument("--n", type=int, help="override [simulate] n")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="run the sampler on a panel CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--threads", type=int, help="worker threads for latent-path updates")
    sp.add_argument("--iterations", type=int, help="override [sampler] iterations")
    common(sp, "panel CSV (default: [model] data)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("summarize", help="re-summarize an existing draws CSV")
    common(sp, "draws CSV written by fit")
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("replicate", help="repeat simulate+fit on a built-in scenario")
    sp.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    sp.add_argument("--n", type=int, default=100, help="individuals per dataset")
    sp.add_argument("--replicates", type=int, default=20)
    sp.add_argument("--iterations", type=int, default=5000)
    sp.add_argument("--threads", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_replicate)
    return p


def _fail(args, code, exc):
    record = {"status": "error", "exit_code": code, "type": type(exc).__name__,
              "message": str(exc)}
    for attr in ("path", "row", "column", "tail_bound"):
        val = getattr(exc, attr, None)
        if val is not None:
            record[attr] = val
    print(json.dumps(record, default=str), file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            _write_json(os.path.join(out, "error.json"), record)
        except OSError:
            pass
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format="%(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "data", None) and args.command == "summarize" and not os.path.exists(args.data):
        return _fail(args, EXIT_INPUT, InputError("file not found", args.data))
    if args.command == "summarize" and not args.data:
        return _fail(args, EXIT_INPUT, InputError("summarize needs --data"))
    try:
        return args.func(args)
    except (SamplerError, ConvergenceError, ArithmeticError) as e:
        return _fail(args, EXIT_NUMERIC, e)
    except (InputError, ValueError, OSError, KeyError) as e:
        return _fail(args, EXIT_INPUT, e)


if __name__ == "__main__":
    sys.exit(main())
