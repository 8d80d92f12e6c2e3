"""Command-line driver.

    huberloc simulate --config CFG --out DIR     one trial of one algorithm
    huberloc compare  --config CFG --out DIR     all algorithms x NLOS ratios
    huberloc sweep    --config CFG --out DIR --sizes 3,5,10,20
    huberloc validate --config CFG --out DIR --nodes nodes.csv --ranges ranges.csv

``--config paper_defaults`` selects the bundled settings of the published
simulation study. Exit status: 0 success, 1 invalid input, 2 usage error,
3 too many diverged trials.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness, metrics
from ._seeding import derive

log = logging.getLogger("huberloc")

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="huberloc", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="scenario YAML file or 'paper_defaults'")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--algos", type=_csv_list(str), help="comma-separated algorithm subset")
        sp.add_argument("--nlos", type=_csv_list(float), help="comma-separated NLOS ratios")
        sp.add_argument("--trials", type=int, help="override n_trials")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        return sp

    common(sub.add_parser("simulate", help="run one algorithm on one trial, export estimates and trace"))
    common(sub.add_parser("compare", help="compare all algorithms across NLOS ratios"))
    sw = common(sub.add_parser("sweep", help="Stage I + bootstrap RMSE CDF per samples-per-link"))
    sw.add_argument("--sizes", type=_csv_list(int), default=[3, 5, 10, 20])
    va = common(sub.add_parser("validate", help="compare algorithms on a measured dataset"))
    va.add_argument("--nodes", required=True, type=Path)
    va.add_argument("--ranges", required=True, type=Path)
    return p


def _load(args, parser) -> dataio.ScenarioConfig:
    if args.config == "paper_defaults":
        path = dataio.PAPER_DEFAULTS_PATH
    else:
        path = Path(args.config)
        if not path.is_file():
            parser.error(f"config file not found: {path}")
    cfg = dataio.load_config(path)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.algos:
        changes["algorithms"] = tuple(args.algos)
    if args.nlos:
        changes["nlos_ratios"] = tuple(args.nlos)
        changes["nlos_ratio"] = args.nlos[0]
    if args.trials is not None:
        changes["n_trials"] = args.trials
    return cfg.replace(**changes) if changes else cfg


def _summary_line(algo, ratio, rows, n_div) -> str:
    kept = [r for r in rows if not r.diverged]
    if not kept:
        return f"{algo:<20} nlos={ratio:<5g} all {len(rows)} trials diverged"
    pooled = np.sqrt(sum(r.sse for r in kept) / sum(r.n_sensors for r in kept))
    return (f"{algo:<20} nlos={ratio:<5g} rmse={np.mean([r.rmse for r in kept]):.4f} ger="
            f"{np.mean([r.ger for r in kept]):.4f} gde={np.mean([r.gde for r in kept]):.4f} "
            f"pooled_rmse={pooled:.4f} trials={len(kept)} diverged={n_div}")


def _ecdfs(rows, key) -> dict:
    groups = {}
    for r in rows:
        if not r.diverged:
            groups.setdefault(key(r), []).append(r.rmse)
    return {k: metrics.ecdf(v) for k, v in groups.items()}


def cmd_simulate(cfg, args):
    algo = cfg.algorithms[0] if args.algos else "stage1_bootstrap"
    net, ms = harness.make_trial(cfg, 0)
    est, res, trace = harness.run_algorithm(algo, net, ms, cfg, derive(cfg.master_seed, 0, 7), 0)
    if est is None:
        print(f"{algo}: diverged", file=sys.stderr)
        return EXIT_DIVERGED
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "estimates.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "role", "x", "y", "x_est", "y_est"])
        for k in range(net.n_nodes):
            w.writerow([k, "anchor" if net.is_anchor(k) else "sensor", *map(repr, map(float, net.positions[k])),
                        *map(repr, map(float, est[k]))])
    dataio.export_results([res], {}, {(algo, cfg.nlos_ratio, 0): trace}, args.out)
    print(_summary_line(algo, cfg.nlos_ratio, [res], 0))
    return EXIT_OK


def cmd_compare(cfg, args):
    rows, ecdfs, traces = [], {}, {}
    for ratio, result in harness.compare(cfg, args.jobs).items():
        rows.extend(result.trials)
        ecdfs.update(result.ecdfs())
        traces.update(result.traces)
        for algo in cfg.algorithms:
            print(_summary_line(algo, ratio, [r for r in result.trials if r.algorithm == algo],
                                result.diverged_count(algo)))
    dataio.export_results([r for r in rows if not r.diverged], ecdfs, traces, args.out)
    return EXIT_OK


def cmd_sweep(cfg, args):
    sweep = harness.sample_size_sweep(cfg, args.sizes, args.jobs)
    rows, ecdfs = [], {}
    for size, results in sweep.trials.items():
        name = f"stage1_bootstrap_L{size}"
        for r in results:
            r.algorithm = name
        rows.extend(r for r in results if not r.diverged)
        if any(not r.diverged for r in results):
            ecdfs[(name, cfg.nlos_ratio)] = sweep.ecdfs()[size]
        print(_summary_line(name, cfg.nlos_ratio, results, sum(r.diverged for r in results)))
    dataio.export_results(rows, ecdfs, {}, args.out)
    return EXIT_OK


def cmd_validate(cfg, args):
    net, ms = dataio.load_dataset(args.nodes, args.ranges, comm_range=cfg.comm_range)
    cfg = cfg.replace(samples_per_link=ms.samples_per_link, n_sensors=net.n_sensors)
    ratio = float("nan")
    rows, traces = [], {}
    for t in range(cfg.n_trials):
        seed = derive(cfg.master_seed, t, 7)
        stage1 = None
        if {"stage1", "stage1_stage2", "stage1_bootstrap"} & set(cfg.algorithms):
            est, res, trace = harness.run_algorithm("stage1", net, ms, cfg, seed, t, ratio)
            stage1 = (est, trace, res.gamma_used) if est is not None else None
        for algo in cfg.algorithms:
            if algo != "stage1" and algo != "nls_original" and algo != "nls_relaxed" and stage1 is None:
                rows.append(harness.TrialResult(algo, ratio, t, diverged=True))
                continue
            _, res, trace = harness.run_algorithm(algo, net, ms, cfg, seed, t, ratio, stage1=stage1)
            rows.append(res)
            if trace is not None and cfg.save_traces:
                traces[(algo, ratio, t)] = trace
    for algo in cfg.algorithms:
        mine = [r for r in rows if r.algorithm == algo]
        n_div = sum(r.diverged for r in mine)
        print(_summary_line(algo, ratio, mine, n_div))
        if n_div > cfg.max_divergence_fraction * cfg.n_trials:
            raise harness.DivergenceCapExceeded(f"{algo}: {n_div}/{cfg.n_trials} trials diverged")
    kept = [r for r in rows if not r.diverged]
    dataio.export_results(kept, _ecdfs(kept, lambda r: (r.algorithm, r.nlos_ratio)), traces, args.out)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        cfg = _load(args, parser)
        return COMMANDS[args.command](cfg, args)
    except harness.DivergenceCapExceeded as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (dataio.ConfigError, dataio.DatasetError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
