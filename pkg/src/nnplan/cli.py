"""Command line front end: ``plan run``, ``plan list``, ``plan verify``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .mission import SimulationLog, run_mission
from .planner import THREADS_ENV, RolloutEngine, default_threads
from .policy import MlpArchitecture
from .report import SeedRow, SweepReport, render_figures, write_plot_data, write_trajectory_csv
from .scenarios import BUILTINS, ScenarioSpec, UnknownScenario, builtin_scenario, dump_scenario, resolve_scenario

log = logging.getLogger("nnplan")


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive), ``"1,4,7"``, ``"3"`` or ``""`` (no seeds)."""
    seeds: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _check_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    probe.write_text("")
    probe.unlink()


def run_sweep(spec: ScenarioSpec, out_dir, *, threads: int = 1, figures: bool = True,
              seeds: list[int] | None = None, record_timing: bool = False) -> tuple[SweepReport, dict[int, SimulationLog]]:
    """Run every seed, write per-seed CSV/XY files, the JSON report and figures."""
    out_dir = Path(out_dir)
    _check_writable(out_dir)
    seeds = spec.seeds if seeds is None else seeds
    cfg = spec.planner_config()
    report = SweepReport(spec.name, list(spec.arch.layer_sizes), cfg.n, cfg.N_restarts)
    threads = max(1, threads)
    workers = max(1, min(threads, len(seeds)))
    inner = max(1, threads // workers)

    def one(seed):
        with RolloutEngine(cfg, inner) as eng:
            return seed, run_mission(spec.mission, cfg, seed=seed, engine=eng)

    logs: dict[int, SimulationLog] = {}
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    for seed, sim in results:
        logs[seed] = sim
        st = sim.stats
        log.info("%s seed %d: %s in %d ticks, P=%.1f m", spec.name, seed,
                 "completed" if st.completed else "NOT completed", st.ticks, st.path_length)
        write_trajectory_csv(sim, out_dir / f"{spec.name}_seed{seed}.csv", record_timing)
        write_plot_data(sim, out_dir, f"{spec.name}_seed{seed}")
        report.rows.append(SeedRow(seed, st))
    report.write(out_dir / "report.json")
    if figures and logs:
        render_figures(logs, spec.mission, out_dir, f"{spec.name} {spec.arch}")
    return report, logs


def _print_table(report: SweepReport) -> None:
    print(f"{'seed':>4} {'done':>5} {'ticks':>5} {'P[m]':>7} {'vmin':>7} {'vavg':>7} {'vmax':>7} {'|y|max':>7} {'tau[s]':>7}")
    for r in report.rows:
        s = r.stats
        print(f"{r.seed:>4} {str(s.completed):>5} {s.ticks:>5} {s.path_length:7.2f} {s.v_min:7.1f} "
              f"{s.v_avg:7.1f} {s.v_max:7.1f} {s.y_abs_max:7.2f} {s.tau_avg:7.3f}")
    agg = report.aggregates
    print(f"completed {agg['completed']}/{agg['seeds']}")
    if agg["path_length"]:
        p = agg["path_length"]
        print(f"P min/avg/max = {p['min']:.1f}/{p['avg']:.1f}/{p['max']:.1f} m")


def cmd_run(args) -> int:
    try:
        spec = resolve_scenario(args.scenario)
    except UnknownScenario as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    overrides = dict(spec.planner)
    if args.samples is not None:
        overrides["n"] = args.samples
    if args.restarts is not None:
        overrides["N_restarts"] = args.restarts
    if args.horizon is not None:
        overrides["H"] = args.horizon
    spec = replace(spec, planner=overrides)
    if args.arch:
        spec = replace(spec, arch=MlpArchitecture.parse(args.arch))
    seeds = parse_seeds(args.seeds) if args.seeds is not None else spec.seeds
    threads = args.threads if args.threads is not None else default_threads()
    try:
        report, _ = run_sweep(spec, Path(args.out), threads=threads, figures=not args.no_figures,
                              seeds=seeds, record_timing=args.record_timing)
    except OSError as e:
        print(f"error: cannot write to {args.out}: {e}", file=sys.stderr)
        return 2
    _print_table(report)
    return 0 if all(r.stats.completed for r in report.rows) else 1


def cmd_list(args) -> int:
    for name in BUILTINS:
        spec = builtin_scenario(name)
        m = spec.mission
        print(f"{name:16s} waypoints={len(m.waypoints)} static_pts={len(m.static_points)} "
              f"dynamic_pts={len(m.dynamic_points)} time_limit={m.time_limit:g}s")
    if args.export:
        out = Path(args.export)
        out.mkdir(parents=True, exist_ok=True)
        for name in BUILTINS:
            dump_scenario(builtin_scenario(name), out / f"{name}.yaml")
        print(f"exported {len(BUILTINS)} scenario files to {out}")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_checks

    return 0 if run_checks(threads=args.threads or 2) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plan", description="Online NN-parameter sampling motion planner")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario over a set of seeds")
    r.add_argument("--scenario", required=True, help="built-in name or path to a scenario YAML file")
    r.add_argument("--seeds", help="e.g. 0..9 or 0,3,5 (default: the scenario's seed list)")
    r.add_argument("--samples", type=int, help="candidates per restart (n)")
    r.add_argument("--restarts", type=int, help="number of restarts")
    r.add_argument("--horizon", type=int, help="prediction horizon H in steps")
    r.add_argument("--threads", type=int, help=f"total worker threads (default: ${THREADS_ENV} or 1)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--arch", help="layer sizes, e.g. 5,10,2")
    r.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    r.add_argument("--record-timing", action="store_true",
                   help="write per-tick planning wall-clock times into the CSVs (makes them run-dependent)")
    r.set_defaults(func=cmd_run)

    ls = sub.add_parser("list", help="list built-in scenarios")
    ls.add_argument("--export", metavar="DIR", help="also write each built-in as a YAML file")
    ls.set_defaults(func=cmd_list)

    v = sub.add_parser("verify", help="run the property and oracle checks")
    v.add_argument("--threads", type=int)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
