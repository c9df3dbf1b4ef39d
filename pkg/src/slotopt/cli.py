"""Command-line front end: optimize, benchmark, pack, sample, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from .baselines import nsga2, pso, random_search
from .config import (
    Config,
    ConfigError,
    build_evaluator,
    build_evolution_config,
    build_run_config,
    design_vector,
)
from .machine import SlotDesignEvaluator, efficiency_grid
from .mesa import MesaProblem, sample_subset, solve_relaxation
from .pibo import run as pibo_run
from .space import VARIABLE_NAMES
from .trace import OptimizationTrace, hits_to_target

log = logging.getLogger("slotopt")

REPORTED_CPU_RATIO = 0.5416  # reported CPU-time ratio of the surrogate method to NSGA-II


class CommandError(RuntimeError):
    """Failure that should end the command with a diagnostic."""


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def _manifest(args, command: str, seed, files: list) -> dict:
    return {
        "command": command,
        "config": str(args.config) if getattr(args, "config", None) else None,
        "output_dir": str(args.out),
        "seed": seed,
        "tool_version": __version__,
        "files": sorted(files),
    }


def regret_csv(trace: OptimizationTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "cumulative_cost", "regret"])
    for q, c, r in zip(trace.queries, trace.cumulative_cost, trace.regret()):
        w.writerow([q.t, repr(float(c)), repr(float(r))])
    return buf.getvalue()


def _seed(args, cfg: Config) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", default=0))


def cmd_optimize(args) -> int:
    cfg = Config.load(args.config)
    seed = _seed(args, cfg)
    ev = build_evaluator(cfg)
    rc = build_run_config(cfg, ev, seed)
    out = Path(args.out)
    start = time.perf_counter()
    trace = pibo_run(rc, ev)
    wall = time.perf_counter() - start
    summary = trace.summary()
    summary.update(problem=cfg.require("problem"), tool_version=__version__)
    files = {"trace.csv": trace.to_csv(), "regret.csv": regret_csv(trace)}
    inc = trace.incumbent()
    if isinstance(ev, SlotDesignEvaluator) and inc is not None:
        x = np.array(inc.x)
        slot = geo.SlotGeometry.from_design(x)
        layout = ev.layout(x)
        files["layout.csv"] = geo.layout_to_csv(layout)
        files["layout.svg"] = geo.layout_to_svg(layout, slot)
        summary["incumbent_sff"] = inc.y
    files["summary.json"] = _json(summary)
    for name, text in files.items():
        _write(out / name, text)
    _write(out / "timing.json", _json({"wall_seconds": wall, "note": "non-normative, hardware dependent"}))
    _write(out / "manifest.json", _json(_manifest(args, "optimize", seed, list(files))))
    if trace.status.startswith("aborted"):
        raise CommandError(trace.status)
    best = "none" if inc is None else f"{inc.y:.6g}"
    print(f"incumbent {best} after {len(trace)} queries (cost {trace.spent:g})")
    return 0


def _one_run(job):
    """Worker body for benchmark runs; returns (name, csv text, summary, error)."""
    text, path, method, seed, stop_at = job
    cfg = Config.from_text(text, path)
    ev = build_evaluator(cfg)
    name = f"{method}_seed{seed}"
    try:
        if method == "pibo":
            trace = pibo_run(replace(build_run_config(cfg, ev, seed), stop_at=stop_at), ev)
        elif method in ("nsga2", "pso"):
            fn = nsga2 if method == "nsga2" else pso
            trace = fn(replace(build_evolution_config(cfg, method, seed), stop_at=stop_at), ev)
        elif method == "random":
            budget = cfg.get("benchmark", "random", "budget", default=cfg.require("optimizer", "budget"))
            trace = random_search(budget, ev, seed)
        else:
            raise ConfigError(f"unknown method {method!r}")
    except Exception as err:  # noqa: BLE001 - one failed run must not sink the batch
        return name, None, None, f"{type(err).__name__}: {err}"
    return name, trace.to_csv(), trace.summary(), None


def aggregate(traces: dict, target: float, f_op: float | None) -> dict:
    """Per-method statistics from {method: [trace, ...]}."""
    out = {}
    for method, runs in traces.items():
        finals, hits = [], []
        for tr in runs:
            reg = tr.regret(f_op)
            finals.append(float(reg[-1]) if len(reg) else math.inf)
            hits.append(hits_to_target(tr.fidelities, reg, target, tr.n_fidelities))
        finals, hits = np.array(finals), np.array(hits)
        q = np.percentile(finals, [25, 50, 75]) if finals.size else [math.nan] * 3
        out[method] = {
            "runs": len(runs),
            "final_regret_median": _finite_or_none(q[1]),
            "final_regret_iqr": [_finite_or_none(q[0]), _finite_or_none(q[2])],
            "evals_to_target_median": _finite_or_none(np.median(hits)) if hits.size else None,
            "evals_to_target": [_finite_or_none(h) for h in hits],
            "reached_target": int(np.isfinite(hits).sum()),
        }
    return out


def cmd_benchmark(args) -> int:
    cfg = Config.load(args.config)
    seed = _seed(args, cfg)
    bench = cfg.section("benchmark", required=True)
    methods = list(bench.get("methods", ["pibo", "nsga2", "pso"]))
    n_seeds = int(bench.get("seeds", 20))
    ev = build_evaluator(cfg)
    f_op = getattr(ev, "f_op", None)
    value_range = bench.get("value_range", getattr(ev, "value_range", None))
    if value_range is None:
        cfg.require("benchmark", "value_range")
    target = float(bench.get("target_fraction", 0.01)) * float(value_range)
    # runs may stop once the target is hit; evaluations-to-target is unaffected
    stop_at = f_op - target if bench.get("stop_at_target", False) and f_op is not None else None
    text = Path(args.config).read_text()
    jobs = [(text, str(args.config), m, seed + k, stop_at) for m in methods for k in range(n_seeds)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    out = Path(args.out)
    traces = {m: [] for m in methods}
    runs, failures, files = [], [], []
    for (_, _, method, s, _), (name, text_csv, summary, err) in zip(jobs, results):
        if err is not None:
            failures.append({"run": name, "error": err})
            log.warning("run %s failed: %s", name, err)
            continue
        fname = f"traces/{name}.csv"
        _write(out / fname, text_csv)
        files.append(fname)
        traces[method].append(OptimizationTrace.from_csv(text_csv, summary))
        runs.append({"run": name, "method": method, "seed": s, "trace": fname, "status": summary["status"]})
    stats = aggregate(traces, target, f_op)
    ratio = None
    if "pibo" in stats and "nsga2" in stats:
        a, b = stats["pibo"]["evals_to_target_median"], stats["nsga2"]["evals_to_target_median"]
        if a is not None and b is not None and b > 0:
            ratio = a / b
    agg = {
        "problem": cfg.require("problem"),
        "tool_version": __version__,
        "seed": seed,
        "seeds": n_seeds,
        "f_op": f_op,
        "regret_reference": "known optimum" if f_op is not None else "best observed per run",
        "value_range": value_range,
        "target_regret": target,
        "methods": stats,
        "evals_ratio_pibo_over_nsga2": ratio,
        "reported_cpu_time_ratio": REPORTED_CPU_RATIO,
        "runs": runs,
        "failures": failures,
    }
    _write(out / "aggregate.json", _json(agg))
    _write(out / "manifest.json", _json(_manifest(args, "benchmark", seed, files + ["aggregate.json"])))
    for m, st in stats.items():
        print(f"{m:8s} median evals-to-target {st['evals_to_target_median']}  median final regret {st['final_regret_median']}")
    return 1 if failures else 0


def cmd_pack(args) -> int:
    cfg = Config.load(args.config)
    pack = cfg.section("pack", required=True)
    scenario = pack.get("scenario", "keystone")
    layers = int(pack.get("layers", 2))
    x = design_vector(cfg, ("pack", "design"))
    strand = float(pack.get("strand_diameter", 0.8))
    slot = geo.SlotGeometry.from_design(x)
    if scenario == "benchmark":
        clearance = float(pack.get("clearance", SlotDesignEvaluator.benchmark_clearance))
        make = lambda: geo.pack_rectangular(slot, layers, int(pack.get("columns", 2)), clearance, strand, x[5])  # noqa: E731
    elif scenario == "keystone":
        clearance = float(pack.get("clearance", SlotDesignEvaluator.clearance))
        make = lambda: geo.layout_from_design(x, layers, clearance, strand)  # noqa: E731
    else:
        raise ConfigError(f"{cfg.path}: unknown pack scenario {scenario!r} (line {cfg.line(('pack', 'scenario'))})")
    try:
        layout = make()
        sff = geo.slot_fill_factor(layout, slot)
    except geo.InfeasibleGeometry as err:
        raise CommandError(f"infeasible geometry at clearance {clearance} mm: {err}") from err
    out = Path(args.out)
    info = {
        "scenario": scenario,
        "layers": layers,
        "clearance": clearance,
        "design": dict(zip(VARIABLE_NAMES, x.tolist())),
        "sff": sff,
        "bars": len(layout.bars),
        "tool_version": __version__,
    }
    files = {"layout.csv": geo.layout_to_csv(layout), "layout.svg": geo.layout_to_svg(layout, slot), "pack.json": _json(info)}
    for name, text in files.items():
        _write(out / name, text)
    _write(out / "manifest.json", _json(_manifest(args, "pack", None, list(files))))
    print(f"{scenario} {layers}-layer SFF {sff:.4f}")
    return 0


def cmd_sample(args) -> int:
    cfg = Config.load(args.config) if args.config else Config({}, {(): 1})
    seed = _seed(args, cfg)
    matrix = args.matrix or cfg.get("sample", "matrix")
    size = args.size or cfg.get("sample", "size")
    if matrix is None or size is None:
        raise ConfigError("sample needs a matrix file and a subset size (--matrix/--size or the sample section)")
    path = Path(matrix)
    if args.config and not path.is_absolute():
        path = Path(args.config).parent / path
    C = np.loadtxt(path, delimiter=",", ndmin=2)
    problem = MesaProblem.from_covariance(C, int(size))
    sol = solve_relaxation(problem)
    subset = sample_subset(sol.xhat, problem.s, np.random.default_rng(seed))
    result = {
        "selected": list(subset.selected),
        "rejected": list(subset.rejected),
        "xhat": sol.xhat.tolist(),
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "n": problem.n,
        "rank": problem.d,
        "s": problem.s,
        "seed": seed,
        "tool_version": __version__,
    }
    text = _json(result)
    if args.out:
        _write(Path(args.out) / "sample.json", text)
    else:
        sys.stdout.write(text)
    return 0


def _read_trace(path: Path) -> OptimizationTrace:
    summary_path = path.with_name("summary.json") if path.name == "trace.csv" else None
    summary = json.loads(summary_path.read_text()) if summary_path and summary_path.exists() else None
    try:
        return OptimizationTrace.from_csv(path.read_text(), summary)
    except (ValueError, IndexError) as err:
        raise CommandError(f"{path}: schema mismatch: {err}") from err


def cmd_report(args) -> int:
    paths = [Path(p) for p in args.traces]
    if not paths:
        raise CommandError("report needs at least one trace file")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "run", "t", "cumulative_cost", "regret"])
    best = None
    for path in paths:
        tr = _read_trace(path)
        run = path.stem if path.name != "trace.csv" else path.parent.name
        method = tr.method if tr.method != "unknown" else run.split("_seed")[0]
        for q, c, r in zip(tr.queries, tr.cumulative_cost, tr.regret()):
            w.writerow([method, run, q.t, repr(float(c)), repr(float(r))])
        inc = tr.incumbent()
        if tr.names == VARIABLE_NAMES and inc is not None and (best is None or inc.y > best.y):
            best = inc
    out = Path(args.out)
    _write(out / "regret_curves.csv", buf.getvalue())
    files = ["regret_curves.csv"]
    if best is not None:
        ev = SlotDesignEvaluator()
        if args.config:
            from .config import build_slot_evaluator

            ev = build_slot_evaluator(Config.load(args.config))
        speeds = np.linspace(1000.0, 12000.0, 12)
        torques = np.linspace(10.0, 150.0, 15)
        grid = efficiency_grid(ev, np.array(best.x), speeds, torques)
        gbuf = io.StringIO()
        gw = csv.writer(gbuf, lineterminator="\n")
        gw.writerow(["speed_rpm", "torque_nm", "efficiency"])
        for i, n in enumerate(speeds):
            for j, t in enumerate(torques):
                gw.writerow([repr(float(n)), repr(float(t)), repr(float(grid[i, j]))])
        _write(out / "efficiency_grid.csv", gbuf.getvalue())
        files.append("efficiency_grid.csv")
    _write(out / "manifest.json", _json(_manifest(args, "report", None, files)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slotopt", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required)
        sp.add_argument("--out", type=Path, required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--verbose", "-v", action="store_true")

    common(sub.add_parser("optimize", help="run the multi-fidelity optimizer"))
    common(sub.add_parser("benchmark", help="compare methods over many seeds"))
    common(sub.add_parser("pack", help="pack bars into a slot and export the layout"))
    sp = sub.add_parser("sample", help="maximum-entropy subset sample from a covariance CSV")
    sp.add_argument("--config", type=Path)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--verbose", "-v", action="store_true")
    sp.add_argument("--matrix", type=Path)
    sp.add_argument("--size", type=int)
    rp = sub.add_parser("report", help="merge traces into plot-ready CSVs")
    common(rp, config_required=False)
    rp.add_argument("traces", nargs="*")
    return p


COMMANDS = {
    "optimize": cmd_optimize,
    "benchmark": cmd_benchmark,
    "pack": cmd_pack,
    "sample": cmd_sample,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CommandError, OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
