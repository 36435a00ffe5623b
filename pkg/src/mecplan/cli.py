"""Command-line entry point: ``mecplan <command> ...`` or ``python -m mecplan``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .demand import DemandError
from .multiway_cut import CutError
from .scenario import (
    DEMAND_FILE,
    HANDOVER_FILE,
    PRESETS,
    TOPOLOGY_FILE,
    generate_scenario,
    grouped_scenario,
    preset,
    ring_scenario,
    validate_scenario,
)
from .topology import CoverError, TopologyError

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _config(args, **extra) -> ex.SweepConfig:
    over = {
        "hour": args.hour,
        "budgets": args.budget,
        "b_dc": args.b_dc,
        "b_link": args.b_link,
        "b_sar_grid": args.b_sar,
        "out_dir": args.out,
        "mode": getattr(args, "mode", None),
        "max_paths": args.max_paths,
        "jobs": args.jobs,
        "resilience": False if args.no_resilience else None,
    }
    over.update(extra)
    return ex.SweepConfig.from_json(args.config, **over)


def cmd_generate(args) -> int:
    if args.layout == "ring":
        s = ring_scenario(args.k)
    elif args.layout == "grouped":
        s = grouped_scenario(n_groups=args.k, seed=args.seed)
    else:
        over = {k: v for k, v in {
            "n_leaf_dcs": args.leaves, "n_core_dcs": args.cores, "bs_per_leaf": args.bs_per_leaf, "area_km": args.area_km,
            "n_bs": args.n_bs,
        }.items() if v is not None}
        if ("n_leaf_dcs" in over or "bs_per_leaf" in over) and args.n_bs is None:
            over["n_bs"] = None
        s = generate_scenario(preset(args.layout, seed=args.seed, **over))
    paths = s.write(args.out)
    for name in ("topology", "demand", "handover"):
        print(f"wrote {paths[name]}")
    return EXIT_OK


def cmd_validate(args) -> int:
    d = Path(args.scenario)
    if not d.is_dir():
        print(f"error: scenario directory {d} does not exist", file=sys.stderr)
        return EXIT_USAGE
    rep = validate_scenario(d / TOPOLOGY_FILE, d / DEMAND_FILE, d / HANDOVER_FILE)
    print(rep)
    return EXIT_OK if rep.ok else EXIT_INFEASIBLE


def cmd_solve(args) -> int:
    cfg = _config(args, b_sar_grid=[args.b_sar])
    inp = ex.load_inputs(args.scenario, cfg.hour)
    budget = cfg.budgets[0]
    sol = ex.solve(inp, budget, cfg.cost_model(args.b_sar), cfg.options(), cfg.mode,
                   force_merge_to_one=args.force_merge_to_one)
    out = Path(cfg.out_dir)
    _write(out / "plan.json", sol.plan.to_json(sol.costs))
    if sol.trace is not None:
        _write(out / "trace.csv", sol.trace.to_csv())
    c = sol.costs
    print(f"serving DCs: {' '.join(sol.plan.serving_dcs)}")
    print(f"total cost {c.total:.6g} (dc {c.dc_cost:.6g}, link {c.link_cost:.6g}, sar {c.sar_cost:.6g}); total SAR {sol.plan.total_sar:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    scenarios = args.scenario or cfg.scenarios
    if not scenarios:
        raise ValueError("no scenario given")
    out = Path(cfg.out_dir)
    for sc in scenarios:
        rows = ex.run_sweep(cfg, sc)
        target = out / "sweep.csv" if len(scenarios) == 1 else out / Path(sc).name / "sweep.csv"
        _write(target, ex.to_csv(rows, ex.SWEEP_COLUMNS))
        print(f"wrote {target} ({len(rows)} rows)")
    return EXIT_OK


def cmd_compare_fixed(args) -> int:
    extra = {"fixed_dcs": args.fixed.split(",") if args.fixed else None, "b_dc_grid": args.b_dc_grid, "mec_b_sar": args.mec_b_sar}
    cfg = _config(args, **extra)
    inp = ex.load_inputs(args.scenario, cfg.hour)
    rep = ex.compare_fixed(cfg, inp)
    out = Path(cfg.out_dir)
    _write(out / "compare_fixed.json", json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
    _write(out / "dc_cost_curves.csv", ex.to_csv(rep.curves, ex.CURVE_COLUMNS))
    print(f"fixed DCs {','.join(rep.fixed_dcs)}: {rep.covered_fraction:.1%} of demand within {rep.budget} ms")
    for m in rep.mec:
        print(f"b_sar {m['b_sar']:g}: 1+1 needs {m['capacity_ratio']:.3f}x the MEC DC capacity; MEC spare is {m['spare_ratio']:.3f} of the 1+1 spare")
    return EXIT_OK


def cmd_gap(args) -> int:
    over = dict(args.preset_override or [])
    extra = {"seeds": args.seeds, "preset": args.preset, "timing": True if args.timing else None}
    if over:
        extra["preset_overrides"] = over
    cfg = _config(args, **extra)
    rows = ex.run_gap(cfg)
    cols = ex.GAP_COLUMNS + (ex.TIMING_COLUMNS if cfg.timing else [])
    out = Path(cfg.out_dir)
    _write(out / "gap.csv", ex.to_csv(rows, cols))
    summary = ex.gap_summary(rows)
    if cfg.timing:
        for key, s in summary.items():
            sel = [r for r in rows if repr(r["budget"]) == key]
            s["time_ratio"] = sum(r["greedy_s"] for r in sel) / max(1e-12, sum(r["oracle_s"] for r in sel))
    _write(out / "gap_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for key, s in summary.items():
        print(f"budget {key} ms: greedy = oracle on {s['equal_fraction']:.0%} of {s['points']} points, worst ratio {s['max_ratio']:.4f}")
    return EXIT_OK


def _override(text: str):
    key, _, val = text.partition("=")
    if not key or not val:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mecplan", description="Resilient mobile edge cloud capacity planning.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, mode=True, grid=True):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--hour", type=int)
        p.add_argument("--budget", type=_floats, help="RTT budget(s) in ms, comma separated")
        p.add_argument("--b-dc", dest="b_dc", type=float)
        p.add_argument("--b-link", dest="b_link", type=float)
        if grid:
            p.add_argument("--b-sar", dest="b_sar", type=_floats, help="SAR price grid, comma separated")
        else:
            p.add_argument("--b-sar", dest="b_sar", type=float, default=0.0, help="SAR price")
        p.add_argument("--max-paths", dest="max_paths", type=int)
        p.add_argument("--no-resilience", action="store_true")
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output directory")
        if mode:
            p.add_argument("--mode", choices=["greedy", "oracle"])

    p = sub.add_parser("generate", help="write a synthetic scenario directory")
    p.add_argument("--layout", default="tiny", choices=sorted(PRESETS) + ["ring", "grouped"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-k", type=int, default=4, help="leaves (ring) or groups (grouped)")
    p.add_argument("--leaves", type=int)
    p.add_argument("--cores", type=int)
    p.add_argument("--bs-per-leaf", dest="bs_per_leaf", type=int)
    p.add_argument("--n-bs", dest="n_bs", type=int, help="total BS count, spread over the leaves")
    p.add_argument("--area-km", dest="area_km", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("validate", help="check a scenario directory")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("solve", help="plan one (hour, budget, b_sar) point")
    p.add_argument("scenario")
    common(p, grid=False)
    p.add_argument("--force-merge-to-one", action="store_true")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="cost breakdown over budgets and SAR prices")
    p.add_argument("scenario", nargs="*")
    common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare-fixed", help="1+1 fixed DCs against MEC shared spare")
    p.add_argument("scenario")
    common(p)
    p.add_argument("--fixed", help="comma-separated fixed DC ids")
    p.add_argument("--b-dc-grid", dest="b_dc_grid", type=_floats)
    p.add_argument("--mec-b-sar", dest="mec_b_sar", type=_floats)
    p.set_defaults(fn=cmd_compare_fixed)

    p = sub.add_parser("gap", help="greedy against exhaustive search over seeds")
    common(p, mode=False)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--set", dest="preset_override", type=_override, action="append",
                   help="preset override key=value, e.g. n_core_dcs=0")
    p.add_argument("--timing", action="store_true", help="add wall-time columns (not reproducible)")
    p.set_defaults(fn=cmd_gap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ex.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.uncovered:
            print("uncovered BSs: " + " ".join(exc.uncovered), file=sys.stderr)
        return EXIT_INFEASIBLE
    except CoverError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FileNotFoundError, TopologyError, DemandError, CutError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
