"""Batch front-end: single campaigns, margin sweeps, scheme comparisons.

Every output file starts with a provenance comment line carrying the config
hash and master seed, so any result is reproducible from its header; the CSV
header row follows.  Exit codes: 0 success, 1 runtime failure, 2 bad config.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .config import SimConfig, load_config
from .controllers import (CBRS, DYNAMIC, MODIFIED_LSA, OFF, SEMI_STATIC,
                          SEMI_STATIC_AREA, calibrate_margin)
from .errors import ConfigurationError, SolverError
from .optim import brute_force_power_oracle, load_problem, solve_power_problem
from .simcore import run_campaign, run_campaign_detailed

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _provenance(cfg: SimConfig, scheme: str) -> str:
    return f"# config_sha256={cfg.config_hash()} seed={cfg.seed} scheme={scheme}"


def _write_csv(path: Path, cfg: SimConfig, scheme: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(_provenance(cfg, scheme) + "\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _write_cdf(path: Path, cfg: SimConfig, scheme: str, samples) -> None:
    n = len(samples)
    rows = [(f"{v:.6f}", f"{(i + 1) / n:.8f}") for i, v in enumerate(samples)]
    _write_csv(path, cfg, scheme, ["rate_bps", "cumulative_fraction"], rows)


def _write_summary_json(path: Path, cfg: SimConfig, payload: dict) -> None:
    payload = dict(payload)
    payload["config_sha256"] = cfg.config_hash()
    payload["config"] = cfg.raw
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def cmd_run(cfg: SimConfig, out_dir: Path) -> int:
    summary, rows = run_campaign_detailed(cfg.campaign())
    scheme = cfg.scheme.scheme
    _write_summary_json(out_dir / "summary.json", cfg, summary.to_dict())
    _write_csv(out_dir / "per_ue_rates.csv", cfg, scheme,
               ["iteration", "ue", "network", "technology", "mean_rate_bps"],
               ([r["iteration"], r["ue"], r["network"], r["technology"],
                 f"{r['mean_rate_bps']:.6f}"] for r in rows))
    _write_cdf(out_dir / "cdf_outdoor.csv", cfg, scheme, summary.outdoor.samples_bps)
    _write_cdf(out_dir / "cdf_indoor.csv", cfg, scheme, summary.indoor.samples_bps)
    print(f"run complete: scheme={scheme} outdoor_mean={summary.outdoor.mean_rate_bps:.0f} "
          f"indoor_mean={summary.indoor.mean_rate_bps:.0f} "
          f"indoor_power={summary.mean_indoor_bs_power_mw:.4g} mW")
    return EXIT_OK


def cmd_sweep(cfg: SimConfig, out_dir: Path) -> int:
    scheme = cfg.scheme.scheme
    if scheme not in (SEMI_STATIC, SEMI_STATIC_AREA):
        raise ConfigurationError(
            f"sweep requires scheme semi_static or semi_static_area, got {scheme!r}")

    def simulate(gamma_db):
        if gamma_db is None:
            return run_campaign(cfg.campaign(indoor_enabled=False))
        return run_campaign(cfg.campaign(
            scheme=dataclasses.replace(cfg.scheme, gamma_db=float(gamma_db))))

    result = calibrate_margin(simulate, cfg.sweep_gammas_db, cfg.sweep_degradation_target)
    rows = [["indoor_off", f"{result.baseline_p10_bps:.6f}", "0.00", "0", "0"]]
    rows += [[f"{r.gamma_db:.1f}", f"{r.outdoor_p10_bps:.6f}", f"{100 * r.degradation:.2f}",
              f"{r.mean_indoor_power_mw:.6g}", f"{r.mean_indoor_rate_bps:.6f}"]
             for r in result.rows]
    _write_csv(out_dir / "sweep.csv", cfg, scheme,
               ["gamma_db", "outdoor_p10_bps", "degradation_pct",
                "mean_indoor_power_mw", "mean_indoor_rate_bps"], rows)
    _write_summary_json(out_dir / "sweep_summary.json", cfg, {
        "scheme": scheme,
        "chosen_gamma_db": result.margin.gamma_db,
        "met_target": result.met_target,
        "degradation_target": cfg.sweep_degradation_target,
        "baseline_outdoor_p10_bps": result.baseline_p10_bps,
    })
    print(f"sweep complete: chosen gamma_db={result.margin.gamma_db:.1f} "
          f"(target met: {result.met_target})")
    return EXIT_OK


def cmd_compare(cfg: SimConfig, out_dir: Path, schemes=None) -> int:
    names = tuple(schemes) if schemes else cfg.compare_schemes
    known = (MODIFIED_LSA, CBRS, SEMI_STATIC, SEMI_STATIC_AREA, DYNAMIC, OFF)
    for name in names:
        if name not in known:
            raise ConfigurationError(f"unknown scheme {name!r} in compare list")
    table = []
    for name in names:
        scheme_cfg = dataclasses.replace(cfg.scheme, scheme=name)
        if name in cfg.compare_gamma_db:
            scheme_cfg = dataclasses.replace(scheme_cfg, gamma_db=cfg.compare_gamma_db[name])
        summary = run_campaign(cfg.campaign(scheme=scheme_cfg))
        for net, metrics in (("outdoor", summary.outdoor), ("indoor", summary.indoor)):
            _write_cdf(out_dir / f"cdf_{name}_{net}.csv", cfg, name, metrics.samples_bps)
            table.append([name, net, f"{metrics.mean_rate_bps:.6f}",
                          f"{metrics.ci95_bps:.6f}", f"{metrics.p10_rate_bps:.6f}",
                          f"{summary.mean_indoor_bs_power_mw:.6g}"])
        print(f"compare: {name} outdoor_p10={summary.outdoor.p10_rate_bps:.0f} "
              f"indoor_mean={summary.indoor.mean_rate_bps:.0f} "
              f"power={summary.mean_indoor_bs_power_mw:.4g} mW")
    _write_csv(out_dir / "comparison.csv", cfg, "+".join(names),
               ["scheme", "network", "mean_rate_bps", "ci95_bps", "p10_rate_bps",
                "mean_indoor_power_mw"], table)
    return EXIT_OK


def cmd_oracle(problem_path: Path, out_path: Path | None, grid: int) -> int:
    problem = load_problem(problem_path)
    solved = solve_power_problem(problem)
    oracle = brute_force_power_oracle(problem, grid)
    payload = {
        "goal": problem.goal,
        "solver": {"p_tx_mw": solved.p_tx_mw.tolist(),
                   "objective": solved.objective_value,
                   "status": solved.solver_status},
        "grid_oracle": {"p_tx_mw": oracle.p_tx_mw.tolist(),
                        "objective": oracle.objective_value,
                        "grid_points_per_dim": grid},
    }
    text = json.dumps(payload, indent=2)
    if out_path is not None:
        out_path.write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remshare",
        description="Indoor/outdoor spectrum-sharing simulation campaigns")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field, e.g. "
                       "campaign.iterations=5 or scheme.name=dynamic")

    common(sub.add_parser("run", help="run one campaign"))
    common(sub.add_parser("sweep", help="calibrate the protection belt margin"))
    p_cmp = sub.add_parser("compare", help="run several schemes on identical seeds")
    common(p_cmp)
    p_cmp.add_argument("--schemes", help="comma-separated scheme list "
                       "(default from config compare.schemes)")
    p_or = sub.add_parser("oracle", help="solve a dumped power problem and "
                          "cross-check against the grid oracle")
    p_or.add_argument("--problem", required=True, help="power-problem JSON file")
    p_or.add_argument("--out", help="optional output JSON path")
    p_or.add_argument("--grid", type=int, default=200)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            out = Path(args.out) if args.out else None
            return cmd_oracle(Path(args.problem), out, args.grid)
        cfg = load_config(args.config, args.override)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir)
        schemes = args.schemes.split(",") if getattr(args, "schemes", None) else None
        return cmd_compare(cfg, out_dir, schemes)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, AssertionError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
