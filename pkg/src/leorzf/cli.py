"""Command-line front end.

Subcommands: campaign (Monte Carlo comparison), trial (single pass),
complexity-curve (cost-model scan) and arsvd-bench (adaptive SVD vs
full-SVD oracle). Every artifact is written atomically (temp file +
rename) into --out-dir, and everything except wall-clock timing is a
pure function of (config, master seed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import plots
from .config import ScenarioConfig, parse_config
from .errors import ConfigError, SimulationError
from .harness import (
    arsvd_benchmark,
    complexity_curve,
    ecdf,
    method_label,
    run_campaign,
    run_trial,
)


def _atomic_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list, rows) -> None:
    """UTF-8, LF endings, '.' decimals; floats via repr for exact
    round-trip and byte-stable reruns."""
    def fmt(x):
        if x is None:
            return ""
        if isinstance(x, (bool, np.bool_)):
            return str(int(x))
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            return repr(float(x))
        return str(x)

    lines = [",".join(header)]
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    _atomic_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _write_json(path: Path, payload: dict) -> None:
    _atomic_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _atomic_figure(render, path: Path) -> None:
    tmp = path.with_name(f".{path.name}.tmp.png")
    render(tmp)
    os.replace(tmp, path)


def _load_scenario(args) -> ScenarioConfig:
    overrides = list(args.set or [])
    if getattr(args, "runs", None) is not None:
        overrides.append(f"mc_runs={args.runs}")
    if getattr(args, "full_scale", False):
        overrides.append("mc_runs=500")
    if getattr(args, "eta", None):
        overrides.append(f"eta_list={args.eta}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    config_path = args.config
    if config_path is not None and not Path(config_path).exists():
        raise ConfigError(f"config file not found: {config_path}")
    return parse_config(config_path, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_campaign(args) -> int:
    cfg = _load_scenario(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    res = run_campaign(cfg, workers=args.workers)
    elapsed = time.perf_counter() - t0

    ecdf_series = {}
    for label in res.labels:
        pts = ecdf(res.pooled_rates[label])
        ecdf_series[label] = pts
        _write_csv(out / f"ecdf_{label}.csv", ["value", "cdf"], pts.tolist())
        trial_pts = ecdf(res.trial_mean_rates[label])
        _write_csv(out / f"ecdf_trialmean_{label}.csv", ["value", "cdf"],
                   trial_pts.tolist())

    _write_csv(
        out / "comparison_table.csv",
        ["eta", "savings_pct", "degradation_pct"],
        [(row.eta, row.savings_pct, row.degradation_pct) for row in res.table.rows],
    )
    curve = complexity_curve(cfg.K)
    _write_csv(out / "complexity_curve.csv", ["r", "ratio"],
               [(int(r), ratio) for r, ratio in curve])

    summary = {
        "config": cfg.echo(),
        "master_seed": res.master_seed,
        "mc_runs": res.mc_runs,
        "n_snapshots": res.n_snapshots,
        "methods": res.labels,
        "mean_sum_rate": res.mean_rate,
        "mean_cost_units": res.mean_cost,
        "mean_k_est": res.mean_k_est,
        "method_counts": res.method_counts,
        "comparison": [
            {"method": row.method_label, "eta": row.eta,
             "savings_pct": row.savings_pct, "degradation_pct": row.degradation_pct}
            for row in res.table.rows
        ],
    }
    _write_json(out / "summary.json", summary)
    # Wall clock is hardware-dependent; kept out of summary.json so
    # reruns stay byte-identical.
    _atomic_bytes(out / "timing.txt", f"campaign_wall_clock_s: {elapsed:.3f}\n".encode())

    _atomic_figure(lambda p: plots.plot_ecdfs(ecdf_series, p), out / "ecdf.png")
    _atomic_figure(lambda p: plots.plot_complexity_curve(curve, cfg.K, p),
                   out / "complexity_curve.png")

    for row in res.table.rows:
        eta = "      " if row.eta is None else f"{row.eta:6.3f}"
        print(f"{row.method_label:24s} eta={eta}  savings={row.savings_pct:7.2f}%  "
              f"sum-rate degradation={row.degradation_pct:7.3f}%")
    print(f"artifacts written to {out}  ({elapsed:.1f} s)", file=sys.stderr)
    return 0


def _cmd_trial(args) -> int:
    cfg = _load_scenario(args)
    out = _out_dir(args)
    eta = None if args.method == "conventional" else args.trial_eta
    if args.method == "wb_arsvd" and eta is None:
        raise ConfigError("wb_arsvd trial needs --trial-eta")
    result = run_trial(cfg, eta, args.trial_index, cfg.seed)
    _write_csv(
        out / "snapshots.csv",
        ["t_s", "sum_rate", "method", "k_est", "cost_units"],
        [(r.t_s, r.sum_rate, r.method, r.k_est, r.cost_units) for r in result.snapshots],
    )
    if args.dump_geometry:
        _dump_geometry(cfg, args.trial_index, out / "geometry.csv")
    _write_json(out / "summary.json", {
        "config": cfg.echo(),
        "method": result.method_label,
        "trial_index": args.trial_index,
        "mean_sum_rate": result.mean_sum_rate,
        "total_cost_units": result.total_cost_units,
    })
    _atomic_figure(lambda p: plots.plot_trial_timeseries(result.snapshots, p),
                   out / "trial_timeseries.png")
    print(f"{result.method_label}: mean sum rate {result.mean_sum_rate:.4f} bits/s/Hz, "
          f"total cost {result.total_cost_units:.0f} units")
    return 0


def _dump_geometry(cfg: ScenarioConfig, trial_index: int, path: Path) -> None:
    """Per-snapshot orbit geometry for the trial's UT layout."""
    from . import channel as ch
    from .harness import CHANNEL_STREAM, stream_seed

    rng = np.random.default_rng(stream_seed(cfg.seed, CHANNEL_STREAM, trial_index))
    uts = ch.place_users(cfg, rng)
    rows = []
    dt = 1.0 / cfg.update_rate_Hz
    for i in range(cfg.n_snapshots):
        orbit = ch.propagate_pass(cfg, uts, i * dt)
        for n, ut in enumerate(uts):
            gain = ch.los_gain(orbit.slant_range_m[n], cfg.carrier_Hz, 1.0, ut,
                               cfg.atmospheric_loss_dB)
            rows.append((
                orbit.t_s, n, float(orbit.theta_rad[n]), float(orbit.phi_rad[n]),
                float(orbit.slant_range_m[n]), 20.0 * np.log10(gain),
            ))
    _write_csv(path, ["t", "ut_index", "theta_rad", "phi_rad", "slant_range_m",
                      "gain_dB"], rows)


def _cmd_complexity_curve(args) -> int:
    out = _out_dir(args)
    curve = complexity_curve(args.K)
    _write_csv(out / "complexity_curve.csv", ["r", "ratio"],
               [(int(r), ratio) for r, ratio in curve])
    _atomic_figure(lambda p: plots.plot_complexity_curve(curve, args.K, p),
                   out / "complexity_curve.png")
    above = curve[curve[:, 1] > 1.0]
    crossover = int(above[0, 0]) if above.size else None
    print(f"K={args.K}: break-even rank {crossover}; artifacts in {out}")
    return 0


def _cmd_arsvd_bench(args) -> int:
    out = _out_dir(args)
    etas = tuple(float(v) for v in args.eta.split(",")) if args.eta else (0.9, 0.8, 0.65)
    rows = arsvd_benchmark(K=args.K, trials=args.trials, etas=etas,
                           spectrum_ratio=args.spectrum_ratio,
                           seed=args.seed if args.seed is not None else 0)
    _write_csv(
        out / "arsvd_bench.csv",
        ["eta", "trial", "k_est", "oracle_rank", "residual_energy",
         "total_energy", "used_fallback"],
        [(r.eta, r.trial, r.k_est, r.oracle_rank, r.residual_energy,
          r.total_energy, int(r.used_fallback)) for r in rows],
    )
    _atomic_figure(lambda p: plots.plot_arsvd_bench(rows, p), out / "arsvd_bench.png")
    for eta in etas:
        sub = [r for r in rows if r.eta == eta]
        match = sum(r.k_est == r.oracle_rank for r in sub) / len(sub)
        print(f"eta={eta:g}: oracle match {100*match:.1f}% over {len(sub)} matrices")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leorzf",
        description="Woodbury/arSVD Gram-inverse maintenance and LEO "
                    "multi-user RZF precoding simulator",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="scenario file (TOML or JSON)")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    common.add_argument("--out-dir", default="out", help="artifact directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="config override, repeatable")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("campaign", parents=[common],
                       help="Monte Carlo comparison across eta values")
    p.add_argument("--runs", type=int, default=None, help="override mc_runs")
    p.add_argument("--eta", default=None, help="comma list overriding eta_list")
    p.add_argument("--full-scale", action="store_true",
                   help="run the full 500-trial campaign")
    p.add_argument("--workers", type=int, default=1, help="trial worker processes")
    p.set_defaults(func=_cmd_campaign)

    p = sub.add_parser("trial", parents=[common], help="single simulated pass")
    p.add_argument("--method", choices=["conventional", "wb_arsvd"],
                   default="wb_arsvd")
    p.add_argument("--trial-eta", type=float, default=0.9,
                   help="energy threshold for wb_arsvd")
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--dump-geometry", action="store_true",
                   help="write per-snapshot orbit geometry CSV")
    p.set_defaults(func=_cmd_trial)

    p = sub.add_parser("complexity-curve", parents=[common],
                       help="cost-model ratio scan over perturbation rank")
    p.add_argument("--K", type=int, default=100, help="matrix dimension")
    p.set_defaults(func=_cmd_complexity_curve)

    p = sub.add_parser("arsvd-bench", parents=[common],
                       help="adaptive SVD vs full-SVD oracle benchmark")
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--eta", default=None, help="comma list of thresholds")
    p.add_argument("--spectrum-ratio", type=float, default=2.0)
    p.set_defaults(func=_cmd_arsvd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SimulationError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
