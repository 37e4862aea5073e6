"""Command-line interface.

Exit codes: 0 success, 1 usage or parameter error, 2 data error, 3 numeric
failure.  If MARKETSTATES_OUT_DIR is set, relative output paths are placed
under it.  Grid syntaxes: integer ranges '2..10' or '2,3,5'; float grids
'0:0.1:1' (start:step:stop, inclusive) or '0,0.5,0.9'.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .corrmat import EpochSpec, epoch_correlations, power_map
from .errors import DataError, NumericError
from .geometry import classical_mds, dimension_fidelity, similarity_matrix
from .ingest import ContinuityPolicy, load_panel, load_prices, load_sector_map, log_returns, save_panel
from .pipeline import (
    PipelineConfig,
    correlation_arrays,
    emit_plot_data,
    load_arrays,
    parse_float_grid,
    parse_int_range,
    run_pipeline,
    series_from_arrays,
    trajectory_report_payload,
)
from .rmt import (
    WishartSpec,
    l1_to_analytic,
    outside_support_fraction,
    pooled_eigenvalues,
    spectrum_from_eigenvalues,
)
from .sector import SECTOR_PRESETS, displacement, sector_state_pipeline
from .serialize import load_state_model, save_arrays, save_state_model, write_csv, write_json
from .states import optimize_over_grid, select_optimum
from .trajectory import analyze_trajectory, classify_catalog, cut_window, load_event_catalog, window_from_dates


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _out_path(raw: str) -> Path:
    base = os.environ.get("MARKETSTATES_OUT_DIR", "")
    path = Path(raw)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _out_dir(raw: str) -> Path:
    base = os.environ.get("MARKETSTATES_OUT_DIR", "")
    path = Path(raw)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _epoch_spec(args) -> EpochSpec:
    return EpochSpec(window=args.window, shift=args.shift)


def _add_epoch_flags(parser) -> None:
    parser.add_argument("--window", type=int, default=20,
                        help="return days per epoch (default 20)")
    parser.add_argument("--shift", type=int, default=1,
                        help="days the epoch advances (default 1)")


def _cmd_ingest(args) -> int:
    panel = load_prices(args.prices, ContinuityPolicy(max_consecutive_missing=args.max_gap))
    if args.sectors:
        mapping = load_sector_map(args.sectors)
        panel.sector_of = {t: mapping[t] for t in panel.tickers if t in mapping}
    out = _out_path(args.out)
    save_panel(panel, out)
    print(f"kept {panel.n_stocks} stocks x {panel.n_days} days -> {out}")
    for name, reason in panel.dropped.items():
        print(f"dropped {name}: {reason}")
    return 0


def _cmd_corr(args) -> int:
    panel = load_panel(args.panel)
    series = epoch_correlations(log_returns(panel), _epoch_spec(args))
    if args.epsilon:
        series = power_map(series, args.epsilon)
    out = _out_path(args.out)
    save_arrays(out, **correlation_arrays(series))
    print(f"{series.n_epochs} epochs of {series.n_labels}x{series.n_labels} "
          f"matrices (epsilon {args.epsilon}) -> {out}")
    return 0


def _cmd_rmt_validate(args) -> int:
    spec = WishartSpec(N=args.n, T=args.t, sigma2=args.sigma2,
                       ensemble_size=args.realizations, seed=args.seed)
    eigenvalues = pooled_eigenvalues(spec, epsilon=args.epsilon, workers=args.workers)
    density = spectrum_from_eigenvalues(eigenvalues, bins=args.bins,
                                        Q=spec.Q, sigma2=args.sigma2)
    report = {
        "N": spec.N,
        "T": spec.T,
        "Q": spec.Q,
        "realizations": spec.ensemble_size,
        "epsilon": args.epsilon,
        "support": [float(density.lambda_min), float(density.lambda_max)],
        "l1_to_analytic": float(l1_to_analytic(density, sigma2=args.sigma2)),
        "outside_support_fraction": float(outside_support_fraction(
            eigenvalues, spec.Q, sigma2=args.sigma2)),
        "zero_fraction": float(density.zero_fraction),
    }
    for key in ("Q", "support", "l1_to_analytic", "outside_support_fraction", "zero_fraction"):
        print(f"{key}: {report[key]}")
    if args.out:
        write_json(_out_path(args.out), report)
    return 0


def _cmd_mds(args) -> int:
    arrays = load_arrays(args.corr)
    series = series_from_arrays(arrays, EpochSpec())
    sim = similarity_matrix(series)
    embedding = classical_mds(sim, D=args.dim, warn=False)
    out = _out_dir(args.out_dir)
    coords = embedding.coordinates
    padded = np.zeros((coords.shape[0], 3))
    padded[:, :min(coords.shape[1], 3)] = coords[:, :3]
    dates = [m.start_date for m in series.matrices]
    write_csv(out / "map_coords.csv", ["epoch", "date", "x", "y", "z"],
              [(i + 1, dates[i], padded[i, 0], padded[i, 1], padded[i, 2])
               for i in range(coords.shape[0])])
    dims = [d for d in (1, 2, 3, 4) if d <= sim.size - 1]
    write_json(out / "map_meta.json", {
        "eigenvalues": [float(v) for v in embedding.eigenvalues],
        "n_clipped": embedding.n_clipped,
        "clipped_mass": embedding.clipped_mass,
        "dimension_fidelity": {str(d): float(v) for d, v in dimension_fidelity(sim, dims)},
    })
    print(f"{coords.shape[0]} epochs -> {out / 'map_coords.csv'}")
    return 0


def _cmd_states_optimize(args) -> int:
    panel = load_panel(args.panel)
    series = epoch_correlations(log_returns(panel), _epoch_spec(args))
    surface = optimize_over_grid(series.values_stack(), parse_int_range(args.k_range),
                                 parse_float_grid(args.epsilon_grid), args.n_inits,
                                 args.seed, dim=args.dim, workers=args.workers)
    out = _out_path(args.out)
    write_csv(out, ["k", "epsilon", "sigma_d_intra", "mean_d_intra", "n_inits"],
              [(g.k, g.epsilon, g.sigma_d_intra, g.mean_d_intra, g.n_inits)
               for g in surface.grid])
    k, epsilon = select_optimum(surface, k_min=args.k_min)
    print(f"surface -> {out}")
    print(f"optimum (k >= {args.k_min}): k={k} epsilon={epsilon}")
    return 0


def _cmd_states_fit(args) -> int:
    from .states import fit_states

    panel = load_panel(args.panel)
    model, run, embedding = fit_states(log_returns(panel), _epoch_spec(args),
                                       args.k, args.epsilon, args.n_inits,
                                       args.seed, dim=args.dim)
    out = _out_dir(args.out_dir)
    save_state_model(model, out / "model.json")
    emit_plot_data(model, embedding, out, prefix="states_")
    occupancy = ", ".join(f"S{s + 1}={c}" for s, c in enumerate(model.occupancy()))
    print(f"model -> {out / 'model.json'}")
    print(f"occupancy: {occupancy}")
    print(f"mean correlation by state: "
          + ", ".join(repr(round(v, 6)) for v in model.state_mean_corr))
    return 0


def _cmd_sectors_fit(args) -> int:
    panel = load_panel(args.panel)
    if args.sectors:
        mapping = load_sector_map(args.sectors)
        panel.sector_of = {t: mapping[t] for t in panel.tickers if t in mapping}
    if args.preset:
        k, epsilon = SECTOR_PRESETS[args.preset]
    else:
        if args.k is None or args.epsilon is None:
            raise DataError("pass --k and --epsilon, or --preset")
        k, epsilon = args.k, args.epsilon
    model, run, embedding = sector_state_pipeline(
        log_returns(panel), _epoch_spec(args), k, epsilon, args.n_inits,
        args.seed, dim=args.dim, include_self_pairs=args.include_self_pairs,
    )
    out = _out_dir(args.out_dir)
    save_state_model(model, out / "sector_model.json")
    emit_plot_data(model, embedding, out, prefix="sectors_")
    print(f"sector model ({len(model.labels)} sectors, k={k}, epsilon={epsilon}) "
          f"-> {out / 'sector_model.json'}")
    return 0


def _cmd_sectors_displace(args) -> int:
    stock = load_state_model(args.stock_model)
    sect = load_state_model(args.sector_model)
    report = displacement(stock.state_of, sect.state_of)
    payload = {
        "histogram": {str(d): c for d, c in report.histogram.items()},
        "max_abs_displacement": report.max_abs_displacement,
        "n_epochs": report.n_epochs,
    }
    write_json(_out_path(args.out), payload)
    for d in sorted(report.histogram):
        print(f"d={d:+d}: {report.histogram[d]} epochs")
    print(f"report -> {_out_path(args.out)}")
    return 0


def _cmd_trajectory(args) -> int:
    panel = load_panel(args.panel)
    returns = log_returns(panel)
    spec = _epoch_spec(args)
    if args.mode == "catalog":
        if not args.events:
            raise DataError("trajectory catalog needs --events")
        catalog = load_event_catalog(args.events)
        reports, failures = classify_catalog(returns, catalog, threshold=args.threshold,
                                             width_days=args.width, epsilon=args.epsilon,
                                             spec=spec, workers=args.workers)
        payload = {"events": [trajectory_report_payload(r) for r in reports],
                   "failures": failures}
        write_json(_out_path(args.out), payload)
        for report in reports:
            print(f"{report.name}: var_ratio={report.var_ratio:.4f} {report.classification}")
        for name, message in failures.items():
            print(f"{name}: FAILED ({message})", file=sys.stderr)
        return 0
    if args.start and args.end:
        window = window_from_dates(returns, args.start, args.end,
                                   name=args.name, spec=spec)
    elif args.center:
        window = cut_window(returns, args.center, width_days=args.width,
                            name=args.name, spec=spec)
    else:
        raise DataError("pass --center (with --width) or --start and --end")
    report = analyze_trajectory(window, threshold=args.threshold,
                                epsilon=args.epsilon, dim=args.dim)
    write_json(_out_path(args.out), trajectory_report_payload(report))
    print(f"{report.name}: {window.n_epochs} epochs, "
          f"var_ratio={report.var_ratio:.4f} -> {report.classification}")
    return 0


def _cmd_run(args) -> int:
    cfg = PipelineConfig.from_file(args.config)
    if args.out_dir:
        cfg.out_dir = str(_out_dir(args.out_dir))
    code, manifest = run_pipeline(cfg, force=args.force, workers=args.workers)
    for name, entry in manifest["stages"].items():
        detail = entry.get("error") or entry.get("reason") or ""
        print(f"{name}: {entry['status']}" + (f" ({detail})" if detail else ""))
    print(f"manifest -> {Path(cfg.out_dir) / 'manifest.json'}")
    return code


def _cmd_demo(args) -> int:
    from .demo import run_demo

    out_dir = args.out_dir or os.environ.get("MARKETSTATES_OUT_DIR") or "demo_out"
    code, manifest = run_demo(out_dir, workers=args.workers, force=args.force)
    for name, entry in manifest["stages"].items():
        print(f"{name}: {entry['status']}")
    print(f"artifacts under {out_dir}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="marketstates", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load prices, apply the continuity policy, save a panel")
    p.add_argument("--prices", required=True)
    p.add_argument("--sectors", default="")
    p.add_argument("--max-gap", type=int, default=2,
                   help="max consecutive missing prices before a ticker is dropped")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("corr", help="epoch correlation matrices for a saved panel")
    p.add_argument("--panel", required=True)
    _add_epoch_flags(p)
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="power-map exponent applied to the matrices (default 0)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corr)

    p = sub.add_parser("rmt-validate",
                       help="sample a Wishart ensemble and compare to the analytic law")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="")
    p.set_defaults(func=_cmd_rmt_validate)

    p = sub.add_parser("mds", help="map a correlation archive to low-dimension coordinates")
    p.add_argument("--corr", required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_mds)

    p = sub.add_parser("states", help="market-state search and fit")
    states_sub = p.add_subparsers(dest="states_command", required=True)
    q = states_sub.add_parser("optimize", help="sigma_d_intra over a (k, epsilon) grid")
    q.add_argument("--panel", required=True)
    _add_epoch_flags(q)
    q.add_argument("--k-range", default="2..8")
    q.add_argument("--epsilon-grid", default="0:0.1:0.9")
    q.add_argument("--n-inits", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--k-min", type=int, default=4)
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_states_optimize)
    q = states_sub.add_parser("fit", help="fit the state model at one operating point")
    q.add_argument("--panel", required=True)
    _add_epoch_flags(q)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--epsilon", type=float, required=True)
    q.add_argument("--n-inits", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=_cmd_states_fit)

    p = sub.add_parser("sectors", help="sector-level states and displacement")
    sectors_sub = p.add_subparsers(dest="sectors_command", required=True)
    q = sectors_sub.add_parser("fit", help="fit sector-level states")
    q.add_argument("--panel", required=True)
    q.add_argument("--sectors", default="", help="ticker,sector CSV (else the panel's map)")
    _add_epoch_flags(q)
    q.add_argument("--k", type=int)
    q.add_argument("--epsilon", type=float)
    q.add_argument("--preset", choices=sorted(SECTOR_PRESETS))
    q.add_argument("--n-inits", type=int, default=10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--include-self-pairs", action="store_true",
                   help="keep i=j pairs in intra-sector averages")
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=_cmd_sectors_fit)
    q = sectors_sub.add_parser("displace", help="stock-vs-sector state displacement histogram")
    q.add_argument("--stock-model", required=True)
    q.add_argument("--sector-model", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_sectors_displace)

    p = sub.add_parser("trajectory", help="event-window trajectory analysis")
    p.add_argument("mode", nargs="?", choices=["catalog"],
                   help="'catalog' batch-classifies an events CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--center", default="", help="event day (window midpoint)")
    p.add_argument("--start", default="", help="first window day (with --end)")
    p.add_argument("--end", default="")
    p.add_argument("--name", default="")
    p.add_argument("--events", default="", help="name,center_date CSV (catalog mode)")
    p.add_argument("--width", type=int, default=125)
    _add_epoch_flags(p)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.4)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trajectory)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--force", action="store_true", help="rerun stages even if up to date")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="", help="override the config's output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("demo", help="generate the bundled synthetic market and run everything")
    p.add_argument("--out-dir", default="")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"bad parameter: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
