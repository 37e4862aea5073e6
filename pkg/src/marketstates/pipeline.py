"""Pipeline orchestration: flat-file config, staged runs, and a hash manifest.

A run executes up to seven stages in dependency order — ingest, corr, mds,
states, sectors, trajectory, rmt — each writing its artifacts under the
output directory plus a manifest entry (input hashes, parameters, output
hashes).  A stage whose inputs, parameters, and outputs all hash the same as
the previous run is skipped, so reruns are cheap and `--force` is explicit.
Worker counts never appear in artifacts: a run is byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .corrmat import (
    CorrelationMatrix,
    EpochCorrelationSeries,
    EpochSpec,
    epoch_correlations,
    power_map,
)
from .errors import DataError, NumericError
from .geometry import classical_mds, dimension_fidelity, similarity_matrix
from .ingest import ContinuityPolicy, load_panel, load_prices, load_sector_map, log_returns, save_panel
from .rmt import (
    WishartSpec,
    l1_to_analytic,
    outside_support_fraction,
    pooled_eigenvalues,
    spectrum_from_eigenvalues,
)
from .sector import displacement, sector_series
from .serialize import (
    load_arrays,
    read_json,
    save_arrays,
    save_state_model,
    sha256_file,
    write_csv,
    write_json,
)
from .states import best_kmeans, build_state_model, optimize_over_grid, select_optimum
from .trajectory import classify_catalog, load_event_catalog

STAGE_ORDER = ("ingest", "corr", "mds", "states", "sectors", "trajectory", "rmt")


def parse_int_range(text: str) -> list[int]:
    """Integer list syntax: '4', '2..10' (inclusive), or '2,3,5'."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
        if "," in text:
            return [int(part) for part in text.split(",") if part.strip()]
        return [int(text)]
    except ValueError as exc:
        raise ValueError(f"bad integer range {text!r}: {exc}") from None


def parse_float_grid(text: str) -> list[float]:
    """Float list syntax: '0.5', 'start:step:stop' (inclusive), or '0,0.5,0.9'."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [float(v) for v in np.round(start + step * np.arange(count), 10)]
        if "," in text:
            return [float(part) for part in text.split(",") if part.strip()]
        return [float(text)]
    except ValueError as exc:
        raise ValueError(f"bad float grid {text!r}: {exc}") from None


@dataclass
class PipelineConfig:
    """Flat key=value configuration for a full pipeline run."""

    prices: str = ""
    sectors: str = ""
    events: str = ""
    out_dir: str = "out"
    max_gap: int = 2
    window: int = 20
    shift: int = 1
    epsilon_grid: list[float] = field(default_factory=lambda: [round(0.1 * i, 10) for i in range(10)])
    k_range: list[int] = field(default_factory=lambda: list(range(2, 9)))
    n_inits: int = 10
    seed: int = 0
    mds_dim: int = 3
    k_min: int = 4
    k: int = 0  # 0 means "use the grid optimum"
    epsilon: float = -1.0  # negative means "use the grid optimum"
    sector_k: int = 0  # 0 means "reuse the stock-level choice"
    sector_epsilon: float = -1.0
    threshold: float = 0.4
    width_days: int = 125
    trajectory_epsilon: float = 0.0
    rmt_realizations: int = 50
    rmt_bins: int = 100

    _PARSERS = {
        "max_gap": int, "window": int, "shift": int, "n_inits": int, "seed": int,
        "mds_dim": int, "k_min": int, "k": int, "sector_k": int,
        "rmt_realizations": int, "rmt_bins": int, "width_days": int,
        "epsilon": float, "sector_epsilon": float, "threshold": float,
        "trajectory_epsilon": float,
        "epsilon_grid": parse_float_grid, "k_range": parse_int_range,
    }

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], base: "PipelineConfig | None" = None) -> "PipelineConfig":
        config = base or cls()
        known = {f.name for f in fields(cls)}
        for key, value in mapping.items():
            if key not in known:
                raise DataError(f"unknown config key {key!r}")
            parser = cls._PARSERS.get(key, str)
            try:
                config = replace(config, **{key: parser(value)})
            except ValueError as exc:
                raise DataError(f"config key {key!r}: {exc}") from None
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        mapping: dict[str, str] = {}
        for lineno, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {raw_line!r}")
            key, _, value = line.partition("=")
            mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)

    def validate(self) -> None:
        if not self.prices:
            raise DataError("config needs a 'prices' path")
        for label, candidate in (("prices", self.prices), ("sectors", self.sectors),
                                 ("events", self.events)):
            if candidate and not Path(candidate).exists():
                raise DataError(f"{label} file {candidate!r} does not exist")
        if self.n_inits < 2:
            raise DataError("n_inits must be at least 2")

    def as_manifest_dict(self, out_dir: Path) -> dict:
        payload = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("prices", "sectors", "events", "out_dir") and value:
                value = _portable_path(value, out_dir)
            payload[f.name] = value
        return payload


def _portable_path(path: str | Path, out_dir: Path) -> str:
    """Relative to the output dir when possible, so manifests are location-free."""
    try:
        return Path(path).resolve().relative_to(out_dir.resolve()).as_posix()
    except ValueError:
        return str(path)


def series_from_arrays(arrays: dict[str, np.ndarray], spec: EpochSpec) -> EpochCorrelationSeries:
    """Rebuild an epoch correlation series from a saved array archive."""
    try:
        stack = arrays["values"]
        labels = [str(s) for s in arrays["labels"]]
        starts = [str(s) for s in arrays["start_dates"]]
        ends = [str(s) for s in arrays["end_dates"]]
    except KeyError as exc:
        raise DataError(f"correlation archive is missing array {exc}") from exc
    epsilon = float(arrays["epsilon"]) if "epsilon" in arrays else 0.0
    matrices = [
        CorrelationMatrix(values=stack[i], epoch_index=i + 1,
                          start_date=starts[i], end_date=ends[i],
                          epsilon_applied=epsilon)
        for i in range(stack.shape[0])
    ]
    return EpochCorrelationSeries(spec=spec, labels=labels, matrices=matrices,
                                  epsilon=epsilon)


def correlation_arrays(series: EpochCorrelationSeries) -> dict[str, np.ndarray]:
    return {
        "values": series.values_stack(),
        "labels": np.array(series.labels),
        "start_dates": np.array([m.start_date for m in series.matrices]),
        "end_dates": np.array([m.end_date for m in series.matrices]),
        "epsilon": np.array(series.epsilon),
    }


def emit_plot_data(model, embedding, out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Plot-ready CSVs for a fitted model: the map, transitions, state averages."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = embedding.coordinates
    n, dim = coords.shape
    if len(model.state_of) != n:
        raise ValueError(f"{len(model.state_of)} states for {n} embedded epochs")
    padded = np.zeros((n, 3))
    padded[:, :min(dim, 3)] = coords[:, :3]
    dates = model.epoch_dates or [""] * n
    coords_path = out_dir / f"{prefix}coords.csv"
    write_csv(
        coords_path,
        ["epoch", "date", "x", "y", "z", "state"],
        [
            (i + 1, dates[i], padded[i, 0], padded[i, 1], padded[i, 2], int(model.state_of[i]))
            for i in range(n)
        ],
    )
    transitions_path = out_dir / f"{prefix}transitions.csv"
    write_csv(
        transitions_path,
        ["from", "to", "count"],
        [
            (a + 1, b + 1, int(model.transition_counts[a, b]))
            for a in range(model.k)
            for b in range(model.k)
        ],
    )
    written = [coords_path, transitions_path]
    header = ["label"] + list(model.labels)
    for s, avg in enumerate(model.avg_corr_matrix, start=1):
        path = out_dir / f"{prefix}state_avg_corr_S{s}.csv"
        write_csv(path, header, [
            [model.labels[i]] + [float(v) for v in avg[i]] for i in range(avg.shape[0])
        ])
        written.append(path)
    return written


def trajectory_report_payload(report) -> dict:
    """JSON-safe row mirroring the published table columns."""
    ratio = report.var_ratio
    return {
        "name": report.name,
        "start_date": report.start_date,
        "end_date": report.end_date,
        "n_epochs": report.n_epochs,
        "var_x": report.var_x,
        "var_y": report.var_y,
        "var_z": report.var_z,
        "var_ratio": None if ratio != ratio else ratio,
        "classification": report.classification,
        "threshold": report.threshold,
        "epsilon": report.epsilon,
        "zero_variance": report.zero_variance,
        "axis_order_ok": report.axis_order_ok,
    }


# --------------------------------------------------------------------------
# stage implementations


def _fit_on_series(series, k, epsilon, n_inits, seed, dim):
    sim = similarity_matrix(power_map(series.values_stack(), epsilon))
    embedding = classical_mds(sim, D=dim, warn=False)
    run = best_kmeans(embedding.coordinates, k, n_inits, seed, epsilon)
    return build_state_model(series, run), run, embedding


def _stage_ingest(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    policy = ContinuityPolicy(max_consecutive_missing=cfg.max_gap)
    panel = load_prices(cfg.prices, policy)
    if cfg.sectors:
        mapping = load_sector_map(cfg.sectors)
        panel.sector_of = {t: mapping[t] for t in panel.tickers if t in mapping}
    save_panel(panel, out / "panel.csv")
    return [out / "panel.csv", out / "panel.csv.meta.json"]


def _stage_corr(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    panel = load_panel(out / "panel.csv")
    series = epoch_correlations(log_returns(panel), EpochSpec(cfg.window, cfg.shift))
    save_arrays(out / "corr_raw.npz", **correlation_arrays(series))
    return [out / "corr_raw.npz"]


def _stage_mds(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    arrays = load_arrays(out / "corr_raw.npz")
    series = series_from_arrays(arrays, EpochSpec(cfg.window, cfg.shift))
    sim = similarity_matrix(series)
    embedding = classical_mds(sim, D=cfg.mds_dim, warn=False)
    coords = embedding.coordinates
    padded = np.zeros((coords.shape[0], 3))
    padded[:, :min(coords.shape[1], 3)] = coords[:, :3]
    dates = [m.start_date for m in series.matrices]
    write_csv(
        out / "map_coords.csv",
        ["epoch", "date", "x", "y", "z"],
        [(i + 1, dates[i], padded[i, 0], padded[i, 1], padded[i, 2])
         for i in range(coords.shape[0])],
    )
    dims = [d for d in (1, 2, 3, 4) if d <= sim.size - 1]
    fidelity = dimension_fidelity(sim, dims)
    write_json(
        out / "map_meta.json",
        {
            "eigenvalues": [float(v) for v in embedding.eigenvalues],
            "n_clipped": embedding.n_clipped,
            "clipped_mass": embedding.clipped_mass,
            "dimension_fidelity": {str(d): float(v) for d, v in fidelity},
        },
    )
    return [out / "map_coords.csv", out / "map_meta.json"]


def _stage_states(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    arrays = load_arrays(out / "corr_raw.npz")
    series = series_from_arrays(arrays, EpochSpec(cfg.window, cfg.shift))
    surface = optimize_over_grid(
        series.values_stack(), cfg.k_range, cfg.epsilon_grid,
        cfg.n_inits, cfg.seed, dim=cfg.mds_dim, workers=workers,
    )
    write_csv(
        out / "surface.csv",
        ["k", "epsilon", "sigma_d_intra", "mean_d_intra", "n_inits"],
        [(g.k, g.epsilon, g.sigma_d_intra, g.mean_d_intra, g.n_inits) for g in surface.grid],
    )
    best_k, best_eps = select_optimum(surface, k_min=cfg.k_min)
    chosen_k = cfg.k if cfg.k > 0 else best_k
    chosen_eps = cfg.epsilon if cfg.epsilon >= 0 else best_eps
    write_json(
        out / "selected.json",
        {
            "grid_optimum": {"k": best_k, "epsilon": best_eps, "k_min": cfg.k_min},
            "fitted": {"k": chosen_k, "epsilon": chosen_eps,
                       "pinned": bool(cfg.k > 0 or cfg.epsilon >= 0)},
        },
    )
    model, run, embedding = _fit_on_series(
        series, chosen_k, chosen_eps, cfg.n_inits, cfg.seed, cfg.mds_dim
    )
    save_state_model(model, out / "model.json")
    written = emit_plot_data(model, embedding, out, prefix="states_")
    extras = [out / "surface.csv", out / "selected.json", out / "model.json"]
    sidecar = out / "model_avg_corr.npz"
    return extras + ([sidecar] if sidecar.exists() else []) + written


def _stage_sectors(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    panel = load_panel(out / "panel.csv")
    if not panel.sector_of:
        raise DataError("panel has no sector map; configure 'sectors'")
    arrays = load_arrays(out / "corr_raw.npz")
    stock_series = series_from_arrays(arrays, EpochSpec(cfg.window, cfg.shift))
    series = sector_series(stock_series, panel.sector_of)
    fitted = read_json(out / "selected.json")["fitted"]
    k = cfg.sector_k if cfg.sector_k > 0 else int(fitted["k"])
    epsilon = cfg.sector_epsilon if cfg.sector_epsilon >= 0 else float(fitted["epsilon"])
    model, run, embedding = _fit_on_series(series, k, epsilon, cfg.n_inits, cfg.seed, cfg.mds_dim)
    save_state_model(model, out / "sector_model.json")
    written = emit_plot_data(model, embedding, out, prefix="sectors_")
    stock_states = np.array(read_json(out / "model.json")["state_of"], dtype=int)
    report = displacement(stock_states, model.state_of)
    write_json(
        out / "displacement.json",
        {
            "histogram": {str(d): c for d, c in report.histogram.items()},
            "max_abs_displacement": report.max_abs_displacement,
            "n_epochs": report.n_epochs,
        },
    )
    extras = [out / "sector_model.json", out / "displacement.json"]
    sidecar = out / "sector_model_avg_corr.npz"
    return extras + ([sidecar] if sidecar.exists() else []) + written


def _stage_trajectory(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    panel = load_panel(out / "panel.csv")
    returns = log_returns(panel)
    catalog = load_event_catalog(cfg.events)
    reports, failures = classify_catalog(
        returns, catalog, threshold=cfg.threshold, width_days=cfg.width_days,
        epsilon=cfg.trajectory_epsilon, spec=EpochSpec(cfg.window, cfg.shift),
        workers=workers,
    )
    write_json(
        out / "trajectory_report.json",
        {"events": [trajectory_report_payload(r) for r in reports], "failures": failures},
    )
    write_csv(
        out / "trajectory_table.csv",
        ["name", "start_date", "end_date", "var_x", "var_y", "var_z",
         "var_ratio", "classification"],
        [(r.name, r.start_date, r.end_date, r.var_x, r.var_y, r.var_z,
          r.var_ratio, r.classification) for r in reports],
    )
    return [out / "trajectory_report.json", out / "trajectory_table.csv"]


def _stage_rmt(cfg: PipelineConfig, out: Path, workers: int) -> list[Path]:
    arrays = load_arrays(out / "corr_raw.npz")
    n_stocks = int(arrays["values"].shape[1])
    spec = WishartSpec(N=n_stocks, T=cfg.window,
                       ensemble_size=cfg.rmt_realizations, seed=cfg.seed)
    eigenvalues = pooled_eigenvalues(spec, workers=workers)
    density = spectrum_from_eigenvalues(eigenvalues, bins=cfg.rmt_bins, Q=spec.Q)
    write_json(
        out / "rmt_report.json",
        {
            "N": spec.N,
            "T": spec.T,
            "Q": spec.Q,
            "realizations": spec.ensemble_size,
            "support": [float(density.lambda_min), float(density.lambda_max)],
            "l1_to_analytic": float(l1_to_analytic(density)),
            "outside_support_fraction": float(outside_support_fraction(eigenvalues, spec.Q)),
            "zero_fraction": float(density.zero_fraction),
        },
    )
    return [out / "rmt_report.json"]


@dataclass
class _Stage:
    name: str
    enabled: bool
    reason: str
    inputs: list[Path]
    params: dict
    run: object = None


def _plan(cfg: PipelineConfig, out: Path) -> list[_Stage]:
    epoch_params = {"window": cfg.window, "shift": cfg.shift}
    stages = [
        _Stage("ingest", True, "", [Path(cfg.prices)] + ([Path(cfg.sectors)] if cfg.sectors else []),
               {"max_gap": cfg.max_gap}, _stage_ingest),
        _Stage("corr", True, "", [out / "panel.csv"], dict(epoch_params), _stage_corr),
        _Stage("mds", True, "", [out / "corr_raw.npz"],
               {**epoch_params, "mds_dim": cfg.mds_dim}, _stage_mds),
        _Stage("states", True, "", [out / "corr_raw.npz"],
               {**epoch_params, "k_range": cfg.k_range, "epsilon_grid": cfg.epsilon_grid,
                "n_inits": cfg.n_inits, "seed": cfg.seed, "mds_dim": cfg.mds_dim,
                "k_min": cfg.k_min, "k": cfg.k, "epsilon": cfg.epsilon}, _stage_states),
        _Stage("sectors", bool(cfg.sectors), "no sector map configured",
               [out / "panel.csv", out / "corr_raw.npz", out / "selected.json",
                out / "model.json"],
               {**epoch_params, "sector_k": cfg.sector_k, "sector_epsilon": cfg.sector_epsilon,
                "n_inits": cfg.n_inits, "seed": cfg.seed, "mds_dim": cfg.mds_dim},
               _stage_sectors),
        _Stage("trajectory", bool(cfg.events), "no event catalog configured",
               [out / "panel.csv"] + ([Path(cfg.events)] if cfg.events else []),
               {**epoch_params, "threshold": cfg.threshold, "width_days": cfg.width_days,
                "trajectory_epsilon": cfg.trajectory_epsilon}, _stage_trajectory),
        _Stage("rmt", True, "", [out / "corr_raw.npz"],
               {"window": cfg.window, "realizations": cfg.rmt_realizations,
                "seed": cfg.seed, "bins": cfg.rmt_bins}, _stage_rmt),
    ]
    return stages


def _hash_inputs(stage: _Stage, out: Path) -> dict[str, str]:
    hashes = {}
    for path in stage.inputs:
        if not path.exists():
            raise DataError(f"stage '{stage.name}' input {path} does not exist")
        hashes[_portable_path(path, out)] = sha256_file(path)
    return hashes


def _stage_key(input_hashes: dict[str, str], params: dict) -> str:
    blob = json.dumps({"inputs": input_hashes, "params": params}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _outputs_fresh(entry: dict, out: Path) -> bool:
    outputs = entry.get("outputs", {})
    if not outputs:
        return False
    for rel, digest in outputs.items():
        path = out / rel
        if not path.exists() or sha256_file(path) != digest:
            return False
    return True


def run_pipeline(cfg: PipelineConfig, force: bool = False,
                 workers: int = 1) -> tuple[int, dict]:
    """Run every configured stage; returns (exit code, manifest).

    The manifest is also written to ``<out_dir>/manifest.json``.  A failing
    stage records its error, halts everything downstream, and maps to the
    exit code of its error family (2 data, 3 numeric, 1 other).
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    previous = {}
    if manifest_path.exists() and not force:
        previous = read_json(manifest_path).get("stages", {})
    manifest: dict = {"config": cfg.as_manifest_dict(out), "stages": {}}
    exit_code = 0
    failed = False
    for stage in _plan(cfg, out):
        if failed:
            manifest["stages"][stage.name] = {"status": "halted",
                                              "reason": "an upstream stage failed"}
            continue
        if not stage.enabled:
            manifest["stages"][stage.name] = {"status": "not configured",
                                              "reason": stage.reason}
            continue
        try:
            input_hashes = _hash_inputs(stage, out)
            key = _stage_key(input_hashes, stage.params)
            prior = previous.get(stage.name, {})
            if (not force and prior.get("key") == key
                    and prior.get("status") in ("ok", "skipped")
                    and _outputs_fresh(prior, out)):
                manifest["stages"][stage.name] = {
                    "status": "skipped",
                    "key": key,
                    "inputs": input_hashes,
                    "params": stage.params,
                    "outputs": prior["outputs"],
                }
                continue
            written = stage.run(cfg, out, workers)
            manifest["stages"][stage.name] = {
                "status": "ok",
                "key": key,
                "inputs": input_hashes,
                "params": stage.params,
                "outputs": {_portable_path(p, out): sha256_file(p) for p in written},
            }
        except DataError as exc:
            manifest["stages"][stage.name] = {"status": "failed", "error": str(exc)}
            exit_code, failed = 2, True
        except NumericError as exc:
            manifest["stages"][stage.name] = {"status": "failed", "error": str(exc)}
            exit_code, failed = 3, True
        except (ValueError, OSError) as exc:
            manifest["stages"][stage.name] = {"status": "failed",
                                              "error": f"{type(exc).__name__}: {exc}"}
            exit_code, failed = 1, True
    write_json(manifest_path, manifest)
    return exit_code, manifest
