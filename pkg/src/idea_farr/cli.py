"""Command-line front end: ``idea-farr {fit,farr,simulate,sweep}``.

Every option can also come from a JSON object passed with ``--config``; flags
given on the command line win. Keys in the config file use the option names
with underscores (``generation_interval``, ``out_dir``...). Each run writes a
``<command>.config.json`` sidecar recording the resolved configuration and
the artifacts produced.

Exit status: 0 ok, 1 usage/config error, 2 data/validation error,
3 fit/estimation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import date
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import farr, idea, sir, timeseries
from .errors import (DomainError, EstimationError, FitError, ParseError,
                     ValidationError)
from .timeseries import format_float

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT = 0, 1, 2, 3

_DATA_DEFAULTS = {
    "input": None,
    "out_dir": ".",
    "input_format": "dated",
    "kind": "incident",
    "date_column": "date",
    "count_column": "count",
    "generation_interval": None,
    "origin": None,
    "output_format": "csv",
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "fit": {**_DATA_DEFAULTS, "target": "incidence", "method": "log_linear",
            "horizon": 0, "rolling": False, "rolling_min": 3},
    "farr": {**_DATA_DEFAULTS, "confidence_level": 0.95, "wave_threshold": 1.0,
             "min_run": 1},
    "simulate": {"r0": None, "rho": None, "population": sir.DEFAULT_POPULATION, "i0": 1.0,
                 "generations": 15, "out_dir": ".", "output_format": "csv"},
    "sweep": {"r0_grid": "1:10:20", "rho_grid": "0.5:1:20", "population": sir.DEFAULT_POPULATION,
              "i0": 1.0, "generations": 15, "workers": 1, "out_dir": ".",
              "output_format": "csv"},
}

REQUIRED = {
    "fit": ("input", "generation_interval"),
    "farr": ("input", "generation_interval"),
    "simulate": ("r0", "rho"),
    "sweep": (),
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_data_options(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("input", nargs="?", default=S, help="input CSV path")
    p.add_argument("--input-format", choices=["dated", "generations"], default=S,
                   help="dated counts (date,count) or binned generations (generation,incidence)")
    p.add_argument("--kind", choices=["incident", "cumulative"], default=S,
                   help="dated counts are incident or cumulative (default incident)")
    p.add_argument("--date-column", default=S)
    p.add_argument("--count-column", default=S)
    p.add_argument("--generation-interval", type=float, default=S, metavar="DAYS",
                   help="generation interval in days (required)")
    p.add_argument("--origin", default=S, metavar="YYYY-MM-DD",
                   help="start of generation 0 (default: first observation)")


def _add_output_options(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--out-dir", default=S, help="directory for output files")
    p.add_argument("--output-format", choices=["csv", "json"], default=S,
                   help="format of tabular outputs (default csv)")
    p.add_argument("--config", help="JSON file with default option values")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="idea-farr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("fit", help="fit the IDEA model to an incidence series")
    _add_data_options(p)
    p.add_argument("--target", choices=["incidence", "cumulative"], default=S)
    p.add_argument("--method", choices=["log_linear", "nonlinear_refine"], default=S)
    p.add_argument("--horizon", type=int, default=S, help="generations to project (0 = none)")
    p.add_argument("--rolling", action="store_true", default=S,
                   help="refit at each successive generation")
    p.add_argument("--rolling-min", type=int, default=S,
                   help="generations in the first rolling window (default 3)")
    _add_output_options(p)

    p = sub.add_parser("farr", help="Farr's K per tetrad, pooled K and wave alarms")
    _add_data_options(p)
    p.add_argument("--confidence-level", type=float, default=S)
    p.add_argument("--wave-threshold", type=float, default=S)
    p.add_argument("--min-run", type=int, default=S)
    _add_output_options(p)

    p = sub.add_parser("simulate", help="damped SIR run with IDEA overlay")
    p.add_argument("--r0", type=float, default=S)
    p.add_argument("--rho", type=float, default=S)
    p.add_argument("--population", type=float, default=S)
    p.add_argument("--i0", type=float, default=S)
    p.add_argument("--generations", type=int, default=S)
    _add_output_options(p)

    p = sub.add_parser("sweep", help="SIR/IDEA distance over an (r0, rho) grid")
    p.add_argument("--r0-grid", default=S, help="START:STOP:NUM or comma list")
    p.add_argument("--rho-grid", default=S, help="START:STOP:NUM or comma list")
    p.add_argument("--population", type=float, default=S)
    p.add_argument("--i0", type=float, default=S)
    p.add_argument("--generations", type=int, default=S)
    p.add_argument("--workers", type=int, default=S)
    _add_output_options(p)
    return parser


def resolve_config(command: str, flags: dict, config_path: str | None) -> dict:
    cfg = dict(DEFAULTS[command])
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys for {command!r}: {unknown}")
        cfg.update(loaded)
    cfg.update(flags)
    missing = [k for k in REQUIRED[command] if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")
    return cfg


def parse_grid(spec) -> np.ndarray:
    """``"a:b:n"`` -> ``linspace(a, b, n)``; ``"x,y,z"`` or a list -> explicit values."""
    try:
        if isinstance(spec, (list, tuple)):
            values = [float(x) for x in spec]
        elif ":" in spec:
            a, b, n = spec.split(":")
            values = np.linspace(float(a), float(b), int(n)).tolist()
        else:
            values = [float(x) for x in spec.split(",") if x.strip()]
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse grid {spec!r}") from None
    if not values:
        raise ConfigError(f"empty grid {spec!r}")
    return np.asarray(values)


def _round(obj):
    if isinstance(obj, float):
        return float(format_float(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


class _Writer:
    def __init__(self, out_dir: str, fmt: str):
        self.out_dir = Path(out_dir)
        self.fmt = fmt
        self.artifacts: list[str] = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return self.out_dir / name

    def table(self, stem: str, header: Sequence[str], rows) -> None:
        rows = list(rows)
        if self.fmt == "json":
            records = [{h: (None if v is None else _native(v)) for h, v in zip(header, r)}
                       for r in rows]
            self.json(f"{stem}.json", records)
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        self._path(f"{stem}.csv").write_text(buf.getvalue(), encoding="utf-8")

    def json(self, name: str, obj) -> None:
        text = json.dumps(_round(obj), indent=2, sort_keys=False) + "\n"
        self._path(name).write_text(text, encoding="utf-8")

    def sidecar(self, command: str, cfg: dict) -> None:
        self.json(f"{command}.config.json",
                  {"command": command, "config": cfg, "artifacts": list(self.artifacts)})


def _native(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _parse_date(value) -> date | None:
    if value is None:
        return None
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"origin must be an ISO date, got {value!r}") from None


def load_series(cfg: dict) -> timeseries.GenerationSeries:
    path = Path(cfg["input"])
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read input file {path}: {exc}") from None
    origin = _parse_date(cfg["origin"])
    interval = float(cfg["generation_interval"])
    if cfg["input_format"] == "generations":
        return timeseries.read_generation_csv(data, interval, origin)
    schema = timeseries.CsvSchema(cfg["date_column"], cfg["count_column"])
    raw = timeseries.ingest_csv(data, schema, cfg["kind"])
    if raw.kind is timeseries.SeriesKind.CUMULATIVE:
        raw = timeseries.cumulative_to_pseudo_incidence(raw)
    return timeseries.aggregate_to_generations(raw, interval, origin)


def _date_of(series: timeseries.GenerationSeries, generation: int):
    d = series.generation_start(int(generation))
    return d.isoformat() if d is not None else None


def _check_choices(cfg: dict, key: str, choices: Sequence[str]) -> None:
    if cfg[key] not in choices:
        raise ConfigError(f"{key} must be one of {list(choices)}, got {cfg[key]!r}")


def _check_data_cfg(cfg: dict) -> None:
    _check_choices(cfg, "input_format", ["dated", "generations"])
    _check_choices(cfg, "kind", ["incident", "cumulative"])
    _check_choices(cfg, "output_format", ["csv", "json"])
    if not float(cfg["generation_interval"]) > 0:
        raise ConfigError("generation_interval must be positive")
    _parse_date(cfg["origin"])


def cmd_fit(cfg: dict) -> int:
    _check_data_cfg(cfg)
    _check_choices(cfg, "target", ["incidence", "cumulative"])
    _check_choices(cfg, "method", ["log_linear", "nonlinear_refine"])
    if int(cfg["horizon"]) < 0 or int(cfg["rolling_min"]) < 2:
        raise ConfigError("horizon must be >= 0 and rolling_min >= 2")

    series = load_series(cfg)
    fit = idea.fit_idea(series, cfg["target"], cfg["method"])
    out = _Writer(cfg["out_dir"], cfg["output_format"])
    out.json("fit.json", {
        **fit.to_dict(),
        "target": fit.target,
        "accelerating": fit.params.accelerating,
        "generation_interval_days": series.generation_interval_days,
    })

    fitted = idea.idea_curve(fit.params, series.model_times)
    out.table("fit_curve", ["generation", "t", "observed", "fitted"],
              zip(series.generations, series.model_times, series.values, fitted))

    if int(cfg["horizon"]) > 0:
        proj = idea.project(fit.params, len(series), int(cfg["horizon"]),
                            series.generation_interval_days)
        gens = series.i0_generation + proj.generations - 1
        out.table("projection", ["generation", "t", "date", "projected"],
                  ((g, t, _date_of(series, g), v)
                   for g, t, v in zip(gens, proj.generations, proj.values)))

    if cfg["rolling"]:
        rows = []
        for n in range(int(cfg["rolling_min"]), len(series) + 1):
            try:
                f = idea.fit_idea(series.head(n), cfg["target"], cfg["method"])
            except FitError as exc:
                print(f"rolling fit through generation {series.generations[n - 1]} skipped: {exc}",
                      file=sys.stderr)
                continue
            g = int(series.generations[n - 1])
            rows.append((g, _date_of(series, g), f.params.r0, f.params.d, f.n_used, f.sse))
        out.table("rolling_fit", ["generation", "date", "r0", "d", "n_used", "sse"], rows)

    out.sidecar("fit", cfg)
    flag = " (accelerating regime)" if fit.params.accelerating else ""
    print(f"generation interval {format_float(series.generation_interval_days)} days; "
          f"r0={format_float(fit.params.r0)} d={format_float(fit.params.d)}{flag}; "
          f"sse={format_float(fit.sse)} n_used={fit.n_used}")
    return EXIT_OK


def cmd_farr(cfg: dict) -> int:
    _check_data_cfg(cfg)
    level = float(cfg["confidence_level"])
    if not 0 < level < 1:
        raise ConfigError("confidence_level must lie in (0, 1)")
    if not float(cfg["wave_threshold"]) > 0 or int(cfg["min_run"]) < 1:
        raise ConfigError("wave_threshold must be positive and min_run >= 1")

    series = load_series(cfg)
    estimates = farr.compute_k_series(series, level)
    out = _Writer(cfg["out_dir"], cfg["output_format"])
    out.table("k_series", ["t_start", "k", "log_k_variance", "ci_low", "ci_high", "valid"],
              ((e.t_start, e.k, e.log_k_variance, e.ci_low, e.ci_high, e.valid)
               for e in estimates))
    # d decreases in K, so the upper K limit gives the lower d limit
    out.table("k_to_d", ["t_start", "date", "k", "d", "d_low", "d_high"],
              ((e.t_start, _date_of(series, e.t_start), e.k, e.d,
                farr.k_to_d(e.ci_high), farr.k_to_d(e.ci_low))
               for e in estimates if e.valid))

    pooled = {m: farr.pool_k(estimates, m).to_dict()
              for m in ("geometric_mean", "inverse_variance")}
    out.json("pooled.json", {
        **pooled,
        "n_tetrads": len(estimates),
        "n_invalid": sum(not e.valid for e in estimates),
        "generation_interval_days": series.generation_interval_days,
    })

    alarms = farr.detect_waves(estimates, float(cfg["wave_threshold"]), int(cfg["min_run"]))
    out.json("alarms.json", [{"t_start": t, "k": k, "date": _date_of(series, t)}
                             for t, k in alarms])
    out.sidecar("farr", cfg)

    gm = pooled["geometric_mean"]
    print(f"generation interval {format_float(series.generation_interval_days)} days; "
          f"{gm['n_estimates']} valid of {len(estimates)} tetrads; "
          f"geometric-mean K={format_float(gm['k_pooled'])} d={format_float(gm['d_equivalent'])}; "
          f"{len(alarms)} wave alarm(s)")
    return EXIT_OK


def _sir_params(cfg: dict) -> sir.SirParams:
    try:
        return sir.SirParams(float(cfg["r0"]), float(cfg["rho"]),
                             float(cfg["population"]), float(cfg["i0"]))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(cfg: dict) -> int:
    _check_choices(cfg, "output_format", ["csv", "json"])
    params = _sir_params(cfg)
    n = int(cfg["generations"])
    if n < 1:
        raise ConfigError("generations must be >= 1")
    cmp = sir.compare_with_idea(params, n)
    traj = cmp.trajectory
    out = _Writer(cfg["out_dir"], cfg["output_format"])
    out.table("trajectory", ["generation", "susceptibles", "incidence", "effective_r"],
              zip(range(n + 1), traj.susceptibles, traj.incidence, traj.effective_r))
    out.table("overlay", ["generation", "sir_incidence", "idea_incidence"],
              zip(cmp.generations, cmp.sir, cmp.idea))
    out.json("simulate.json", {
        "r0_idea": cmp.idea_params.r0,
        "d": cmp.idea_params.d,
        "farr_k": sir.map_rho_to_k(params.rho),
        "delta": cmp.delta,
        "delta_normalized": cmp.delta_normalized,
        "attack_fraction": traj.attack_fraction,
        "exhausted_at": traj.exhausted_at,
        "clamped": traj.clamped,
    })
    out.sidecar("simulate", cfg)
    print(f"delta={format_float(cmp.delta)} delta/peak={format_float(cmp.delta_normalized)} "
          f"attack_fraction={format_float(traj.attack_fraction)}")
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    _check_choices(cfg, "output_format", ["csv", "json"])
    r0_grid = parse_grid(cfg["r0_grid"])
    rho_grid = parse_grid(cfg["rho_grid"])
    if int(cfg["generations"]) < 1:
        raise ConfigError("generations must be >= 1")
    try:
        result = sir.sweep_parameter_space(r0_grid, rho_grid, float(cfg["population"]),
                                           float(cfg["i0"]), int(cfg["generations"]),
                                           int(cfg["workers"]))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    out = _Writer(cfg["out_dir"], cfg["output_format"])
    if cfg["output_format"] == "json":
        out.json("sweep.json", result.to_dict())
    else:
        out.table("sweep", ["r0", "rho", "delta", "delta_normalized", "attack_fraction"],
                  result.rows())
    # worker count does not change results, so keep it out of the sidecar
    out.sidecar("sweep", {k: v for k, v in cfg.items() if k != "workers"})
    print(f"{r0_grid.size}x{rho_grid.size} sweep over {cfg['generations']} generations")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "farr": cmd_farr, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve_config(command, args, config_path)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"idea-farr {command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, DomainError) as exc:
        print(f"idea-farr {command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, EstimationError) as exc:
        print(f"idea-farr {command}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (TypeError, ValueError) as exc:
        # ill-typed values from a config file
        print(f"idea-farr {command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
