"""Command-line pipeline: generate synthetic data, scan lags, train experts,
build the stacked ensemble, and emit reports and plot data.

Commands are idempotent: identical config and seed produce byte-identical
outputs. All writes go through a temp-file rename, and inputs are never
mutated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Sequence, Tuple

from . import ensemble as ens
from . import lagscan, metrics, presets, search
from .mlp import TrainConfig, save_expert, train, init, predict
from .preprocess import FeatureSpec, WarmupError, assemble, dominant_cycle
from .timeseries import (
    CsvFormatError,
    MonthStamp,
    TimeSeries,
    parse_csv,
    render_csv,
    synthesize_economy,
)

__all__ = ["main", "PipelineConfig", "load_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _atomic_write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _require_keys(data: Mapping[str, object], allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass(frozen=True)
class SyntheticParams:
    seed: int = 1
    months: int = 156
    cycle_period: int = 12
    noise_scale: float = 0.1


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline configuration (JSON with a versioned schema)."""

    csv_path: str | None
    synthetic: SyntheticParams | None
    target: str
    train_range: Tuple[MonthStamp, MonthStamp]
    test_range: Tuple[MonthStamp, MonthStamp]
    networks: Tuple[object, ...]
    sub_hidden_layers: Tuple[int, ...]
    master_hidden_layers: Tuple[int, ...]
    train: TrainConfig
    master_train: TrainConfig
    scan_max_lag: int
    scan_inputs: Tuple[str, ...] | None
    search: search.ArchitectureGrid | None
    restarts: Dict[str, object] | None
    validation_months: int
    out_dir: str
    leaky_selection: bool


# Pipeline-level epoch defaults. The library TrainConfig default (5000 epochs)
# suits single-network fitting; a whole ensemble run wants shorter schedules,
# and a briefly-trained master generalizes better on near-collinear expert
# predictions.
DEFAULT_SUB_EPOCHS = 120
DEFAULT_MASTER_EPOCHS = 60


def _parse_train_config(data: Mapping[str, object], where: str, default_epochs: int) -> TrainConfig:
    _require_keys(
        data,
        {"learning_rate", "init_weight_bound", "max_epochs", "target_error", "rng_seed"},
        where,
    )
    merged = {"max_epochs": default_epochs, **data}
    return TrainConfig(**merged)


def _parse_range(value: object, where: str) -> Tuple[MonthStamp, MonthStamp]:
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(f"{where} must be a [first, last] pair of YYYY-MM strings")
    first, last = MonthStamp.parse(value[0]), MonthStamp.parse(value[1])
    if first > last:
        raise ConfigError(f"{where} is not ordered: {first} > {last}")
    return first, last


def load_config(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return config_from_dict(data)


def config_from_dict(data: Mapping[str, object]) -> PipelineConfig:
    _require_keys(
        data,
        {
            "schema_version",
            "data",
            "target",
            "train_range",
            "test_range",
            "networks",
            "sub_hidden_layers",
            "master_hidden_layers",
            "train",
            "master_train",
            "scan",
            "search",
            "restarts",
            "validation_months",
            "out_dir",
            "leaky_selection",
        },
        "config",
    )
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")

    source = data.get("data")
    if not isinstance(source, dict):
        raise ConfigError("config needs a 'data' object with 'csv_path' or 'synthetic'")
    _require_keys(source, {"csv_path", "synthetic"}, "data")
    csv_path = source.get("csv_path")
    synthetic = None
    if "synthetic" in source:
        _require_keys(
            source["synthetic"], {"seed", "months", "cycle_period", "noise_scale"}, "data.synthetic"
        )
        synthetic = SyntheticParams(**source["synthetic"])
    if (csv_path is None) == (synthetic is None):
        raise ConfigError("exactly one of data.csv_path or data.synthetic is required")
    if csv_path is not None and not csv_path:
        raise ConfigError("data.csv_path must be non-empty")

    train_cfg = _parse_train_config(data.get("train", {}), "train", DEFAULT_SUB_EPOCHS)
    if "master_train" in data:
        master_cfg = _parse_train_config(data["master_train"], "master_train", DEFAULT_MASTER_EPOCHS)
    else:
        master_cfg = replace(train_cfg, max_epochs=DEFAULT_MASTER_EPOCHS)

    networks = data.get("networks", list(presets.NETWORK_NAMES))
    if not isinstance(networks, list) or not networks:
        raise ConfigError("networks must be a non-empty list")
    for entry in networks:
        if isinstance(entry, str):
            if entry not in presets.NETWORK_NAMES:
                raise ConfigError(f"unknown preset {entry!r}")
        elif isinstance(entry, dict):
            _require_keys(entry, {"name", "features", "hidden_layers"}, "networks[]")
            if "name" not in entry or "features" not in entry:
                raise ConfigError("explicit network entries need 'name' and 'features'")
        else:
            raise ConfigError("network entries must be preset names or objects")

    scan_cfg = data.get("scan", {})
    _require_keys(scan_cfg, {"max_lag", "inputs"}, "scan")
    scan_inputs = scan_cfg.get("inputs")
    if scan_inputs is not None:
        scan_inputs = tuple(str(n) for n in scan_inputs)

    grid = None
    if data.get("search") is not None:
        sb = data["search"]
        _require_keys(sb, {"hidden_layer_counts", "nodes_per_layer_candidates"}, "search")
        grid = search.ArchitectureGrid(
            hidden_layer_counts=tuple(sb.get("hidden_layer_counts", (1, 2))),
            nodes_per_layer_candidates=tuple(sb.get("nodes_per_layer_candidates", (2, 4, 8, 16))),
            train_config=train_cfg,
        )

    restarts = data.get("restarts")
    if restarts is not None:
        _require_keys(restarts, {"max_restarts", "target_srm"}, "restarts")
        restarts = {
            "max_restarts": int(restarts.get("max_restarts", 20)),
            "target_srm": restarts.get("target_srm"),
        }

    out_dir = data.get("out_dir", "out")
    if not out_dir:
        raise ConfigError("out_dir must be non-empty")

    return PipelineConfig(
        csv_path=csv_path,
        synthetic=synthetic,
        target=str(data.get("target", "activity")),
        train_range=_parse_range(data.get("train_range", ["1992-01", "1999-12"]), "train_range"),
        test_range=_parse_range(data.get("test_range", ["2000-01", "2003-12"]), "test_range"),
        networks=tuple(networks),
        sub_hidden_layers=tuple(data.get("sub_hidden_layers", [4])),
        master_hidden_layers=tuple(data.get("master_hidden_layers", [4])),
        train=train_cfg,
        master_train=master_cfg,
        scan_max_lag=int(scan_cfg.get("max_lag", 12)),
        scan_inputs=scan_inputs,
        search=grid,
        restarts=restarts,
        validation_months=int(data.get("validation_months", 24)),
        out_dir=str(out_dir),
        leaky_selection=bool(data.get("leaky_selection", False)),
    )


def _load_sources(config: PipelineConfig) -> Dict[str, TimeSeries]:
    if config.csv_path is not None:
        with open(config.csv_path, "r", encoding="utf-8") as fh:
            return parse_csv(fh.read())
    p = config.synthetic
    bundle = synthesize_economy(p.seed, p.months, p.cycle_period, p.noise_scale)
    return dict(bundle.series)


def _detect_cycle(sources: Mapping[str, TimeSeries], config: PipelineConfig) -> int:
    target = sources[config.target].slice_range(*config.train_range)
    try:
        return dominant_cycle(target)
    except ValueError:
        return 12


def _network_name(entry: object) -> str:
    return entry if isinstance(entry, str) else str(entry["name"])


def _network_features(entry: object, cycle_period: int, target: str) -> List[FeatureSpec]:
    if isinstance(entry, str):
        return presets.preset_features(entry, cycle_period, target)
    return [FeatureSpec.from_dict(f) for f in entry["features"]]


def _build_sub_specs(
    config: PipelineConfig, cycle_period: int
) -> List[ens.SubNetworkSpec]:
    specs = []
    for i, entry in enumerate(config.networks):
        features = _network_features(entry, cycle_period, config.target)
        hidden = config.sub_hidden_layers
        if isinstance(entry, dict) and entry.get("hidden_layers"):
            hidden = tuple(entry["hidden_layers"])
        cfg = replace(config.train, rng_seed=config.train.rng_seed + i)
        specs.append(
            ens.SubNetworkSpec(
                name=_network_name(entry),
                features=tuple(features),
                hidden_layers=tuple(hidden),
                train_config=cfg,
            )
        )
    return specs


def _selection_ranges(
    config: PipelineConfig,
) -> Tuple[Tuple[MonthStamp, MonthStamp], Tuple[MonthStamp, MonthStamp]]:
    """(core training range, validation range) for model selection."""
    if config.leaky_selection:
        return config.train_range, config.test_range
    first, last = config.train_range
    total = last.months_since(first) + 1
    val_months = min(config.validation_months, total - 12)
    if val_months < 2:
        raise ConfigError("train range too short to carve a validation sub-range")
    val_first = last.plus(-(val_months - 1))
    return (first, val_first.plus(-1)), (val_first, last)


def _optimize_sub_specs(
    config: PipelineConfig,
    specs: List[ens.SubNetworkSpec],
    sources: Mapping[str, TimeSeries],
) -> List[ens.SubNetworkSpec]:
    """Apply architecture search and/or Sharpe-maximizing restarts per sub,
    returning specs whose seeds/shapes reproduce the selected experts.
    Selection logs land under out_dir/logs."""
    core_range, val_range = _selection_ranges(config)
    logs_dir = os.path.join(config.out_dir, "logs")
    out = []
    for spec in specs:
        m_core = assemble(spec.features, sources, config.target, None, *core_range)
        m_val = assemble(spec.features, sources, config.target, None, *val_range)
        hidden = spec.hidden_layers
        if config.search is not None:
            grid = replace(config.search, train_config=spec.train_config)
            outcome = search.search_best_net(grid, m_core, m_val)
            hidden = outcome.best_architecture[1:-1]
            _atomic_write(
                os.path.join(logs_dir, f"search_{spec.name}.csv"),
                search.search_log_csv(outcome, timings=False),
            )
        cfg = spec.train_config
        if config.restarts is not None:
            ro = search.maximize_sharpe(
                (m_core.width, *hidden, 1),
                m_core,
                m_val,
                cfg,
                target_srm=config.restarts["target_srm"],
                max_restarts=config.restarts["max_restarts"],
                base_seed=cfg.rng_seed,
            )
            cfg = replace(cfg, rng_seed=ro.expert.rng_seed)
            _atomic_write(
                os.path.join(logs_dir, f"restarts_{spec.name}.csv"),
                search.restart_log_csv(ro, timings=False),
            )
        out.append(replace(spec, hidden_layers=tuple(hidden), train_config=cfg))
    return out


def _effective_train_range(config: PipelineConfig) -> Tuple[MonthStamp, MonthStamp]:
    if config.search is None and config.restarts is None:
        return config.train_range
    core_range, _ = _selection_ranges(config)
    return core_range if not config.leaky_selection else config.train_range


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    bundle = synthesize_economy(args.seed, args.months, args.cycle_period, args.noise_scale)
    out_dir = args.out
    _atomic_write(os.path.join(out_dir, "bundle.csv"), render_csv(bundle.series))
    _atomic_write(
        os.path.join(out_dir, "planted_lags.json"),
        json.dumps(bundle.metadata(), indent=1) + "\n",
    )
    print(f"wrote {os.path.join(out_dir, 'bundle.csv')} ({args.months} rows)")
    return 0


def cmd_scan(config: PipelineConfig, locale_comma: bool = False) -> int:
    sources = _load_sources(config)
    target = sources[config.target]
    names = config.scan_inputs
    if names is None:
        names = tuple(n for n in sources if n != config.target)
    missing = [n for n in names if n not in sources]
    if missing:
        raise ConfigError(f"missing input column(s): {', '.join(missing)}")
    inputs = {n: sources[n] for n in names}
    results = lagscan.scan_all(inputs, target, config.scan_max_lag, *config.train_range)
    scan_dir = os.path.join(config.out_dir, "scan")
    chosen = {}
    for name, result in results.items():
        _atomic_write(os.path.join(scan_dir, f"scan_{name}.csv"), lagscan.scan_table_csv(result))
        _atomic_write(
            os.path.join(scan_dir, f"curves_{name}.csv"), lagscan.scan_curves_csv(result)
        )
        chosen[name] = result.chosen_lag
    _atomic_write(
        os.path.join(scan_dir, "chosen_lags.json"), json.dumps(chosen, indent=1) + "\n"
    )
    print(f"scanned {len(results)} input(s); chosen lags in {scan_dir}/chosen_lags.json")
    return 0


def cmd_train(config: PipelineConfig, locale_comma: bool = False) -> int:
    sources = _load_sources(config)
    cycle = _detect_cycle(sources, config)
    specs = _build_sub_specs(config, cycle)
    if config.search is not None or config.restarts is not None:
        specs = _optimize_sub_specs(config, specs, sources)
    train_range = _effective_train_range(config)
    rows = []
    experts_dir = os.path.join(config.out_dir, "experts")
    actual = sources[config.target]
    for spec in specs:
        m_train = assemble(spec.features, sources, config.target, None, *train_range)
        m_test = assemble(spec.features, sources, config.target, None, *config.test_range)
        expert = train(init(spec.shape(), spec.train_config), m_train, spec.train_config)
        expert = replace(expert, test_range=config.test_range)
        os.makedirs(experts_dir, exist_ok=True)
        save_expert(expert, os.path.join(experts_dir, f"{spec.name}.json"))
        rows.append((spec.name, metrics.report(expert, m_train, m_test, actual)))
    _atomic_write(
        os.path.join(config.out_dir, "report.txt"),
        metrics.render_report_table(rows, locale_comma),
    )
    _atomic_write(os.path.join(config.out_dir, "report.csv"), metrics.render_report_csv(rows))
    print(f"trained {len(rows)} expert(s); report in {config.out_dir}/report.txt")
    return 0


def _write_ensemble_outputs(
    config: PipelineConfig,
    model: ens.EnsembleModel,
    sources: Mapping[str, TimeSeries],
    locale_comma: bool,
) -> None:
    out = config.out_dir
    ens.save_ensemble(model, os.path.join(out, "model"))
    _atomic_write(
        os.path.join(out, "report.txt"),
        metrics.render_report_table(list(model.reports), locale_comma),
    )
    _atomic_write(os.path.join(out, "report.csv"), metrics.render_report_csv(list(model.reports)))

    first, last = model.test_range
    actual = sources[model.target_name].slice_range(first, last)
    sub_preds = []
    for expert in model.sub_experts:
        matrix = assemble(list(expert.features), sources, model.target_name, None, first, last)
        sub_preds.append(predict(expert, matrix))
    master_pred = ens.predict_ensemble(model, sources, first, last)

    lines = ["date,actual," + ",".join(model.sub_names) + ",master"]
    for i, stamp in enumerate(actual.dates()):
        cells = [str(stamp), f"{actual.values[i]:.6g}"]
        cells += [f"{p.values[i]:.6g}" for p in sub_preds]
        cells.append(f"{master_pred.values[i]:.6g}")
        lines.append(",".join(cells))
    _atomic_write(os.path.join(out, "predictions.csv"), "\n".join(lines) + "\n")

    signals = metrics.signals_from_prediction(master_pred)
    strategy, perfect, buy_hold = metrics.equity_curves(actual, signals)
    _atomic_write(
        os.path.join(out, "equity.csv"),
        metrics.equity_long_csv(
            {"master_strategy": strategy, "perfect": perfect, "buy_hold": buy_hold}
        ),
    )


def cmd_ensemble(config: PipelineConfig, locale_comma: bool = False) -> int:
    sources = _load_sources(config)
    cycle = _detect_cycle(sources, config)
    specs = _build_sub_specs(config, cycle)
    if config.search is not None or config.restarts is not None:
        specs = _optimize_sub_specs(config, specs, sources)
    train_range = _effective_train_range(config)
    spec = ens.EnsembleSpec(
        sub_specs=tuple(specs),
        master_hidden_layers=config.master_hidden_layers,
        master_train_config=config.master_train,
    )
    model = ens.train_ensemble(spec, sources, config.target, train_range, config.test_range)
    _write_ensemble_outputs(config, model, sources, locale_comma)
    print(f"ensemble trained; artifacts in {config.out_dir}/")
    return 0


def cmd_report(config: PipelineConfig, locale_comma: bool = False) -> int:
    model_dir = os.path.join(config.out_dir, "model")
    if not os.path.isdir(model_dir):
        raise ConfigError(f"no saved model at {model_dir}; run `ensemble` first")
    model = ens.load_ensemble(model_dir)
    _atomic_write(
        os.path.join(config.out_dir, "report.txt"),
        metrics.render_report_table(list(model.reports), locale_comma),
    )
    _atomic_write(
        os.path.join(config.out_dir, "report.csv"), metrics.render_report_csv(list(model.reports))
    )
    print(f"report rewritten from {model_dir}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "out", None):
        config = replace(config, out_dir=args.out)
    if getattr(args, "leaky_selection", False):
        config = replace(config, leaky_selection=True)
    if getattr(args, "seed", None) is not None:
        if config.synthetic is None:
            raise ConfigError("--seed override requires synthetic data in the config")
        config = replace(config, synthetic=replace(config.synthetic, seed=args.seed))
    return config


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="econocast",
        description="Monthly activity-index forecasting: synthetic data, lag scans, "
        "neural experts, and a stacked master network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic bundle CSV plus planted-lag metadata")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--months", type=int, default=156)
    g.add_argument("--cycle-period", type=int, default=12)
    g.add_argument("--noise-scale", type=float, default=0.1)
    g.add_argument("--out", default="out")

    for name, helptext in (
        ("scan", "score every candidate lag of each input against the target"),
        ("train", "train the configured networks as individual experts"),
        ("ensemble", "train the eight sub-networks plus the master and emit all artifacts"),
        ("report", "re-render the report files from a saved ensemble"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override the synthetic seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--leaky-selection", action="store_true")
        p.add_argument("--locale-comma", action="store_true", help="comma decimals in text tables")

    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        config = _apply_overrides(load_config(args.config), args)
        handler = {
            "scan": cmd_scan,
            "train": cmd_train,
            "ensemble": cmd_ensemble,
            "report": cmd_report,
        }[args.command]
        return handler(config, locale_comma=args.locale_comma)
    except (ConfigError, CsvFormatError, WarmupError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
