"""Command-line pipeline: preprocess, discover, train, evaluate, forecast, synth.

Every subcommand is deterministic given its config and seed: rerunning with
identical inputs produces byte-identical output files. Exit codes: 0 on
success, 1 for configuration errors, 2 for data errors, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from .config import PipelineConfig, VariantSpec, load_config
from .errors import ConfigError, DataError, NumericalError
from .frame import (
    NormalizationParams,
    TimeSeriesFrame,
    impute_linear,
    load_csv,
    make_windows,
    normalize,
    save_csv,
    split_by_date,
)
from .graph import adjacency_summary, feature_select, write_edge_list
from .metrics import (
    ExperimentConfig,
    MetricsCell,
    MetricsReport,
    cell_seed,
    evaluate_cell,
    train_cell,
    write_r2_svg,
    write_report_csv,
    write_report_json,
)
from .nn.network import predict
from .nn.params import load_checkpoint, save_checkpoint
from .pcmci import pcmciplus_run
from .synth import Mechanism, ScmSpec, Term, generate
from .var import mvgc_graph


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are config errors
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="causalcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("preprocess", "load, validate, impute, and normalize the configured datasets"),
        ("discover", "run causal discovery and write edge lists plus feature selections"),
        ("train", "train forecaster checkpoints per variant and horizon"),
        ("evaluate", "score checkpoints on the test split and write metric reports"),
        ("forecast", "emit predictions from a trained checkpoint"),
        ("synth", "generate a synthetic dataset with its ground-truth graph"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="path to the YAML pipeline config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output directory")
        if name in ("train", "forecast"):
            p.add_argument("--variant", default=None,
                           help="variant name (default: all configured variants)")
        if name == "forecast":
            p.add_argument("--horizon", type=int, default=None,
                           help="lead time in months (default: all configured horizons)")
    return parser


def _load(args) -> tuple[PipelineConfig, Path]:
    config = load_config(args.config)
    if args.seed is not None:
        config = _replace(config, seed=args.seed)
    out_dir = Path(args.out if args.out is not None else config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir


def _replace(config: PipelineConfig, **kw) -> PipelineConfig:
    import dataclasses
    return dataclasses.replace(config, **kw)


def _load_frame(config: PipelineConfig, cadence: str) -> TimeSeriesFrame:
    path = config.data_path(cadence)
    if not Path(path).exists():
        raise DataError(f"input file not found: {path}")
    return load_csv(path, schema=list(config.schema) if config.schema else None,
                    cadence=cadence)


def _imputed_path(out_dir: Path, cadence: str) -> Path:
    return out_dir / "preprocessed" / f"{cadence}.imputed.csv"


def _experiment_config(config: PipelineConfig) -> ExperimentConfig:
    return ExperimentConfig(
        target=config.target, train_end=config.train_end,
        val_fraction=config.val_fraction, lookback=config.lookback,
        gru_units=config.gru_units, lstm_units=config.lstm_units,
        dense_units=config.dense_units, dropout=config.dropout,
        batch_size=config.batch_size, max_epochs=config.max_epochs,
        patience=config.patience, min_delta=config.min_delta,
        learning_rate=config.learning_rate, seed=config.seed,
    )


# -- subcommands ---------------------------------------------------------------


def cmd_preprocess(config: PipelineConfig, out_dir: Path) -> None:
    pre_dir = out_dir / "preprocessed"
    pre_dir.mkdir(parents=True, exist_ok=True)
    cadences = [c for c in ("daily", "monthly")
                if (config.data_daily if c == "daily" else config.data_monthly)]
    if not cadences:
        raise ConfigError("no data paths configured under data.daily / data.monthly")
    for cadence in cadences:
        frame = impute_linear(_load_frame(config, cadence))
        train_f, _, _ = split_by_date(frame, config.train_end, config.val_fraction)
        _, params = normalize(train_f)
        norm_frame = normalize(frame, params)[0]
        save_csv(frame, pre_dir / f"{cadence}.imputed.csv")
        save_csv(norm_frame, pre_dir / f"{cadence}.normalized.csv")
        with open(pre_dir / f"{cadence}.norm.json", "w", encoding="utf-8") as fh:
            json.dump(params.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        print(f"{cadence}: {frame.n_rows} rows, {frame.n_vars} variables "
              f"({frame.timestamps[0]} .. {frame.timestamps[-1]})")


def _discovery_frame(config: PipelineConfig, out_dir: Path, cadence: str) -> TimeSeriesFrame:
    path = out_dir / "preprocessed" / f"{cadence}.normalized.csv"
    if not path.exists():
        raise DataError(f"missing preprocessed frame {path}; run `causalcast preprocess` first")
    frame = load_csv(path, cadence=cadence)
    if config.use_train_only:
        frame, _, _ = split_by_date(frame, config.train_end, 0.0)
    return frame


def cmd_discover(config: PipelineConfig, out_dir: Path) -> None:
    disc_dir = out_dir / "discovery"
    disc_dir.mkdir(parents=True, exist_ok=True)
    cadences = config.cadences() or [c for c in ("daily", "monthly")
                                     if (config.data_daily if c == "daily" else config.data_monthly)]
    for cadence in cadences:
        frame = _discovery_frame(config, out_dir, cadence)
        for method in config.discovery_methods:
            if method == "mvgc":
                graph = mvgc_graph(frame, order=config.tau_max,
                                   alpha=config.mvgc_alpha,
                                   correction=config.mvgc_correction)
                write_edge_list(graph, disc_dir / f"mvgc.{cadence}.edges.csv")
            else:
                graph = pcmciplus_run(frame, tau_max=config.tau_max,
                                      alpha_pc=config.alpha_pc,
                                      alpha_mci=config.alpha_mci,
                                      contemporaneous=config.contemporaneous,
                                      max_conds=config.max_conds)
                write_edge_list(graph, disc_dir / f"pcmci+.{cadence}.edges.csv",
                                include_oriented=True)
                with open(disc_dir / f"pcmci+.{cadence}.adjacency.json", "w",
                          encoding="utf-8") as fh:
                    json.dump(adjacency_summary(graph), fh, sort_keys=True, indent=1)
                    fh.write("\n")
            features = feature_select(graph, config.target)
            with open(disc_dir / f"{method}.{cadence}.features.txt", "w",
                      encoding="utf-8") as fh:
                fh.write("\n".join(features) + "\n")
            print(f"{method} on {cadence}: {graph.n_edges} edges; "
                  f"selected features: {', '.join(features)}")


def _resolve_features(config: PipelineConfig, variant: VariantSpec,
                      frame: TimeSeriesFrame, out_dir: Path) -> list[str]:
    feats = variant.features
    if isinstance(feats, tuple):
        unknown = [f for f in feats if f not in frame.names]
        if unknown:
            raise DataError(f"variant {variant.name!r} lists unknown feature(s): {unknown}")
        names = list(feats)
    elif feats == "all":
        names = list(frame.names)
    else:
        source, _, cadence = feats.partition("@")
        cadence = cadence or variant.cadence
        path = out_dir / "discovery" / f"{source}.{cadence}.features.txt"
        if not path.exists():
            raise DataError(f"missing feature list {path}; run `causalcast discover` first")
        names = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        unknown = [f for f in names if f not in frame.names]
        if unknown:
            raise DataError(f"discovered feature(s) {unknown} absent from {variant.cadence} frame")
    if config.target not in names:
        names.append(config.target)
    return [n for n in frame.names if n in names]


def _training_frame(out_dir: Path, cadence: str) -> TimeSeriesFrame:
    path = _imputed_path(out_dir, cadence)
    if not path.exists():
        raise DataError(f"missing preprocessed frame {path}; run `causalcast preprocess` first")
    return load_csv(path, cadence=cadence)


def cmd_train(config: PipelineConfig, out_dir: Path, variant_name: str | None) -> None:
    variants = [config.variant(variant_name)] if variant_name else list(config.variants)
    if not variants:
        raise ConfigError("no variants configured")
    exp = _experiment_config(config)
    for variant in variants:
        frame = _training_frame(out_dir, variant.cadence)
        features = _resolve_features(config, variant, frame, out_dir)
        model_dir = out_dir / "models" / variant.name
        model_dir.mkdir(parents=True, exist_ok=True)
        for horizon in config.horizons:
            steps = config.horizon_steps(variant.cadence, horizon)
            seed = cell_seed(config.seed, variant.name, horizon)
            model, history, context = train_cell(frame, features, steps, exp, seed)
            metadata = {
                "variant": variant.name,
                "cadence": variant.cadence,
                "horizon_months": horizon,
                "horizon_steps": steps,
                "features": features,
                "target": config.target,
                "seed": seed,
                "train_end": config.train_end.isoformat(),
                "val_fraction": config.val_fraction,
                "normalization": context["norm_params"].to_dict(),
            }
            save_checkpoint(model, model_dir / f"h{horizon}.json", metadata)
            with open(model_dir / f"h{horizon}.history.json", "w", encoding="utf-8") as fh:
                json.dump(history, fh, sort_keys=True, indent=1)
                fh.write("\n")
            print(f"{variant.name} h={horizon}: trained {len(history['train_loss'])} epochs, "
                  f"best epoch {history['best_epoch']}")


def _evaluate_checkpoint(config: PipelineConfig, out_dir: Path, variant: VariantSpec,
                         horizon: int) -> MetricsCell:
    path = out_dir / "models" / variant.name / f"h{horizon}.json"
    if not path.exists():
        raise DataError(f"missing checkpoint for (variant={variant.name}, horizon={horizon}): {path}")
    model, meta = load_checkpoint(path)
    frame = _training_frame(out_dir, variant.cadence)
    params = NormalizationParams.from_dict(meta["normalization"])
    _, _, test_f = split_by_date(frame, dt.date.fromisoformat(meta["train_end"]),
                                 meta["val_fraction"])
    test_n = normalize(test_f, params)[0]
    windows = make_windows(test_n, meta["features"], meta["target"],
                           model.lookback, meta["horizon_steps"])
    t_idx = params.names.index(meta["target"])
    mean, std = float(params.mean[t_idx]), float(params.std[t_idx])
    context = {"test_windows": windows, "target_mean": mean, "target_std": std}
    metrics, n_samples = evaluate_cell(model, context)
    return MetricsCell(
        variant=variant.name, horizon=horizon,
        rmse=metrics["rmse"], rmse_pct=metrics["rmse_pct"],
        mae=metrics["mae"], mae_pct=metrics["mae_pct"], r2=metrics["r2"],
        n_samples=n_samples, n_features=len(meta["features"]),
        parameter_count=model.parameter_count(),
    )


def cmd_evaluate(config: PipelineConfig, out_dir: Path) -> None:
    if not config.variants:
        raise ConfigError("no variants configured")
    report_dir = out_dir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    for cadence in config.cadences():
        cells = []
        for variant in config.variants:
            if variant.cadence != cadence:
                continue
            for horizon in config.horizons:
                cells.append(_evaluate_checkpoint(config, out_dir, variant, horizon))
        metadata = {
            "target": config.target,
            "cadence": cadence,
            "seed": config.seed,
            "train_end": config.train_end.isoformat(),
            "val_fraction": config.val_fraction,
            "lookback": config.lookback,
            "horizons": list(config.horizons),
        }
        report = MetricsReport(tuple(cells), metadata)
        write_report_json(report, report_dir / f"metrics.{cadence}.json")
        write_report_csv(report, report_dir / f"metrics.{cadence}.csv")
        write_r2_svg(report, report_dir / f"r2.{cadence}.svg",
                     title=f"R2 by lead time ({cadence})")
        print(f"{cadence}: wrote {len(cells)} cells "
              f"({len({c.variant for c in cells})} variants x {len(config.horizons)} horizons)")


def _advance(date: dt.date, cadence: str, steps: int) -> dt.date:
    if cadence == "daily":
        return date + dt.timedelta(days=steps)
    month_index = date.year * 12 + (date.month - 1) + steps
    return dt.date(month_index // 12, month_index % 12 + 1, 1)


def cmd_forecast(config: PipelineConfig, out_dir: Path, variant_name: str | None,
                 horizon: int | None) -> None:
    variants = [config.variant(variant_name)] if variant_name else list(config.variants)
    horizons = [horizon] if horizon is not None else list(config.horizons)
    fc_dir = out_dir / "forecasts"
    fc_dir.mkdir(parents=True, exist_ok=True)
    for variant in variants:
        frame = _training_frame(out_dir, variant.cadence)
        for h in horizons:
            path = out_dir / "models" / variant.name / f"h{h}.json"
            if not path.exists():
                raise DataError(f"missing checkpoint for (variant={variant.name}, horizon={h}): {path}")
            model, meta = load_checkpoint(path)
            params = NormalizationParams.from_dict(meta["normalization"])
            frame_n = normalize(frame, params)[0]
            steps = meta["horizon_steps"]
            lookback = model.lookback
            windows = make_windows(frame_n, meta["features"], meta["target"], lookback, steps)
            preds = predict(model, windows.inputs)
            t_idx = params.names.index(meta["target"])
            preds = preds * float(params.std[t_idx]) + float(params.mean[t_idx])
            lines = ["window_end,target_date,prediction"]
            for s in range(windows.n_samples):
                end = frame.timestamps[s + lookback - 1]
                target_date = _advance(end, variant.cadence, steps)
                lines.append(f"{end.isoformat()},{target_date.isoformat()},{float(preds[s])!r}")
            out_path = fc_dir / f"{variant.name}.h{h}.csv"
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
            print(f"{variant.name} h={h}: wrote {windows.n_samples} predictions to {out_path}")


def _scm_from_config(section: dict) -> tuple[ScmSpec, int, str]:
    known = {"variables", "mechanisms", "n", "burn_in", "seed", "cadence"}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in synth: {', '.join(unknown)}")
    if "variables" not in section:
        raise ConfigError("synth config needs a variables list")
    mechanisms = []
    for rec in section.get("mechanisms", ()):
        terms = tuple(Term(t["cause"], int(t["lag"]), float(t["coeff"]))
                      for t in rec.get("terms", ()))
        mechanisms.append(Mechanism(
            effect=rec["effect"], terms=terms,
            noise_std=float(rec.get("noise_std", 1.0)),
            nonlinearity=rec.get("nonlinearity", "linear"),
        ))
    spec = ScmSpec(
        variables=tuple(section["variables"]),
        mechanisms=tuple(mechanisms),
        seed=int(section.get("seed", 0)),
        burn_in=int(section.get("burn_in", 200)),
    )
    return spec, int(section.get("n", 1000)), section.get("cadence", "daily")


def cmd_synth(config: PipelineConfig, out_dir: Path) -> None:
    if not config.synth:
        raise ConfigError("config has no synth section")
    spec, n, cadence = _scm_from_config(config.synth)
    synth_dir = out_dir / "synth"
    synth_dir.mkdir(parents=True, exist_ok=True)
    frame, truth = generate(spec, n, cadence=cadence)
    save_csv(frame, synth_dir / "frame.csv")
    write_edge_list(truth, synth_dir / "truth.edges.csv")
    print(f"synth: {frame.n_rows} rows, {frame.n_vars} variables, "
          f"{truth.n_edges} true edges")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config, out_dir = _load(args)
        if args.command == "preprocess":
            cmd_preprocess(config, out_dir)
        elif args.command == "discover":
            cmd_discover(config, out_dir)
        elif args.command == "train":
            cmd_train(config, out_dir, args.variant)
        elif args.command == "evaluate":
            cmd_evaluate(config, out_dir)
        elif args.command == "forecast":
            cmd_forecast(config, out_dir, args.variant, args.horizon)
        elif args.command == "synth":
            cmd_synth(config, out_dir)
    except ConfigError as exc:
        print(f"error:config: {_one_line(exc)}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error:data: {_one_line(exc)}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error:numerical: {_one_line(exc)}", file=sys.stderr)
        return 3
    return 0


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
