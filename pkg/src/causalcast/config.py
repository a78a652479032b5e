"""Declarative pipeline configuration loaded from a YAML file.

All defaults mirror the reference setup (tau_max 21, lookback 21, GRU 64 /
LSTM 128 / dense 64, dropout 0.2, batch 64, 100 epochs), so a config that
only names the data files runs the standard pipeline.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .frame import VariableMeta

_KNOWN_TOP = {"seed", "out_dir", "data", "split", "discovery", "model",
              "training", "evaluate", "variants", "synth"}
_FEATURE_SOURCES = ("all", "mvgc", "pcmci+")
_METHODS = ("mvgc", "pcmci+")


@dataclass(frozen=True)
class VariantSpec:
    """One trained model family: which frame it uses and where features come from.

    ``features`` is either an explicit list of variable names or a source
    string: ``all``, ``mvgc``, ``pcmci+``, optionally with ``@daily`` /
    ``@monthly`` to borrow a discovery result from the other cadence
    (e.g. ``pcmci+@daily`` on a monthly variant).
    """

    name: str
    cadence: str
    features: str | tuple[str, ...]

    def __post_init__(self):
        if self.cadence not in ("daily", "monthly"):
            raise ConfigError(f"variant {self.name!r}: cadence must be daily or monthly")
        if isinstance(self.features, str):
            source = self.features.split("@", 1)[0]
            if source not in _FEATURE_SOURCES:
                raise ConfigError(
                    f"variant {self.name!r}: unknown feature source {self.features!r} "
                    f"(expected one of {', '.join(_FEATURE_SOURCES)} or an explicit list)"
                )


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out_dir: str = "runs/out"
    data_daily: str | None = None
    data_monthly: str | None = None
    target: str = "Sea Ice Extent"
    schema: tuple[VariableMeta, ...] | None = None
    train_end: dt.date = dt.date(2013, 12, 31)
    val_fraction: float = 0.10
    discovery_methods: tuple[str, ...] = ("mvgc", "pcmci+")
    tau_max: int = 21
    alpha_pc: float = 0.2
    alpha_mci: float = 0.01
    mvgc_alpha: float = 0.05
    mvgc_correction: str = "benjamini-hochberg"
    contemporaneous: bool = True
    max_conds: int | None = None
    use_train_only: bool = True
    lookback: int = 21
    gru_units: int = 64
    lstm_units: int = 128
    dense_units: int = 64
    dropout: float = 0.2
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-5
    learning_rate: float = 1e-3
    horizons: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    daily_steps_per_month: int = 30
    variants: tuple[VariantSpec, ...] = ()
    synth: dict | None = None

    def cadences(self) -> list[str]:
        out = []
        for v in self.variants:
            if v.cadence not in out:
                out.append(v.cadence)
        return out

    def data_path(self, cadence: str) -> str:
        path = self.data_daily if cadence == "daily" else self.data_monthly
        if path is None:
            raise ConfigError(f"no {cadence} data path configured")
        return path

    def variant(self, name: str) -> VariantSpec:
        for v in self.variants:
            if v.name == name:
                return v
        raise ConfigError(f"unknown variant {name!r}; configured: "
                          f"{', '.join(v.name for v in self.variants) or 'none'}")

    def horizon_steps(self, cadence: str, horizon_months: int) -> int:
        """Window offset in frame rows for a lead time given in months."""
        if cadence == "monthly":
            return horizon_months
        return horizon_months * self.daily_steps_per_month


def _parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"bad date {value!r}; expected YYYY-MM-DD") from None


def _require_keys(section: dict, known: set[str], where: str) -> None:
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _default_variants(has_daily: bool, has_monthly: bool) -> tuple[VariantSpec, ...]:
    """Standard variant grid: vanilla/GC/PCMCI+ per cadence, plus the
    daily-features-on-monthly-data transfer variant when both exist."""
    out = []
    for cadence, present in (("daily", has_daily), ("monthly", has_monthly)):
        if not present:
            continue
        out.append(VariantSpec(f"DL_vanilla_{cadence}", cadence, "all"))
        out.append(VariantSpec(f"DL_GC_{cadence}", cadence, "mvgc"))
        out.append(VariantSpec(f"DL_PCMCI+_{cadence}", cadence, "pcmci+"))
    if has_daily and has_monthly:
        out.append(VariantSpec("DL_DPCMCI+_monthly", "monthly", "pcmci+@daily"))
    return tuple(out)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    _require_keys(raw, _KNOWN_TOP, "config")

    data = raw.get("data") or {}
    _require_keys(data, {"daily", "monthly", "target", "schema"}, "data")
    schema = None
    if data.get("schema"):
        schema = tuple(
            VariableMeta(
                name=rec["name"], unit=rec.get("unit", ""),
                valid_range=tuple(rec["valid_range"]) if rec.get("valid_range") else None,
            )
            for rec in data["schema"]
        )

    split = raw.get("split") or {}
    _require_keys(split, {"train_end", "val_fraction"}, "split")
    disc = raw.get("discovery") or {}
    _require_keys(disc, {"methods", "tau_max", "alpha_pc", "alpha_mci", "mvgc_alpha",
                         "correction", "contemporaneous", "max_conds", "use_train_only"},
                  "discovery")
    methods = tuple(disc.get("methods", ("mvgc", "pcmci+")))
    for m in methods:
        if m not in _METHODS:
            raise ConfigError(f"unknown discovery method {m!r} (expected mvgc or pcmci+)")

    model = raw.get("model") or {}
    _require_keys(model, {"lookback", "gru_units", "lstm_units", "dense_units", "dropout"},
                  "model")
    training = raw.get("training") or {}
    _require_keys(training, {"batch_size", "max_epochs", "patience", "min_delta",
                             "learning_rate"}, "training")
    ev = raw.get("evaluate") or {}
    _require_keys(ev, {"horizons", "daily_steps_per_month"}, "evaluate")
    horizons = tuple(int(h) for h in ev.get("horizons", (1, 2, 3, 4, 5, 6)))
    if any(h < 1 for h in horizons):
        raise ConfigError("horizons must be positive integers")

    if raw.get("variants"):
        variants = []
        for rec in raw["variants"]:
            _require_keys(rec, {"name", "cadence", "features"}, f"variant {rec.get('name')}")
            feats = rec.get("features", "all")
            if isinstance(feats, list):
                feats = tuple(str(f) for f in feats)
            variants.append(VariantSpec(rec["name"], rec.get("cadence", "monthly"), feats))
        variants = tuple(variants)
    else:
        variants = _default_variants(bool(data.get("daily")), bool(data.get("monthly")))

    return PipelineConfig(
        seed=int(raw.get("seed", 0)),
        out_dir=str(raw.get("out_dir", "runs/out")),
        data_daily=data.get("daily"),
        data_monthly=data.get("monthly"),
        target=data.get("target", "Sea Ice Extent"),
        schema=schema,
        train_end=_parse_date(split.get("train_end", dt.date(2013, 12, 31))),
        val_fraction=float(split.get("val_fraction", 0.10)),
        discovery_methods=methods,
        tau_max=int(disc.get("tau_max", 21)),
        alpha_pc=float(disc.get("alpha_pc", 0.2)),
        alpha_mci=float(disc.get("alpha_mci", 0.01)),
        mvgc_alpha=float(disc.get("mvgc_alpha", 0.05)),
        mvgc_correction=str(disc.get("correction", "benjamini-hochberg")),
        contemporaneous=bool(disc.get("contemporaneous", True)),
        max_conds=disc.get("max_conds"),
        use_train_only=bool(disc.get("use_train_only", True)),
        lookback=int(model.get("lookback", 21)),
        gru_units=int(model.get("gru_units", 64)),
        lstm_units=int(model.get("lstm_units", 128)),
        dense_units=int(model.get("dense_units", 64)),
        dropout=float(model.get("dropout", 0.2)),
        batch_size=int(training.get("batch_size", 64)),
        max_epochs=int(training.get("max_epochs", 100)),
        patience=int(training.get("patience", 10)),
        min_delta=float(training.get("min_delta", 1e-5)),
        learning_rate=float(training.get("learning_rate", 1e-3)),
        horizons=horizons,
        daily_steps_per_month=int(ev.get("daily_steps_per_month", 30)),
        variants=variants,
        synth=raw.get("synth"),
    )
