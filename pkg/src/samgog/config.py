"""Experiment configuration: a flat key = value text format with dotted
section prefixes, parsed against a declared schema so errors name the exact
field path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import DEFAULT_DEGREE_CAP, FEATURE_SCHEMES
from .degree_alloc import AllocConfig
from .downstream import GoGClassifierConfig
from .encoder import EncoderConfig
from .sampler import SamplerConfig, WITH_REPLACEMENT, WITHOUT_REPLACEMENT


class ConfigError(Exception):
    """Configuration file or value problem, reported with the field path."""


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


# key -> (python type, default); None default means "no default"
_SCHEMA: dict[str, tuple[type, object]] = {
    "dataset.kind": (str, "tudataset"),
    "dataset.path": (str, None),
    "dataset.name": (str, None),
    "dataset.feature_scheme": (str, "auto"),
    "dataset.degree_cap": (int, DEFAULT_DEGREE_CAP),
    "dataset.num_graphs": (int, 200),
    "dataset.noise": (float, 1.0),
    "dataset.signal": (float, 1.0),
    "dataset.feature_dim": (int, 4),
    "dataset.min_nodes": (int, 8),
    "dataset.max_nodes": (int, 16),
    "dataset.edge_prob": (float, 0.3),
    "split.file": (str, None),
    "split.rho_class": (float, 1.0),
    "split.train_fraction": (float, 0.5),
    "split.val_fraction": (float, 0.25),
    "split.seed": (int, 0),
    "alloc.d_bar": (float, None),  # required: the experiment-defining budget
    "alloc.k_min": (int, 3),
    "alloc.k_max": (int, 100),
    "alloc.rho1": (float, 5.0),
    "alloc.rho2": (float, 3.0),
    "alloc.window_r": (int, 20),
    "alloc.per_capita_class_split": (bool, False),
    "encoder.arch": (str, "gcn"),
    "encoder.num_layers": (int, 2),
    "encoder.hidden_dim": (int, 32),
    "encoder.dropout": (float, 0.0),
    "encoder.epsilon_gin": (float, 0.0),
    "encoder.readout": (str, "mean"),
    "encoder.lr": (float, 0.01),
    "sampler.mode": (str, WITHOUT_REPLACEMENT),
    "sampler.samples_per_epoch": (int, 1),
    "downstream.num_layers": (int, 2),
    "downstream.hidden_dim": (int, 64),
    "downstream.dropout": (float, 0.0),
    "downstream.symmetrize": (bool, True),
    "downstream.lr": (float, 0.01),
    "optimizer": (str, "adam"),
    "lr_schedule": (str, "constant"),
    "eval_samples": (int, 0),  # 0 means "same as samples_per_epoch"
    "epochs": (int, 100),
    "runs": (int, 1),
    "seed": (int, 0),
}

_REQUIRED = ("alloc.d_bar",)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def runs(self) -> int:
        return int(self.values["runs"])

    @property
    def epochs(self) -> int:
        return int(self.values["epochs"])

    def alloc_config(self) -> AllocConfig:
        v = self.values
        return AllocConfig(
            d_bar=v["alloc.d_bar"],
            k_min=v["alloc.k_min"],
            k_max=v["alloc.k_max"],
            rho1=v["alloc.rho1"],
            rho2=v["alloc.rho2"],
            window_r=v["alloc.window_r"],
            per_capita_class_split=v["alloc.per_capita_class_split"],
        )

    def encoder_config(self) -> EncoderConfig:
        v = self.values
        return EncoderConfig(
            arch=v["encoder.arch"],
            num_layers=v["encoder.num_layers"],
            hidden_dim=v["encoder.hidden_dim"],
            dropout=v["encoder.dropout"],
            epsilon_gin=v["encoder.epsilon_gin"],
            readout=v["encoder.readout"],
        )

    def sampler_config(self, seed: int) -> SamplerConfig:
        v = self.values
        return SamplerConfig(
            mode=v["sampler.mode"],
            seed=seed,
            samples_per_epoch=v["sampler.samples_per_epoch"],
        )

    def downstream_config(self) -> GoGClassifierConfig:
        v = self.values
        return GoGClassifierConfig(
            num_layers=v["downstream.num_layers"],
            hidden_dim=v["downstream.hidden_dim"],
            dropout=v["downstream.dropout"],
            symmetrize=v["downstream.symmetrize"],
        )


def _coerce(key: str, raw: str):
    kind, _ = _SCHEMA[key]
    raw = raw.strip()
    try:
        if kind is bool:
            return _parse_bool(raw, key)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from e


def _validate(values: dict) -> None:
    for key in _REQUIRED:
        if values.get(key) is None:
            raise ConfigError(f"missing required config key {key}")
    kind = values["dataset.kind"]
    if kind not in ("tudataset", "planted"):
        raise ConfigError(f"dataset.kind: unknown kind {kind!r}")
    if kind == "tudataset":
        if values.get("dataset.path") is None:
            raise ConfigError("missing required config key dataset.path")
        if values.get("dataset.name") is None:
            raise ConfigError("missing required config key dataset.name")
    scheme = values["dataset.feature_scheme"]
    if scheme != "auto" and scheme not in FEATURE_SCHEMES:
        raise ConfigError(f"dataset.feature_scheme: unknown scheme {scheme!r}")
    if values["sampler.mode"] not in (WITH_REPLACEMENT, WITHOUT_REPLACEMENT):
        raise ConfigError(f"sampler.mode: unknown mode {values['sampler.mode']!r}")
    if values["runs"] < 1:
        raise ConfigError("runs: must be >= 1")
    if values["epochs"] < 0:
        raise ConfigError("epochs: must be >= 0")


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {ln}: expected 'key = value', got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {ln}: unknown config key {key}")
        values[key] = _coerce(key, raw)
    for key, value in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"override: unknown config key {key}")
        values[key] = value
    _validate(values)
    return ExperimentConfig(values=values)


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text, overrides)


def default_config(overrides: dict | None = None) -> ExperimentConfig:
    """A planted-dataset configuration for smokes and theory tasks."""
    base = {"dataset.kind": "planted", "alloc.d_bar": 5.0}
    base.update(overrides or {})
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    values.update(base)
    _validate(values)
    return ExperimentConfig(values=values)
