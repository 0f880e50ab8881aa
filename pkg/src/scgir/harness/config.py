"""Experiment configuration: flat `key = value` files with `#` comments.

Every key has a default; a parsed config always resolves to the complete
key set, and the canonical serialization of that resolved set is hashed
into the run digest that tags all output files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

from ..augment import AugmentPolicy, ViewParams
from ..encoder import EncoderConfig, EncoderTrainConfig
from ..errors import ConfigError
from ..goai import GoaiConfig, GoaiTrainConfig

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {raw!r}") from None


def _parse_float_list(raw: str) -> tuple:
    items = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        return tuple(float(p) for p in items)
    except ValueError:
        raise ConfigError(f"expected comma-separated reals, got {raw!r}") from None


def _parse_int_list(raw: str) -> tuple:
    items = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        return tuple(int(p) for p in items)
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None


def _parse_pair(raw: str) -> tuple:
    vals = _parse_float_list(raw)
    if len(vals) != 2:
        raise ConfigError(f"expected exactly two comma-separated reals, got {raw!r}")
    return vals


# key -> (default value, parser). Parsers take the raw string.
_SCHEMA: Dict[str, tuple] = {
    "seed": (7, int),
    "out_dir": ("runs/default", str),
    "dataset.kind": ("synthetic", str),
    "dataset.classes": (4, int),
    "dataset.per_class": (128, int),
    "dataset.height": (16, int),
    "dataset.width": (16, int),
    "dataset.channels": (1, int),
    "dataset.noise": (0.05, float),
    "dataset.test_fraction": (0.2, float),
    "dataset.images_path": ("", str),
    "dataset.labels_path": ("", str),
    "augment.crop_prob": ((1.0, 1.0), _parse_pair),
    "augment.flip_prob": ((0.5, 0.5), _parse_pair),
    "augment.brightness": ((0.4, 0.4), _parse_pair),
    "augment.contrast": ((0.4, 0.4), _parse_pair),
    "augment.saturation": ((0.2, 0.2), _parse_pair),
    "augment.hue": ((0.1, 0.1), _parse_pair),
    "augment.grayscale_prob": ((0.2, 0.2), _parse_pair),
    "augment.blur_prob": ((1.0, 0.1), _parse_pair),
    "augment.solarize_prob": ((0.0, 0.2), _parse_pair),
    "augment.crop_area": ((0.08, 1.0), _parse_pair),
    "augment.crop_aspect": ((0.75, 4.0 / 3.0), _parse_pair),
    "augment.blur_sigma": ((0.1, 1.0), _parse_pair),
    "augment.blur_kernel": (0, int),
    "encoder.conv_channels": ((8, 16, 32), _parse_int_list),
    "encoder.head_dims": ((64, 128, 256), _parse_int_list),
    "encoder.eps": (1e-5, float),
    "encoder.tied_views": (True, _parse_bool),
    "encoder.epochs": (200, int),
    "encoder.lr": (1e-4, float),
    "encoder.batch_size": (32, int),
    "encoder.lambda": (5e-4, float),
    "goai.hidden_dims": ((64, 64, 64), _parse_int_list),
    "goai.eps": (1e-5, float),
    "goai.epochs": (100, int),
    "goai.optimizer": ("adam_cosine", str),
    "goai.lr": (1e-3, float),
    "goai.batch_size": (32, int),
    "goai.equalize": (True, _parse_bool),
    "channel.model": ("rayleigh", str),
    "channel.train_snr_db": (10.0, float),
    "channel.train_ratio": (0.5, float),
    "channel.snr_grid": ((0.0, 5.0, 10.0, 20.0, 30.0), _parse_float_list),
    "channel.ratio_grid": ((0.1, 0.2, 0.3, 0.4, 0.5, 0.6), _parse_float_list),
    "channel.sigma_grid": ((0.1, 0.01, 0.001), _parse_float_list),
    "channel.ratio_sweep_snr_db": (5.0, float),
    "eval.draws": (20, int),
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings (every schema key present)."""

    values: Dict[str, object]

    def __getitem__(self, key: str):
        return self.values[key]

    @staticmethod
    def defaults() -> "ExperimentConfig":
        return ExperimentConfig({k: default for k, (default, _) in _SCHEMA.items()})

    @staticmethod
    def from_text(text: str) -> "ExperimentConfig":
        cfg = ExperimentConfig.defaults()
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected `key = value`, got {line!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            _, parser = _SCHEMA[key]
            try:
                cfg.values[key] = parser(raw)
            except ConfigError as exc:
                raise ConfigError(f"line {lineno}: key {key}: {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: key {key}: {exc}") from None
        cfg.validate()
        return cfg

    @staticmethod
    def load(path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        return ExperimentConfig.from_text(text)

    def override(self, key: str, value) -> None:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = value

    def validate(self) -> None:
        if self["dataset.kind"] not in ("synthetic", "idx"):
            raise ConfigError(f"dataset.kind must be synthetic or idx, got {self['dataset.kind']!r}")
        if self["dataset.kind"] == "idx" and not (self["dataset.images_path"] and self["dataset.labels_path"]):
            raise ConfigError("dataset.kind = idx requires dataset.images_path and dataset.labels_path")
        if self["channel.model"] not in ("awgn", "rayleigh"):
            raise ConfigError(f"channel.model must be awgn or rayleigh, got {self['channel.model']!r}")
        if self["goai.optimizer"] not in ("adam_cosine", "adam", "sgd"):
            raise ConfigError(f"goai.optimizer must be adam_cosine, adam or sgd, got {self['goai.optimizer']!r}")
        if not 0.0 < self["channel.train_ratio"] <= 1.0:
            raise ConfigError(f"channel.train_ratio must be in (0, 1], got {self['channel.train_ratio']}")
        if not 0.0 <= self["dataset.test_fraction"] < 1.0:
            raise ConfigError(f"dataset.test_fraction must be in [0, 1), got {self['dataset.test_fraction']}")
        # constructing the policy validates all augmentation ranges
        self.augment_policy()

    def canonical_text(self) -> str:
        lines = [f"{key} = {_format_value(self.values[key])}" for key in _SCHEMA]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return self.digest()[:12]

    # -- typed views used by the pipeline ------------------------------------

    def augment_policy(self) -> AugmentPolicy:
        def view(i: int) -> ViewParams:
            return ViewParams(
                crop_prob=self["augment.crop_prob"][i],
                flip_prob=self["augment.flip_prob"][i],
                brightness=self["augment.brightness"][i],
                contrast=self["augment.contrast"][i],
                saturation=self["augment.saturation"][i],
                hue=self["augment.hue"][i],
                grayscale_prob=self["augment.grayscale_prob"][i],
                blur_prob=self["augment.blur_prob"][i],
                solarize_prob=self["augment.solarize_prob"][i],
            )

        return AugmentPolicy(
            view1=view(0),
            view2=view(1),
            crop_area=self["augment.crop_area"],
            crop_aspect=self["augment.crop_aspect"],
            blur_sigma=self["augment.blur_sigma"],
            blur_kernel=self["augment.blur_kernel"],
        )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            in_channels=self["dataset.channels"],
            conv_channels=self["encoder.conv_channels"],
            head_dims=self["encoder.head_dims"],
            eps=self["encoder.eps"],
            tied_views=self["encoder.tied_views"],
        )

    def encoder_train_config(self) -> EncoderTrainConfig:
        return EncoderTrainConfig(
            lam=self["encoder.lambda"],
            lr=self["encoder.lr"],
            batch_size=self["encoder.batch_size"],
            eps=self["encoder.eps"],
        )

    def goai_config(self, num_classes: int | None = None) -> GoaiConfig:
        # IDX datasets carry their own class count; synthetic uses the config
        return GoaiConfig(
            input_dim=self["encoder.head_dims"][-1],
            num_classes=self["dataset.classes"] if num_classes is None else num_classes,
            hidden_dims=self["goai.hidden_dims"],
            eps=self["goai.eps"],
        )

    def goai_train_config(self) -> GoaiTrainConfig:
        return GoaiTrainConfig(
            optimizer=self["goai.optimizer"],
            lr=self["goai.lr"],
            batch_size=self["goai.batch_size"],
            channel_model=self["channel.model"],
            snr_db=self["channel.train_snr_db"],
            use_equalizer=self["goai.equalize"],
        )
