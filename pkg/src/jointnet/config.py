"""Run configuration: the flat key=value config file read by the CLI.

Every key has a default, so an empty file is a valid config. Values are
validated eagerly on parse; error messages carry the file name, line, and
the violated constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .kvio import parse_kv
from .network import ArchConfig
from .training import MODES, TrainConfig


@dataclass
class RunConfig:
    """All knobs for one training run; architecture plus optimization."""

    n_stages: int = 2
    input_channels: int = 3
    input_size: int = 32
    base_channels: int = 8
    n_classes: int = 3
    phi: float = 0.5
    lr: float = 1e-4
    kappa: float = 0.1
    patience: int = 4
    epochs: int = 30
    batch_size: int = 4
    seed: int = 0
    folds: int = 5
    mode: str = "joint"

    def to_arch(self) -> ArchConfig:
        return ArchConfig(n_stages=self.n_stages,
                          input_channels=self.input_channels,
                          input_size=self.input_size,
                          base_channels=self.base_channels,
                          n_classes=self.n_classes)

    def to_train(self) -> TrainConfig:
        return TrainConfig(phi=self.phi, lr=self.lr, kappa=self.kappa,
                           patience=self.patience, epochs=self.epochs,
                           batch_size=self.batch_size, seed=self.seed,
                           folds=self.folds)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.to_arch()
        self.to_train()
        return self

    def pairs(self) -> list[tuple[str, object]]:
        """Fully-resolved settings in declaration order, floats via repr."""
        out: list[tuple[str, object]] = []
        for f in fields(self):
            value = getattr(self, f.name)
            out.append((f.name, repr(value) if isinstance(value, float) else value))
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_text(text: str, source: str = "config") -> RunConfig:
    raw = parse_kv(text, source=source)
    kwargs: dict[str, object] = {}
    for key, value in raw.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(
                f"{source}: unknown key '{key}' (valid: {', '.join(_FIELD_TYPES)})")
        kind = _FIELD_TYPES[key]
        try:
            if kind == "int":
                kwargs[key] = int(value)
            elif kind == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as e:
            raise ConfigError(
                f"{source}: key '{key}' needs a {kind}, got {value!r}") from e
    return RunConfig(**kwargs).validate()


def parse_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    return parse_config_text(text, source=str(path))
