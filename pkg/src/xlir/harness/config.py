"""Experiment configuration, loaded from YAML and overridable per key."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..embedding import TrainConfig
from ..index import DEFAULT_CUTOFF, DEFAULT_MU
from ..xquery import MODES, PER_TERM

BILINGUAL_WINDOW = 25
MULTILINGUAL_WINDOW = 50


@dataclass
class LanguageData:
    docs: str
    topics: str
    qrels: str
    stopwords: str | None = None


@dataclass
class ExperimentConfig:
    languages: list[str] = field(default_factory=list)
    data: dict[str, LanguageData] = field(default_factory=dict)
    # embedding
    dim: int = 100
    learning_rate: float = 0.01
    min_count: int = 1
    window: int | None = None  # None: 25 for two languages, 50 for more
    negatives: int = 5
    epochs: int = 5
    # fusion / generation / retrieval
    kappa: int = 10
    tau: int = 10
    mu: float = DEFAULT_MU
    cutoff: int = DEFAULT_CUTOFF
    query_mode: str = PER_TERM
    # protocol
    test_query_count: int = 10
    folds: int = 5
    seed: int = 1
    window_grid: list[int] = field(default_factory=lambda: list(range(5, 51, 5)))
    kappa_grid: list[int] = field(default_factory=lambda: [5, 10, 15, 20])
    tau_grid: list[int] = field(default_factory=lambda: [5, 10, 15])

    def __post_init__(self):
        self.data = {
            k: v if isinstance(v, LanguageData) else LanguageData(**v) for k, v in self.data.items()
        }
        self.validate()

    def validate(self) -> None:
        if len(set(self.languages)) != len(self.languages):
            raise ValueError("duplicate language codes")
        for lang in self.languages:
            if not lang or ":" in lang:
                raise ValueError(f"invalid language code {lang!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.test_query_count < 1:
            raise ValueError("test_query_count must be >= 1")
        if self.kappa < 1 or self.tau < 1 or self.cutoff < 1:
            raise ValueError("kappa, tau and cutoff must be >= 1")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.query_mode not in MODES:
            raise ValueError(f"query_mode must be one of {MODES}")
        for name in ("window_grid", "kappa_grid", "tau_grid"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")

    @property
    def effective_window(self) -> int:
        if self.window is not None:
            return self.window
        return BILINGUAL_WINDOW if len(self.languages) <= 2 else MULTILINGUAL_WINDOW

    def train_config(self, window: int | None = None, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            dim=self.dim,
            learning_rate=self.learning_rate,
            min_count=self.min_count,
            window=window or self.effective_window,
            negatives=self.negatives,
            epochs=self.epochs,
            seed=self.seed if seed is None else seed,
        )

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        """Load YAML; relative data paths resolve against the file's directory."""
        path = Path(path)
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        base = path.parent
        for entry in (data.get("data") or {}).values():
            for key, value in entry.items():
                if value is not None and not Path(value).is_absolute():
                    entry[key] = str(base / value)
        return cls.from_dict(data)


def scalar_fields() -> list[dataclasses.Field]:
    """Config keys settable from the command line (everything but ``data``)."""
    return [f for f in dataclasses.fields(ExperimentConfig) if f.name != "data"]
