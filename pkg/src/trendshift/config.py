from __future__ import annotations

import enum
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date

import numpy as np

from .errors import ConfigurationError
from .recommender.embedding import Word2VecParams
from .stream import validate_window_lengths
from .topology import StageConfig


class AdaptationStrategy(str, enum.Enum):
    TLW_FTW = "tlw-ftw"        # transfer learning on W, fine-tune on W from restored encoder
    TLW_FTF = "tlw-ftf"        # transfer learning on W, progressive fine-tune on F
    FT_E_MLP_F = "ft-e-mlp-f"  # fine-tune encoder + mapper on F only
    FT_MLP_F = "ft-mlp-f"      # fine-tune mapper on F only

    @classmethod
    def parse(cls, value: "str | AdaptationStrategy") -> "AdaptationStrategy":
        if isinstance(value, cls):
            return value
        norm = str(value).strip().lower().replace("_", "-")
        for s in cls:
            if norm in (s.value, s.name.lower().replace("_", "-")):
                return s
        raise ConfigurationError(f"unknown strategy {value!r}; choose from {[s.value for s in cls]}")


@dataclass
class TrainingConfig:
    w2v: Word2VecParams = field(default_factory=Word2VecParams)
    encoder_dim: int = 64
    hidden_dim: int | None = None  # defaults to 2 * w2v.dim
    tl_epochs: int = 120
    ft_epochs: int = 10
    lr: float = 0.05
    lr_low: float = 0.005
    batch_size: int = 32

    @property
    def mapper_sizes(self) -> list[int]:
        return [self.encoder_dim, self.hidden_dim or 2 * self.w2v.dim, self.w2v.dim]

    def validate(self) -> None:
        if not self.lr_low < self.lr:
            raise ConfigurationError(f"lr_low ({self.lr_low}) must be below lr ({self.lr})")
        if self.tl_epochs < 0 or self.ft_epochs < 0:
            raise ConfigurationError("epoch counts must be non-negative")
        if self.batch_size < 1 or self.encoder_dim < 1 or self.w2v.dim < 1:
            raise ConfigurationError("batch size and dimensions must be positive")


@dataclass
class PipelineConfig:
    d_B: int = 14
    d_T: int = 1
    d_W: int = 14
    d_F: int = 4
    omega: float = 0.9
    n: int = 10
    k: int = 5
    eta: int = 0
    strategy: AdaptationStrategy = AdaptationStrategy.TLW_FTF
    training: TrainingConfig = field(default_factory=TrainingConfig)
    stage: StageConfig = field(default_factory=StageConfig)
    filters: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        self.strategy = AdaptationStrategy.parse(self.strategy)
        self.filters = tuple(self.filters)

    def validate(self) -> "PipelineConfig":
        validate_window_lengths(self.d_B, self.d_T, self.d_W, self.d_F)
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigurationError(f"omega out of range: {self.omega}")
        if self.n < 1 or self.k < 1 or self.eta < 0:
            raise ConfigurationError("n and k must be >= 1 and eta >= 0")
        self.training.validate()
        return self

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        d["filters"] = list(self.filters)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "training" in raw:
                tr = dict(raw["training"])
                if "w2v" in tr:
                    tr["w2v"] = Word2VecParams(**tr["w2v"])
                raw["training"] = TrainingConfig(**tr)
            if "stage" in raw:
                raw["stage"] = StageConfig(**raw["stage"])
            return cls(**raw)
        except TypeError as exc:
            raise ConfigurationError(f"bad config: {exc}") from None


def child_seed(seed: int, *tags: int | str | date) -> int:
    """A stable 32-bit seed derived from a base seed and a path of tags."""
    words = []
    for t in tags:
        if isinstance(t, date):
            words.append(t.toordinal())
        elif isinstance(t, str):
            words.append(zlib.crc32(t.encode()))
        else:
            words.append(int(t) & 0xFFFFFFFF)
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, *words]).generate_state(1)[0])
