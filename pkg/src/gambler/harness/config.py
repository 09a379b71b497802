"""Run configuration, serialized as one JSON document."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..exceptions import InvalidInputError
from ..losses import LossKind, check_lambda
from ..model import ACTIVATIONS, OptimizerSpec
from ..noise import NoiseSpec

STOPPING_KINDS = ("none", "aes", "ves")


@dataclass(frozen=True)
class DatasetConfig:
    """``blobs`` draws ``n_train + n_test`` points; ``mnist`` reads IDX files.

    ``n_train`` counts the validation rows too: they are carved from it.
    ``n_test=None`` keeps the full MNIST test file.
    """

    name: str = "blobs"
    n_train: int = 2000
    n_test: int | None = 2000
    num_classes: int = 2
    dim: int = 2
    separation: float = 2.0
    mnist_dir: str | None = None
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.name not in ("blobs", "mnist"):
            raise InvalidInputError(f"unknown dataset {self.name!r}")
        if self.name == "mnist" and self.num_classes != 10:
            raise InvalidInputError("mnist has 10 classes")
        if not 0.0 <= self.val_fraction < 0.5:
            raise InvalidInputError("val_fraction must lie in [0, 0.5)")


@dataclass(frozen=True)
class LossSettings:
    kind: str = "gambler"
    lam: float | None = None
    """Fixed payoff for ``gambler``; ``None`` means ``m``."""
    q: float = 0.7
    warmup_epochs: int = 0
    mask_rejection: bool = False

    def __post_init__(self):
        LossKind(self.kind)
        if self.warmup_epochs < 0:
            raise InvalidInputError("warmup_epochs must be >= 0")


@dataclass(frozen=True)
class ModelSettings:
    hidden: tuple[int, ...] = (256, 128)
    activation: str = "relu"
    init_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class StoppingConfig:
    kind: str = "none"
    clean_rate: float | None = None
    lambda_ref: float | None = None
    band: float = 0.15
    smoothing_window: int = 3
    min_epochs: int = 3
    patience: int = 5
    halt: bool = True
    """Stop training when the criterion fires; ``False`` records and continues."""
    overshoot_retries: int = 0
    """On an AES overshoot, rerun with half the learning rate this many times."""

    def __post_init__(self):
        if self.kind not in STOPPING_KINDS:
            raise InvalidInputError(f"stopping must be one of {STOPPING_KINDS}")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    loss: LossSettings = field(default_factory=LossSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    stopping: StoppingConfig = field(default_factory=StoppingConfig)
    epochs: int = 20
    seed: int = 0
    out_dir: str = "runs/run"

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        m = self.dataset.num_classes
        kind = LossKind(self.loss.kind)
        if kind is LossKind.GAMBLER and self.loss.lam is not None:
            check_lambda(self.loss.lam, m)
        if self.stopping.kind == "aes":
            if self.stopping.clean_rate is None:
                raise InvalidInputError("aes stopping needs clean_rate")
            if self.aes_lambda is None:
                raise InvalidInputError("aes stopping needs a fixed-lambda gambler loss or lambda_ref")
        if self.stopping.kind == "ves" and self.dataset.val_fraction <= 0:
            raise InvalidInputError("ves stopping needs val_fraction > 0")

    @property
    def fixed_lambda(self) -> float | None:
        if LossKind(self.loss.kind) is not LossKind.GAMBLER:
            return None
        return float(self.dataset.num_classes) if self.loss.lam is None else float(self.loss.lam)

    @property
    def aes_lambda(self) -> float | None:
        if self.stopping.lambda_ref is not None:
            return float(self.stopping.lambda_ref)
        return self.fixed_lambda

    @property
    def plateau_clean_rate(self) -> float | None:
        """Clean rate used for the plateau and stage annotation."""
        if self.stopping.clean_rate is not None:
            return float(self.stopping.clean_rate)
        if self.noise.kind == "symmetric":
            return 1.0 - self.noise.rate
        return None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"]["hidden"] = list(self.model.hidden)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        parts = {
            "dataset": DatasetConfig,
            "noise": NoiseSpec,
            "loss": LossSettings,
            "model": ModelSettings,
            "optimizer": OptimizerSpec,
            "stopping": StoppingConfig,
        }
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            if key in parts:
                sub = dict(value)
                extra = set(sub) - {f.name for f in fields(parts[key])}
                if extra:
                    raise InvalidInputError(f"unknown {key} keys: {sorted(extra)}")
                if key == "model" and "hidden" in sub:
                    sub["hidden"] = tuple(sub["hidden"])
                kwargs[key] = parts[key](**sub)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())
