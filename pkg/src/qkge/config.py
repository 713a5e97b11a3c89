from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

GRADIENT_MODES = ("exact", "parameter_shift_single", "finite_diff_debug")


def is_power_of_two(x: int) -> bool:
    return x >= 1 and not x & (x - 1)


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``batch_size`` is the number of triples per optimizer step (positives and
    their negatives together) and is the loss normalizer. With batched
    scoring on, each full batch is evaluated by a single superposition
    circuit, so it must be a power of two.
    """

    n_qubits: int = 4
    entity_layers: int = 2
    relation_layers: int = 1
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 4
    negatives_per_positive: int = 1
    seed: int = 0
    gradient_mode: str = "exact"
    batched_scoring: bool = True
    corrupt: str = "tail"
    validate: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate_config(self) -> "TrainConfig":
        if not 1 <= self.n_qubits <= 12:
            raise ConfigError(f"n_qubits must be in [1, 12], got {self.n_qubits}")
        if self.entity_layers < 0 or self.relation_layers < 0:
            raise ConfigError("layer counts must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        group = 1 + self.negatives_per_positive
        if self.batch_size < group or self.batch_size % group:
            raise ConfigError(
                f"batch_size {self.batch_size} must be a multiple of 1 + negatives_per_positive = {group}"
            )
        if self.batched_scoring and not is_power_of_two(self.batch_size):
            raise ConfigError(
                f"batch_size {self.batch_size} must be a power of two when batched scoring is on"
            )
        if self.gradient_mode not in GRADIENT_MODES:
            raise ConfigError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if self.gradient_mode != "exact" and self.batched_scoring:
            raise ConfigError(f"gradient_mode {self.gradient_mode!r} requires batched scoring off")
        if self.corrupt not in ("tail", "head"):
            raise ConfigError("corrupt must be 'tail' or 'head'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)
