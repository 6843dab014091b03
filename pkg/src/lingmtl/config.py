"""Run configuration: a flat key=value text file plus overrides.

Every run is a pure function of (config, input files); the resolved
config is serialized next to the outputs so a run can be audited and
replayed. Unknown keys are errors, not warnings.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from lingmtl.masking import MaskPolicy


@dataclass
class RunConfig:
    seed: int = 0
    # data paths; empty string means "not provided"
    gold_ptb: str = ""
    gold_conll2005: str = ""
    gold_conll2009: str = ""
    silver_path: str = ""
    raw_path: str = ""
    vocab_path: str = ""
    out_dir: str = "run"
    # gold/silver mixing
    gold_probability: float = 0.10
    # masking
    mask_rate: float = 0.15
    mask_prob: float = 0.8
    random_prob: float = 0.1
    keep_prob: float = 0.1
    syntactic_weight: float = 1 / 3
    semantic_weight: float = 1 / 3
    whole_word_weight: float = 1 / 3
    # model
    layers: int = 2
    width: int = 64
    heads: int = 4
    ffn_width: int = 256
    vocab_size: int = 8192
    max_len: int = 128
    # optimization
    learning_rate: float = 3e-5
    batch_size: int = 32
    steps: int = 1000
    discriminator_weight: float = 50.0
    checkpoint_every: int = 500
    checkpoint_keep: int = 3
    # task toggles
    mlm: bool = True
    nsp: bool = True
    electra: bool = True
    pos: bool = True
    constituent: bool = True
    dependency: bool = True
    srl_span: bool = True
    srl_dep: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("gold_probability", "mask_rate", "mask_prob", "random_prob", "keep_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        for name in ("steps", "batch_size", "layers", "width", "heads",
                     "ffn_width", "vocab_size", "max_len", "checkpoint_every",
                     "checkpoint_keep"):
            value = getattr(self, name)
            if value <= 0 and not (name == "layers" and value == 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.discriminator_weight < 0:
            raise ValueError("discriminator_weight must be nonnegative")
        if self.electra and not self.mlm:
            raise ValueError("electra requires mlm: the discriminator trains "
                             "against generator replacements")
        if self.nsp and not self.mlm:
            raise ValueError("nsp requires mlm: the next-sentence term is "
                             "part of the generator objective")
        if not (self.mlm or self.pos or self.constituent or self.dependency
                or self.srl_span or self.srl_dep):
            raise ValueError("every objective is toggled off; nothing to train")
        # MaskPolicy re-validates rates and weights
        self.mask_policy()

    def mask_policy(self) -> MaskPolicy:
        return MaskPolicy(
            mask_rate=self.mask_rate,
            mask_prob=self.mask_prob,
            random_prob=self.random_prob,
            keep_prob=self.keep_prob,
            strategy_weights=(
                self.syntactic_weight, self.semantic_weight, self.whole_word_weight,
            ),
        )


def _parse_value(key: str, raw: str, kind: type):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ValueError(f"config key {key}: expected true/false, got {raw!r}")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ValueError(f"config key {key}: expected {kind.__name__}, got {raw!r}") from None
    return raw


_FIELD_TYPES = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: invalid config key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, _FIELD_TYPES[key])
    return RunConfig(**values)


def dumps_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``key=value`` strings on top of a parsed config; overrides win."""
    values = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"invalid config key {key!r}")
        values[key] = _parse_value(key, raw, _FIELD_TYPES[key])
    return RunConfig(**values)
