"""Run configuration: defaults, file parsing, and validation.

Config files are plain ``key = value`` lines with ``#`` comments. The same
keys can be overridden from CLI flags; overrides win over file values which
win over defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ContractError, InputError
from .losses import LEVELS, LossWeights
from .ot import ALIGN_MODES

POOLS = ("test", "full")


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.5
    beta: float = 0.2
    temperature: float = 1.0
    epochs: int = 60
    batch_size: int = 32
    lr_text: float = 3e-5
    lr_rest: float = 1e-4
    d: int = 300
    f0: int = 64
    max_text_len: int = 256
    seed: int = 0
    bond_edges: bool = False
    align_mode: str = "mass"
    levels: tuple[str, ...] = LEVELS
    pool: str = "test"
    grad_through_norm: bool = True

    def validate(self) -> "RunConfig":
        try:
            LossWeights(self.alpha, self.beta).level_weights(self.levels or LEVELS)
        except ContractError as exc:
            raise InputError(str(exc)) from exc
        if self.temperature <= 0:
            raise InputError("temperature must be positive")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if self.batch_size < 2:
            raise InputError(
                "batch_size must be >= 2 (contrastive losses need negatives)")
        if self.d < 1 or self.f0 < 1:
            raise InputError("d and f0 must be positive")
        if self.max_text_len < 2:
            raise InputError("max_text_len must be >= 2")
        if self.align_mode not in ALIGN_MODES:
            raise InputError(f"align_mode must be one of {ALIGN_MODES}")
        if not self.levels or any(lv not in LEVELS for lv in self.levels):
            raise InputError(f"levels must be a non-empty subset of {LEVELS}")
        if len(set(self.levels)) != len(self.levels):
            raise InputError("levels must not repeat")
        if self.pool not in POOLS:
            raise InputError(f"pool must be one of {POOLS}")
        return self

    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta)

    def as_text(self) -> str:
        """Stable ``key = value`` rendering, reusable as a config file."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "on": True,
                "false": False, "0": False, "no": False, "off": False}


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(raw)
            return _BOOL_VALUES[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == tuple[str, ...]:
            return tuple(part.strip() for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise InputError(f"config key {name!r}: cannot parse {raw!r}") from exc
    raise InputError(f"config key {name!r} has unsupported type")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Read ``key = value`` lines into typed values, rejecting unknown keys."""
    known = {f.name: f.type for f in fields(RunConfig)}
    # dataclass field types arrive as strings under from __future__ annotations
    kinds = {"float": float, "int": int, "bool": bool, "str": str,
             "tuple[str, ...]": tuple[str, ...]}
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"{source}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise InputError(f"{source}:{lineno}: unknown config key {key!r}")
        kind = known[key]
        if isinstance(kind, str):
            kind = kinds[kind]
        values[key] = _coerce(key, kind, raw)
    return values


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Assemble a validated config from defaults, an optional file, and
    explicit overrides (``None`` override values are ignored)."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc}") from exc
        cfg = replace(cfg, **parse_config_text(text, source=path))
    if overrides:
        cleaned = {k: v for k, v in overrides.items() if v is not None}
        if cleaned:
            cfg = replace(cfg, **cleaned)
    return cfg.validate()
