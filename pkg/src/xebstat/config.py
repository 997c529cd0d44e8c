"""Run configuration: flat ``key = value`` files, command-line overrides, canonical form.

Values that feed high-precision arithmetic (noise strength, angles, grids) are
kept as decimal strings and parsed in the run's precision context.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .precision import DEFAULT_BITS, FAST_BITS, PrecisionContext


class ConfigError(ValueError):
    pass


GEOMETRIES = ("a2a", "1d")
MODES = ("fast", "accurate")
FORMATS = ("csv", "json")
LINES = ("haar", "upper", "lower", "pe", "analytic")


@dataclass(frozen=True)
class RunConfig:
    geometry: str = "a2a"
    sites: int = 40
    qudit_dim: int = 2
    gate: str = "haar"
    noise: str = ""
    eps_n: str = "0"
    depth: int = 100
    precision_bits: int = DEFAULT_BITS
    trunc: str = ""
    bond_cap: int = 256
    krylov_dim: int = 24
    k: int = 7
    line: str = "haar"
    grid: str = ""
    mode: str = "accurate"
    out: str = "-"
    format: str = "csv"
    seed: int = 0

    def validate(self) -> "RunConfig":
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.line not in LINES:
            raise ConfigError(f"line must be one of {LINES}, got {self.line!r}")
        if self.sites < 2 or self.sites % 2:
            raise ConfigError(f"sites must be an even integer >= 2, got {self.sites}")
        if self.qudit_dim < 2:
            raise ConfigError("qudit_dim must be >= 2")
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.mode == "accurate" and self.precision_bits <= FAST_BITS:
            raise ConfigError(f"accurate mode needs precision_bits > {FAST_BITS}")
        if self.precision_bits < FAST_BITS:
            raise ConfigError(f"precision_bits must be >= {FAST_BITS}")
        if self.bond_cap < 1 or self.krylov_dim < 5 or self.k < 1:
            raise ConfigError("bond_cap >= 1, krylov_dim >= 5 and k >= 1 are required")
        for name in ("eps_n", "trunc"):
            val = getattr(self, name)
            if val:
                try:
                    x = float(val)
                except ValueError as exc:
                    raise ConfigError(f"{name} must be a decimal number, got {val!r}") from exc
                if x < 0:
                    raise ConfigError(f"{name} must be nonnegative")
        if self.noise and float(self.eps_n or 0) != 0:
            raise ConfigError("give either noise or eps_n, not both")
        for item in self.grid_values():
            try:
                float(item)
            except ValueError as exc:
                raise ConfigError(f"grid entries must be decimal numbers, got {item!r}") from exc
        return self

    @property
    def bits(self) -> int:
        return FAST_BITS if self.mode == "fast" else self.precision_bits

    def context(self) -> PrecisionContext:
        return PrecisionContext(self.bits)

    def grid_values(self) -> list[str]:
        return [g.strip() for g in self.grid.split(",") if g.strip()]

    def canonical(self) -> str:
        """One ``key = value`` line per field in declaration order."""
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name].type
    if kind in ("int", int):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc
    return raw


def normalize_key(key: str) -> str:
    return key.strip().replace("-", "_")


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    updates = {}
    for key, raw in values.items():
        name = normalize_key(key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        updates[name] = _coerce(name, str(raw).strip()) if raw is not None else None
    return replace(cfg, **{k: v for k, v in updates.items() if v is not None})


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        name = normalize_key(key)
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {name!r}")
        values[name] = val.strip()
    return apply_overrides(base or RunConfig(), values)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
