"""Hardware hierarchy and interconnect model.

A system is a tree of levels, root first.  Every level joins ``cardinality``
children under one parent through a single switched interconnect with a
bandwidth (bytes/s) and a per-step latency (s).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

GB = 1e9


class ConfigError(ValueError):
    """Raised for malformed or unsupported system configurations."""


@dataclass(frozen=True)
class LevelSpec:
    name: str
    cardinality: int
    bandwidth: float = 0.0  # bytes/s
    latency: float = 0.0  # s

    def __post_init__(self) -> None:
        if not isinstance(self.cardinality, int) or isinstance(self.cardinality, bool):
            raise ConfigError(f"level {self.name!r}: cardinality must be an integer")
        if self.cardinality < 1:
            raise ConfigError(f"level {self.name!r}: cardinality must be positive, got {self.cardinality}")
        if self.cardinality > 1 and not self.bandwidth > 0:
            raise ConfigError(f"level {self.name!r}: bandwidth required when cardinality > 1")
        if self.bandwidth < 0 or self.latency < 0:
            raise ConfigError(f"level {self.name!r}: bandwidth and latency must be non-negative")


@dataclass(frozen=True)
class SystemModel:
    levels: tuple[LevelSpec, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ConfigError("system needs at least one level")
        if self.levels[0].cardinality != 1:
            object.__setattr__(self, "levels", (LevelSpec("root", 1),) + tuple(self.levels))
        else:
            object.__setattr__(self, "levels", tuple(self.levels))
        names = [lvl.name for lvl in self.levels]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate level names: {names}")

    @classmethod
    def from_cardinalities(cls, cards, bandwidths=None, names=None) -> SystemModel:
        """Convenience constructor, mostly for tests and harnesses."""
        cards = list(cards)
        if names is None:
            names = ["root"] + [f"h{j}" for j in range(1, len(cards))] if cards and cards[0] == 1 \
                else [f"h{j}" for j in range(len(cards))]
        if bandwidths is None:
            bandwidths = [GB * 10.0 ** j for j in range(len(cards))]
        return cls(tuple(LevelSpec(n, c, float(b)) for n, c, b in zip(names, cards, bandwidths)))

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(lvl.cardinality for lvl in self.levels)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(lvl.name for lvl in self.levels)

    def hardware_coordinate(self, index: int) -> tuple[int, ...]:
        """Mixed-radix digits of a device index over the level cardinalities."""
        digits = []
        for card in reversed(self.cardinalities):
            index, d = divmod(index, card)
            digits.append(d)
        return tuple(reversed(digits))

    def with_bandwidth(self, level: int, bandwidth: float) -> SystemModel:
        lv = list(self.levels)
        old = lv[level]
        lv[level] = LevelSpec(old.name, old.cardinality, bandwidth, old.latency)
        return SystemModel(tuple(lv))


def device_count(system: SystemModel) -> int:
    return math.prod(system.cardinalities)


def parse_system(config_text: str) -> SystemModel:
    """Parse the JSON system config (bandwidths in GB/s, decimal)."""
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("levels"), list):
        raise ConfigError('config must be an object with a "levels" list')
    unknown = set(raw) - {"levels", "name", "description"}
    if unknown:
        raise ConfigError(f"unsupported config keys: {sorted(unknown)}")
    levels = []
    for i, entry in enumerate(raw["levels"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"level {i} must be an object")
        extra = set(entry) - {"name", "count", "bandwidth_GBps", "latency_s"}
        if extra:
            # multiple interconnects per level or cross-level links are not modeled
            raise ConfigError(f"level {i}: unsupported keys {sorted(extra)}")
        if "count" not in entry:
            raise ConfigError(f"level {i}: missing count")
        count = entry["count"]
        if entry.get("bandwidth_GBps") is None and isinstance(count, int) and count > 1:
            raise ConfigError(f"level {i}: missing bandwidth_GBps")
        levels.append(
            LevelSpec(
                name=str(entry.get("name", f"level{i}")),
                cardinality=count,
                bandwidth=float(entry.get("bandwidth_GBps") or 0.0) * GB,
                latency=float(entry.get("latency_s", 0.0)),
            )
        )
    return SystemModel(tuple(levels))


def serialize_system(system: SystemModel) -> str:
    levels = [
        {
            "name": lvl.name,
            "count": lvl.cardinality,
            "bandwidth_GBps": lvl.bandwidth / GB,
            "latency_s": lvl.latency,
        }
        for lvl in system.levels
    ]
    return json.dumps({"levels": levels}, indent=2)


def load_system(path: str | Path) -> SystemModel:
    """Load a config from a path, falling back to the shipped configs by name."""
    p = Path(path)
    if p.exists():
        return parse_system(p.read_text())
    name = p.name if p.suffix == ".json" else p.name + ".json"
    shipped = resources.files("placesynth") / "configs" / name
    if shipped.is_file():
        return parse_system(shipped.read_text())
    raise ConfigError(f"system config not found: {path}")
