"""Run configuration: pinned defaults from ``defaults.json`` plus CLI overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .. import maps
from ..functionals import parse_functional
from ..maps import MapFamily

FAMILIES = ("raw", "normalized", "scaled", "reflected", "tartar", "identity", "zero")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid run configuration."""


def load_defaults(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("weakdet.harness").joinpath("defaults.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    dim: int
    n_list: tuple[int, ...]
    family: str
    functionals: tuple[str, ...]
    tol: float
    seed: int
    format: str = "csv"
    out: str | None = None
    c: float = 1.0
    tartar_a: float = 0.5
    tartar_n_list: tuple[int, ...] = (1, 5, 10, 20)
    volume_n_list: tuple[int, ...] = (1, 4, 10, 32, 64)
    decay_n_list: tuple[int, ...] = (16, 32, 64, 128, 256)
    oracle_n_list: tuple[int, ...] = (1, 4, 16, 64)
    oracle_points: int = 100
    bump_radius: float = 0.5
    config_version: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("n_list", "functionals", "tartar_n_list", "volume_n_list",
                    "decay_n_list", "oracle_n_list"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def default(cls, path=None, **overrides) -> "RunConfig":
        data = load_defaults(path)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "RunConfig":
        cfg = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 2:
            raise ConfigError(f"dim must be an integer >= 2, got {self.dim!r}")
        if self.dim > 3:
            raise ConfigError(f"deterministic cubature supports dim 2 or 3, got {self.dim}")
        for key in ("n_list", "tartar_n_list", "volume_n_list", "decay_n_list",
                    "oracle_n_list"):
            ns = getattr(self, key)
            if not ns or any(not isinstance(n, int) or n < 1 for n in ns):
                raise ConfigError(f"{key} must hold positive integers, got {ns!r}")
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise ConfigError(f"{key} must be strictly ascending, got {ns!r}")
        if len(self.n_list) < 3:
            raise ConfigError(f"n_list needs at least 3 entries for extrapolation, got {self.n_list}")
        name, _ = split_family(self.family)
        if name not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if name == "tartar" and self.dim != 2:
            raise ConfigError("the tartar family requires dim = 2")
        try:
            for spec in self.functionals:
                parse_functional(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.functionals:
            raise ConfigError("select at least one functional")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError(f"tol must be positive, got {self.tol!r}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        if not 0 < self.tartar_a < 1:
            raise ConfigError(f"tartar_a must lie in (0, 1), got {self.tartar_a}")
        if not 0 < self.bump_radius < 1:
            raise ConfigError(f"bump_radius must lie in (0, 1), got {self.bump_radius}")
        if self.oracle_points < 1:
            raise ConfigError("oracle_points must be positive")

    def echo(self) -> dict:
        """Everything that determines the numbers (the output path does not)."""
        out = asdict(self)
        out.pop("extra")
        out.pop("out")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def split_family(spec: str) -> tuple[str, str | None]:
    name, _, arg = spec.partition(":")
    return name, (arg or None)


def family_template(spec: str, dim: int, c: float = 1.0, a: float = 0.5) -> MapFamily:
    """Index-1 member of the family named by ``spec``; sweeps re-index it with ``.at(n)``.

    ``spec`` is ``name`` or ``name:param`` (``scaled:<c>``, ``reflected:<axis>``,
    ``tartar:<a>``).
    """
    name, arg = split_family(spec)
    try:
        if name == "raw":
            return maps.raw(dim, 1)
        if name == "normalized":
            return maps.normalize(dim, 1)
        if name == "scaled":
            return maps.scaled(dim, 1, float(arg) if arg else c)
        if name == "reflected":
            return maps.reflect(maps.raw(dim, 1), int(arg) if arg else 1)
        if name == "tartar":
            if dim != 2:
                raise ConfigError("the tartar family requires dim = 2")
            return maps.tartar(1, float(arg) if arg else a)
        if name == "identity":
            return maps.identity(dim)
        if name == "zero":
            return maps.zero(dim)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown family {spec!r}")
