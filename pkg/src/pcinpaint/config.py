"""Pipeline parameters and the ``key = value`` config file format."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    M: int = 20                      # cube side in cells
    stride: int = 5                  # cube overlap step
    alpha: float = 0.1               # weight tying missing nodes to the source
    beta: float = 10.0               # graph-smoothness weight
    sigma: float = 1.0               # voxel blending width
    candidate_ratio: float = 0.8     # min candidate size relative to the target
    min_candidate_ratio: float = 0.3
    min_hole_pixels: int = 4
    k_policy: str = "sqrt-m"         # "sqrt-m" or a fixed positive integer
    dc_mode: str = "complement"      # "complement" or "literal"
    prior_mode: str = "relative"     # "relative" or "literal"
    descriptor_support: str = "target"  # "target" (target's known cells) or "full"
    preserve_known: bool = False
    all_axes: bool = False
    normalize_k: int = 1             # K of the graph whose mean edge length sets the scale
    normal_k: int = 10               # neighbourhood size for normal estimation
    seed: int = 0
    threads: int = 1                 # 0 = one per CPU

    def __post_init__(self):
        for name in ("M", "stride", "alpha", "sigma", "candidate_ratio",
                     "min_candidate_ratio", "min_hole_pixels", "normalize_k", "normal_k"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.dc_mode not in ("complement", "literal"):
            raise ConfigError(f"dc_mode must be complement or literal, not {self.dc_mode!r}")
        if self.prior_mode not in ("relative", "literal"):
            raise ConfigError(f"prior_mode must be relative or literal, not {self.prior_mode!r}")
        if self.descriptor_support not in ("target", "full"):
            raise ConfigError("descriptor_support must be target or full, "
                              f"not {self.descriptor_support!r}")
        if self.k_policy != "sqrt-m":
            try:
                k = int(self.k_policy)
            except ValueError:
                raise ConfigError(f"k_policy must be sqrt-m or an integer, not {self.k_policy!r}") from None
            if k < 2:
                raise ConfigError("a fixed k_policy must be at least 2")

    def knn_k(self, m):
        """Neighbour count for a cube holding ``m`` points."""
        if self.k_policy == "sqrt-m":
            return max(int(round(m ** 0.5)), 2)
        return int(self.k_policy)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


_ALIASES = {"k": "k_policy", "k-policy": "k_policy", "dc-mode": "dc_mode", "m": "M"}


def _coerce(field_type, raw, key):
    try:
        if field_type in ("int", int):
            return int(raw)
        if field_type in ("float", float):
            return float(raw)
        if field_type in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None
    return raw


def parse_config(text, base=None) -> PipelineConfig:
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key.lower(), key if key == "M" else key.lower().replace("-", "_"))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(types[key], raw, key)
    return replace(base or PipelineConfig(), **values)


def load_config(path, base=None) -> PipelineConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base)
