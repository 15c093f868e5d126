"""Pipeline configuration, TOML round-trip and provenance hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cluster import NODE_RULES
from .fusion import AFFINITY_MODES
from .metrics import VOI_BASES
from .nolrr import M_UPDATES
from .superpixel import DEFAULT_FH_SCALES, FHParams

DENOISE_MODES = ("none", "gaussian", "bilateral", "ikde")
DENOISE_TARGETS = ("image", "feature")
GRAPH_MODES = ("A+NOLRR", "A", "NOLRR")
NODE_MODES = ("APC+SPR", "area", "kmeans", "kmeans+SPR")

# fields that change how fast a run is, never what it produces
RUNTIME_ONLY = ("workers", "debug_dir")


class ConfigError(ValueError):
    pass


def _default_scales() -> list:
    return list(DEFAULT_FH_SCALES)


@dataclass
class PipelineConfig:
    scales: list = field(default_factory=_default_scales)
    alpha: float = 1.0
    psi: int = 3
    tau: float = 1e-6
    e: float = 3.0
    g: float = 5.0
    d: int = 50
    lambda1: float = 1.0
    beta: float = 1e-3
    affinity: str = "linear"
    node_rule: str = "size_window"
    m_update: str = "eq15"
    k_T: int | None = None
    kT_min: int = 1
    kT_max: int = 40
    seed: int = 0
    denoise: str = "none"
    denoise_target: str = "feature"
    graph: str = "A+NOLRR"
    nodes: str = "APC+SPR"
    voi_base: str = "e"
    workers: int = 1
    debug_dir: str = ""

    def __post_init__(self):
        self.scales = [
            FHParams(**s) if isinstance(s, dict) else str(s) if isinstance(s, Path) else s for s in self.scales
        ]
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(len(self.scales) >= 1, "at least one scale is required")
        for s in self.scales:
            if isinstance(s, FHParams):
                need(s.k > 0 and s.min_size >= 1 and s.sigma >= 0, f"bad FH parameters {s}")
            else:
                need(isinstance(s, str), f"scale entries must be FH tables or paths, got {s!r}")
        need(0.0 < self.alpha <= 1.0, "alpha must lie in (0, 1]")
        need(self.psi >= 1, "psi must be >= 1")
        need(self.tau >= 0, "tau must be >= 0")
        need(self.e > 0 and self.g > 0, "e and g must be positive")
        need(self.d >= 1, "d must be >= 1")
        need(self.lambda1 > 0, "lambda1 must be positive")
        need(self.beta > 0, "beta must be positive")
        need(self.affinity in AFFINITY_MODES, f"affinity must be one of {AFFINITY_MODES}")
        need(self.node_rule in NODE_RULES, f"node_rule must be one of {NODE_RULES}")
        need(self.m_update in M_UPDATES, f"m_update must be one of {M_UPDATES}")
        need(self.k_T is None or self.k_T >= 1, "k_T must be >= 1")
        need(1 <= self.kT_min <= self.kT_max, "need 1 <= kT_min <= kT_max")
        need(self.denoise in DENOISE_MODES, f"denoise must be one of {DENOISE_MODES}")
        need(self.denoise_target in DENOISE_TARGETS, f"denoise_target must be one of {DENOISE_TARGETS}")
        need(self.graph in GRAPH_MODES, f"graph must be one of {GRAPH_MODES}")
        need(self.nodes in NODE_MODES, f"nodes must be one of {NODE_MODES}")
        need(self.voi_base in VOI_BASES, f"voi_base must be one of {VOI_BASES}")
        need(self.workers >= 1, "workers must be >= 1")

    @property
    def k_values(self) -> list[int]:
        """Group counts to try: the fixed k_T, or the sweep range."""
        if self.k_T is not None:
            return [self.k_T]
        return list(range(self.kT_min, self.kT_max + 1))

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "scales":
                v = [dataclasses.asdict(s) if isinstance(s, FHParams) else str(s) for s in v]
            if v is None:
                continue  # TOML has no null
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "PipelineConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_toml(Path(path).read_text())

    def with_overrides(self, **kw) -> "PipelineConfig":
        data = self.to_dict()
        data.update({k: v for k, v in kw.items()})
        data = {k: v for k, v in data.items() if v is not None or k == "k_T"}
        return self.from_dict(data)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring runtime-only fields."""
        data = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_ONLY}
        data.setdefault("k_T", None)
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
