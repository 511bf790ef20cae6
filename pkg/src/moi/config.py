"""Pipeline configuration: a fixed, two-level "key: value" text format.

Unknown keys are rejected so a saved snapshot always reproduces the run
that wrote it. The canonical text rendering (and its SHA-256 hash) is
what gets stamped into every artifact.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

EDGE_RULES = ("cosine_mag", "pearson", "spearman", "coexceed_freq", "jaccard", "mi_binned")
SPARSIFIERS = ("topk", "mutual_topk", "threshold")
COMMUNITY_ALGOS = ("louvain", "leiden")
COLUMN_SCALINGS = ("none", "l2", "mad")
DEGREE_NORMS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class StabilityConfig:
    bootstraps: int = 200
    res_sweep: tuple[float, ...] = (0.5, 1.0, 1.5)
    k_sweep: tuple[int, ...] = (10, 20, 30)


@dataclass(frozen=True)
class FairnessConfig:
    group_label: str = "A"
    bei_eps: float = 1e-6


@dataclass(frozen=True)
class Seeds:
    split: int = 0
    attr: int = 0
    graph: int = 0
    comm: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    edge_rule: str = "cosine_mag"
    signed: bool = False
    column_scaling: str = "mad"
    sparsifier: str = "mutual_topk"
    k: float = 20
    degree_norm: float = 0.5
    community: str = "leiden"
    resolution: float = 1.0
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    fairness: FairnessConfig = field(default_factory=FairnessConfig)
    seeds: Seeds = field(default_factory=Seeds)

    def __post_init__(self):
        if self.edge_rule not in EDGE_RULES:
            raise ConfigError(f"edge_rule must be one of {EDGE_RULES}, got {self.edge_rule!r}")
        if self.sparsifier not in SPARSIFIERS:
            raise ConfigError(f"sparsifier must be one of {SPARSIFIERS}, got {self.sparsifier!r}")
        if self.community not in COMMUNITY_ALGOS:
            raise ConfigError(f"community must be one of {COMMUNITY_ALGOS}, got {self.community!r}")
        if self.column_scaling not in COLUMN_SCALINGS:
            raise ConfigError(f"column_scaling must be one of {COLUMN_SCALINGS}, got {self.column_scaling!r}")
        if float(self.degree_norm) not in DEGREE_NORMS:
            raise ConfigError(f"degree_norm must be one of {DEGREE_NORMS}, got {self.degree_norm!r}")
        if self.resolution <= 0:
            raise ConfigError("resolution must be > 0")
        if self.k <= 0:
            raise ConfigError("k must be > 0")

    def with_updates(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if not v.is_integer() else f"{v:.1f}"
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_render_value(x) for x in v) + "]"
    return str(v)


def canonical_text(cfg: PipelineConfig) -> str:
    """Deterministic text rendering; parses back to an equal config."""
    lines = [
        f"edge_rule: {cfg.edge_rule}",
        f"signed: {_render_value(cfg.signed)}",
        f"column_scaling: {cfg.column_scaling.upper() if cfg.column_scaling == 'mad' else cfg.column_scaling}",
        f"sparsifier: {cfg.sparsifier}",
        f"k: {_render_value(cfg.k if cfg.sparsifier == 'threshold' else int(cfg.k))}",
        f"degree_norm: {_render_value(float(cfg.degree_norm))}",
        f"community: {cfg.community}",
        f"resolution: {_render_value(float(cfg.resolution))}",
        "stability:",
        f"  bootstraps: {cfg.stability.bootstraps}",
        f"  res_sweep: {_render_value(tuple(float(x) for x in cfg.stability.res_sweep))}",
        f"  k_sweep: {_render_value(tuple(int(x) for x in cfg.stability.k_sweep))}",
        "fairness:",
        f"  group_label: {cfg.fairness.group_label}",
        f"  bei_eps: {repr(float(cfg.fairness.bei_eps))}",
        "seeds:",
        f"  split: {cfg.seeds.split}",
        f"  attr: {cfg.seeds.attr}",
        f"  graph: {cfg.seeds.graph}",
        f"  comm: {cfg.seeds.comm}",
    ]
    return "\n".join(lines) + "\n"


def config_hash(cfg: PipelineConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()


def _parse_scalar(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return ()
        return tuple(_parse_scalar(x) for x in inner.split(","))
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _lines_to_tree(text: str) -> dict:
    tree: dict = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indented = stripped.startswith("  ")
        body = stripped.strip()
        if ":" not in body:
            raise ConfigError(f"line {lineno}: expected 'key: value', got {body!r}")
        key, _, value = body.partition(":")
        key = key.strip()
        value = value.strip()
        if indented:
            if section is None:
                raise ConfigError(f"line {lineno}: indented key {key!r} outside a section")
            tree[section][key] = _parse_scalar(value)
        elif value == "":
            section = key
            tree[key] = {}
        else:
            section = None
            tree[key] = _parse_scalar(value)
    return tree


_TOP_KEYS = {
    "edge_rule",
    "signed",
    "column_scaling",
    "sparsifier",
    "k",
    "degree_norm",
    "community",
    "resolution",
    "stability",
    "fairness",
    "seeds",
}
_SECTION_KEYS = {
    "stability": {"bootstraps", "res_sweep", "k_sweep"},
    "fairness": {"group_label", "bei_eps"},
    "seeds": {"split", "attr", "graph", "comm"},
}


def parse_config(text: str) -> PipelineConfig:
    tree = _lines_to_tree(text)
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for section, allowed in _SECTION_KEYS.items():
        sub = tree.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be a section")
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown {section} key(s): {', '.join(sorted(bad))}")
    defaults = PipelineConfig()
    stability = StabilityConfig(
        bootstraps=int(tree.get("stability", {}).get("bootstraps", defaults.stability.bootstraps)),
        res_sweep=tuple(
            float(x) for x in tree.get("stability", {}).get("res_sweep", defaults.stability.res_sweep)
        ),
        k_sweep=tuple(int(x) for x in tree.get("stability", {}).get("k_sweep", defaults.stability.k_sweep)),
    )
    fairness = FairnessConfig(
        group_label=str(tree.get("fairness", {}).get("group_label", defaults.fairness.group_label)),
        bei_eps=float(tree.get("fairness", {}).get("bei_eps", defaults.fairness.bei_eps)),
    )
    seeds = Seeds(
        split=int(tree.get("seeds", {}).get("split", 0)),
        attr=int(tree.get("seeds", {}).get("attr", 0)),
        graph=int(tree.get("seeds", {}).get("graph", 0)),
        comm=int(tree.get("seeds", {}).get("comm", 0)),
    )
    scaling = str(tree.get("column_scaling", defaults.column_scaling)).lower()
    return PipelineConfig(
        edge_rule=str(tree.get("edge_rule", defaults.edge_rule)),
        signed=bool(tree.get("signed", defaults.signed)),
        column_scaling=scaling,
        sparsifier=str(tree.get("sparsifier", defaults.sparsifier)),
        k=float(tree.get("k", defaults.k)),
        degree_norm=float(tree.get("degree_norm", defaults.degree_norm)),
        community=str(tree.get("community", defaults.community)),
        resolution=float(tree.get("resolution", defaults.resolution)),
        stability=stability,
        fairness=fairness,
        seeds=seeds,
    )


def load_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
