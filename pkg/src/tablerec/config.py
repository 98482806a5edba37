"""Experiment configuration: a flat key = value text file, overridable from the command line."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

VARIANTS = ("HCF-1", "HCF-2", "CRAB-1", "CRAB-2", "CRAB-3", "CRAB-4")
BASELINES = (
    "keyword-E",
    "keyword-H",
    "keyword-c",
    "msje",
    "schema-complement",
    "entity-complement",
    "nguyen",
    "infogather",
)


@dataclass
class ExperimentConfig:
    corpus: str = ""
    queries: str = ""
    qrels: str = ""
    kb_catalog: str = ""
    kb_links: str = ""
    kb_redirects: str = ""
    word_embeddings: str = ""
    graph_embeddings: str = ""
    workdir: str = "work"
    variant: str = "CRAB-2"
    delta: float = 0.8
    alpha: float = 0.5
    trees: int = 1000
    max_features: int = 3
    folds: int = 5
    pool_depth: int = 150
    topic_k: int = 10
    mlm_label_weight: float = 0.2
    mlm_abstract_weight: float = 0.8
    mutual_links: bool = False
    normalize_late_sum: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS + BASELINES:
            raise ValueError(f"unknown variant {self.variant!r}")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        values = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls().updated(values, base=Path(path).parent)

    def updated(self, values: dict, base=None) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(self)}
        current = asdict(self)
        for key, value in values.items():
            if value is None:
                continue
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown configuration key {key!r}")
            current[key] = _coerce(types[key], value)
            if base is not None and types[key] == "str" and key not in ("variant",) and current[key]:
                p = Path(current[key])
                current[key] = str(p if p.is_absolute() else Path(base) / p)
        return type(self)(**current)

    def lines(self):
        return [f"{k} = {v}" for k, v in asdict(self).items()]

    def dumps(self):
        return "\n".join(self.lines()) + "\n"


def _coerce(kind, value):
    if not isinstance(value, str):
        return value
    if kind == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value
