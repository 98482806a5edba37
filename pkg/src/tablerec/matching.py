"""Element-level similarity, CRAB feature generation and feature-vector layouts."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .index import idf
from .semantic import ADMISSIBLE, ElementRepresentation
from .text import tokenize

MEASURES = ("early", "late-max", "late-sum", "late-avg")

# element-wise blocks: (element, spaces)
ELEMENT_WISE = (
    ("headings", ("word",)),
    ("data", ("word", "graph", "entity")),
    ("entities", ("graph", "entity")),
    ("topic", ("word", "graph", "entity")),
)

# cross-element blocks: (x1, x2, spaces); both directions are emitted
CROSS_ELEMENT = (
    ("headings", "topic", ("word",)),
    ("headings", "data", ("word",)),
    ("data", "topic", ("word", "graph", "entity")),
    ("data", "entities", ("graph", "entity")),
    ("topic", "entities", ("graph", "entity")),
)

ABBREV = {"topic": "t", "headings": "H", "entities": "E", "data": "D"}

TABLE_FEATURES = (
    "rows",
    "cols",
    "nulls",
    "idf_caption",
    "idf_pagetitle",
    "in_links",
    "out_links",
    "page_views",
    "table_importance",
    "table_page_fraction",
)


class LayoutError(ValueError):
    pass


def _normalized_rows(vectors):
    if sparse.issparse(vectors):
        norms = np.sqrt(np.asarray(vectors.multiply(vectors).sum(axis=1)).ravel())
        inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        return sparse.diags(inv) @ vectors
    norms = np.linalg.norm(vectors, axis=1)
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return vectors * inv[:, None]


def cosine_matrix(a, b) -> np.ndarray:
    """Pairwise cosines between the rows of ``a`` and ``b``; zero rows give 0."""
    prod = _normalized_rows(a) @ _normalized_rows(b).T
    return prod.toarray() if sparse.issparse(prod) else np.asarray(prod)


def _check_space(a: ElementRepresentation, b: ElementRepresentation):
    if a.space != b.space:
        raise ValueError(f"cannot compare {a.space!r} and {b.space!r} representations")


def centroid(rep: ElementRepresentation):
    """Weighted centroid as a 1 x d row (sparse for the entity space)."""
    w = rep.weights / rep.weights.sum()
    if sparse.issparse(rep.vectors):
        return sparse.csr_matrix(w) @ rep.vectors
    return (w @ rep.vectors)[None, :]


def early_fusion(a: ElementRepresentation, b: ElementRepresentation) -> float:
    """Cosine between the weighted centroids of the two elements."""
    _check_space(a, b)
    if a.empty or b.empty:
        return 0.0
    return float(cosine_matrix(centroid(a), centroid(b))[0, 0])


def late_fusion(a: ElementRepresentation, b: ElementRepresentation, aggr="max", normalize=False) -> float:
    """Aggregate (max, sum or avg) of all term-pair cosines."""
    _check_space(a, b)
    if aggr not in ("max", "sum", "avg"):
        raise ValueError(f"unknown aggregation {aggr!r}")
    if a.empty or b.empty:
        return 0.0
    cos = cosine_matrix(a.vectors, b.vectors)
    if aggr == "max":
        return float(cos.max())
    if aggr == "avg":
        return float(cos.mean())
    total = float(cos.sum())
    return total / (cos.size + 1) if normalize else total


def similarity_measures(a, b, normalize_sum=False):
    """All four measures at once, sharing one cosine matrix."""
    _check_space(a, b)
    if a.empty or b.empty:
        return [0.0, 0.0, 0.0, 0.0]
    cos = cosine_matrix(a.vectors, b.vectors)
    total = float(cos.sum())
    return [
        early_fusion(a, b),
        float(cos.max()),
        total / (cos.size + 1) if normalize_sum else total,
        float(cos.mean()),
    ]


@dataclass(frozen=True)
class Feature:
    group: str
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Layout:
    features: tuple

    def __len__(self):
        return len(self.features)

    @property
    def names(self):
        return [f.name for f in self.features]

    @property
    def fingerprint(self):
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).hexdigest()[:16]

    def __add__(self, other):
        return Layout(self.features + other.features)

    def subset(self, indices):
        return Layout(tuple(self.features[i] for i in indices))

    def dumps(self):
        return "".join(f"{f.group}\t{f.name}\n" for f in self.features)

    @classmethod
    def loads(cls, text):
        feats = []
        for line in text.splitlines():
            if line.strip():
                group, name = line.split("\t")
                feats.append(Feature(group, name))
        return cls(tuple(feats))


def element_wise_pairs():
    for el, spaces in ELEMENT_WISE:
        for sp in spaces:
            yield el, el, sp


def cross_element_pairs():
    for x1, x2, spaces in CROSS_ELEMENT:
        for a, b in ((x1, x2), (x2, x1)):
            for sp in spaces:
                yield a, b, sp


def _pair_names(pairs, kind):
    out = []
    for a, b, sp in pairs:
        for m in MEASURES:
            out.append(Feature("similarity", f"{kind}:{ABBREV[a]}>{ABBREV[b]}:{sp}:{m}"))
    return tuple(out)


ELEMENT_WISE_LAYOUT = Layout(_pair_names(element_wise_pairs(), "ew"))
CROSS_ELEMENT_LAYOUT = Layout(_pair_names(cross_element_pairs(), "ce"))


def table_feature_layout(prefix, group):
    return Layout(tuple(Feature(group, f"{prefix}:{n}") for n in TABLE_FEATURES))


INPUT_TABLE_LAYOUT = table_feature_layout("in", "input-table")
CANDIDATE_TABLE_LAYOUT = table_feature_layout("cand", "candidate-table")


def _pair_features(pairs, reps_in, reps_cand, normalize_sum=False):
    values = []
    for a, b, sp in pairs:
        ra = reps_in.get((a, sp))
        rb = reps_cand.get((b, sp))
        if ra is None or rb is None:
            values.extend([0.0] * len(MEASURES))
        else:
            values.extend(similarity_measures(ra, rb, normalize_sum))
    return values


def element_wise_features(reps_in, reps_cand, normalize_sum=False):
    return _pair_features(element_wise_pairs(), reps_in, reps_cand, normalize_sum)


def cross_element_features(reps_in, reps_cand, normalize_sum=False):
    return _pair_features(cross_element_pairs(), reps_in, reps_cand, normalize_sum)


def crab_similarity_features(reps_in, reps_cand, normalize_sum=False):
    """36 element-wise followed by 72 cross-element features.

    ``reps_in`` and ``reps_cand`` map (element, space) to an
    ElementRepresentation, e.g. as produced by ``semantic.represent_all``.
    """
    return element_wise_features(reps_in, reps_cand, normalize_sum) + cross_element_features(
        reps_in, reps_cand, normalize_sum
    )


def table_features(t, stats) -> list:
    ps = t.page_stats
    nulls = sum(c.empty for row in t.rows for c in row)
    return [
        float(t.n_rows),
        float(t.n_cols),
        float(nulls),
        sum(idf(stats, w, "caption") for w in tokenize(t.caption)),
        sum(idf(stats, w, "pagetitle") for w in tokenize(t.page_title)),
        float(ps.in_links),
        float(ps.out_links),
        float(ps.page_views),
        1.0 / ps.tables_on_page,
        ps.table_chars / ps.page_chars,
    ]


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.layout):
            raise LayoutError(f"{len(self.values)} values for a layout of {len(self.layout)} features")


def assemble(input_feats, cand_feats, sim_feats, sim_layout: Layout) -> FeatureVector:
    """Concatenate [input-table | candidate-table | similarity] features.

    Passing ``None`` for both table-feature blocks yields a similarity-only
    vector (CRAB-1, HCF-1).
    """
    if len(sim_feats) != len(sim_layout):
        raise LayoutError(f"{len(sim_feats)} similarity values for a layout of {len(sim_layout)}")
    if input_feats is None and cand_feats is None:
        return FeatureVector(list(sim_feats), sim_layout)
    layout = INPUT_TABLE_LAYOUT + CANDIDATE_TABLE_LAYOUT + sim_layout
    return FeatureVector(list(input_feats) + list(cand_feats) + list(sim_feats), layout)


def admissible(element, space):
    return space in ADMISSIBLE.get(element, ())
