"""Table-matching scorers from the literature.

Each scorer maps an (input, candidate) table pair to a real score. Their
element-level components double as the ten hand-crafted similarity features.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .index import bm25_scores, idf, pool_queries, POOL_ROUTES
from .kb import wlm
from .matching import Feature, Layout
from .tables import heading_terms
from .text import tokenize

DELTA = 0.8
ALPHA = 0.5

HCF_FEATURES = (
    "infogather_pagetitle",
    "msje_headings",
    "schema_complement_heading_benefit",
    "infogather_headings",
    "nguyen_headings",
    "infogather_column",
    "infogather_table",
    "nguyen_data",
    "entity_complement",
    "schema_complement_entity_coverage",
)
HCF_LAYOUT = Layout(tuple(Feature("similarity", f"hcf:{n}") for n in HCF_FEATURES))

KEYWORD_METHODS = ("keyword-E", "keyword-H", "keyword-c")


@dataclass(frozen=True)
class BipartiteMatchResult:
    pairs: tuple
    weights: tuple
    total: float


def max_weight_bipartite_matching(weights, delta=0.0) -> BipartiteMatchResult:
    """Exact maximum-weight matching using only edges of weight >= delta."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return BipartiteMatchResult((), (), 0.0)
    usable = np.where(w >= delta, w, 0.0)
    rows, cols = linear_sum_assignment(usable, maximize=True)
    pairs, ws = [], []
    for i, j in zip(rows, cols):
        if w[i, j] >= delta and usable[i, j] > 0:
            pairs.append((int(i), int(j)))
            ws.append(float(w[i, j]))
    # fsum is correctly rounded, so equal matchings give equal totals regardless of order
    return BipartiteMatchResult(tuple(pairs), tuple(ws), math.fsum(ws))


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - edit_distance(a, b) / max(len(a), len(b))


def heading_similarity_matrix(h1, h2) -> np.ndarray:
    return np.array([[edit_similarity(a, b) for b in h2] for a in h1]).reshape(len(h1), len(h2))


def _heading_match(t_in, t_cand, delta):
    h1, h2 = heading_terms(t_in), heading_terms(t_cand)
    if not h1 or not h2:
        return h1, h2, 0.0
    return h1, h2, max_weight_bipartite_matching(heading_similarity_matrix(h1, h2), delta).total


def msje_score(t_in, t_cand, delta=DELTA) -> float:
    """Fuzzy Jaccard over unique heading terms (Mannheim Search Join Engine)."""
    h1, h2, matched = _heading_match(t_in, t_cand, delta)
    denom = len(h1) + len(h2) - matched
    return matched / denom if denom > 0 else 0.0


def entity_coverage(e_in, e_cand) -> float:
    e_in, e_cand = set(e_in), set(e_cand)
    return len(e_in & e_cand) / len(e_in) if e_in else 0.0


def heading_benefit(stats, headings_in, h) -> float:
    if not headings_in:
        return 0.0
    total = 0.0
    for hh in headings_in:
        df = stats.heading_df.get(hh, 0)
        if df:
            total += stats.pair_count(hh, h) / df
    return total / len(headings_in)


def schema_benefit(t_in, t_cand, stats) -> float:
    """Average heading benefit of adding each candidate heading to the input."""
    h1, h2 = heading_terms(t_in), heading_terms(t_cand)
    if not h1 or not h2:
        return 0.0
    return sum(heading_benefit(stats, h1, h) for h in h2) / len(h2)


def schema_complement_score(t_in, t_cand, stats, e_in, e_cand) -> float:
    return entity_coverage(e_in, e_cand) * schema_benefit(t_in, t_cand, stats)


def entity_complement_score(e_in, e_cand, kb) -> float:
    """Mean pairwise WLM between the two core-entity sets."""
    a, b = sorted(set(e_in)), sorted(set(e_cand))
    if not a or not b:
        return 0.0
    return sum(wlm(kb, x, y) for x in a for y in b) / (len(a) * len(b))


def column_terms(t):
    return [set(tok for c in t.column(j) for tok in tokenize(c.text)) for j in range(t.n_cols)]


def _binary_cos(a: set, b: set) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


def nguyen_heading_similarity(t_in, t_cand, delta=DELTA) -> float:
    h1, h2, matched = _heading_match(t_in, t_cand, delta)
    if not h1 or not h2:
        return 0.0
    return matched / max(len(h1), len(h2))


def nguyen_data_similarity(t_in, t_cand) -> float:
    """Symmetric best-column-match cosine of binary column term vectors, averaged over non-empty columns."""
    c1 = [c for c in column_terms(t_in) if c]
    c2 = [c for c in column_terms(t_cand) if c]
    if not c1 or not c2:
        return 0.0
    cos = np.array([[_binary_cos(a, b) for b in c2] for a in c1])
    return 0.5 * (cos.max(axis=1).mean() + cos.max(axis=0).mean())


def nguyen_score(t_in, t_cand, alpha=ALPHA, delta=DELTA) -> float:
    return alpha * nguyen_heading_similarity(t_in, t_cand, delta) + (1 - alpha) * nguyen_data_similarity(
        t_in, t_cand
    )


def _idf_vector(terms, stats):
    return {t: idf(stats, t) for t in set(terms) if idf(stats, t) > 0}


def _tfidf_vector(terms, stats):
    out = {}
    for t, tf in Counter(terms).items():
        w = tf * idf(stats, t)
        if w > 0:
            out[t] = w
    return out


def sparse_cosine(a: dict, b: dict) -> float:
    if not a or not b:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(w * b.get(t, 0.0) for t, w in a.items())
    if dot == 0:
        return 0.0
    return dot / (math.sqrt(sum(w * w for w in a.values())) * math.sqrt(sum(w * w for w in b.values())))


def _data_terms(t):
    return [tok for row in t.rows for c in row for tok in tokenize(c.text)]


def _column_token_lists(t):
    return [[tok for c in t.column(j) for tok in tokenize(c.text)] for j in range(t.n_cols)]


def infogather_features(t_in, t_cand, stats) -> list:
    """[table data, column values, page title, headings] cosines."""
    data = sparse_cosine(_idf_vector(_data_terms(t_in), stats), _idf_vector(_data_terms(t_cand), stats))
    cols_in = [_tfidf_vector(c, stats) for c in _column_token_lists(t_in)]
    cols_cand = [_tfidf_vector(c, stats) for c in _column_token_lists(t_cand)]
    column = max((sparse_cosine(a, b) for a in cols_in for b in cols_cand), default=0.0)
    title = sparse_cosine(
        _idf_vector(tokenize(t_in.page_title), stats), _idf_vector(tokenize(t_cand.page_title), stats)
    )

    def head_words(t):
        return [w for h, e in zip(t.headings, t.heading_entities or (None,) * t.n_cols) if e is None for w in tokenize(h)]

    headings = sparse_cosine(_tfidf_vector(head_words(t_in), stats), _tfidf_vector(head_words(t_cand), stats))
    return [data, column, title, headings]


def infogather_score(features, weights) -> float:
    return float(np.dot(features, weights))


def keyword_scores(t_in, index, candidates, kb=None) -> dict:
    """BM25 scores of the candidates matching the entity, heading and caption queries.

    Candidates sharing no term with a query are left out of that method's ranking.
    """
    queries = pool_queries(t_in, kb)
    routes = {"keyword-E": "entities", "keyword-H": "headings", "keyword-c": "caption"}
    out = {}
    for method, qname in routes.items():
        query = queries[qname]
        total = {}
        if query:
            for f in POOL_ROUTES[qname]:
                for doc, s in bm25_scores(index, query, f).items():
                    total[doc] = total.get(doc, 0.0) + s
        out[method] = {c: total[c] for c in candidates if c in total}
    return out


def hcf_features(t_in, t_cand, e_in, e_cand, stats, kb, delta=DELTA) -> list:
    """The ten hand-crafted similarity features, in HCF_FEATURES order."""
    ig = infogather_features(t_in, t_cand, stats)
    return [
        ig[2],
        msje_score(t_in, t_cand, delta),
        schema_benefit(t_in, t_cand, stats),
        ig[3],
        nguyen_heading_similarity(t_in, t_cand, delta),
        ig[1],
        ig[0],
        nguyen_data_similarity(t_in, t_cand),
        entity_complement_score(e_in, e_cand, kb),
        entity_coverage(e_in, e_cand),
    ]
