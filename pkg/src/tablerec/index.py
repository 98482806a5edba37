"""Per-field inverted index over the table corpus, heading statistics, BM25."""

from __future__ import annotations

import json
import math
import zlib
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

from .tables import heading_terms
from .text import tokenize

FIELDS = ("caption", "pagetitle", "headings", "entities", "data", "catchall")
POOL_DEPTH = 150
K1 = 1.2
B = 0.75

_MAGIC = b"TBLIDX"
_VERSION = 1


class UnknownFieldError(ValueError):
    pass


def table_fields(t) -> dict:
    """Terms of every indexed field for one table."""
    caption = tokenize(t.caption)
    title = tokenize(t.page_title)
    headings = []
    entities = []
    for h, e in zip(t.headings, t.heading_entities or (None,) * t.n_cols):
        if e is not None:
            entities.append(e)
        else:
            headings.extend(tokenize(h))
    data = []
    for row in t.rows:
        for c in row:
            data.extend(tokenize(c.text))
            if c.entity:
                entities.append(c.entity)
    return {
        "caption": caption,
        "pagetitle": title,
        "headings": headings,
        "entities": entities,
        "data": data,
        "catchall": caption + title + headings + data,
    }


@dataclass
class CorpusIndex:
    doc_ids: list
    # field -> term -> [[doc position, tf], ...] sorted by position
    postings: dict
    # field -> [length per doc]
    lengths: dict

    def __post_init__(self):
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        self.avg_len = {
            f: (sum(ls) / len(ls) if ls else 0.0) for f, ls in self.lengths.items()
        }

    @property
    def n_docs(self):
        return len(self.doc_ids)

    def df(self, term, field):
        self._check(field)
        return len(self.postings[field].get(term, ()))

    def position(self, doc_id):
        return self._pos.get(doc_id)

    def _check(self, field):
        if field not in self.postings:
            raise UnknownFieldError(f"unknown field {field!r}; expected one of {FIELDS}")


@dataclass
class CorpusStats:
    n_docs: int
    heading_df: Counter
    heading_codf: Counter
    # field -> term -> df
    field_df: dict = field(default_factory=dict)

    def pair_count(self, h1, h2):
        if h1 == h2:
            return self.heading_df.get(h1, 0)
        return self.heading_codf.get(tuple(sorted((h1, h2))), 0)


def build_index(corpus) -> tuple[CorpusIndex, CorpusStats]:
    doc_ids = []
    postings = {f: {} for f in FIELDS}
    lengths = {f: [] for f in FIELDS}
    heading_df = Counter()
    heading_codf = Counter()
    seen = set()
    for pos, t in enumerate(corpus):
        if t.table_id in seen:
            raise ValueError(f"duplicate table id {t.table_id!r}")
        seen.add(t.table_id)
        doc_ids.append(t.table_id)
        for f, terms in table_fields(t).items():
            lengths[f].append(len(terms))
            for term, tf in Counter(terms).items():
                postings[f].setdefault(term, []).append([pos, tf])
        heads = sorted(heading_terms(t))
        heading_df.update(heads)
        heading_codf.update(combinations(heads, 2))
    index = CorpusIndex(doc_ids, postings, lengths)
    stats = CorpusStats(
        len(doc_ids),
        heading_df,
        heading_codf,
        {f: {term: len(p) for term, p in postings[f].items()} for f in FIELDS},
    )
    return index, stats


def idf(stats: CorpusStats, term, field="catchall") -> float:
    """log(N / df), df clamped to at least 1."""
    if stats.n_docs == 0:
        return 0.0
    df = max(stats.field_df.get(field, {}).get(term, 0), 1)
    return math.log(stats.n_docs / df)


def bm25_idf(n_docs, df):
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_scores(index: CorpusIndex, query, field) -> dict:
    """BM25 score of every document that contains at least one query term."""
    index._check(field)
    scores = {}
    n = index.n_docs
    if n == 0:
        return scores
    avg = index.avg_len[field] or 1.0
    lengths = index.lengths[field]
    for term, qtf in Counter(query).items():
        plist = index.postings[field].get(term)
        if not plist:
            continue
        w = bm25_idf(n, len(plist))
        for pos, tf in plist:
            norm = K1 * (1.0 - B + B * lengths[pos] / avg)
            scores[pos] = scores.get(pos, 0.0) + qtf * w * tf * (K1 + 1.0) / (tf + norm)
    return {index.doc_ids[p]: s for p, s in scores.items()}


def rank_scores(scores: dict, k=None):
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if k is None else ranked[:k]


def bm25_search(index: CorpusIndex, query, field, k: int):
    """Top-k (table_id, score) for a term query; ``field`` may be a tuple of fields whose scores add."""
    if k < 1:
        raise ValueError("k must be >= 1")
    fields = (field,) if isinstance(field, str) else tuple(field)
    total = {}
    for f in fields:
        for doc, s in bm25_scores(index, query, f).items():
            total[doc] = total.get(doc, 0.0) + s
    return rank_scores(total, k)


def pool_queries(t, kb=None):
    """The three keyword queries (caption, table entities, headings) for an input table."""
    f = table_fields(t)
    ents = list(f["entities"])
    if kb is not None:
        page = kb.canonical(t.page_title)
        if page is not None:
            ents.append(page)
    return {"caption": f["caption"], "entities": ents, "headings": f["headings"]}


POOL_ROUTES = {
    "caption": ("caption", "catchall"),
    "entities": ("entities",),
    "headings": ("headings",),
}


def candidate_pool(t, index: CorpusIndex, kb=None, depth: int = POOL_DEPTH) -> list:
    """Union of the top-``depth`` results of the three pooling queries, minus the input table."""
    pool = set()
    for name, query in pool_queries(t, kb).items():
        if query:
            pool.update(doc for doc, _ in bm25_search(index, query, POOL_ROUTES[name], depth))
    pool.discard(t.table_id)
    return sorted(pool)


def save_index(index: CorpusIndex, stats: CorpusStats, path, header=None) -> None:
    payload = {
        "config": list(header or ()),
        "doc_ids": index.doc_ids,
        "postings": index.postings,
        "lengths": index.lengths,
        "heading_df": dict(stats.heading_df),
        "heading_codf": sorted([a, b, c] for (a, b), c in stats.heading_codf.items()),
    }
    body = zlib.compress(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8"), 9)
    Path(path).write_bytes(_MAGIC + bytes([_VERSION]) + body)


def load_index(path) -> tuple[CorpusIndex, CorpusStats]:
    blob = Path(path).read_bytes()
    if not blob.startswith(_MAGIC):
        raise ValueError(f"{path}: not an index file")
    version = blob[len(_MAGIC)]
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported index version {version}")
    payload = json.loads(zlib.decompress(blob[len(_MAGIC) + 1:]).decode("utf-8"))
    index = CorpusIndex(payload["doc_ids"], payload["postings"], payload["lengths"])
    codf = Counter()
    for a, b, c in payload["heading_codf"]:
        codf[(a, b)] = c
    stats = CorpusStats(
        index.n_docs,
        Counter(payload["heading_df"]),
        codf,
        {f: {term: len(p) for term, p in index.postings[f].items()} for f in FIELDS},
    )
    return index, stats
