"""Entity catalog: labels, abstracts, link graph, redirects.

Also hosts the two entity-level measures the rest of the engine needs:
Wikipedia link-based relatedness (WLM) over out-links, and a mixture of
field language models (MLM) for retrieving entities from free text.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .text import tokenize

log = logging.getLogger(__name__)


class KBError(ValueError):
    pass


@dataclass(frozen=True)
class EntityRecord:
    id: str
    label: str
    abstract: str
    out_links: frozenset = frozenset()


@dataclass
class KnowledgeBase:
    records: dict
    redirects: dict = field(default_factory=dict)
    in_links: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.in_links:
            incoming = defaultdict(set)
            for rec in self.records.values():
                for dst in rec.out_links:
                    incoming[dst].add(rec.id)
            self.in_links = {k: frozenset(v) for k, v in incoming.items()}
        self._ids = sorted(self.records)
        self._position = {e: i for i, e in enumerate(self._ids)}

    @property
    def size(self):
        return len(self.records)

    def __contains__(self, entity_id):
        return entity_id in self.records

    def __getitem__(self, entity_id):
        try:
            return self.records[entity_id]
        except KeyError:
            raise KBError(f"unknown entity: {entity_id!r}") from None

    def position(self, entity_id):
        """Stable column index of an entity in |E|-dimensional indicator vectors."""
        return self._position[entity_id]

    @property
    def ids(self):
        return self._ids

    def canonical(self, name):
        """Resolve a page title or alias to a canonical entity id, or None."""
        if not name:
            return None
        for cand in (name, name.replace(" ", "_")):
            cand = self.redirects.get(cand, cand)
            if cand in self.records:
                return cand
        return None

    def neighbours(self, entity_id, mutual=False):
        """Entities linked with ``entity_id``; either direction by default, both if ``mutual``."""
        rec = self[entity_id]
        incoming = self.in_links.get(entity_id, frozenset())
        linked = (rec.out_links & incoming) if mutual else (rec.out_links | incoming)
        return linked - {entity_id}


def _read_tsv(path, ncols):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < ncols:
                raise KBError(f"{path}:{lineno}: expected {ncols} tab-separated fields")
            yield parts[:ncols]


def resolve_redirects(redirects):
    """Collapse alias chains to their final target; raises on cycles."""
    resolved = {}
    for alias in redirects:
        chain = [alias]
        seen = {alias}
        cur = redirects[alias]
        while cur in redirects:
            if cur in resolved:
                cur = resolved[cur]
                break
            if cur in seen:
                cycle = chain[chain.index(cur):] + [cur]
                raise KBError("cyclic redirect: " + " -> ".join(cycle))
            seen.add(cur)
            chain.append(cur)
            cur = redirects[cur]
        for a in chain:
            resolved[a] = cur
    return resolved


def load_kb(catalog: str | Path, links: str | Path, redirects: str | Path | None = None) -> KnowledgeBase:
    raw_redirects = {}
    if redirects is not None and Path(redirects).exists():
        for alias, target in _read_tsv(redirects, 2):
            if alias != target:
                raw_redirects[alias] = target
    redirect_map = resolve_redirects(raw_redirects)

    entries = {}
    skipped = 0
    for eid, label, abstract in _read_tsv(catalog, 3):
        if not abstract.strip():
            skipped += 1
            continue
        entries[redirect_map.get(eid, eid)] = (label, abstract)
    if skipped:
        log.info("dropped %d entities without an abstract", skipped)

    out = defaultdict(set)
    dangling = 0
    for src, dst in _read_tsv(links, 2):
        src = redirect_map.get(src, src)
        dst = redirect_map.get(dst, dst)
        if src not in entries or dst not in entries:
            dangling += 1
            continue
        if src != dst:
            out[src].add(dst)
    if dangling:
        log.warning("dropped %d dangling links", dangling)

    records = {
        eid: EntityRecord(eid, label, abstract, frozenset(out.get(eid, ())))
        for eid, (label, abstract) in entries.items()
    }
    redirect_map = {a: t for a, t in redirect_map.items() if t in records}
    return KnowledgeBase(records, redirect_map)


def wlm(kb: KnowledgeBase, e1: str, e2: str) -> float:
    """Milne-Witten relatedness on out-link sets, clamped to [0, 1]."""
    links1 = kb[e1].out_links
    links2 = kb[e2].out_links
    if not links1 or not links2:
        return 0.0
    common = len(links1 & links2)
    if common == 0:
        return 0.0
    big, small = max(len(links1), len(links2)), min(len(links1), len(links2))
    num = math.log(big) - math.log(common)
    den = math.log(kb.size) - math.log(small)
    if num == 0.0:
        return 1.0
    if den <= 0.0:
        return 0.0
    return min(1.0, max(0.0, 1.0 - num / den))


class MLMRetriever:
    """Entity retrieval with a mixture of Dirichlet-smoothed field language models.

    score(e|q) = sum over query terms t of log sum_f w_f * p(t | theta_{e,f}),
    p(t | theta_{e,f}) = (tf(t, e_f) + mu_f * p(t | C_f)) / (|e_f| + mu_f).
    ``mu_f`` defaults to the average length of field f.
    """

    FIELDS = ("label", "abstract")

    def __init__(self, kb: KnowledgeBase, weights=None, mu=None):
        self.kb = kb
        self.weights = dict(weights or {"label": 0.2, "abstract": 0.8})
        self.tf = {f: {} for f in self.FIELDS}
        self.length = {f: {} for f in self.FIELDS}
        self.collection = {f: Counter() for f in self.FIELDS}
        self.postings = defaultdict(set)
        for eid in kb.ids:
            rec = kb.records[eid]
            for f, text in zip(self.FIELDS, (rec.label, rec.abstract)):
                toks = tokenize(text)
                counts = Counter(toks)
                self.tf[f][eid] = counts
                self.length[f][eid] = len(toks)
                self.collection[f].update(counts)
                for t in counts:
                    self.postings[t].add(eid)
        self.collection_len = {f: sum(self.collection[f].values()) for f in self.FIELDS}
        n = max(kb.size, 1)
        self.mu = dict(mu) if mu else {f: self.collection_len[f] / n for f in self.FIELDS}

    def field_prob(self, term, eid, f):
        if self.collection_len[f] == 0:
            return 0.0
        p_c = self.collection[f][term] / self.collection_len[f]
        mu = self.mu[f]
        denom = self.length[f][eid] + mu
        if denom == 0:
            return 0.0
        return (self.tf[f][eid][term] + mu * p_c) / denom

    def score(self, query_terms, eid):
        total = 0.0
        for t in query_terms:
            p = sum(self.weights[f] * self.field_prob(t, eid, f) for f in self.FIELDS)
            if p > 0:
                total += math.log(p)
        return total

    def retrieve(self, query: str, k: int = 10) -> list:
        terms = [t for t in tokenize(query) if t in self.postings]
        if k <= 0 or not terms:
            return []
        candidates = set().union(*(self.postings[t] for t in terms))
        scored = [(-self.score(terms, eid), eid) for eid in candidates]
        scored.sort()
        return [eid for _, eid in scored[:k]]

    __call__ = retrieve
