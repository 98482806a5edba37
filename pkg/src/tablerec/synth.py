"""Deterministic micro-corpus for desk-scale experiments.

Tables belong to latent topics. Each topic owns a vocabulary, a heading pool
and a set of entities that link mostly among themselves; word and graph
vectors cluster by topic. Relevance of a corpus table to a query table is
decided purely by how many core-column entities the two share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import write_qrels
from .kb import EntityRecord, KnowledgeBase
from .semantic import EmbeddingStore
from .tables import detect_core_column, parse_table
from .text import STOPWORDS

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
GENERIC_CAPTION = ("list", "results", "season", "overview", "records", "summary", "standings", "statistics")
GENERIC_HEADINGS = ("year", "rank", "notes", "total", "country", "date", "score", "points")


def overlap_grade(shared: int) -> int:
    if shared >= 3:
        return 2
    if shared >= 1:
        return 1
    return 0


@dataclass
class MicroCorpus:
    kb: KnowledgeBase
    records: list
    query_records: list
    qrels: dict
    word_vectors: dict
    graph_vectors: dict
    aliases: dict

    def write(self, directory) -> dict:
        """Write every asset into ``directory``; returns the file map used by the config."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "kb_catalog": d / "kb_catalog.tsv",
            "kb_links": d / "kb_links.tsv",
            "kb_redirects": d / "kb_redirects.tsv",
            "word_embeddings": d / "word_vectors.txt",
            "graph_embeddings": d / "graph_vectors.txt",
            "corpus": d / "corpus.jsonl",
            "queries": d / "queries.jsonl",
            "qrels": d / "qrels.txt",
        }
        with open(paths["kb_catalog"], "w", encoding="utf-8") as fh:
            for eid in self.kb.ids:
                r = self.kb.records[eid]
                fh.write(f"{r.id}\t{r.label}\t{r.abstract}\n")
        with open(paths["kb_links"], "w", encoding="utf-8") as fh:
            for eid in self.kb.ids:
                for dst in sorted(self.kb.records[eid].out_links):
                    fh.write(f"{eid}\t{dst}\n")
        with open(paths["kb_redirects"], "w", encoding="utf-8") as fh:
            for alias in sorted(self.aliases):
                fh.write(f"{alias}\t{self.aliases[alias]}\n")
        EmbeddingStore(self.word_vectors).save(paths["word_embeddings"])
        EmbeddingStore(self.graph_vectors).save(paths["graph_embeddings"])
        for key, recs in (("corpus", self.records), ("queries", self.query_records)):
            with open(paths[key], "w", encoding="utf-8") as fh:
                for r in recs:
                    fh.write(json.dumps(r, sort_keys=True) + "\n")
        write_qrels(self.qrels, paths["qrels"])
        return {k: str(v) for k, v in paths.items()}


def _words(rng, n, taken):
    out = []
    while len(out) < n:
        syll = rng.integers(2, 4)
        w = "".join(CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))] for _ in range(syll))
        if w not in taken and w not in STOPWORDS:
            taken.add(w)
            out.append(w)
    return out


def generate(seed=7, n_tables=300, n_queries=10, n_topics=12, entities_per_topic=30, dim=32) -> MicroCorpus:
    rng = np.random.default_rng(seed)
    taken = set(GENERIC_CAPTION) | set(GENERIC_HEADINGS)
    generic_words = _words(rng, 40, taken)

    topics = []
    for k in range(n_topics):
        vocab = _words(rng, 8, taken)
        headings = _words(rng, 5, taken)
        names = _words(rng, entities_per_topic * 2, taken)
        ents = []
        for i in range(entities_per_topic):
            label = f"{names[2 * i].capitalize()} {names[2 * i + 1].capitalize()}"
            ents.append(label.replace(" ", "_"))
        page_label = f"{vocab[0].capitalize()} {vocab[1].capitalize()}"
        topics.append({"vocab": vocab, "headings": headings, "entities": ents, "page": page_label.replace(" ", "_")})

    word_vectors = {}
    graph_vectors = {}
    word_centres = rng.normal(size=(n_topics, dim))
    graph_centres = rng.normal(size=(n_topics, dim))
    for w in generic_words + list(GENERIC_CAPTION) + list(GENERIC_HEADINGS):
        word_vectors[w] = rng.normal(size=dim)
    for k, tp in enumerate(topics):
        for w in tp["vocab"] + tp["headings"]:
            word_vectors[w] = word_centres[k] + 0.6 * rng.normal(size=dim)
        for e in tp["entities"]:
            for part in e.lower().split("_"):
                word_vectors[part] = word_centres[k] + 0.9 * rng.normal(size=dim)

    # knowledge base
    labels, abstracts, links = {}, {}, {}
    all_entities = [e for tp in topics for e in tp["entities"]]
    for k, tp in enumerate(topics):
        members = tp["entities"] + [tp["page"]]
        for e in members:
            labels[e] = e.replace("_", " ")
            words = list(rng.choice(tp["vocab"], size=6)) + list(rng.choice(generic_words, size=4))
            abstracts[e] = f"{labels[e]} is " + " ".join(words)
            graph_vectors[e] = graph_centres[k] + 0.7 * rng.normal(size=dim)
        for e in tp["entities"]:
            inside = rng.choice([x for x in tp["entities"] if x != e], size=6, replace=False)
            outside = rng.choice(all_entities, size=1)
            links[e] = set(inside) | {o for o in outside if o != e} | {tp["page"]}
        links[tp["page"]] = set(rng.choice(tp["entities"], size=10, replace=False))
    records = {
        e: EntityRecord(e, labels[e], abstracts[e], frozenset(links.get(e, ()))) for e in sorted(labels)
    }
    aliases = {}
    for e in sorted(labels):
        if rng.random() < 0.2:
            aliases[e.lower()] = e
    kb = KnowledgeBase(records, dict(aliases))

    def make_table(tid, k, min_rows=5, min_cols=3):
        tp = topics[k]
        n_rows = int(rng.integers(max(5, min_rows), 13))
        n_cols = int(rng.integers(max(3, min_cols), 6))
        core = 0 if rng.random() < 0.8 else 1
        heading_pool = tp["headings"] + list(GENERIC_HEADINGS)
        heads = list(rng.choice(heading_pool, size=n_cols, replace=False))
        heads[core] = "Name"
        ents = rng.choice(tp["entities"], size=n_rows, replace=False)
        rows = []
        for i in range(n_rows):
            row = []
            for j in range(n_cols):
                if j == core:
                    e = str(ents[i])
                    if rng.random() < 0.1:
                        row.append({"text": labels[e]})
                    else:
                        link = e.lower() if e.lower() in aliases and rng.random() < 0.5 else labels[e]
                        row.append({"text": labels[e], "link": link})
                    continue
                r = rng.random()
                if r < 0.08:
                    row.append({"text": ""})
                elif r < 0.45:
                    row.append({"text": str(int(rng.integers(1, 2000)))})
                elif r < 0.8:
                    row.append({"text": str(rng.choice(tp["vocab"]))})
                elif r < 0.9:
                    row.append({"text": str(rng.choice(generic_words))})
                elif r < 0.95:
                    other = str(rng.choice(all_entities))
                    row.append({"text": labels[other], "link": labels[other]})
                else:
                    row.append({"text": "Unknown place", "link": "Unknown_place_" + str(int(rng.integers(100)))})
            rows.append(row)
        cap = [str(w) for w in rng.choice(GENERIC_CAPTION, size=2, replace=False)]
        if rng.random() < 0.7:
            cap.insert(1, str(rng.choice(tp["vocab"])))
        else:
            cap.insert(1, str(rng.choice(generic_words)))
        page = labels[tp["page"]] if rng.random() < 0.6 else " ".join(str(w) for w in rng.choice(generic_words, size=2))
        page_chars = int(rng.integers(2000, 50000))
        return {
            "id": tid,
            "pgTitle": page,
            "caption": " ".join(cap).capitalize(),
            "headers": heads,
            "rows": rows,
            "inLinks": int(rng.integers(0, 500)),
            "outLinks": int(rng.integers(0, 500)),
            "pageViews": int(rng.integers(0, 100000)),
            "tablesOnPage": int(rng.integers(1, 6)),
            "tableChars": int(rng.integers(100, page_chars)),
            "pageChars": page_chars,
        }

    topic_of = rng.permutation(np.arange(n_tables) % n_topics)
    corpus = [make_table(f"T{i:04d}", int(topic_of[i])) for i in range(n_tables)]
    query_topics = rng.choice(n_topics, size=n_queries, replace=n_queries > n_topics)
    queries = [make_table(f"q{i + 1:02d}", int(query_topics[i]), min_rows=8) for i in range(n_queries)]

    def core_entities(rec):
        t = parse_table(rec, kb)
        c = detect_core_column(t)
        return set() if c is None else {row[c].entity for row in t.rows if row[c].entity}

    corpus_entities = {r["id"]: core_entities(r) for r in corpus}
    qrels = {}
    for q in queries:
        qe = core_entities(q)
        judged = {}
        for tid, te in corpus_entities.items():
            g = overlap_grade(len(qe & te))
            if g:
                judged[tid] = g
        qrels[q["id"]] = judged

    return MicroCorpus(kb, corpus, queries, qrels, word_vectors, graph_vectors, aliases)
