"""End-to-end glue: load resources, pool candidates, build feature datasets, score runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .config import ExperimentConfig
from .evaluation import Run
from .index import build_index, candidate_pool, load_index
from .kb import MLMRetriever, load_kb
from .matching import (
    CANDIDATE_TABLE_LAYOUT,
    CROSS_ELEMENT_LAYOUT,
    ELEMENT_WISE_LAYOUT,
    INPUT_TABLE_LAYOUT,
    Feature,
    Layout,
    cross_element_features,
    element_wise_features,
    table_features,
)
from .ranker import Dataset, assign_folds, predict_matrix, train_linear
from .semantic import EmbeddingStore, Stores, represent_all
from .tables import extract_elements, read_corpus

log = logging.getLogger(__name__)

TABLE_BLOCK = INPUT_TABLE_LAYOUT + CANDIDATE_TABLE_LAYOUT

VARIANT_BLOCKS = {
    "HCF-1": (False, ("hcf",)),
    "HCF-2": (True, ("hcf",)),
    "CRAB-1": (False, ("ew",)),
    "CRAB-2": (True, ("ew",)),
    "CRAB-3": (True, ("ce",)),
    "CRAB-4": (True, ("ew", "ce")),
}

_BLOCK_LAYOUTS = {
    "hcf": baselines.HCF_LAYOUT,
    "ew": ELEMENT_WISE_LAYOUT,
    "ce": CROSS_ELEMENT_LAYOUT,
}


def variant_layout(variant) -> Layout:
    with_tables, blocks = VARIANT_BLOCKS[variant]
    layout = TABLE_BLOCK if with_tables else Layout(())
    for b in blocks:
        layout = layout + _BLOCK_LAYOUTS[b]
    return layout


@dataclass
class Resources:
    kb: object
    index: object
    stats: object
    stores: Stores
    tables: dict
    config: ExperimentConfig = field(default_factory=ExperimentConfig)
    retriever: object = None
    _elements: dict = field(default_factory=dict, repr=False)
    _reps: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.retriever is None and self.kb is not None:
            self.retriever = MLMRetriever(
                self.kb,
                {"label": self.config.mlm_label_weight, "abstract": self.config.mlm_abstract_weight},
            )

    @staticmethod
    def _key(t):
        return (t.table_id, t.n_rows, t.n_cols)

    def elements(self, t):
        key = self._key(t)
        if key not in self._elements:
            self._elements[key] = extract_elements(t, self.retriever, self.config.topic_k)
        return self._elements[key]

    def reps(self, t):
        key = self._key(t)
        if key not in self._reps:
            self._reps[key] = represent_all(self.elements(t), self.stores, self.kb, self.stats)
        return self._reps[key]

    def pool(self, t):
        return candidate_pool(t, self.index, self.kb, self.config.pool_depth)

    def pair_values(self, t_in, t_cand, variant):
        with_tables, blocks = VARIANT_BLOCKS[variant]
        values = []
        if with_tables:
            values += table_features(t_in, self.stats) + table_features(t_cand, self.stats)
        norm = self.config.normalize_late_sum
        for b in blocks:
            if b == "hcf":
                values += baselines.hcf_features(
                    t_in,
                    t_cand,
                    self.elements(t_in).entities,
                    self.elements(t_cand).entities,
                    self.stats,
                    self.kb,
                    self.config.delta,
                )
            elif b == "ew":
                values += element_wise_features(self.reps(t_in), self.reps(t_cand), norm)
            else:
                values += cross_element_features(self.reps(t_in), self.reps(t_cand), norm)
        return values

    def feature_matrix(self, t_in, candidates, variant) -> np.ndarray:
        layout = variant_layout(variant)
        rows = [self.pair_values(t_in, self.tables[c], variant) for c in candidates]
        return np.array(rows, dtype=float).reshape(len(candidates), len(layout))


def load_resources(config: ExperimentConfig, index_path=None) -> Resources:
    kb = load_kb(config.kb_catalog, config.kb_links, config.kb_redirects or None)
    tables = {t.table_id: t for t in read_corpus(config.corpus, kb)}
    if index_path is not None:
        index, stats = load_index(index_path)
    else:
        index, stats = build_index(tables.values())
    stores = Stores(
        word=EmbeddingStore.load(config.word_embeddings, "word") if config.word_embeddings else None,
        graph=EmbeddingStore.load(config.graph_embeddings, "graph") if config.graph_embeddings else None,
        mutual_links=config.mutual_links,
    )
    return Resources(kb, index, stats, stores, tables, config)


def load_queries(config: ExperimentConfig, kb):
    return list(read_corpus(config.queries, kb))


def build_dataset(res: Resources, queries, pools: dict, qrels: dict, variant) -> Dataset:
    layout = variant_layout(variant)
    qids, docids, blocks, labels = [], [], [], []
    for q in queries:
        cands = pools[q.table_id]
        if not cands:
            continue
        blocks.append(res.feature_matrix(q, cands, variant))
        qids += [q.table_id] * len(cands)
        docids += list(cands)
        judged = qrels.get(q.table_id, {})
        labels += [judged.get(c, 0) for c in cands]
    X = np.vstack(blocks) if blocks else np.zeros((0, len(layout)))
    return Dataset(qids, docids, X, np.array(labels, dtype=float), layout)


def baseline_scores(res: Resources, method, t_in, candidates) -> dict:
    cfg = res.config
    if method in baselines.KEYWORD_METHODS:
        return baselines.keyword_scores(t_in, res.index, candidates, res.kb)[method]
    out = {}
    e_in = res.elements(t_in).entities
    for c in candidates:
        t = res.tables[c]
        if method == "msje":
            out[c] = baselines.msje_score(t_in, t, cfg.delta)
        elif method == "schema-complement":
            out[c] = baselines.schema_complement_score(t_in, t, res.stats, e_in, res.elements(t).entities)
        elif method == "entity-complement":
            out[c] = baselines.entity_complement_score(e_in, res.elements(t).entities, res.kb)
        elif method == "nguyen":
            out[c] = baselines.nguyen_score(t_in, t, cfg.alpha, cfg.delta)
        else:
            raise ValueError(f"unknown baseline {method!r}")
    return out


def baseline_run(res: Resources, method, queries, pools) -> Run:
    return Run.from_scores(
        {q.table_id: baseline_scores(res, method, q, pools[q.table_id]) for q in queries}, method
    )


def infogather_run(res: Resources, queries, pools, qrels, folds=None, seed=None):
    """Cross-validated InfoGather: coordinate-ascent weights per fold; returns (run, weights per fold)."""
    folds = folds or res.config.folds
    seed = res.config.seed if seed is None else seed
    feats = {}
    for q in queries:
        cands = pools[q.table_id]
        feats[q.table_id] = (
            list(cands),
            np.array([baselines.infogather_features(q, res.tables[c], res.stats) for c in cands]).reshape(len(cands), 4),
        )
    layout = Layout(tuple(Feature("similarity", f"infogather:{n}") for n in ("table", "column", "pagetitle", "headings")))
    parts = assign_folds(feats, folds, seed)
    scores, weights = {}, []
    for test_q in parts:
        train_q = [q for q in sorted(feats) if q not in test_q]
        qids, docids, xs, ys = [], [], [], []
        for q in train_q:
            cands, X = feats[q]
            qids += [q] * len(cands)
            docids += cands
            xs.append(X)
            ys += [qrels.get(q, {}).get(c, 0) for c in cands]
        w = train_linear(Dataset(qids, docids, np.vstack(xs), np.array(ys, dtype=float), layout), seed)
        weights.append(w)
        for q in test_q:
            cands, X = feats[q]
            scores[q] = {c: baselines.infogather_score(x, w) for c, x in zip(cands, X)}
    return Run.from_scores(scores, "infogather"), weights


def make_reranker(res: Resources, cv, pools, variant):
    """Score a (possibly truncated) input table with the model of the fold it was held out in."""

    def rerank(t):
        cands = pools[t.table_id]
        if not cands:
            return {}
        preds = predict_matrix(cv.model_for(t.table_id), res.feature_matrix(t, cands, variant))
        return {c: float(p) for c, p in zip(cands, preds)}

    return rerank
