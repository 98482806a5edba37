"""Learning to rank over table-pair feature vectors.

Regression forests score HCF and CRAB vectors; a coordinate-ascent linear
model combines the four InfoGather similarities. Cross-validation always
partitions by input table so no query leaks across train and test.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .evaluation import Run, ndcg, ndcg_query
from .matching import Feature, Layout, LayoutError

N_TREES = 1000
MAX_FEATURES = 3
FOLDS = 5

_MAGIC = b"TBLFOREST"
_VERSION = 1


@dataclass
class Dataset:
    qids: list
    docids: list
    X: np.ndarray
    y: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.qids), -1)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[1] != len(self.layout):
            raise LayoutError(f"{self.X.shape[1]} columns for a layout of {len(self.layout)}")
        if not (len(self.qids) == len(self.docids) == len(self.y)):
            raise ValueError("qids, docids and labels must align")

    def __len__(self):
        return len(self.qids)

    def query_ids(self):
        return sorted(set(self.qids))

    def rows_for(self, queries) -> np.ndarray:
        wanted = set(queries)
        return np.array([i for i, q in enumerate(self.qids) if q in wanted], dtype=int)

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            [self.qids[i] for i in rows], [self.docids[i] for i in rows], self.X[rows], self.y[rows], self.layout
        )

    def select(self, columns):
        columns = list(columns)
        return Dataset(self.qids, self.docids, self.X[:, columns], self.y, self.layout.subset(columns))

    def save_csv(self, path, header=None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header or ():
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["qid", "docid", "label"] + self.layout.names)
            for q, d, label, row in zip(self.qids, self.docids, self.y, self.X):
                w.writerow([q, d, int(label)] + [repr(float(v)) for v in row])

    @classmethod
    def load_csv(cls, path, groups=None):
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [line for line in fh if not line.startswith("#")]
        reader = csv.reader(lines)
        head = next(reader)
        if head[:3] != ["qid", "docid", "label"]:
            raise ValueError(f"{path}: header must start with qid,docid,label")
        names = head[3:]
        groups = groups or {}
        layout = Layout(tuple(Feature(groups.get(n, _group_of(n)), n) for n in names))
        qids, docids, ys, xs = [], [], [], []
        for row in reader:
            if not row:
                continue
            qids.append(row[0])
            docids.append(row[1])
            ys.append(float(row[2]))
            xs.append([float(v) for v in row[3:]])
        return cls(qids, docids, np.array(xs).reshape(len(qids), len(names)), np.array(ys), layout)


def _group_of(name):
    if name.startswith("in:"):
        return "input-table"
    if name.startswith("cand:"):
        return "candidate-table"
    return "similarity"


@dataclass
class ForestModel:
    """Regression forest stored as flat node arrays.

    Node ``i`` is a leaf when ``feature[i] < 0``; otherwise samples with
    ``x[feature] <= threshold`` go to ``left`` (global node index).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    # weighted variance decrease achieved by the split at each node
    decrease: np.ndarray
    roots: np.ndarray
    n_features: int
    max_features: int
    seed: int
    layout_names: tuple = field(default_factory=tuple)

    @property
    def n_trees(self):
        return len(self.roots)

    @property
    def fingerprint(self):
        return Layout(tuple(Feature("", n) for n in self.layout_names)).fingerprint

    def check_layout(self, layout: Layout):
        if tuple(layout.names) != tuple(self.layout_names):
            raise LayoutError(f"feature layout {layout.fingerprint} does not match model layout {self.fingerprint}")


def _from_sklearn(forest: RandomForestRegressor, n_features, max_features, seed, names) -> ForestModel:
    parts = {k: [] for k in ("feature", "threshold", "left", "right", "value", "decrease")}
    roots = []
    offset = 0
    for est in forest.estimators_:
        tree = est.tree_
        n = tree.node_count
        leaf = tree.children_left < 0
        roots.append(offset)
        parts["feature"].append(np.where(leaf, -1, tree.feature).astype(np.int32))
        parts["threshold"].append(np.where(leaf, 0.0, tree.threshold))
        parts["left"].append(np.where(leaf, -1, tree.children_left + offset).astype(np.int32))
        parts["right"].append(np.where(leaf, -1, tree.children_right + offset).astype(np.int32))
        parts["value"].append(tree.value[:, 0, 0].astype(float))
        w = tree.weighted_n_node_samples
        imp = tree.impurity
        dec = np.zeros(n)
        internal = np.flatnonzero(~leaf)
        lc, rc = tree.children_left[internal], tree.children_right[internal]
        dec[internal] = w[internal] * imp[internal] - w[lc] * imp[lc] - w[rc] * imp[rc]
        parts["decrease"].append(dec)
        offset += n
    arrays = {k: np.concatenate(v) for k, v in parts.items()}
    return ForestModel(
        roots=np.asarray(roots, dtype=np.int32),
        n_features=n_features,
        max_features=max_features,
        seed=seed,
        layout_names=tuple(names),
        **arrays,
    )


def train_forest(data: Dataset, trees=N_TREES, max_features=MAX_FEATURES, seed=0, n_jobs=None) -> ForestModel:
    """Bootstrap-aggregated variance-reduction trees, fully grown, deterministic per seed."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    n_features = data.X.shape[1]
    if max_features > n_features:
        raise ValueError(f"max_features={max_features} exceeds the {n_features} available features")
    forest = RandomForestRegressor(
        n_estimators=trees,
        max_features=max_features,
        bootstrap=True,
        min_samples_leaf=1,
        random_state=seed,
        n_jobs=n_jobs,
    )
    forest.fit(data.X, data.y)
    return _from_sklearn(forest, n_features, max_features, seed, data.layout.names)


def predict_matrix(model: ForestModel, X) -> np.ndarray:
    # tree thresholds were fit on float32-cast inputs
    X = np.asarray(X, dtype=np.float32).astype(np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise LayoutError(f"expected {model.n_features} features, got {X.shape[1]}")
    node = np.broadcast_to(model.roots, (X.shape[0], model.n_trees)).copy()
    rows = np.arange(X.shape[0])[:, None]
    while True:
        feat = model.feature[node]
        active = feat >= 0
        if not active.any():
            break
        go_left = X[rows, np.where(active, feat, 0)] <= model.threshold[node]
        node = np.where(active, np.where(go_left, model.left[node], model.right[node]), node)
    return model.value[node].mean(axis=1)


def predict(model: ForestModel, fv) -> float:
    model.check_layout(fv.layout)
    return float(predict_matrix(model, fv.values)[0])


def feature_importance(model: ForestModel):
    """Variance-reduction ("Gini") importance per feature, descending.

    Each tree's decreases are normalized to sum 1, then averaged over trees.
    """
    totals = np.zeros(model.n_features)
    bounds = list(model.roots) + [len(model.feature)]
    for start, stop in zip(bounds[:-1], bounds[1:]):
        feat, dec = model.feature[start:stop], model.decrease[start:stop]
        per_tree = np.zeros(model.n_features)
        np.add.at(per_tree, feat[feat >= 0], dec[feat >= 0])
        if per_tree.sum() > 0:
            totals += per_tree / per_tree.sum()
    s = totals.sum()
    if s > 0:
        totals = totals / s
    names = model.layout_names or tuple(f"f{i}" for i in range(model.n_features))
    order = sorted(range(model.n_features), key=lambda i: (-totals[i], i))
    return [(names[i], float(totals[i])) for i in order]


_ARRAYS = (
    ("feature", np.int32),
    ("threshold", np.float64),
    ("left", np.int32),
    ("right", np.int32),
    ("value", np.float64),
    ("decrease", np.float64),
    ("roots", np.int32),
)


def save_forest(model: ForestModel, path, header=None) -> None:
    meta = {
        "config": list(header or ()),
        "version": _VERSION,
        "n_features": model.n_features,
        "max_features": model.max_features,
        "seed": model.seed,
        "layout": list(model.layout_names),
        "fingerprint": model.fingerprint,
        "sizes": {name: int(len(getattr(model, name))) for name, _ in _ARRAYS},
    }
    head = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(getattr(model, name), dtype=dt).tobytes() for name, dt in _ARRAYS)
    blob = _MAGIC + len(head).to_bytes(4, "little") + head + body
    Path(path).write_bytes(zlib.compress(blob, 6))


def load_forest(path) -> ForestModel:
    blob = zlib.decompress(Path(path).read_bytes())
    if not blob.startswith(_MAGIC):
        raise ValueError(f"{path}: not a forest model file")
    pos = len(_MAGIC)
    hlen = int.from_bytes(blob[pos:pos + 4], "little")
    meta = json.loads(blob[pos + 4:pos + 4 + hlen])
    if meta["version"] != _VERSION:
        raise ValueError(f"{path}: unsupported model version {meta['version']}")
    pos += 4 + hlen
    arrays = {}
    for name, dt in _ARRAYS:
        size = meta["sizes"][name]
        nbytes = size * np.dtype(dt).itemsize
        arrays[name] = np.frombuffer(blob[pos:pos + nbytes], dtype=dt).copy()
        pos += nbytes
    return ForestModel(
        n_features=meta["n_features"],
        max_features=meta["max_features"],
        seed=meta["seed"],
        layout_names=tuple(meta["layout"]),
        **arrays,
    )


def assign_folds(query_ids, folds=FOLDS, seed=0):
    """Deterministic random partition of query ids into ``folds`` groups."""
    qs = sorted(set(query_ids))
    if len(qs) < folds:
        raise ValueError(f"{len(qs)} queries cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(len(qs))
    return [sorted(qs[i] for i in part) for part in np.array_split(perm, folds)]


@dataclass
class CVResult:
    run: Run
    models: list
    folds: list

    def fold_of(self, qid):
        for i, qs in enumerate(self.folds):
            if qid in qs:
                return i
        raise KeyError(qid)

    def model_for(self, qid):
        return self.models[self.fold_of(qid)]


def cross_validate(data: Dataset, folds=FOLDS, seed=0, trees=N_TREES, max_features=MAX_FEATURES, tag="forest", n_jobs=None):
    parts = assign_folds(data.qids, folds, seed)
    scores = {}
    models = []
    for test_q in parts:
        train_rows = data.rows_for([q for q in data.query_ids() if q not in set(test_q)])
        model = train_forest(data.take(train_rows), trees, max_features, seed, n_jobs)
        models.append(model)
        test_rows = data.rows_for(test_q)
        preds = predict_matrix(model, data.X[test_rows])
        for i, p in zip(test_rows, preds):
            scores.setdefault(data.qids[i], {})[data.docids[i]] = float(p)
    return CVResult(Run.from_scores(scores, tag), models, parts)


def qrels_from_dataset(data: Dataset) -> dict:
    qrels = {}
    for q, d, y in zip(data.qids, data.docids, data.y):
        qrels.setdefault(q, {})[d] = int(y)
    return qrels


def incremental_feature_eval(data: Dataset, qrels=None, batch=10, folds=FOLDS, seed=0, trees=N_TREES, max_features=MAX_FEATURES, n_jobs=None):
    """NDCG@5/10 using the top-10, top-20, ... features by importance."""
    qrels = qrels if qrels is not None else qrels_from_dataset(data)
    full = train_forest(data, trees, max_features, seed, n_jobs)
    order = [data.layout.names.index(name) for name, _ in feature_importance(full)]
    m = len(order)
    out = []
    for count in range(batch, m + batch, batch):
        count = min(count, m)
        cols = sorted(order[:count])
        sub = data.select(cols)
        cv = cross_validate(sub, folds, seed, trees, min(max_features, count), n_jobs=n_jobs)
        out.append((count, ndcg(cv.run, qrels, 5)[1], ndcg(cv.run, qrels, 10)[1]))
        if count == m:
            break
    return out


def _mean_ndcg(weights, groups, k):
    vals = []
    for docids, X, grades in groups:
        s = X @ weights
        order = sorted(range(len(docids)), key=lambda i: (-s[i], docids[i]))
        vals.append(ndcg_query([docids[i] for i in order], dict(zip(docids, grades)), k))
    return float(np.mean(vals)) if vals else 0.0


STEPS = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0)


def train_linear(data: Dataset, seed=0, iterations=25, k=10) -> np.ndarray:
    """Cyclic coordinate ascent on mean NDCG@k with a grid line search per coordinate."""
    d = data.X.shape[1]
    groups = []
    for q in data.query_ids():
        rows = data.rows_for([q])
        groups.append(([data.docids[i] for i in rows], data.X[rows], [int(data.y[i]) for i in rows]))
    rng = np.random.default_rng(seed)
    w = np.full(d, 1.0 / d)
    best = _mean_ndcg(w, groups, k)
    for _ in range(iterations):
        improved = False
        for j in rng.permutation(d):
            for step in STEPS:
                for sign in (1.0, -1.0):
                    cand = w.copy()
                    cand[j] += sign * step
                    norm = np.abs(cand).sum()
                    if norm == 0:
                        continue
                    cand /= norm
                    score = _mean_ndcg(cand, groups, k)
                    if score > best + 1e-12:
                        best, w, improved = score, cand, True
        if not improved:
            break
    return w
