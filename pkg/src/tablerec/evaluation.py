"""Ranking metrics, significance testing, annotator agreement and TREC file I/O."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .tables import SPLIT_FRACTIONS, split_table

log = logging.getLogger(__name__)


@dataclass
class Run:
    """Per-query ranked (candidate id, score) lists under a method tag."""

    rankings: dict = field(default_factory=dict)
    tag: str = "run"

    @classmethod
    def from_scores(cls, scores: dict, tag="run"):
        """Build a run from {qid: {docid: score}}; ties broken by candidate id."""
        return cls(
            {q: sorted(s.items(), key=lambda kv: (-kv[1], kv[0])) for q, s in scores.items()},
            tag,
        )

    def queries(self):
        return sorted(self.rankings)

    def docs(self, qid):
        return [d for d, _ in self.rankings.get(qid, [])]


def read_qrels(path) -> dict:
    qrels = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            qid, _, doc, grade = parts
            qrels[qid][doc] = int(grade)
    return dict(qrels)


def write_qrels(qrels: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            for doc in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {doc} {qrels[qid][doc]}\n")


def format_score(score) -> str:
    return repr(float(score))


def write_run(run: Run, path, header=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        for qid in run.queries():
            for rank, (doc, score) in enumerate(run.rankings[qid], 1):
                fh.write(f"{qid} Q0 {doc} {rank} {format_score(score)} {run.tag}\n")


def read_run(path) -> Run:
    rows = defaultdict(list)
    tag = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 'qid Q0 docid rank score tag'")
            qid, _, doc, rank, score, tag = parts
            rows[qid].append((int(rank), doc, float(score)))
    return Run({q: [(d, s) for _, d, s in sorted(r)] for q, r in rows.items()}, tag or "run")


def dcg(grades, k, gain="exp"):
    total = 0.0
    for rank, g in enumerate(grades[:k], 1):
        value = (2.0**g - 1.0) if gain == "exp" else float(g)
        total += value / math.log2(rank + 1)
    return total


def ndcg_query(ranked_docs, judged: dict, k, gain="exp") -> float:
    ideal = dcg(sorted(judged.values(), reverse=True), k, gain)
    if ideal == 0:
        return 0.0
    return dcg([judged.get(d, 0) for d in ranked_docs], k, gain) / ideal


def ndcg(run: Run, qrels: dict, k: int, gain="exp"):
    """Per-query NDCG@k and its mean; unjudged documents count as grade 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    per_query = {}
    for qid in run.queries():
        if qid not in qrels:
            log.warning("query %s has no relevance judgments; scored as 0", qid)
        per_query[qid] = ndcg_query(run.docs(qid), qrels.get(qid, {}), k, gain)
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return per_query, mean


def _betacf(a, b, x, max_iter=300, eps=1e-15):
    """Continued fraction for the regularized incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t, df):
    return betainc(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    degenerate: bool = False


def paired_ttest(a, b) -> TTestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two paired observations")
    diff = a - b
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(float(t), float(t_two_tailed_p(t, n - 1)))


def significance_marker(p) -> str:
    if p < 0.01:
        return "‡"
    if p < 0.05:
        return "†"
    return ""


def fleiss_kappa(counts) -> float:
    """Fleiss' kappa for an items x categories matrix of rater counts."""
    m = np.asarray(counts, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("counts must be a non-empty items x categories matrix")
    raters = m.sum(axis=1)
    if not np.all(raters == raters[0]):
        raise ValueError("every item must be rated by the same number of annotators")
    n = raters[0]
    if n < 2:
        raise ValueError("need at least two raters per item")
    p_cat = m.sum(axis=0) / m.sum()
    p_item = (np.square(m).sum(axis=1) - n) / (n * (n - 1))
    p_bar = p_item.mean()
    p_e = np.square(p_cat).sum()
    if p_e == 1.0:
        return 1.0
    return float((p_bar - p_e) / (1.0 - p_e))


def per_query_delta(run_a: Run, run_b: Run, qrels, k=10, gain="exp"):
    """Sorted (qid, ndcg_a - ndcg_b) for queries present in both runs."""
    a, _ = ndcg(run_a, qrels, k, gain)
    b, _ = ndcg(run_b, qrels, k, gain)
    common = sorted(set(a) & set(b))
    deltas = [(q, a[q] - b[q]) for q in common]
    deltas.sort(key=lambda qd: (-qd[1], qd[0]))
    return deltas


def write_delta_csv(deltas, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["qid", "delta"])
        for q, d in deltas:
            w.writerow([q, format_score(d)])


def split_experiment(queries, rerank, qrels, axes=("rows", "columns"), fractions=SPLIT_FRACTIONS, ks=(5, 10)):
    """NDCG of a trained pipeline when only a leading portion of each input table is given.

    ``queries`` is a list of RawTables; ``rerank(table)`` returns the
    {candidate: score} mapping for that (possibly truncated) input table.
    Returns rows of (axis, fraction, ndcg@k...).
    """
    rows = []
    for axis in axes:
        for frac in fractions:
            scores = {q.table_id: rerank(split_table(q, axis, frac)) for q in queries}
            run = Run.from_scores(scores, f"split-{axis}-{frac}")
            rows.append((axis, frac) + tuple(ndcg(run, qrels, k)[1] for k in ks))
    return rows
