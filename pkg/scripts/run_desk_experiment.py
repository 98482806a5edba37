"""Run every baseline and learned variant on a corpus and print an NDCG table.

Defaults to the bundled micro-corpus. Runs, the split curve and feature
importances are written under the config's workdir.
"""

import argparse
import csv
import logging
import time
from pathlib import Path

from tablerec.config import BASELINES, ExperimentConfig
from tablerec.evaluation import ndcg, paired_ttest, read_qrels, significance_marker, split_experiment, write_run
from tablerec.pipeline import (
    baseline_run,
    build_dataset,
    infogather_run,
    load_queries,
    load_resources,
    make_reranker,
)
from tablerec.ranker import cross_validate, feature_importance, train_forest

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "data" / "micro" / "experiment.cfg"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    ap.add_argument("--variants", nargs="+", default=["HCF-1", "HCF-2", "CRAB-1", "CRAB-2", "CRAB-3", "CRAB-4"])
    ap.add_argument("--trees", type=int)
    ap.add_argument("--reference", default="infogather", help="method the significance markers compare against")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ExperimentConfig.load(args.config)
    if args.trees:
        cfg = cfg.updated({"trees": args.trees})
    work = Path(args.config).parent / cfg.workdir
    work.mkdir(parents=True, exist_ok=True)
    header = cfg.lines()

    t0 = time.perf_counter()
    res = load_resources(cfg)
    queries = load_queries(cfg, res.kb)
    qrels = read_qrels(cfg.qrels)
    pools = {q.table_id: res.pool(q) for q in queries}
    logging.info("pooled %d queries in %.1fs", len(queries), time.perf_counter() - t0)

    runs = {}
    for method in BASELINES:
        if method == "infogather":
            runs[method], _ = infogather_run(res, queries, pools, qrels)
        else:
            runs[method] = baseline_run(res, method, queries, pools)
    cvs, datasets = {}, {}
    for variant in args.variants:
        t = time.perf_counter()
        datasets[variant] = build_dataset(res, queries, pools, qrels, variant)
        cvs[variant] = cross_validate(datasets[variant], cfg.folds, cfg.seed, cfg.trees, cfg.max_features, variant.lower())
        runs[variant] = cvs[variant].run
        logging.info("%s done in %.1fs", variant, time.perf_counter() - t)

    for name, run in runs.items():
        write_run(run, work / f"{name.lower()}.run", header)

    ref = {k: ndcg(runs[args.reference], qrels, k)[0] for k in (5, 10)}
    print(f"{'method':<20}{'NDCG@5':>10}{'NDCG@10':>10}")
    for name, run in runs.items():
        cells = []
        for k in (5, 10):
            per, mean = ndcg(run, qrels, k)
            mark = ""
            if name != args.reference:
                qs = sorted(per)
                mark = significance_marker(paired_ttest([per[q] for q in qs], [ref[k][q] for q in qs]).p)
            cells.append(f"{mean:.4f}{mark}")
        print(f"{name:<20}" + "".join(f"{c:>10}" for c in cells))
    print(f"markers: paired t-test against {args.reference}; † p<0.05, ‡ p<0.01")

    if "CRAB-2" in cvs:
        rows = split_experiment(queries, make_reranker(res, cvs["CRAB-2"], pools, "CRAB-2"), qrels)
        with open(work / "split_crab2.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["axis", "fraction", "ndcg@5", "ndcg@10"])
            w.writerows(rows)
        for axis, frac, n5, n10 in rows:
            print(f"split {axis:<8}{frac:>5}  NDCG@5 {n5:.4f}  NDCG@10 {n10:.4f}")
        model = train_forest(datasets["CRAB-2"], cfg.trees, cfg.max_features, cfg.seed)
        with open(work / "importance_crab2.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "importance"])
            w.writerows(feature_importance(model))
    print(f"total {time.perf_counter() - t0:.1f}s; artifacts in {work}")


if __name__ == "__main__":
    main()
