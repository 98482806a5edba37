"""Command-line driver: ingest, index, pool, extract-features, train, rank, eval and analysis.

Every artifact carries the resolved configuration as ``#`` header lines (or
a header field for binary files). Outputs are written to a temporary file
and moved into place only on success.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import BASELINES, VARIANTS, ExperimentConfig
from .evaluation import (
    Run,
    fleiss_kappa,
    ndcg,
    paired_ttest,
    read_qrels,
    read_run,
    significance_marker,
    split_experiment,
    write_run,
)
from .index import build_index, save_index
from .kb import load_kb
from .ranker import (
    Dataset,
    cross_validate,
    feature_importance,
    incremental_feature_eval,
    load_forest,
    save_forest,
    train_forest,
)
from .pipeline import (
    baseline_run,
    build_dataset,
    infogather_run,
    load_queries,
    load_resources,
    make_reranker,
    variant_layout,
)
from .tables import read_corpus, write_corpus

log = logging.getLogger("tablerec")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@contextmanager
def _output(path):
    """Yield a temporary sibling of ``path``; rename into place on success, delete on failure."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("variant", "seed", "trees"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    return cfg.updated(overrides)


def _header(cfg, command):
    return [f"tablerec {__version__} {command}"] + cfg.lines()


def _require(cfg, *keys):
    missing = [k for k in keys if not getattr(cfg, k)]
    if missing:
        raise UsageError("missing configuration: " + ", ".join(missing) + " (set in --config or with --set)")


def _resources(cfg, args):
    _require(cfg, "corpus", "kb_catalog", "kb_links")
    return load_resources(cfg, getattr(args, "index", None))


def _qrels(cfg):
    return read_qrels(cfg.qrels) if cfg.qrels else {}


def read_pools(path) -> dict:
    pools = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            qid, doc = line.rstrip("\n").split("\t")
            pools.setdefault(qid, [])
            if doc:
                pools[qid].append(doc)
    return pools


def write_pools(pools, path, header=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for qid in sorted(pools):
            if not pools[qid]:
                fh.write(f"{qid}\t\n")
            for doc in pools[qid]:
                fh.write(f"{qid}\t{doc}\n")


def _pools(res, queries, args):
    if getattr(args, "pools", None):
        pools = read_pools(args.pools)
        missing = [q.table_id for q in queries if q.table_id not in pools]
        if missing:
            raise ValueError(f"{args.pools}: no pool for queries {', '.join(missing[:5])}")
        return pools
    return {q.table_id: res.pool(q) for q in queries}


def _pools_from_dataset(data: Dataset) -> dict:
    pools = {}
    for q, d in zip(data.qids, data.docids):
        pools.setdefault(q, []).append(d)
    return pools


def _dataset(res, queries, cfg, args):
    if getattr(args, "features", None):
        data = Dataset.load_csv(args.features)
        expected = variant_layout(cfg.variant)
        if data.layout.names != expected.names:
            raise ValueError(
                f"{args.features}: feature columns do not match {cfg.variant} (layout {expected.fingerprint})"
            )
        return data
    return build_dataset(res, queries, _pools(res, queries, args), _qrels(cfg), cfg.variant)


# subcommands


def cmd_ingest(args, cfg):
    _require(cfg, "kb_catalog", "kb_links")
    kb = load_kb(cfg.kb_catalog, cfg.kb_links, cfg.kb_redirects or None)
    tables = list(read_corpus(args.raw, kb))
    with _output(args.out) as tmp:
        write_corpus(tables, tmp, _header(cfg, "ingest"))
    print(f"{len(tables)} tables written to {args.out}")


def cmd_index(args, cfg):
    _require(cfg, "corpus", "kb_catalog", "kb_links")
    kb = load_kb(cfg.kb_catalog, cfg.kb_links, cfg.kb_redirects or None)
    index, stats = build_index(read_corpus(cfg.corpus, kb))
    with _output(args.out) as tmp:
        save_index(index, stats, tmp, _header(cfg, "index"))
    print(f"indexed {index.n_docs} tables into {args.out}")


def cmd_pool(args, cfg):
    res = _resources(cfg, args)
    queries = load_queries(cfg, res.kb) if cfg.queries else []
    if args.input:
        lookup = {q.table_id: q for q in queries}
        lookup.update({k: v for k, v in res.tables.items() if k not in lookup})
        if args.input not in lookup:
            raise ValueError(f"unknown table id {args.input!r}")
        queries = [lookup[args.input]]
    elif not queries:
        raise UsageError("pool needs --input or a queries file in the configuration")
    pools = {q.table_id: res.pool(q) for q in queries}
    if args.out:
        with _output(args.out) as tmp:
            write_pools(pools, tmp, _header(cfg, "pool"))
    else:
        for qid in sorted(pools):
            for doc in pools[qid]:
                print(f"{qid}\t{doc}")
    for qid in sorted(pools):
        log.info("%s: %d candidates", qid, len(pools[qid]))


def cmd_extract_features(args, cfg):
    if cfg.variant not in VARIANTS:
        raise UsageError(f"extract-features needs a learned variant ({', '.join(VARIANTS)})")
    _require(cfg, "queries")
    res = _resources(cfg, args)
    queries = load_queries(cfg, res.kb)
    data = build_dataset(res, queries, _pools(res, queries, args), _qrels(cfg), cfg.variant)
    with _output(args.out) as tmp:
        data.save_csv(tmp, _header(cfg, "extract-features") + [f"layout = {data.layout.fingerprint}"])
    print(f"{len(data)} rows x {len(data.layout)} features written to {args.out}")


def cmd_train(args, cfg):
    data = Dataset.load_csv(args.features)
    model = train_forest(data, cfg.trees, cfg.max_features, cfg.seed)
    with _output(args.out) as tmp:
        save_forest(model, tmp, _header(cfg, "train"))
    print(f"forest of {model.n_trees} trees over {model.n_features} features written to {args.out}")


def cmd_rank(args, cfg):
    method = args.method or cfg.variant
    if method not in VARIANTS + BASELINES:
        raise UsageError(f"unknown method {method!r}")
    tag = args.tag or method.lower()
    header = _header(cfg, f"rank {method}")
    if method in VARIANTS and args.features:
        cfg = cfg.updated({"variant": method})
        data = _dataset(None, [], cfg, args)
        run = cross_validate(data, cfg.folds, cfg.seed, cfg.trees, cfg.max_features, tag).run
    else:
        _require(cfg, "queries")
        res = _resources(cfg, args)
        queries = load_queries(cfg, res.kb)
        pools = _pools(res, queries, args)
        if method in VARIANTS:
            data = build_dataset(res, queries, pools, _qrels(cfg), method)
            run = cross_validate(data, cfg.folds, cfg.seed, cfg.trees, cfg.max_features, tag).run
        elif method == "infogather":
            _require(cfg, "qrels")
            run, weights = infogather_run(res, queries, pools, _qrels(cfg))
            for i, w in enumerate(weights):
                header.append(f"fold {i} weights = " + " ".join(repr(float(x)) for x in w))
        else:
            run = baseline_run(res, method, queries, pools)
    run.tag = tag
    with _output(args.out) as tmp:
        write_run(run, tmp, header)
    print(f"run {tag} for {len(run.queries())} queries written to {args.out}")


def cmd_eval(args, cfg):
    qrels = read_qrels(args.qrels or cfg.qrels) if (args.qrels or cfg.qrels) else None
    if qrels is None:
        raise UsageError("eval needs --qrels")
    runs = [read_run(p) for p in args.runs]
    per = [{k: ndcg(r, qrels, k, args.gain)[0] for k in (5, 10)} for r in runs]
    lines = [f"{'method':<24}{'NDCG@5':>12}{'NDCG@10':>12}"]
    for i, (run, scores) in enumerate(zip(runs, per)):
        cells = []
        for k in (5, 10):
            mean = float(np.mean(list(scores[k].values()))) if scores[k] else 0.0
            mark = ""
            if i > 0:
                common = sorted(set(scores[k]) & set(per[0][k]))
                if len(common) >= 2:
                    res = paired_ttest([scores[k][q] for q in common], [per[0][k][q] for q in common])
                    mark = significance_marker(res.p)
            cells.append(f"{mean:.4f}{mark}")
        lines.append(f"{run.tag:<24}" + "".join(f"{c:>12}" for c in cells))
    if len(runs) > 1:
        lines.append(f"markers: paired t-test against {runs[0].tag}; † p<0.05, ‡ p<0.01")
    print("\n".join(lines))


def cmd_importance(args, cfg):
    if args.incremental:
        if not args.features:
            raise UsageError("--incremental needs --features")
        data = Dataset.load_csv(args.features)
        qrels = _qrels(cfg) or None
        rows = incremental_feature_eval(
            data, qrels, args.batch, cfg.folds, cfg.seed, cfg.trees, cfg.max_features
        )
        header = ["features", "ndcg@5", "ndcg@10"]
        body = [[n, repr(a), repr(b)] for n, a, b in rows]
    else:
        if not args.model:
            raise UsageError("importance needs --model (or --incremental --features)")
        model = load_forest(args.model)
        header = ["rank", "feature", "importance"]
        body = [[i, name, repr(v)] for i, (name, v) in enumerate(feature_importance(model), 1)]
    if args.out:
        with _output(args.out) as tmp:
            with open(tmp, "w", newline="", encoding="utf-8") as fh:
                for line in _header(cfg, "importance"):
                    fh.write(f"# {line}\n")
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(body)
    else:
        for row in body:
            print("\t".join(str(x) for x in row))


def cmd_split_eval(args, cfg):
    if cfg.variant not in VARIANTS:
        raise UsageError("split-eval needs a learned variant")
    _require(cfg, "queries", "qrels")
    res = _resources(cfg, args)
    queries = load_queries(cfg, res.kb)
    qrels = _qrels(cfg)
    data = _dataset(res, queries, cfg, args)
    pools = _pools_from_dataset(data)
    for q in queries:
        pools.setdefault(q.table_id, [])
    cv = cross_validate(data, cfg.folds, cfg.seed, cfg.trees, cfg.max_features)
    rows = split_experiment(queries, make_reranker(res, cv, pools, cfg.variant), qrels, tuple(args.axes))
    with _output(args.out) as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            for line in _header(cfg, "split-eval"):
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["axis", "fraction", "ndcg@5", "ndcg@10"])
            for axis, frac, n5, n10 in rows:
                w.writerow([axis, frac, repr(n5), repr(n10)])
    print(f"{len(rows)} split points written to {args.out}")


def read_counts(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if rows:
                    raise ValueError(f"{path}: non-numeric count row {row}") from None
    return rows


def cmd_kappa(args, cfg):
    print(f"fleiss_kappa = {fleiss_kappa(read_counts(args.counts)):.4f}")


def build_parser():
    p = _Parser(prog="tablerec", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse a raw corpus, resolve links against the KB")
    s.add_argument("--raw", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("index", help="build and persist the corpus index")
    s.add_argument("--out", required=True)

    s = sub.add_parser("pool", help="candidate pool for one table or for every query")
    s.add_argument("--input")
    s.add_argument("--index")
    s.add_argument("--out")

    s = sub.add_parser("extract-features", help="feature CSV for the configured variant")
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--index")
    s.add_argument("--pools")
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train a forest on a feature CSV")
    s.add_argument("--features", required=True)
    s.add_argument("--trees", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("rank", help="write a TREC run for a variant (cross-validated) or baseline")
    s.add_argument("--method", choices=VARIANTS + BASELINES)
    s.add_argument("--features")
    s.add_argument("--index")
    s.add_argument("--pools")
    s.add_argument("--trees", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--tag")
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", help="NDCG@5/@10 table with significance markers")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--qrels")
    s.add_argument("--gain", choices=("exp", "linear"), default="exp")

    s = sub.add_parser("importance", help="feature importance or incremental feature evaluation")
    s.add_argument("--model")
    s.add_argument("--features")
    s.add_argument("--incremental", action="store_true")
    s.add_argument("--batch", type=int, default=10)
    s.add_argument("--trees", type=int)
    s.add_argument("--out")

    s = sub.add_parser("split-eval", help="NDCG when only part of each input table is given")
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--features")
    s.add_argument("--index")
    s.add_argument("--axes", nargs="+", choices=("rows", "columns"), default=["rows", "columns"])
    s.add_argument("--trees", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("kappa", help="Fleiss' kappa from an items x categories count CSV")
    s.add_argument("--counts", required=True)
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "pool": cmd_pool,
    "extract-features": cmd_extract_features,
    "train": cmd_train,
    "rank": cmd_rank,
    "eval": cmd_eval,
    "importance": cmd_importance,
    "split-eval": cmd_split_eval,
    "kappa": cmd_kappa,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
        )
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"tablerec: usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (OSError, ValueError, KeyError) as exc:
        print(f"tablerec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
