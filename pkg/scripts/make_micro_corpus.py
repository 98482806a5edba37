"""Write the deterministic micro-corpus and a matching experiment config."""

import argparse
from pathlib import Path

from tablerec.synth import generate

CONFIG_KEYS = ("corpus", "queries", "qrels", "kb_catalog", "kb_links", "kb_redirects", "word_embeddings", "graph_embeddings")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "micro"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--tables", type=int, default=300)
    ap.add_argument("--queries", type=int, default=10)
    args = ap.parse_args()

    out = Path(args.out)
    paths = generate(seed=args.seed, n_tables=args.tables, n_queries=args.queries).write(out)
    lines = [f"{k} = {Path(paths[k]).name}" for k in CONFIG_KEYS]
    lines += ["workdir = work", "seed = 0"]
    (out / "experiment.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"micro-corpus written to {out} (config: {out / 'experiment.cfg'})")


if __name__ == "__main__":
    main()
