"""Term-space vectors for table elements and their lift into semantic spaces.

Three spaces are supported: ``word`` (pre-trained word vectors, TF-IDF term
weights), ``graph`` (pre-trained entity vectors, binary weights) and
``entity`` (each entity as the indicator vector of the entities it is linked
with, binary weights).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .index import idf

ELEMENTS = ("topic", "headings", "entities", "data")
SPACES = ("word", "graph", "entity")

# which (element, space) pairs carry a representation
ADMISSIBLE = {
    "headings": ("word",),
    "data": ("word", "graph", "entity"),
    "entities": ("graph", "entity"),
    "topic": ("word", "graph", "entity"),
}


class InadmissibleError(ValueError):
    pass


@dataclass(frozen=True)
class TermVector:
    weights: dict
    kind: str = "word"

    def __post_init__(self):
        if any(w == 0 for w in self.weights.values()):
            raise ValueError("term vectors hold no zero weights")

    def __len__(self):
        return len(self.weights)


def word_term_vector(terms, stats) -> TermVector:
    """TF-IDF weights, IDF taken from the catchall field."""
    weights = {}
    for term, tf in Counter(terms).items():
        w = tf * idf(stats, term, "catchall")
        if w > 0:
            weights[term] = w
    return TermVector(weights, "word")


def entity_term_vector(entities) -> TermVector:
    return TermVector({e: 1.0 for e in dict.fromkeys(entities)}, "entity")


class EmbeddingStore:
    """Dense vectors keyed by term; missing terms are reported as None."""

    def __init__(self, vectors: dict, dim: int | None = None, space: str = "word"):
        self.space = space
        keys = list(vectors)
        if dim is None:
            dim = len(next(iter(vectors.values()))) if vectors else 0
        self.dim = dim
        self._row = {k: i for i, k in enumerate(keys)}
        self.matrix = np.zeros((len(keys), dim))
        for i, k in enumerate(keys):
            v = np.asarray(vectors[k], dtype=float)
            if v.shape != (dim,):
                raise ValueError(f"vector for {k!r} has shape {v.shape}, expected ({dim},)")
            self.matrix[i] = v

    def __contains__(self, term):
        return term in self._row

    def __len__(self):
        return len(self._row)

    def get(self, term):
        i = self._row.get(term)
        return None if i is None else self.matrix[i]

    @classmethod
    def load(cls, path, space="word"):
        """Read the textual ``count dim`` / ``term v1 .. vd`` interchange format."""
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: first line must be '<count> <dimension>'")
            count, dim = int(header[0]), int(header[1])
            for lineno, line in enumerate(fh, 2):
                parts = line.rstrip("\n").split(" ")
                if not parts or parts == [""]:
                    continue
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{lineno}: expected {dim} components")
                vectors[parts[0]] = [float(x) for x in parts[1:]]
        if len(vectors) != count:
            raise ValueError(f"{path}: header announces {count} vectors, found {len(vectors)}")
        return cls(vectors, dim, space)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self)} {self.dim}\n")
            for term, i in self._row.items():
                fh.write(term + " " + " ".join(repr(float(x)) for x in self.matrix[i]) + "\n")


def entity_adjacency_vector(kb, entity_id, mutual=False) -> sparse.csr_matrix:
    """1 x |E| indicator of the entities linked with ``entity_id``."""
    cols = sorted(kb.position(e) for e in kb.neighbours(entity_id, mutual))
    data = np.ones(len(cols))
    return sparse.csr_matrix((data, (np.zeros(len(cols), dtype=int), cols)), shape=(1, kb.size))


@dataclass
class ElementRepresentation:
    element: str
    space: str
    weights: np.ndarray
    # rows are term vectors: ndarray for word/graph, csr_matrix for entity
    vectors: object
    missing: int = 0

    def __len__(self):
        return len(self.weights)

    @property
    def empty(self):
        return len(self.weights) == 0


@dataclass
class Stores:
    word: EmbeddingStore | None = None
    graph: EmbeddingStore | None = None
    mutual_links: bool = False


def element_terms(elements, element, space):
    if element == "topic":
        return elements.topic_words if space == "word" else elements.topic_entities
    if element == "headings":
        return elements.heading_words
    if element == "entities":
        return elements.entities
    if element == "data":
        return elements.data_words if space == "word" else elements.data_entities
    raise InadmissibleError(f"unknown element {element!r}")


def represent(elements, element, space, stores: Stores, kb=None, stats=None) -> ElementRepresentation:
    if space not in ADMISSIBLE.get(element, ()):
        raise InadmissibleError(f"element {element!r} has no {space!r} representation")
    terms = element_terms(elements, element, space)
    if space == "word":
        tv = word_term_vector(terms, stats)
        store = stores.word
    else:
        tv = entity_term_vector(terms)
        store = stores.graph

    if space == "entity":
        keep = [e for e in tv.weights if kb is not None and e in kb]
        missing = len(tv) - len(keep)
        if keep:
            vecs = sparse.vstack([entity_adjacency_vector(kb, e, stores.mutual_links) for e in keep], format="csr")
        else:
            vecs = sparse.csr_matrix((0, kb.size if kb is not None else 0))
        return ElementRepresentation(element, space, np.ones(len(keep)), vecs, missing)

    dim = store.dim if store is not None else 0
    weights, rows = [], []
    for term, w in tv.weights.items():
        v = store.get(term) if store is not None else None
        if v is not None:
            weights.append(w)
            rows.append(v)
    missing = len(tv) - len(rows)
    vecs = np.vstack(rows) if rows else np.zeros((0, dim))
    return ElementRepresentation(element, space, np.asarray(weights, dtype=float), vecs, missing)


def represent_all(elements, stores: Stores, kb=None, stats=None) -> dict:
    """All admissible representations of a table, keyed by (element, space)."""
    return {
        (el, sp): represent(elements, el, sp, stores, kb, stats)
        for el in ELEMENTS
        for sp in ADMISSIBLE[el]
    }
