import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import sparse

from tablerec.index import build_index
from tablerec.matching import (
    CROSS_ELEMENT_LAYOUT,
    ELEMENT_WISE_LAYOUT,
    INPUT_TABLE_LAYOUT,
    Layout,
    LayoutError,
    MEASURES,
    assemble,
    crab_similarity_features,
    early_fusion,
    late_fusion,
    similarity_measures,
    table_features,
)
from tablerec.semantic import ADMISSIBLE, ELEMENTS, ElementRepresentation

from conftest import make_table

GOLDEN = Path(__file__).parent / "golden" / "crab_layout.txt"


def rep(vectors, weights=None, space="word"):
    vectors = np.asarray(vectors, dtype=float)
    if weights is None:
        weights = np.ones(len(vectors))
    return ElementRepresentation("data", space, np.asarray(weights, dtype=float), vectors)


def py_cos(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0 or nv == 0:
        return 0.0
    return sum(x * y for x, y in zip(u, v)) / (nu * nv)


def py_centroid(vectors, weights):
    total = sum(weights)
    return [sum(w * v[i] for v, w in zip(vectors, weights)) / total for i in range(len(vectors[0]))]


def test_fusion_worked_example():
    a = rep([[1, 0], [0, 1]], [1, 3])
    b = rep([[1, 1], [2, 0], [0, -1]], [2, 1, 1])
    cen_a = py_centroid([[1, 0], [0, 1]], [1, 3])
    cen_b = py_centroid([[1, 1], [2, 0], [0, -1]], [2, 1, 1])
    assert early_fusion(a, b) == pytest.approx(py_cos(cen_a, cen_b), abs=1e-12)
    pairs = [py_cos(u, v) for u in ([1, 0], [0, 1]) for v in ([1, 1], [2, 0], [0, -1])]
    assert late_fusion(a, b, "max") == pytest.approx(max(pairs), abs=1e-12)
    assert late_fusion(a, b, "sum") == pytest.approx(sum(pairs), abs=1e-12)
    assert late_fusion(a, b, "avg") == pytest.approx(sum(pairs) / 6, abs=1e-12)
    assert late_fusion(a, b, "sum", normalize=True) == pytest.approx(sum(pairs) / 7, abs=1e-12)


vec_lists = st.integers(1, 5).flatmap(
    lambda n: st.tuples(
        arrays(np.float64, (n, 3), elements=st.integers(-20, 20).map(lambda x: x / 4)),
        arrays(np.float64, (n,), elements=st.integers(1, 12).map(lambda x: x / 4)),
    )
)


@settings(max_examples=80)
@given(vec_lists, vec_lists)
def test_fusion_matches_pure_python(x, y):
    (va, wa), (vb, wb) = x, y
    a, b = rep(va, wa), rep(vb, wb)
    pairs = [py_cos(list(u), list(v)) for u in va for v in vb]
    got = similarity_measures(a, b)
    expected = [py_cos(py_centroid(list(va), list(wa)), py_centroid(list(vb), list(wb))), max(pairs), sum(pairs), sum(pairs) / len(pairs)]
    assert got == pytest.approx(expected, abs=1e-9)
    for v in (got[0], got[1], got[3]):
        assert -1 - 1e-12 <= v <= 1 + 1e-12


def test_empty_sides_give_zero():
    a = rep(np.zeros((0, 2)))
    b = rep([[1, 0]])
    assert early_fusion(a, b) == 0.0
    assert similarity_measures(a, b) == [0.0] * 4
    assert similarity_measures(b, a) == [0.0] * 4


def test_space_mismatch_rejected():
    with pytest.raises(ValueError):
        early_fusion(rep([[1, 0]]), rep([[1, 0]], space="graph"))


def test_sparse_entity_space_matches_dense():
    dense_a = np.array([[1, 0, 1, 0], [0, 1, 1, 0]], dtype=float)
    dense_b = np.array([[1, 1, 0, 0], [0, 0, 0, 1], [1, 0, 1, 1]], dtype=float)
    sa = ElementRepresentation("data", "entity", np.ones(2), sparse.csr_matrix(dense_a))
    sb = ElementRepresentation("data", "entity", np.ones(3), sparse.csr_matrix(dense_b))
    da = ElementRepresentation("data", "entity", np.ones(2), dense_a)
    db = ElementRepresentation("data", "entity", np.ones(3), dense_b)
    assert similarity_measures(sa, sb) == pytest.approx(similarity_measures(da, db), abs=1e-12)


def expected_names():
    """Hand enumeration: element pair (both directions for cross blocks), then space, then measure."""
    ew = [("H", "H", ["word"]), ("D", "D", ["word", "graph", "entity"]), ("E", "E", ["graph", "entity"]),
          ("t", "t", ["word", "graph", "entity"])]
    ce = [("H", "t", ["word"]), ("t", "H", ["word"]), ("H", "D", ["word"]), ("D", "H", ["word"]),
          ("D", "t", ["word", "graph", "entity"]), ("t", "D", ["word", "graph", "entity"]),
          ("D", "E", ["graph", "entity"]), ("E", "D", ["graph", "entity"]),
          ("t", "E", ["graph", "entity"]), ("E", "t", ["graph", "entity"])]
    out = []
    for kind, blocks in (("ew", ew), ("ce", ce)):
        for a, b, spaces in blocks:
            for sp in spaces:
                for m in ("early", "late-max", "late-sum", "late-avg"):
                    out.append(f"{kind}:{a}>{b}:{sp}:{m}")
    return out


def test_layout_dimensions_and_order():
    assert len(ELEMENT_WISE_LAYOUT) == 36
    assert len(CROSS_ELEMENT_LAYOUT) == 72
    names = (ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT).names
    assert names == expected_names()
    assert len(set(names)) == 108


def test_layout_golden_file():
    layout = ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT
    assert GOLDEN.read_text(encoding="utf-8") == layout.dumps()
    assert Layout.loads(layout.dumps()) == layout


def test_fingerprint_detects_reorder():
    layout = ELEMENT_WISE_LAYOUT
    swapped = layout.subset([1, 0] + list(range(2, len(layout))))
    assert swapped.fingerprint != layout.fingerprint
    assert layout.subset(range(len(layout))).fingerprint == layout.fingerprint


def _reps(seed, n=3):
    rng = np.random.default_rng(seed)
    out = {}
    for el in ELEMENTS:
        for sp in ADMISSIBLE[el]:
            if sp == "entity":
                m = sparse.random(n, 12, density=0.4, random_state=seed, format="csr")
                m.data[:] = 1.0
                out[(el, sp)] = ElementRepresentation(el, sp, np.ones(n), m)
            else:
                out[(el, sp)] = ElementRepresentation(el, sp, rng.uniform(0.5, 2, n), rng.normal(size=(n, 5)))
    return out


def test_self_similarity_early_and_max_are_one():
    reps = _reps(1)
    vals = dict(zip((ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT).names, crab_similarity_features(reps, reps)))
    for name, v in vals.items():
        if name.startswith("ew:") and (name.endswith(":early") or name.endswith(":late-max")):
            assert v == pytest.approx(1.0, abs=1e-12), name


def test_crab_feature_values_follow_layout():
    ra, rb = _reps(2), _reps(3)
    vals = crab_similarity_features(ra, rb)
    assert len(vals) == 108
    # spot check: cross feature D>t on graph equals a direct computation
    idx = (ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT).names.index("ce:D>t:graph:late-avg")
    assert vals[idx] == pytest.approx(late_fusion(ra[("data", "graph")], rb[("topic", "graph")], "avg"))
    idx = (ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT).names.index("ce:t>D:graph:early")
    assert vals[idx] == pytest.approx(early_fusion(ra[("topic", "graph")], rb[("data", "graph")]))


def test_table_features_example():
    tables = [
        make_table("a", ["h1", "h2"], [["x", ""], ["", "y"], ["z", "w"]], caption="rare words",
                   page_title="Norway", in_links=5, out_links=7, page_views=100, tables_on_page=4,
                   table_chars=250, page_chars=1000),
        make_table("b", ["h"], [["x"]], caption="words", page_title="Sweden"),
    ]
    _, stats = build_index(tables)
    f = table_features(tables[0], stats)
    assert f == pytest.approx([3, 2, 2, math.log(2) + 0.0, math.log(2), 5, 7, 100, 0.25, 0.25])


def test_assemble_lengths():
    sim = [0.5] * 108
    full = assemble([1.0] * 10, [2.0] * 10, sim, ELEMENT_WISE_LAYOUT + CROSS_ELEMENT_LAYOUT)
    assert len(full.values) == 128
    assert full.layout.names[:10] == INPUT_TABLE_LAYOUT.names
    only = assemble(None, None, sim[:36], ELEMENT_WISE_LAYOUT)
    assert len(only.values) == 36
    with pytest.raises(LayoutError):
        assemble(None, None, sim[:35], ELEMENT_WISE_LAYOUT)


def test_measures_order():
    assert MEASURES == ("early", "late-max", "late-sum", "late-avg")
