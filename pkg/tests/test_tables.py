import itertools
import math

import pytest
from hypothesis import given, strategies as st

from tablerec.tables import (
    ParseError,
    detect_core_column,
    entity_rates,
    extract_elements,
    parse_table,
    read_corpus,
    split_table,
    table_to_record,
    write_corpus,
)
from tablerec.text import tokenize

from conftest import make_table


def record(**over):
    base = {
        "id": "T1",
        "pgTitle": "Norway",
        "caption": "List of stadiums",
        "headers": ["Name", "City", "Capacity"],
        "rows": [[{"text": "Ullevaal", "link": "Oslo"}, {"text": "x"}, {"text": "28000"}]],
        "inLinks": 3,
        "outLinks": 4,
        "pageViews": 10,
        "tablesOnPage": 2,
        "tableChars": 50,
        "pageChars": 500,
    }
    base.update(over)
    return base


def test_link_to_kb_entity_becomes_entity(toy_kb):
    t = parse_table(record(), toy_kb)
    assert t.rows[0][0].entity == "Oslo"
    assert t.rows[0][0].text == "Ullevaal"


def test_link_through_redirect(toy_kb):
    t = parse_table(record(rows=[[{"text": "old", "link": "Christiania"}]]), toy_kb)
    assert t.rows[0][0].entity == "Oslo"


def test_unknown_link_demoted_to_text(toy_kb):
    t = parse_table(record(rows=[[{"text": "Somewhere", "link": "Nowhere_Town"}]]), toy_kb)
    cell = t.rows[0][0]
    assert cell.entity is None and cell.text == "Somewhere"


def test_short_rows_padded(toy_kb):
    t = parse_table(record(rows=[[{"text": "a"}, {"text": "b"}]]), toy_kb)
    assert len(t.rows[0]) == 3
    assert t.rows[0][2].text == "" and t.rows[0][2].entity is None


def test_missing_id_rejected():
    rec = record()
    del rec["id"]
    with pytest.raises(ParseError, match="id"):
        parse_table(rec)


@pytest.mark.parametrize(
    "field, value",
    [("caption", 5), ("headers", "abc"), ("rows", [1, 2]), ("inLinks", "many"), ("tablesOnPage", 0)],
)
def test_malformed_field_named(field, value):
    with pytest.raises(ParseError, match=field if field != "tablesOnPage" else "tables_on_page"):
        parse_table(record(**{field: value}))


def test_invalid_json():
    with pytest.raises(ParseError):
        parse_table("{not json")


def test_corpus_roundtrip(tmp_path, toy_kb):
    t = parse_table(record(), toy_kb)
    path = tmp_path / "c.jsonl"
    write_corpus([t], path)
    (again,) = list(read_corpus(path, toy_kb))
    assert again == t
    assert table_to_record(again)["rows"][0][0] == {"text": "Ullevaal", "link": "Oslo"}


def test_core_column_highest_rate():
    rows = [[(f"e{i}", f"E{i}"), "x" if i else ("y", "Y")] for i in range(4)]
    t = make_table("t", ["a", "b"], rows)
    assert entity_rates(t) == [1.0, 0.25]
    assert detect_core_column(t) == 0


def test_core_column_none_without_entities():
    t = make_table("t", ["a", "b"], [["x", "y"], ["z", "w"]])
    assert detect_core_column(t) is None


def test_core_column_tie_goes_left():
    t = make_table("t", ["a", "b"], [[("x", "X"), ("y", "Y")], ["p", "q"]])
    assert detect_core_column(t) == 0


def test_core_column_empty_table_errors():
    with pytest.raises(ValueError):
        detect_core_column(make_table("t", ["a"], []))


def test_core_column_exhaustive_small_fixtures():
    # every entity pattern on 2x3 and 3x2 grids: returned column has the maximal rate, leftmost on ties
    for n_rows, n_cols in ((2, 3), (3, 2), (1, 3)):
        for mask in itertools.product((0, 1), repeat=n_rows * n_cols):
            rows = [
                [("c", f"E{i}{j}") if mask[i * n_cols + j] else "c" for j in range(n_cols)] for i in range(n_rows)
            ]
            t = make_table("t", ["h"] * n_cols, rows)
            rates = [sum(mask[i * n_cols + j] for i in range(n_rows)) / n_rows for j in range(n_cols)]
            got = detect_core_column(t)
            if max(rates) == 0:
                assert got is None
            else:
                assert got == min(j for j in range(n_cols) if rates[j] == max(rates))


def test_topic_words():
    t = make_table("t", ["a"], [["x"]], caption="List of stadiums", page_title="Norway")
    assert extract_elements(t).topic_words == ("list", "stadiums", "norway")


def test_elements_core_entities_and_topic_retrieval():
    rows = [[(f"n{i}", f"e{i}"), f"v{i}"] for i in range(1, 6)]
    t = make_table("t", ["Name", "Value"], rows, caption="cities")
    calls = []

    def retriever(text, k):
        calls.append((text, k))
        return [f"r{i}" for i in range(20)]

    el = extract_elements(t, retriever, k=10)
    assert el.entities == ("e1", "e2", "e3", "e4", "e5")
    assert el.core_column == 0
    assert len(el.topic_entities) == 10
    assert calls == [("cities ", 10)]
    assert set(el.entities) <= set(el.data_entities)


def test_heading_entity_moves_to_data(toy_kb):
    rec = record(headers=[{"text": "Oslo", "link": "Oslo"}, "City", "Capacity"])
    t = parse_table(rec, toy_kb)
    el = extract_elements(t)
    assert "Oslo" in el.data_entities
    assert "oslo" not in el.heading_words
    assert el.heading_words == ("city", "capacity")


def test_extraction_deterministic(toy_kb):
    t = parse_table(record(), toy_kb)
    assert extract_elements(t) == extract_elements(t)


def test_split_rows_half():
    t = make_table("t", ["a"], [[str(i)] for i in range(8)])
    assert [r[0].text for r in split_table(t, "rows", 0.5).rows] == ["0", "1", "2", "3"]


def test_split_ceiling_enumeration():
    for n in range(1, 11):
        t = make_table("t", ["a"], [[str(i)] for i in range(n)])
        for f in (0.25, 0.5, 0.75, 1.0):
            kept = split_table(t, "rows", f).n_rows
            assert kept == math.ceil(f * n)
            assert kept >= 1
    t5 = make_table("t", ["a"], [[str(i)] for i in range(5)])
    assert split_table(t5, "rows", 0.25).n_rows == 2


def test_split_columns_keeps_headings():
    t = make_table("t", ["a", "b", "c", "d"], [["1", "2", "3", "4"]])
    s = split_table(t, "columns", 0.5)
    assert s.headings == ("a", "b")
    assert [c.text for c in s.rows[0]] == ["1", "2"]


def test_split_identity_and_errors():
    t = make_table("t", ["a", "b"], [["1", "2"]])
    assert split_table(t, "rows", 1.0) == t
    assert split_table(t, "columns", 1.0) == t
    with pytest.raises(ValueError):
        split_table(t, "rows", 0.3)
    with pytest.raises(ValueError):
        split_table(make_table("e", ["a"], []), "rows", 0.5)


@given(st.text(max_size=60))
def test_tokenize_lowercase_alnum(text):
    for tok in tokenize(text):
        assert tok == tok.lower()
        assert tok.isalnum()


def test_tokenize_strips_markup():
    assert tokenize("<b>Club</b>&nbsp;Results of the season") == ["club", "results", "season"]
