"""Corpus tables and the four table elements (topic, headings, core entities, data)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .text import normalize_heading, tokenize

SPLIT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
TOPIC_ENTITIES_K = 10


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    text: str = ""
    entity: str | None = None

    @property
    def empty(self):
        return not self.text.strip() and self.entity is None


@dataclass(frozen=True)
class PageStats:
    in_links: int = 0
    out_links: int = 0
    page_views: int = 0
    tables_on_page: int = 1
    table_chars: int = 0
    page_chars: int = 1

    def __post_init__(self):
        for name in ("in_links", "out_links", "page_views", "table_chars"):
            if getattr(self, name) < 0:
                raise ParseError(f"{name} must be non-negative")
        if self.tables_on_page < 1:
            raise ParseError("tables_on_page must be >= 1")
        if self.page_chars <= 0:
            raise ParseError("page_chars must be > 0")
        if self.table_chars > self.page_chars:
            raise ParseError("table_chars exceeds page_chars")


@dataclass(frozen=True)
class RawTable:
    table_id: str
    page_title: str
    caption: str
    headings: tuple
    rows: tuple
    page_stats: PageStats = field(default_factory=PageStats)
    # entity ids linked from heading cells, by column
    heading_entities: tuple = ()

    @property
    def n_rows(self):
        return len(self.rows)

    @property
    def n_cols(self):
        return len(self.headings)

    def column(self, j):
        return [row[j] for row in self.rows]


@dataclass(frozen=True)
class TableElements:
    topic_words: tuple
    topic_entities: tuple
    heading_words: tuple
    core_column: int | None
    entities: tuple
    data_words: tuple
    data_entities: tuple


_CORPUS_FIELDS = {
    "inLinks": "in_links",
    "outLinks": "out_links",
    "pageViews": "page_views",
    "tablesOnPage": "tables_on_page",
    "tableChars": "table_chars",
    "pageChars": "page_chars",
}


def _parse_cell(raw, kb, where):
    if isinstance(raw, str):
        return Cell(raw)
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected string or object, got {type(raw).__name__}")
    text = raw.get("text", "")
    if not isinstance(text, str):
        raise ParseError(f"{where}.text: expected string")
    link = raw.get("link")
    entity = kb.canonical(link) if (link and kb is not None) else None
    return Cell(text, entity)


def parse_table(record, kb=None) -> RawTable:
    """Build a RawTable from one corpus record (a dict or a JSON line).

    Cell links that resolve to a knowledge-base entity become that entity's
    id; other links are demoted to their anchor text. Short rows are padded
    with empty cells up to the heading width.
    """
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(record, dict):
        raise ParseError("record must be a JSON object")
    table_id = record.get("id")
    if not table_id or not isinstance(table_id, str):
        raise ParseError("missing or invalid field 'id'")
    for name in ("pgTitle", "caption"):
        if not isinstance(record.get(name, ""), str):
            raise ParseError(f"{table_id}: field '{name}' must be a string")
    headers = record.get("headers", [])
    rows = record.get("rows", [])
    if not isinstance(headers, list):
        raise ParseError(f"{table_id}: field 'headers' must be a list")
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ParseError(f"{table_id}: field 'rows' must be a list of lists")

    head_cells = [_parse_cell(h, kb, f"{table_id}.headers[{j}]") for j, h in enumerate(headers)]
    width = len(head_cells)
    parsed_rows = []
    for i, row in enumerate(rows):
        if len(row) > width:
            raise ParseError(f"{table_id}: rows[{i}] has {len(row)} cells but only {width} headers")
        cells = [_parse_cell(c, kb, f"{table_id}.rows[{i}][{j}]") for j, c in enumerate(row)]
        cells.extend(Cell() for _ in range(width - len(cells)))
        parsed_rows.append(tuple(cells))

    stats = {}
    for key, attr in _CORPUS_FIELDS.items():
        if key in record:
            value = record[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise ParseError(f"{table_id}: field '{key}' must be an integer")
            stats[attr] = value
    try:
        page_stats = PageStats(**stats)
    except ParseError as exc:
        raise ParseError(f"{table_id}: {exc}") from None

    return RawTable(
        table_id=table_id,
        page_title=record.get("pgTitle", "") or "",
        caption=record.get("caption", "") or "",
        headings=tuple(c.text for c in head_cells),
        rows=tuple(parsed_rows),
        page_stats=page_stats,
        heading_entities=tuple(c.entity for c in head_cells),
    )


def table_to_record(t: RawTable) -> dict:
    """Inverse of parse_table, with entities written as canonical links."""

    def cell(c):
        return {"text": c.text, "link": c.entity} if c.entity else {"text": c.text}

    headers = [
        cell(Cell(h, e)) if e else h
        for h, e in zip(t.headings, t.heading_entities or (None,) * t.n_cols)
    ]
    ps = t.page_stats
    return {
        "id": t.table_id,
        "pgTitle": t.page_title,
        "caption": t.caption,
        "headers": headers,
        "rows": [[cell(c) for c in row] for row in t.rows],
        "inLinks": ps.in_links,
        "outLinks": ps.out_links,
        "pageViews": ps.page_views,
        "tablesOnPage": ps.tables_on_page,
        "tableChars": ps.table_chars,
        "pageChars": ps.page_chars,
    }


def read_corpus(path, kb=None):
    """Yield RawTables from a newline-delimited JSON corpus file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                yield parse_table(line, kb)
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None


def write_corpus(tables, path, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        for t in tables:
            fh.write(json.dumps(table_to_record(t), ensure_ascii=False, sort_keys=True) + "\n")


def entity_rates(t: RawTable):
    if t.n_rows == 0 or t.n_cols == 0:
        raise ValueError(f"table {t.table_id} is empty")
    return [sum(row[j].entity is not None for row in t.rows) / t.n_rows for j in range(t.n_cols)]


def detect_core_column(t: RawTable) -> int | None:
    """Column with the highest entity rate; leftmost on ties, None if no entities."""
    rates = entity_rates(t)
    best = max(rates)
    if best == 0:
        return None
    return rates.index(best)


def heading_terms(t: RawTable):
    """Unique normalized heading strings, in column order."""
    seen = []
    for h, e in zip(t.headings, t.heading_entities or (None,) * t.n_cols):
        if e is not None:
            continue
        norm = normalize_heading(h)
        if norm and norm not in seen:
            seen.append(norm)
    return seen


def extract_elements(t: RawTable, retriever=None, k: int = TOPIC_ENTITIES_K) -> TableElements:
    topic_text = f"{t.caption} {t.page_title}"
    topic_words = tokenize(t.caption) + tokenize(t.page_title)
    topic_entities = tuple(retriever(topic_text, k)[:k]) if retriever is not None and k > 0 else ()

    heading_words = []
    heading_ents = []
    for h, e in zip(t.headings, t.heading_entities or (None,) * t.n_cols):
        if e is not None:
            heading_ents.append(e)
        else:
            heading_words.extend(tokenize(h))

    core = detect_core_column(t) if t.n_rows and t.n_cols else None
    entities = tuple(row[core].entity for row in t.rows if row[core].entity) if core is not None else ()

    data_words = []
    data_entities = list(heading_ents)
    for row in t.rows:
        for c in row:
            data_words.extend(tokenize(c.text))
            if c.entity:
                data_entities.append(c.entity)

    return TableElements(
        topic_words=tuple(topic_words),
        topic_entities=topic_entities,
        heading_words=tuple(heading_words),
        core_column=core,
        entities=entities,
        data_words=tuple(data_words),
        data_entities=tuple(data_entities),
    )


def split_table(t: RawTable, axis: str, fraction: float) -> RawTable:
    """Keep the first ceil(fraction * n) rows or columns."""
    if fraction not in SPLIT_FRACTIONS:
        raise ValueError(f"fraction must be one of {SPLIT_FRACTIONS}, got {fraction}")
    if axis == "rows":
        keep = math.ceil(fraction * t.n_rows)
        if keep == 0:
            raise ValueError(f"splitting {t.table_id} leaves no rows")
        return replace(t, rows=t.rows[:keep])
    if axis == "columns":
        keep = math.ceil(fraction * t.n_cols)
        if keep == 0:
            raise ValueError(f"splitting {t.table_id} leaves no columns")
        return replace(
            t,
            headings=t.headings[:keep],
            heading_entities=t.heading_entities[:keep],
            rows=tuple(row[:keep] for row in t.rows),
        )
    raise ValueError(f"axis must be 'rows' or 'columns', got {axis!r}")
