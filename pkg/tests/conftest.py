import json

import pytest

from tablerec.config import ExperimentConfig
from tablerec.kb import EntityRecord, KnowledgeBase
from tablerec.pipeline import load_queries, load_resources
from tablerec.evaluation import read_qrels
from tablerec.synth import generate
from tablerec.tables import Cell, PageStats, RawTable


def make_table(table_id, headings, rows, caption="", page_title="", **stats):
    """RawTable from plain values; a cell given as (text, entity) carries an entity."""
    cells = []
    for row in rows:
        cells.append(tuple(Cell(*c) if isinstance(c, tuple) else Cell(c) for c in row))
    return RawTable(
        table_id,
        page_title,
        caption,
        tuple(headings),
        tuple(cells),
        PageStats(**stats) if stats else PageStats(),
        (None,) * len(headings),
    )


@pytest.fixture
def toy_kb():
    links = {
        "Oslo": {"Norway", "Bergen"},
        "Bergen": {"Norway", "Oslo"},
        "Norway": {"Oslo", "Bergen", "Sweden"},
        "Sweden": {"Norway", "Stockholm"},
        "Stockholm": {"Sweden"},
        "Lonely": set(),
    }
    abstracts = {
        "Oslo": "capital city of norway",
        "Bergen": "city on the west coast of norway",
        "Norway": "country in northern europe",
        "Sweden": "country in northern europe next to norway",
        "Stockholm": "capital city of sweden",
        "Lonely": "an entity without links",
    }
    records = {e: EntityRecord(e, e, abstracts[e], frozenset(links[e])) for e in links}
    return KnowledgeBase(records, {"Christiania": "Oslo"})


@pytest.fixture(scope="session")
def micro_paths(tmp_path_factory):
    return generate().write(tmp_path_factory.mktemp("micro"))


@pytest.fixture(scope="session")
def micro(micro_paths):
    cfg = ExperimentConfig().updated(micro_paths)
    res = load_resources(cfg)
    queries = load_queries(cfg, res.kb)
    qrels = read_qrels(cfg.qrels)
    return res, queries, qrels


def corpus_line(**fields):
    return json.dumps(fields)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
