import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthdata import fixture_graph  # noqa: E402

from kgelab.graph import KnowledgeGraph  # noqa: E402


@pytest.fixture(scope="session")
def desk_graph() -> KnowledgeGraph:
    """The ~200-entity / ~1000-triple hierarchy+treatment fixture."""
    return fixture_graph()


@pytest.fixture()
def tiny_graph() -> KnowledgeGraph:
    return KnowledgeGraph.from_triples(
        [
            ("pain", "may be treated by", "aspirin"),
            ("abdominal pain", "is a", "pain"),
            ("colic", "is a", "abdominal pain"),
            ("chest pain", "is a", "pain"),
            ("pain", "inverse is a", "abdominal pain"),
            ("headache", "is a", "pain"),
        ]
    )


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")
    return str(path)
