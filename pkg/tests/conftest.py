from __future__ import annotations

import pytest

from kgreason import toy
from kgreason.graph_store import load_kg, load_kg_files
from kgreason.llm_provider import ScriptedProvider

TOY_LINES = ["alice\tfriend_of\tbob", "bob\tworks_at\tacme", "acme\tlocated_in\tparis"]


@pytest.fixture
def toy3():
    return load_kg(TOY_LINES, ["acme corporation\tacme"])


@pytest.fixture(scope="session")
def toy_kg():
    return load_kg_files(toy.KG, toy.ALIASES)


@pytest.fixture
def toy_script():
    return ScriptedProvider.from_file(toy.SCRIPT)
