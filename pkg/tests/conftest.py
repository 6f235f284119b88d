import copy
import json
from pathlib import Path

import pytest

from adgfeedback import Adg, load_adg, load_corpus, load_templates

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def walkthrough_adg() -> Adg:
    return load_adg(FIXTURES.joinpath("walkthrough_adg.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def ja_adg() -> Adg:
    return load_adg(FIXTURES.joinpath("walkthrough_ja_adg.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def registry():
    return load_templates(FIXTURES.joinpath("templates.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def walkthrough_corpus():
    return load_corpus(FIXTURES.joinpath("walkthrough_corpus.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def exact_corpus():
    return load_corpus(FIXTURES.joinpath("exact_corpus.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def planted_corpus():
    return load_corpus(FIXTURES.joinpath("planted_corpus.json").read_text(encoding="utf-8"))


def base_graph_document() -> dict:
    """A small well-formed graph whose validation report is empty; defect
    tests mutate one aspect at a time."""
    text = "The sky darkened before noon. Heavy rain followed within the hour."
    s1 = "The sky darkened before noon."
    s2 = "Heavy rain followed within the hour."
    c1 = "The sky darkened"
    return {
        "schema": "adg/1",
        "id": "g-base",
        "prompt_id": "p-base",
        "prompt_text": text,
        "nodes": [
            {"id": "s1", "kind": "sentence", "text": s1, "paragraph": 1,
             "span": [text.index(s1), text.index(s1) + len(s1)]},
            {"id": "s2", "kind": "sentence", "text": s2, "paragraph": 1,
             "span": [text.index(s2), text.index(s2) + len(s2)]},
            {"id": "c1", "kind": "chunk", "text": c1, "paragraph": 1,
             "span": [text.index(c1), text.index(c1) + len(c1)]},
            {"id": "a1", "kind": "answer_cue", "text": "A storm was coming", "paragraph": 0,
             "hint": "Name the approaching storm."},
        ],
        "edges": [
            {"src": "c1", "dst": "a1", "label": "elaboration"},
            {"src": "s1", "dst": "c1", "label": "elaboration"},
            {"src": "s2", "dst": "s1", "label": "result"},
        ],
        "criteria_bindings": {"B": "a1"},
    }


@pytest.fixture()
def base_document() -> dict:
    return copy.deepcopy(base_graph_document())


def load_fixture_json(name: str) -> dict:
    return json.loads(FIXTURES.joinpath(name).read_text(encoding="utf-8"))
