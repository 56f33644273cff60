import json
from pathlib import Path

import numpy as np
import pytest

from marginfer.rulebase import ClassModel, Evidence, make_rule, parse_rulebase

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def worked_rules():
    """Rule 1: F1 => x, rule 2: F1 & F3 => x, over three attributes."""
    return [
        make_rule("r1", {0: True}, {"x": 0.5, "xbar": 0.3}),
        make_rule("r2", {0: True, 2: True}, {"x": 0.25, "xbar": 0.2}),
    ]


@pytest.fixture
def worked_evidence():
    return Evidence((True, False, True))


@pytest.fixture
def binary_model():
    return ClassModel(("x", "xbar"), {"x": 0.5, "xbar": 0.5})


@pytest.fixture
def negativity_rules():
    """p(f1|x) = p(f2|x) = 0.9 over two attributes; the minimum-norm z has a negative cell."""
    return [
        make_rule("a", {0: True}, {"x": 0.9, "xbar": 0.5}),
        make_rule("b", {1: True}, {"x": 0.9, "xbar": 0.5}),
    ]


@pytest.fixture
def worked_rulebase(data_dir):
    return parse_rulebase((data_dir / "example_rules.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
