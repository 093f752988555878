# -*- coding: utf-8 -*-
import json
from pathlib import Path

import pytest

from src.core import anonnet, topology

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def t6():
    return topology.load_as_graph(FIXTURES / "t6.txt")


@pytest.fixture(scope="session")
def t6_relays():
    """g5@AS5 带宽 300，g3@AS3 带宽 100"""
    return anonnet.parse_relays((FIXTURES / "t6_relays.csv").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def t6_cr_relays():
    """g5@AS5 带宽 300，g4@AS4 带宽 100"""
    return anonnet.parse_relays((FIXTURES / "t6_cr_relays.csv").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def t6_table():
    return json.loads((FIXTURES / "t6_regression.json").read_text(encoding="utf-8"))
