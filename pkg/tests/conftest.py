import sys
import warnings
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from rulescene.catalog import default_catalog
from rulescene.dsl import EmptyOracleWarning, parse_scenario_text
from rulescene.mapmodel import build_routes, load_map

MAP_IDS = ("cross4", "straight2", "tee3")


@pytest.fixture(scope="session")
def root() -> Path:
    return ROOT


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def graphs():
    return {
        mid: build_routes(load_map(ROOT / "maps" / f"{mid}.map.json"))
        for mid in MAP_IDS
    }


def read_rep(path: Path):
    """Parse a scenario document file, quiet about empty oracles."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyOracleWarning)
        return parse_scenario_text(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def gold_reps(root):
    return {
        p.name[: -len(".rep.txt")]: read_rep(p)
        for p in sorted((root / "rules" / "gold").glob("*.rep.txt"))
    }
