from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from callranker.graph import parse_project
from callranker.prune import prune
from callranker.semantic import link_identifiers

DATA_DIR = Path(__file__).parent / "data"
FIGS_DIR = DATA_DIR / "figs"


@pytest.fixture(scope="session")
def figs_dir() -> Path:
    return FIGS_DIR


@pytest.fixture(scope="session")
def figs_graph():
    """Parsed, pruned, linked graph of the two-snippet fixture."""
    return link_identifiers(prune(parse_project(FIGS_DIR)))


@pytest.fixture(scope="session")
def figs_graph_raw():
    """Parse-only graph of the fixture (unpruned, unlinked)."""
    return parse_project(FIGS_DIR)


@pytest.fixture()
def figs_copy(tmp_path: Path) -> Path:
    target = tmp_path / "figs"
    shutil.copytree(FIGS_DIR, target)
    return target


def write_project(root: Path, files: dict[str, str]) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return root


@pytest.fixture()
def make_project(tmp_path: Path):
    """Factory: write a dict of source files and return the project dir."""
    counter = [0]

    def factory(files: dict[str, str]) -> Path:
        counter[0] += 1
        return write_project(tmp_path / f"proj{counter[0]}", files)

    return factory


def build_linked(project_dir: Path):
    return link_identifiers(prune(parse_project(project_dir)))
