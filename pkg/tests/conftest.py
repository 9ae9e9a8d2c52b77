from pathlib import Path

import pytest

from ifcg.parser import Program, parse_program

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def load(name: str) -> Program:
    return parse_program((PROGRAMS / f"{name}.ifc").read_text())


TWO = "lattice { labels: L, H; order: L < H }"
FOUR = "lattice { labels: bot, L, H, top; order: bot < L, L < H, H < top }"


def program(store: str, body: str, lattice: str = TWO) -> Program:
    return parse_program(f"{lattice}\nstore {{\n{store}\n}}\nprogram {{\n{body}\n}}\n")


@pytest.fixture
def programs_dir() -> Path:
    return PROGRAMS
