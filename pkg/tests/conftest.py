import pytest

UNIT_SQUARE = """NODES
1 0 0
2 1 0
3 1 1
4 0 1
ELEMENTS
1 1 1 2 3 4
EDGES
1 1 body
1 2 matching
1 3 free_surface
1 4 symmetry
"""


@pytest.fixture
def unit_square(tmp_path):
    from xfemflow.mesh import read_mesh_file

    p = tmp_path / "square.msh"
    p.write_text(UNIT_SQUARE)
    return read_mesh_file(p)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance check."""
    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
