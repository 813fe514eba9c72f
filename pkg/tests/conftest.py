import pytest

from dynauth.algebra import TransparentSuite, make_suite

# Hand-chosen fixture inputs for the q=101 byte-sum instance.
FIX_ID = b"alice"
FIX_PW = b"pw"
FIX_B = 42
FIX_SID = b"\x09"


class ScriptedRng:
    """Stands in for random.Random; hands out a fixed sequence of scalars."""

    def __init__(self, *values):
        self.values = list(values)

    def randrange(self, lo, hi):
        v = self.values.pop(0)
        assert lo <= v < hi
        return v


def tf1_fixture_suite() -> TransparentSuite:
    """TF-1 with the fixture table: H(ID)=13, h(ID||pw||b)=5, h(SID||W)=19, h(QID||CID)=3, d=37."""
    s = TransparentSuite.tf1()
    s.map_table[FIX_ID] = 13
    s.hash_table[s.frame(FIX_ID, FIX_PW, FIX_B)] = 5
    s.hash_table[s.frame(FIX_SID, s.point(10))] = 19
    s.hash_table[s.frame(s.point(13), s.point(91))] = 3
    s.hash_table[s.frame(s.point(26), FIX_SID, s.point(25), s.point(78))] = 37
    return s


@pytest.fixture
def tf1():
    return tf1_fixture_suite()


@pytest.fixture
def transparent():
    return make_suite("transparent")


@pytest.fixture(scope="session")
def production():
    return make_suite("production")


# acceptance criteria report: test_acceptance appends (label, passed, detail)
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
