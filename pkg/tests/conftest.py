import pytest

from nmat.trace import TraceStream

# one line per acceptance criterion, written at the end of the session
ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1])):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def vaddr_trace():
    def make(vaddrs, igap=0, asid=1):
        return TraceStream.from_vaddrs(list(vaddrs), igap=igap, asid=asid)
    return make
