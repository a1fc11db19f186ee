import pytest

_verdicts: list[str] = []


class _Verdict:
    def __init__(self) -> None:
        self.recorded = False

    def __call__(self, number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}" + (f": {detail}" if detail else "")
        _verdicts.append(line)
        print(line)
        self.recorded = True
        assert ok, line


@pytest.fixture
def verdict(request):
    """Records one PASS/FAIL line per acceptance criterion (also on unexpected errors)."""
    v = _Verdict()
    yield v
    if not v.recorded:
        _verdicts.append(f"FAIL {request.node.name}: raised before reaching a verdict")


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
