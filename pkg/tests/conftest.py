import pytest

_VERDICTS: list[str] = []


class Verdicts:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return passed

    def skip(self, number: int, reason: str) -> None:
        _VERDICTS.append(f"SKIP criterion {number}: {reason}")
        pytest.skip(reason)


@pytest.fixture(scope="session")
def verdicts() -> Verdicts:
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
