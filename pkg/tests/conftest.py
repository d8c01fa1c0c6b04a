import pytest

_RESULTS = []


class _Recorder:
    def __call__(self, number, title, passed, detail=""):
        _RESULTS.append((number, title, bool(passed), detail))
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        print(line)
        return passed


@pytest.fixture
def record():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_RESULTS, key=lambda r: r[0]):
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
