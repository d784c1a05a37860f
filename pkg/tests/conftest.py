from collections import defaultdict

import pytest

_CRITERIA: dict[int, dict] = defaultdict(lambda: {"name": "", "ok": True, "details": []})


@pytest.fixture
def criterion():
    """``criterion(number, name, ok, detail)`` records one sub-check of an acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        entry = _CRITERIA[number]
        entry["name"] = name
        entry["ok"] &= bool(ok)
        entry["details"].append(f"{'ok' if ok else 'FAILED'}: {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{status}] {entry['name']}: " + "; ".join(entry["details"]))
