import pytest

# criterion number -> list of (label, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list] = {}


class Recorder:
    """Collects the sub-checks of one criterion test."""

    def __init__(self):
        self.results = []

    def __call__(self, criterion: int, label: str, passed, detail: str = "") -> bool:
        passed = bool(passed)
        ACCEPTANCE.setdefault(criterion, []).append((label, passed, detail))
        self.results.append((label, passed, detail))
        return passed

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.results)

    @property
    def failures(self) -> str:
        return "; ".join(f"{label}: {detail}" for label, p, detail in self.results if not p)


@pytest.fixture
def record():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({sum(p for _, p, _ in parts)}/{len(parts)} checks)")
        for label, p, detail in parts:
            if not p:
                tr.write_line(f"    failed: {label}" + (f" -- {detail}" if detail else ""))
