import collections

import pytest

# criterion number -> list of (label, ok, detail); filled by test_acceptance.py
ACCEPTANCE = collections.defaultdict(list)


@pytest.fixture
def record():
    def _record(criterion, label, ok, detail=""):
        ACCEPTANCE[criterion].append((label, bool(ok), detail))
        print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {label}: {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        entries = ACCEPTANCE[k]
        ok = all(e[1] for e in entries)
        failed = [e for e in entries if not e[1]]
        note = f"{len(entries)} checks"
        if failed:
            note += "; failing: " + "; ".join(f"{lbl} ({det})" for lbl, _, det in failed)
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} ({note})")
    missing = sorted(set(range(1, 11)) - set(ACCEPTANCE))
    for k in missing:
        tr.write_line(f"criterion {k:2d}: NOT RUN (deselected; use -m slow for the extended cells)")
