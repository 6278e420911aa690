import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion; returns whether every check passed."""

    def record(number, title, checks, runtime, limit):
        checks = dict(checks)
        checks["runtime"] = (runtime < limit, f"{runtime:.2f}s < {limit:g}s")
        passed = all(ok for ok, _ in checks.values())
        failed = [name for name, (ok, _) in checks.items() if not ok]
        detail = "; ".join(f"{name}={value}" for name, (_, value) in checks.items())
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} [{detail}]"
        if failed:
            line += f" failed: {', '.join(failed)}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed, failed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
