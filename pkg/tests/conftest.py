import pytest


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], outcome.upper(), props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for crit, outcome, detail in sorted(lines, key=lambda x: _key(x[0])):
            terminalreporter.write_line(f"{'PASS' if outcome == 'PASSED' else 'FAIL'}  {crit}  {detail}")


def _key(crit: str):
    head = crit.split()[0].lstrip("C")
    num = "".join(ch for ch in head if ch.isdigit())
    return (int(num or 0), head)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
