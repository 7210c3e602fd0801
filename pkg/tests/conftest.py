import pytest

ACCEPTANCE = {}
EXPECTED = {
    1: "oracle equivalence",
    2: "layered sparsification",
    3: "hop-reducer sandwich",
    4: "sparse distance estimates",
    5: "betweenness reduction",
    6: "neutralization soundness",
    7: "constants fidelity",
    8: "benchmark smoke (non-fatal)",
}


@pytest.fixture
def record():
    def _record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number} {EXPECTED[number]}: {'PASS' if passed else 'FAIL'} ({detail})")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name in EXPECTED.items():
        if number in ACCEPTANCE:
            passed, detail = ACCEPTANCE[number]
            verdict = "PASS" if passed else "FAIL"
        else:
            verdict, detail = "FAIL", "did not run to completion"
        terminalreporter.write_line(f"{verdict}  {number}. {name}: {detail}")
