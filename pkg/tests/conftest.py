import numpy as np

# scoreboard lines collected by the acceptance suite, emitted after the
# test session so they survive pytest's output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def assert_same_complex_sets(actual, expected, atol):
    """Match two unordered collections of complex values pairwise."""
    remaining = list(expected)
    for value in actual:
        gaps = [abs(value - other) for other in remaining]
        best = int(np.argmin(gaps))
        assert gaps[best] <= atol, (value, remaining)
        remaining.pop(best)
    assert not remaining
