"""Shared test configuration.

Registers a deterministic hypothesis profile and collects acceptance-gate
result lines so they are printed in the terminal summary even under output
capture.
"""

from hypothesis import settings

import helpers

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("ci")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not helpers.ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in helpers.ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
