import functools

import pytest

from decoupled_biharm.mms import mms_case
from decoupled_biharm.scheme import SchemeConfig, run_scheme

LEVELS = (2, 4, 8)


@functools.lru_cache(maxsize=None)
def convergence_run(case_name: str, scheme: str = "A", levels=LEVELS):
    """Bundles and error reports for a level sequence, cached per session."""
    case = mms_case(case_name)
    out = []
    for n in levels:
        out.append(run_scheme(case, SchemeConfig(scheme=scheme, n=n)))
    return out


@pytest.fixture(scope="session")
def poly_a():
    return convergence_run("poly", "A")


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
