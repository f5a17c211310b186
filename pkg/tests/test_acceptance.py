"""Release gate: the nine acceptance criteria, one pass/fail line each.

Criterion functions live in contention_lqg.acceptance and are shared with
the ``reproduce-paper`` command.  Each test prints its verdict directly to
the terminal (bypassing capture) so the full scoreboard is visible in any
pytest run.
"""
import pytest

from contention_lqg.acceptance import CRITERIA, AcceptanceContext


@pytest.fixture(scope="module")
def ctx():
    return AcceptanceContext(master_seed=0)


@pytest.mark.parametrize(
    "criterion", CRITERIA,
    ids=[f"criterion_{i}" for i in range(1, len(CRITERIA) + 1)])
def test_acceptance(criterion, ctx, capsys):
    result = criterion(ctx)
    verdict = "PASS" if result.passed else "FAIL"
    with capsys.disabled():
        print(f"\nACCEPTANCE {result.number} ({result.name}): {verdict} "
              f"-- {result.detail}")
    assert result.passed, f"criterion {result.number}: {result.detail}"
