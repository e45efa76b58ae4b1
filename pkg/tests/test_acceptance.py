"""Acceptance criteria at full sample sizes, one test each.

Every test prints a ``criterion N [PASS|FAIL]`` line to the terminal. Set
FECSIM_TIER=smoke for a quicker pass at reduced sizes.
"""
import json
import os

import pytest

from fecsim import checks

TIER = os.environ.get("FECSIM_TIER", "full")

TITLES = {
    1: "single_chunk_matches_mm1",
    2: "two_chunk_greedy_matches_erlang_oracle",
    3: "round_robin_gap_grows_with_k",
    4: "two_request_worked_example",
    5: "coupling_dominance",
    6: "min_of_exponentials",
    7: "order_statistic_ccdf",
    8: "redundancy_tradeoff_shape",
    9: "stability_boundary",
    10: "preset_determinism",
}


@pytest.mark.parametrize("number", sorted(TITLES), ids=[f"{n:02d}_{TITLES[n]}" for n in sorted(TITLES)])
def test_criterion(number, capsys):
    result = checks.run_check(number, TIER)
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.passed, json.dumps(result.detail, default=str, indent=1)
