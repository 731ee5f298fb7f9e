"""Executable knowledge-based security definitions and theorem checks."""

from vdc.oracle.check import (
    DEFAULT_MAX_NODES,
    BUDGET,
    FAIL,
    PASS,
    InitState,
    Oracle,
    Report,
    StateSpace,
    build_space,
    check_policy_agnostic,
    check_policy_specific,
    merge_reports,
    oracle_command,
)
from vdc.oracle.knowledge import (
    PAPER,
    SOUND,
    aligned,
    assumption_failed,
    channel_visible,
    desugar_policy,
    obs_equiv,
    policy_excludes,
    project,
    visible,
)

__all__ = [
    "BUDGET", "DEFAULT_MAX_NODES", "FAIL", "PASS", "PAPER", "SOUND", "InitState", "Oracle", "Report", "StateSpace",
    "aligned", "assumption_failed", "build_space", "channel_visible", "check_policy_agnostic",
    "check_policy_specific", "desugar_policy", "merge_reports", "obs_equiv", "oracle_command",
    "policy_excludes", "project", "visible",
]
