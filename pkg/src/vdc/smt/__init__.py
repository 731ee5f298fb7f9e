"""Pure relational entailments: solver encoding and finite enumeration."""

from vdc.smt.encode import Entailment, encode_relational, make_entailment, normalize
from vdc.smt.solver import (
    INVALID,
    UNKNOWN,
    VALID,
    Countermodel,
    SolverConfig,
    Verdict,
    brute_force_entailment,
    check_entailment,
    find_solver,
    replay,
)

__all__ = [
    "INVALID", "UNKNOWN", "VALID", "Countermodel", "Entailment", "SolverConfig", "Verdict",
    "brute_force_entailment", "check_entailment", "encode_relational", "find_solver",
    "make_entailment", "normalize", "replay",
]
