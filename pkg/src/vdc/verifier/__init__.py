"""Symbolic verifier for the relational separation logic."""

from vdc.verifier.api import (
    REFUTED,
    UNKNOWN,
    VERIFIED,
    AuditReport,
    Discharger,
    VerdictBundle,
    audit,
    audit_obligations,
    inline_audit,
    instantiate_policy,
    verify,
    verify_with_audit,
)
from vdc.verifier.state import VC, VC_KINDS, AuditTriple, SymState

__all__ = [
    "REFUTED",
    "UNKNOWN",
    "VERIFIED",
    "VC",
    "VC_KINDS",
    "AuditReport",
    "AuditTriple",
    "Discharger",
    "SymState",
    "VerdictBundle",
    "audit",
    "audit_obligations",
    "inline_audit",
    "instantiate_policy",
    "verify",
    "verify_with_audit",
]
