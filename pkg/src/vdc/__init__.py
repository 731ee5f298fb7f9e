"""Relational verifier and knowledge oracle for a small concurrent language."""

__version__ = "0.1.0"
