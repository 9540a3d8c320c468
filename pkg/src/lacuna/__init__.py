"""Toolkit for restoring, attributing, and evaluating damaged ancient Greek
documentary texts, with letter-count gap semantics throughout."""

__version__ = "0.1.0"
