"""Verbal MWE extraction, paraphrasing and MT quality evaluation."""

__version__ = "0.1.0"
