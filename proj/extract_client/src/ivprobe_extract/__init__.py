"""Dump NLI model representations, labels and heads in ivprobe file formats."""

from .extract import ExtractionJob, extract, read_input, run, write_outputs

__all__ = ["ExtractionJob", "extract", "read_input", "run", "write_outputs"]
