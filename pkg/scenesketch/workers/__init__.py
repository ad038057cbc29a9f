"""Concurrent execution of matrix lineages."""
from scenesketch.workers.cell_runner import CellRunner, JobOutcome

__all__ = ["CellRunner", "JobOutcome"]
