"""Run directory persistence."""
from scenesketch.storage.run_store import RunStore, cell_name, parse_cell_name

__all__ = ["RunStore", "cell_name", "parse_cell_name"]
