"""Model text format, reports and the command-line driver."""

from .parser import (ModelDocument, dump_model, load_graph, load_projset, load_qcn, load_state,
                     parse_model, parse_script)
from .report import serialize_report

__all__ = ["ModelDocument", "dump_model", "load_graph", "load_projset", "load_qcn", "load_state",
           "parse_model", "parse_script", "serialize_report"]
