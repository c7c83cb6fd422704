from .annotated import FormatError, parse_annotated, write_annotated
from .smf import SmfReport, parse_smf, parse_smf_report

__all__ = ["FormatError", "parse_annotated", "write_annotated",
           "SmfReport", "parse_smf", "parse_smf_report"]
