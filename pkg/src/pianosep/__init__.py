"""Voice and staff separation for piano scores with a heterogeneous graph network."""

from .core import (AnnotatedPiece, Bar, Note, Piece, PieceError, TimeSignature, compute_bars,
                   make_piece, validate)
from .graph import (CandidateSet, InputGraph, OutputGraph, build_input_graph, candidates,
                    check_output_graph, truth_output_graph)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedPiece", "Bar", "Note", "Piece", "PieceError", "TimeSignature", "compute_bars",
    "make_piece", "validate", "CandidateSet", "InputGraph", "OutputGraph", "build_input_graph",
    "candidates", "check_output_graph", "truth_output_graph",
]
