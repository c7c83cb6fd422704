"""Static JSON export of notes plus every edge set, for external renderers."""

from __future__ import annotations

import json
from typing import Optional

from ..core import Piece
from ..graph import RELATIONS, CandidateSet, InputGraph, OutputGraph

VIZ_FORMAT = "pianosep-viz"
VIZ_VERSION = 1


def _pairs(arr) -> list[list[int]]:
    return [[int(u), int(v)] for u, v in arr]


def viz_document(piece: Piece, input_graph: Optional[InputGraph], output_graph: OutputGraph,
                 cands: Optional[CandidateSet] = None) -> dict:
    notes = [{"id": n.id, "pitch": n.pitch, "onset": n.onset, "duration": n.duration,
              "bar": n.bar_index, "staff": output_graph.staff[n.id]} for n in piece.notes]
    doc = {
        "format": VIZ_FORMAT,
        "version": VIZ_VERSION,
        "resolution": piece.resolution,
        "bars": [[b.start, b.end] for b in piece.bars],
        "notes": notes,
        "input_edges": {},
        "candidates": {"voice": [], "chord": []},
        "predicted": {
            "voice": {"class": "voice", "color": "red", "edges": _pairs(output_graph.voice_edges)},
            "chord": {"class": "chord", "color": "blue", "edges": _pairs(output_graph.chord_edges)},
        },
    }
    if input_graph is not None:
        doc["input_edges"] = {r: _pairs(input_graph.edges[r].T) for r in RELATIONS}
    if cands is not None:
        doc["candidates"] = {"voice": _pairs(cands.voice), "chord": _pairs(cands.chord)}
    return doc


def export_viz(piece: Piece, input_graph: Optional[InputGraph], output_graph: OutputGraph,
               cands: Optional[CandidateSet] = None) -> str:
    return json.dumps(viz_document(piece, input_graph, output_graph, cands), indent=1) + "\n"
