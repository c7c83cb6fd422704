"""Heuristic reference: pitch split for staves, synchrony for chords,
time/pitch distance assignment for voices."""

from __future__ import annotations

from collections import defaultdict

from .core import Piece
from .graph import GraphError, OutputGraph
from .postprocess import PooledGraph, assign_by_cost, unpool


def baseline_predict(piece: Piece, split_pitch: int = 60, alpha: float = 1.0,
                     beta: float = 1.0) -> OutputGraph:
    """Notes below ``split_pitch`` go to the lower staff (1).

    Synchronous notes of one staff form a chord. Chords are then linked per
    bar and staff by linear assignment with cost
    ``alpha * gap / bar_duration + beta * |mean pitch difference| / 12``.
    """
    if not piece.notes:
        raise GraphError("baseline needs a non-empty piece")
    staff = [1 if n.pitch < split_pitch else 0 for n in piece.notes]

    groups: dict[tuple, list[int]] = defaultdict(list)
    for n in piece.notes:
        groups[(staff[n.id], n.onset, n.offset)].append(n.id)
    members = sorted(groups.values())
    node_of = [0] * len(piece.notes)
    for k, comp in enumerate(members):
        for i in comp:
            node_of[i] = k
    bar_of = [piece.notes[m[0]].bar_index for m in members]
    pooled = PooledGraph(members, node_of, bar_of, {})

    mean_pitch = [sum(piece.notes[i].pitch for i in m) / len(m) for m in members]
    costs = {}
    for u, mu in enumerate(members):
        a = piece.notes[mu[0]]
        for v, mv in enumerate(members):
            b = piece.notes[mv[0]]
            if (bar_of[u] != bar_of[v] or staff[mu[0]] != staff[mv[0]]
                    or a.offset > b.onset):
                continue
            bar = piece.bars[bar_of[u]].duration
            costs[(u, v)] = (alpha * (b.onset - a.offset) / bar
                             + beta * abs(mean_pitch[u] - mean_pitch[v]) / 12.0)
    assignment = assign_by_cost(pooled, costs)
    return unpool(pooled, assignment, [float(s) for s in staff])
