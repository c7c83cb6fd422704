"""Turn raw edge probabilities into an engraving-valid output graph.

Three steps: pool predicted chords into single nodes, solve one linear
assignment per bar over the pooled voice candidates, then expand the
pooled nodes back into notes.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .assignment import SENTINEL, solve_assignment
from .core import Piece
from .graph import CandidateSet, OutputGraph, _components


@dataclass(frozen=True)
class PostprocessConfig:
    chord_threshold: float = 0.5
    voice_cutoff: float = 0.5
    staff_threshold: float = 0.5


@dataclass
class PooledGraph:
    members: list[list[int]]                 # pooled node -> sorted note ids
    node_of: list[int]                       # note id -> pooled node
    bar_of: list[int]                        # pooled node -> bar index
    edges: dict[tuple[int, int], float]      # pooled voice candidate -> mean probability


Assignment = dict  # bar index -> sorted list of (pooled predecessor, pooled successor)


def pool_chords(piece: Piece, chord_prob: Sequence[float], chord_candidates: np.ndarray,
                threshold: float = 0.5, voice_candidates: Optional[np.ndarray] = None,
                voice_prob: Optional[Sequence[float]] = None) -> PooledGraph:
    """Merge notes joined by confident chord edges.

    Pooled nodes are connected components over the kept chord edges. Voice
    candidates collapsing onto the same pooled pair get the mean of their
    probabilities; repeated candidate pairs are counted once.
    """
    n = len(piece.notes)
    chord_prob = np.asarray(chord_prob, dtype=np.float64)
    kept = [(int(u), int(v)) for (u, v), p in zip(np.asarray(chord_candidates).reshape(-1, 2),
                                                  chord_prob) if p >= threshold]
    members = _components(n, kept)
    node_of = [0] * n
    for k, comp in enumerate(members):
        for i in comp:
            node_of[i] = k
    bar_of = [piece.notes[comp[0]].bar_index for comp in members]

    sums: dict[tuple[int, int], list[float]] = defaultdict(list)
    if voice_candidates is not None and len(voice_candidates):
        seen = set()
        for (u, v), p in zip(np.asarray(voice_candidates).reshape(-1, 2), voice_prob):
            key = (int(u), int(v))
            if key in seen:
                continue
            seen.add(key)
            pu, pv = node_of[key[0]], node_of[key[1]]
            if pu != pv:
                sums[(pu, pv)].append(float(p))
    edges = {k: sum(ps) / len(ps) for k, ps in sorted(sums.items())}
    return PooledGraph(members, node_of, bar_of, edges)


def assign_voices(pooled: PooledGraph, cutoff: Optional[float] = 0.5) -> Assignment:
    """Per-bar linear assignment over pooled voice candidates.

    Cost is ``1 - p`` for candidate pairs and ``SENTINEL`` otherwise.
    With ``cutoff`` set, pairs below it are priced as forbidden up front,
    so an unlikely edge can never displace a likely one; sentinel matches
    are dropped after solving. ``cutoff=None`` keeps every candidate
    (used with non-probability costs via :func:`assign_by_cost`).
    """
    costs = {}
    for (u, v), p in pooled.edges.items():
        if cutoff is not None and p < cutoff:
            continue
        costs[(u, v)] = 1.0 - p
    return assign_by_cost(pooled, costs)


def assign_by_cost(pooled: PooledGraph, costs: dict[tuple[int, int], float]) -> Assignment:
    by_bar: dict[int, list[int]] = defaultdict(list)
    for k, bar in enumerate(pooled.bar_of):
        by_bar[bar].append(k)
    edges_by_bar: dict[int, list] = defaultdict(list)
    for (u, v), c in costs.items():
        edges_by_bar[pooled.bar_of[u]].append((u, v, c))

    result: Assignment = {}
    for bar in sorted(by_bar):
        bar_edges = edges_by_bar.get(bar)
        if not bar_edges:
            result[bar] = []
            continue
        rows = sorted({u for u, _, _ in bar_edges})
        cols = sorted({v for _, v, _ in bar_edges})
        ri = {u: i for i, u in enumerate(rows)}
        ci = {v: j for j, v in enumerate(cols)}
        matrix = np.full((len(rows), len(cols)), SENTINEL)
        for u, v, c in bar_edges:
            matrix[ri[u], ci[v]] = c
        pairs = solve_assignment(matrix)
        result[bar] = sorted((rows[i], cols[j]) for i, j in pairs if matrix[i, j] < SENTINEL)
    return result


def unpool(pooled: PooledGraph, assignment: Assignment, staff_prob: Sequence[float],
           staff_threshold: float = 0.5) -> OutputGraph:
    staff = [int(p >= staff_threshold) for p in np.asarray(staff_prob, dtype=np.float64)]
    voice = [(a, b) for pairs in assignment.values() for u, v in pairs
             for a in pooled.members[u] for b in pooled.members[v]]
    chord = [(a, b) for comp in pooled.members for i, a in enumerate(comp) for b in comp[i + 1:]]
    return OutputGraph.build(staff, voice, chord)


def postprocess(piece: Piece, predictions, cands: CandidateSet,
                config: Optional[PostprocessConfig] = None) -> OutputGraph:
    """Pool, assign, unpool. The result always satisfies ``check_output_graph``."""
    config = config or PostprocessConfig()
    if not piece.notes:
        return OutputGraph.build([], [], [])
    pooled = pool_chords(piece, predictions.chord_prob, cands.chord, config.chord_threshold,
                         cands.voice, predictions.voice_prob)
    assignment = assign_voices(pooled, config.voice_cutoff)
    return unpool(pooled, assignment, predictions.staff_prob, config.staff_threshold)


def threshold_only(piece: Piece, predictions, cands: CandidateSet,
                   config: Optional[PostprocessConfig] = None) -> OutputGraph:
    """Plain thresholding of every head, for ablations; may be invalid."""
    config = config or PostprocessConfig()
    staff = (np.asarray(predictions.staff_prob) >= config.staff_threshold).astype(int)
    voice = [tuple(e) for e, p in zip(cands.voice, predictions.voice_prob) if p >= config.voice_cutoff]
    chord = [tuple(e) for e, p in zip(cands.chord, predictions.chord_prob)
             if p >= config.chord_threshold]
    return OutputGraph.build(staff, voice, chord)
