"""Input graph, candidate sets and output graphs.

The input graph links notes by temporal relation; the output graph holds
what the model (or the ground truth) says about staves, chords and voices.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import AnnotatedPiece, Piece, validate

RELATIONS = ("onset", "during", "during_inv", "follow", "follow_inv", "silence", "silence_inv")
N_FEATURES = 20


class GraphError(ValueError):
    pass


@dataclass
class InputGraph:
    node_count: int
    edges: dict[str, np.ndarray]  # relation -> (2, E) int array of (src, dst)
    features: np.ndarray          # (node_count, 20)

    def triples(self) -> list[tuple[int, str, int]]:
        out = []
        for rel in RELATIONS:
            e = self.edges[rel]
            out.extend((int(s), rel, int(d)) for s, d in zip(e[0], e[1]))
        return sorted(out, key=lambda t: (t[0], RELATIONS.index(t[1]), t[2]))

    def permuted(self, perm: Sequence[int]) -> "InputGraph":
        """Relabel node ``i`` as ``perm[i]``."""
        p = np.asarray(perm)
        feats = np.empty_like(self.features)
        feats[p] = self.features
        edges = {r: p[e] if e.size else e for r, e in self.edges.items()}
        return InputGraph(self.node_count, edges, feats)


@dataclass
class CandidateSet:
    chord: np.ndarray  # (K, 2), u < v
    voice: np.ndarray  # (M, 2), directed
    synchrony_classes: list[list[int]] = field(default_factory=list)


@dataclass(frozen=True)
class OutputGraph:
    staff: tuple[int, ...]
    voice_edges: tuple[tuple[int, int], ...]
    chord_edges: tuple[tuple[int, int], ...]  # undirected, stored with u < v

    @classmethod
    def build(cls, staff: Iterable[int], voice_edges: Iterable[tuple[int, int]],
              chord_edges: Iterable[tuple[int, int]]) -> "OutputGraph":
        ch = {(min(u, v), max(u, v)) for u, v in chord_edges if u != v}
        return cls(tuple(int(s) for s in staff),
                   tuple(sorted({(int(u), int(v)) for u, v in voice_edges})),
                   tuple(sorted((int(u), int(v)) for u, v in ch)))

    @property
    def directed_chord_edges(self) -> list[tuple[int, int]]:
        return sorted([e for e in self.chord_edges] + [(v, u) for u, v in self.chord_edges])

    def chord_components(self) -> list[list[int]]:
        """Connected components over chord edges, singletons included."""
        return _components(len(self.staff), self.chord_edges)


def _components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups = defaultdict(list)
    for i in range(n):
        groups[find(i)].append(i)
    return sorted(groups.values())


def _require_regular(piece: Piece):
    if any(n.is_grace for n in piece.notes):
        raise GraphError("remove grace notes before building graphs")


def _pairs(src: list[int], dst: list[int]) -> np.ndarray:
    if not src:
        return np.zeros((2, 0), dtype=np.int64)
    e = np.array([src, dst], dtype=np.int64)
    order = np.lexsort((e[1], e[0]))
    return e[:, order]


def input_edges(piece: Piece) -> dict[str, np.ndarray]:
    """Temporal relations by onset-sorted sweep."""
    notes = piece.notes
    onsets = sorted((n.onset, n.id) for n in notes)
    onset_keys = [o for o, _ in onsets]
    by_onset: dict[int, list[int]] = defaultdict(list)
    for n in notes:
        by_onset[n.onset].append(n.id)

    src = {r: [] for r in ("onset", "during", "follow", "silence")}
    dst = {r: [] for r in src}
    for group in by_onset.values():
        for u in group:
            for v in group:
                if u != v:
                    src["onset"].append(u)
                    dst["onset"].append(v)
    for u in notes:
        lo = bisect.bisect_right(onset_keys, u.onset)
        hi = bisect.bisect_left(onset_keys, u.offset)
        for _, v in onsets[lo:hi]:
            src["during"].append(u.id)
            dst["during"].append(v)
        for v in by_onset.get(u.offset, ()):
            src["follow"].append(u.id)
            dst["follow"].append(v)

    # silent gaps lie between merged sounding intervals
    by_offset: dict[int, list[int]] = defaultdict(list)
    for n in notes:
        by_offset[n.offset].append(n.id)
    block_end = None
    for onset in sorted(by_onset):
        if block_end is not None and onset > block_end:
            for u in by_offset[block_end]:
                for v in by_onset[onset]:
                    src["silence"].append(u)
                    dst["silence"].append(v)
        longest = max(notes[v].offset for v in by_onset[onset])
        block_end = longest if block_end is None else max(block_end, longest)

    edges = {"onset": _pairs(src["onset"], dst["onset"])}
    for rel in ("during", "follow", "silence"):
        edges[rel] = _pairs(src[rel], dst[rel])
        edges[rel + "_inv"] = _pairs(dst[rel], src[rel])
    return edges


def node_features(piece: Piece) -> np.ndarray:
    """Pitch-class one-hot (12), octave one-hot (7), tanh(duration / bar)."""
    x = np.zeros((len(piece.notes), N_FEATURES))
    for n in piece.notes:
        bar = piece.bars[n.bar_index].duration
        if bar <= 0:
            raise GraphError(f"zero-length bar {n.bar_index}")
        octave = min(max(n.pitch // 12 - 1, 1), 7)
        x[n.id, n.pitch % 12] = 1.0
        x[n.id, 12 + octave - 1] = 1.0
        x[n.id, 19] = np.tanh(n.duration / bar)
    return x


def build_input_graph(piece: Piece) -> InputGraph:
    if not piece.notes:
        raise GraphError("cannot build a graph for an empty piece")
    _require_regular(piece)
    return InputGraph(len(piece.notes), input_edges(piece), node_features(piece))


def synchrony_classes(piece: Piece) -> list[list[int]]:
    groups: dict[tuple[int, int], list[int]] = defaultdict(list)
    for n in piece.notes:
        groups[(n.onset, n.offset)].append(n.id)
    return sorted(groups.values())


def chord_candidates(piece: Piece) -> np.ndarray:
    pairs = [(u, v) for g in synchrony_classes(piece)
             for i, u in enumerate(g) for v in g[i + 1:]]
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def voice_candidates(piece: Piece) -> np.ndarray:
    by_bar: dict[int, list] = defaultdict(list)
    for n in piece.notes:
        by_bar[n.bar_index].append(n)
    pairs = []
    for bar in sorted(by_bar):
        members = sorted(by_bar[bar], key=lambda n: (n.onset, n.id))
        onsets = [n.onset for n in members]
        for u in members:
            start = bisect.bisect_left(onsets, u.offset)
            pairs.extend((u.id, v.id) for v in members[start:])
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def candidates(piece: Piece) -> CandidateSet:
    _require_regular(piece)
    return CandidateSet(chord_candidates(piece), voice_candidates(piece), synchrony_classes(piece))


def truth_output_graph(annotated: AnnotatedPiece) -> OutputGraph:
    """Ground-truth output graph of a grace-free annotated piece."""
    piece = annotated.piece
    _require_regular(piece)
    problems = validate(annotated)
    if problems:
        raise GraphError(f"annotated piece fails validation: {problems[0].kind} {problems[0].notes}")

    chords: dict[int, list[int]] = defaultdict(list)
    for n in piece.notes:
        chords[annotated.chord_id[n.id]].append(n.id)
    chord_edges = [(u, v) for members in chords.values()
                   for i, u in enumerate(members) for v in members[i + 1:]]

    # consecutive chords of the same voice inside one bar
    streams: dict[tuple[int, int], list[list[int]]] = defaultdict(list)
    for members in chords.values():
        head = piece.notes[members[0]]
        streams[(head.bar_index, annotated.voice[head.id])].append(members)
    voice_edges = []
    for seq in streams.values():
        seq.sort(key=lambda m: piece.notes[m[0]].onset)
        for a, b in zip(seq, seq[1:]):
            voice_edges.extend((u, v) for u in a for v in b)
    return OutputGraph.build(annotated.staff, voice_edges, chord_edges)


@dataclass(frozen=True)
class GraphViolation:
    kind: str
    notes: tuple[int, ...]


def check_output_graph(piece: Piece, graph: OutputGraph) -> list[GraphViolation]:
    """Engraving validity of an output graph.

    Checks: staff labels binary; chord components are synchronous cliques;
    voice edges are candidate pairs; at chord level every node has at most
    one voice predecessor and successor; chord-mates share exactly the same
    voice connections (complete bipartite links between linked chords).
    """
    n = len(piece.notes)
    out: list[GraphViolation] = []
    if len(graph.staff) != n:
        return [GraphViolation("size-mismatch", ())]
    out.extend(GraphViolation("bad-staff", (i,)) for i, s in enumerate(graph.staff) if s not in (0, 1))

    comps = graph.chord_components()
    chord_set = set(graph.chord_edges)
    comp_of = [0] * n
    for k, comp in enumerate(comps):
        for i in comp:
            comp_of[i] = k
        head = piece.notes[comp[0]]
        if any((piece.notes[i].onset, piece.notes[i].offset) != (head.onset, head.offset)
               for i in comp):
            out.append(GraphViolation("chord-not-synchronous", tuple(comp)))
        if any((u, v) not in chord_set for i, u in enumerate(comp) for v in comp[i + 1:]):
            out.append(GraphViolation("chord-not-clique", tuple(comp)))

    succ: dict[int, set[int]] = defaultdict(set)
    note_links: dict[tuple[int, int], set[tuple[int, int]]] = defaultdict(set)
    for u, v in graph.voice_edges:
        a, b = piece.notes[u], piece.notes[v]
        if a.bar_index != b.bar_index or a.offset > b.onset:
            out.append(GraphViolation("voice-not-candidate", (u, v)))
        cu, cv = comp_of[u], comp_of[v]
        succ[cu].add(cv)
        note_links[(cu, cv)].add((u, v))
    pred: dict[int, set[int]] = defaultdict(set)
    for cu, targets in succ.items():
        for cv in targets:
            pred[cv].add(cu)
    for cu in sorted(succ):
        if len(succ[cu]) > 1:
            out.append(GraphViolation("voice-split", tuple(comps[cu])))
    for cv in sorted(pred):
        if len(pred[cv]) > 1:
            out.append(GraphViolation("voice-merge", tuple(comps[cv])))
    for (cu, cv), links in sorted(note_links.items()):
        if len(links) != len(comps[cu]) * len(comps[cv]):
            out.append(GraphViolation("chord-mates-disagree", tuple(comps[cu] + comps[cv])))
    return out
