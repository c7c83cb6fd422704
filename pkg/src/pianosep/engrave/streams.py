"""From an output graph to per-bar, per-staff layers of chords and rests."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

from ..core import AnnotatedPiece, Piece
from ..graph import OutputGraph, check_output_graph
from .rhythm import (EngraveError, Rest, Value, bar_beats, beam_groups, fewest_values,
                     infill_rests)


@dataclass
class VoiceStream:
    bar: int
    staff: int
    chords: list[list[int]]  # note ids per chord, in time order
    layer: int = 0

    def mean_pitch(self, piece: Piece) -> float:
        pitches = [piece.notes[i].pitch for c in self.chords for i in c]
        return sum(pitches) / len(pitches) if pitches else 0.0


def chord_staff(piece: Piece, graph: OutputGraph, chord: list[int]) -> int:
    """Majority staff of a chord; a tie goes to the staff of its highest note."""
    counts = Counter(graph.staff[i] for i in chord)
    top = max(counts.values())
    tied = [s for s, c in counts.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    return graph.staff[max(chord, key=lambda i: (piece.notes[i].pitch, -i))]


def _layer_sort(streams: list[VoiceStream], piece: Piece):
    streams.sort(key=lambda s: (-s.mean_pitch(piece), piece.notes[s.chords[0][0]].onset,
                                s.chords[0][0]))
    for k, s in enumerate(streams, 1):
        s.layer = k


def derive_voice_streams(piece: Piece, graph: OutputGraph) -> list[VoiceStream]:
    """Chains of chords linked by voice edges, one stream per chain.

    Streams are anchored to the staff of their first chord and numbered by
    mean pitch, highest first, within each bar and staff.
    """
    problems = check_output_graph(piece, graph)
    if problems:
        raise EngraveError("invalid-graph", f"output graph is not engraving-valid "
                                            f"({problems[0].kind}); run postprocess first")
    chords = graph.chord_components()
    chord_of = {}
    for k, c in enumerate(chords):
        for i in c:
            chord_of[i] = k
    succ: dict[int, int] = {}
    has_pred = set()
    for u, v in graph.voice_edges:
        succ[chord_of[u]] = chord_of[v]
        has_pred.add(chord_of[v])

    streams = []
    for k in sorted(range(len(chords)), key=lambda k: (piece.notes[chords[k][0]].onset, k)):
        if k in has_pred:
            continue
        chain = [k]
        while chain[-1] in succ:
            chain.append(succ[chain[-1]])
        head = chords[k]
        streams.append(VoiceStream(piece.notes[head[0]].bar_index,
                                   chord_staff(piece, graph, head),
                                   [chords[c] for c in chain]))
    groups: dict[tuple[int, int], list[VoiceStream]] = defaultdict(list)
    for s in streams:
        groups[(s.bar, s.staff)].append(s)
    out = []
    for key in sorted(groups):
        _layer_sort(groups[key], piece)
        out.extend(groups[key])
    return out


def to_annotated(piece: Piece, graph: OutputGraph) -> AnnotatedPiece:
    """Express a valid output graph as labels (chord ids, per-bar voice numbers).

    Staff labels are made uniform per chord (see :func:`chord_staff`) since
    the note table requires it.
    """
    streams = derive_voice_streams(piece, graph)
    staff = list(graph.staff)
    voice = [0] * len(piece.notes)
    chord_id = [0] * len(piece.notes)
    per_bar = Counter()
    next_chord = 0
    for s in sorted(streams, key=lambda s: (s.bar, s.staff, s.layer)):
        per_bar[s.bar] += 1
        for c in s.chords:
            st = chord_staff(piece, graph, c)
            for i in c:
                staff[i] = st
                voice[i] = per_bar[s.bar]
                chord_id[i] = next_chord
            next_chord += 1
    return AnnotatedPiece(piece, tuple(staff), tuple(voice), tuple(chord_id))


@dataclass
class Event:
    """One written element of a layer: a (possibly tied) chord or a rest."""
    onset: int
    value: Optional[Value]              # None for a whole-bar rest
    ticks: int
    notes: list[int] = field(default_factory=list)  # empty for rests
    ties: dict[int, str] = field(default_factory=dict)

    @property
    def is_rest(self) -> bool:
        return not self.notes


@dataclass
class Layer:
    n: int
    events: list[Event]
    beams: list[list[int]]  # indices into events


@dataclass
class MeasureLayout:
    bar: int
    staves: dict[int, list[Layer]]  # staff label -> layers


@dataclass
class _Item:
    onset: int
    end: int
    notes: list[int]
    tie_in: bool = False   # continues from the previous bar
    tie_out: bool = False  # continues into the next bar


def _place_continuations(bar: int, conts: list[_Item], streams: list[list[_Item]],
                         pitches: list[float]):
    """Prepend carried-over chords to a stream that leaves room, else open a new one."""
    for item in conts:
        pitch = sum(pitches[i] for i in item.notes) / len(item.notes)
        best = None
        for k, s in enumerate(streams):
            if s and s[0].onset >= item.end and not s[0].tie_in:
                mean = sum(pitches[i] for it in s for i in it.notes) / sum(len(it.notes) for it in s)
                score = abs(mean - pitch)
                if best is None or score < best[0]:
                    best = (score, k)
        if best is None:
            streams.append([item])
        else:
            streams[best[1]].insert(0, item)


def layout(piece: Piece, graph: OutputGraph) -> list[MeasureLayout]:
    """Per bar and staff: layers of chord and rest events with ties and beams."""
    streams = derive_voice_streams(piece, graph)
    pitches = [float(n.pitch) for n in piece.notes]
    by_bar: dict[int, dict[int, list[list[_Item]]]] = defaultdict(lambda: defaultdict(list))
    carried: dict[int, dict[int, list[_Item]]] = defaultdict(lambda: defaultdict(list))

    for s in streams:
        items = []
        bar = piece.bars[s.bar]
        for c in s.chords:
            head = piece.notes[c[0]]
            items.append(_Item(head.onset, min(head.offset, bar.end), list(c),
                               tie_out=head.offset > bar.end))
            if head.offset > bar.end:
                carried[s.bar + 1][s.staff].append(_Item(bar.end, head.offset, list(c),
                                                         tie_in=True))
        by_bar[s.bar][s.staff].append(items)

    out = []
    for b, bar in enumerate(piece.bars):
        staves = {}
        for staff in (0, 1):
            conts = []
            for item in carried[b][staff]:
                end = min(item.end, bar.end)
                if item.end > bar.end:
                    carried[b + 1][staff].append(_Item(bar.end, item.end, item.notes, tie_in=True))
                conts.append(_Item(item.onset, end, item.notes, True, item.end > bar.end))
            bar_streams = by_bar[b][staff]
            _place_continuations(b, conts, bar_streams, pitches)
            bar_streams.sort(key=lambda s: (-sum(pitches[i] for it in s for i in it.notes)
                                            / sum(len(it.notes) for it in s), s[0].onset))
            layers = [_layer_events(bar, k, s, piece.resolution)
                      for k, s in enumerate(bar_streams, 1)]
            if not layers:
                layers = [Layer(1, [Event(bar.start, None, bar.duration)], [])]
            staves[staff] = layers
        out.append(MeasureLayout(b, staves))
    return out


def _layer_events(bar, n: int, items: list[_Item], resolution: int) -> Layer:
    events: list[Event] = []
    for item in items:
        parts = fewest_values(item.end - item.onset, resolution)
        t = item.onset
        for k, v in enumerate(parts):
            first, last = k == 0, k == len(parts) - 1
            tied_before = item.tie_in or not first
            tied_after = item.tie_out or not last
            tie = {(True, True): "m", (False, True): "i", (True, False): "t"}.get(
                (tied_before, tied_after))
            ties = {i: tie for i in item.notes} if tie else {}
            events.append(Event(t, v, v.ticks, list(item.notes), ties))
            t += v.ticks
    rests = infill_rests([(it.onset, it.end) for it in items], bar, resolution)
    events.extend(Event(r.onset, r.value, r.ticks) for r in rests)
    events.sort(key=lambda e: e.onset)

    grid = bar_beats(bar, resolution)
    chord_idx = [i for i, e in enumerate(events) if not e.is_rest]
    beamable = [(events[i].onset, events[i].ticks, not events[i].ties) for i in chord_idx]
    beams = [[chord_idx[j] for j in g] for g in beam_groups(beamable, grid, resolution)]
    # a beam may not span a rest
    beams = [g for g in beams if g == list(range(g[0], g[-1] + 1))]
    return Layer(n, events, beams)
