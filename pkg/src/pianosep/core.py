"""Exact-time domain types shared by every stage of the pipeline.

All times are integer ticks; a piece carries a single ``resolution``
(ticks per quarter note). Nothing in here touches floating point, since
synchrony and adjacency tests rely on exact onset/offset equality.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence


class PieceError(ValueError):
    """Raised when a piece or its meter cannot be constructed."""


@dataclass(frozen=True)
class TimeSignature:
    numerator: int
    denominator: int
    start: int = 0

    def __post_init__(self):
        if self.numerator <= 0:
            raise PieceError(f"time signature numerator must be positive, got {self.numerator}")
        d = self.denominator
        if d <= 0 or d & (d - 1):
            raise PieceError(f"time signature denominator must be a power of two, got {d}")
        if self.start < 0:
            raise PieceError("time signature start must be non-negative")

    def bar_ticks(self, resolution: int) -> int:
        ticks, rem = divmod(self.numerator * 4 * resolution, self.denominator)
        if rem:
            raise PieceError(
                f"{self.numerator}/{self.denominator} is not a whole number of ticks "
                f"at resolution {resolution}")
        return ticks

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class Bar:
    index: int
    start: int
    end: int
    time_signature: TimeSignature
    # ticks the bar is short of nominal at its beginning (pickup bars only)
    pickup_shift: int = 0

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Note:
    id: int
    pitch: int
    onset: int
    duration: int
    bar_index: int = 0
    is_grace: bool = False
    # opaque SMF metadata; never used as a voice/staff hint
    channel: Optional[int] = field(default=None, compare=False)
    track: Optional[int] = field(default=None, compare=False)

    @property
    def offset(self) -> int:
        return self.onset + self.duration


@dataclass(frozen=True)
class Piece:
    notes: tuple[Note, ...]
    bars: tuple[Bar, ...]
    time_signatures: tuple[TimeSignature, ...]
    resolution: int
    pickup: int = 0

    def __len__(self):
        return len(self.notes)

    @property
    def end(self) -> int:
        return self.bars[-1].end if self.bars else 0

    def bar_of(self, note: Note) -> Bar:
        return self.bars[note.bar_index]

    def synchronous(self, u: int, v: int) -> bool:
        a, b = self.notes[u], self.notes[v]
        return a.onset == b.onset and a.offset == b.offset


@dataclass(frozen=True)
class AnnotatedPiece:
    """A piece plus engraved ground truth.

    ``staff``, ``voice`` and ``chord_id`` are index-aligned with
    ``piece.notes``. Grace notes may carry ``None`` labels.
    """
    piece: Piece
    staff: tuple[Optional[int], ...]
    voice: tuple[Optional[int], ...]
    chord_id: tuple[Optional[int], ...]

    def __post_init__(self):
        n = len(self.piece.notes)
        if not (len(self.staff) == len(self.voice) == len(self.chord_id) == n):
            raise PieceError("label columns must match the note count")


def compute_bars(time_signatures: Sequence[TimeSignature], piece_end: int,
                 resolution: int, pickup: int = 0) -> list[Bar]:
    """Tile ``[0, piece_end)`` with bars.

    A signature change always starts a new bar; a bar interrupted by a
    change or by the end of the piece is left short. ``pickup`` > 0 makes
    bar 0 an anacrusis of that many ticks.
    """
    if not time_signatures:
        raise PieceError("empty time signature list")
    if time_signatures[0].start != 0:
        raise PieceError("first time signature must start at tick 0")
    for a, b in zip(time_signatures, time_signatures[1:]):
        if b.start <= a.start:
            raise PieceError("time signatures must be strictly increasing in start time")
    if piece_end <= 0:
        raise PieceError("zero-length piece")
    if resolution <= 0:
        raise PieceError("resolution must be positive")

    starts = [ts.start for ts in time_signatures]
    bars: list[Bar] = []
    t = 0
    while t < piece_end:
        k = bisect.bisect_right(starts, t) - 1
        ts = time_signatures[k]
        nominal = ts.bar_ticks(resolution)
        end = t + nominal
        shift = 0
        if not bars and 0 < pickup < nominal:
            end = pickup
            shift = nominal - pickup
        if k + 1 < len(starts):
            end = min(end, starts[k + 1])
        end = min(end, piece_end)
        bars.append(Bar(len(bars), t, end, ts, shift))
        t = end
    return bars


def make_piece(notes: Iterable[tuple], time_signatures: Sequence[TimeSignature] = (),
               resolution: int = 480, *, end: Optional[int] = None,
               pickup: int = 0) -> Piece:
    """Build a piece from ``(pitch, onset, duration[, is_grace[, channel, track]])`` tuples.

    Notes are sorted by (onset, pitch, input order) and numbered densely.
    """
    raw = [tuple(n) for n in notes]
    if not time_signatures:
        time_signatures = (TimeSignature(4, 4, 0),)
    time_signatures = tuple(time_signatures)
    for r in raw:
        pitch, onset, duration = r[0], r[1], r[2]
        grace = bool(r[3]) if len(r) > 3 else False
        if not 0 <= pitch <= 127:
            raise PieceError(f"pitch {pitch} outside MIDI range")
        if onset < 0:
            raise PieceError(f"negative onset {onset}")
        if duration < 0 or (duration == 0 and not grace):
            raise PieceError(f"non-grace note with non-positive duration {duration}")

    order = sorted(range(len(raw)), key=lambda i: (raw[i][1], raw[i][0], i))
    last = max((r[1] + max(r[2], 1) for r in raw), default=0)
    if end is None:
        end = last
    elif end < last:
        raise PieceError(f"piece end {end} precedes the last note end {last}")

    bars = compute_bars(time_signatures, end, resolution, pickup) if end > 0 else []
    bar_starts = [b.start for b in bars]
    out = []
    for new_id, i in enumerate(order):
        r = raw[i]
        grace = bool(r[3]) if len(r) > 3 else False
        channel = r[4] if len(r) > 4 else None
        track = r[5] if len(r) > 5 else None
        b = bisect.bisect_right(bar_starts, r[1]) - 1
        out.append(Note(new_id, int(r[0]), int(r[1]), int(r[2]), b, grace, channel, track))
    return Piece(tuple(out), tuple(bars), time_signatures, resolution, pickup)


def drop_grace_notes(piece: Piece) -> tuple[Piece, list[int]]:
    """Remove grace notes and renumber.

    Returns the new piece and ``mapping`` where ``mapping[new_id] == old_id``.
    """
    mapping = [n.id for n in piece.notes if not n.is_grace]
    notes = tuple(replace(piece.notes[old], id=new) for new, old in enumerate(mapping))
    return replace(piece, notes=notes), mapping


def drop_grace_annotated(annotated: AnnotatedPiece) -> tuple[AnnotatedPiece, list[int]]:
    piece, mapping = drop_grace_notes(annotated.piece)
    return AnnotatedPiece(
        piece,
        tuple(annotated.staff[i] for i in mapping),
        tuple(annotated.voice[i] for i in mapping),
        tuple(annotated.chord_id[i] for i in mapping),
    ), mapping


@dataclass(frozen=True)
class Violation:
    kind: str
    notes: tuple[int, ...]
    message: str = ""


def validate(annotated: AnnotatedPiece) -> list[Violation]:
    """Check the engraving constraints of an annotated piece.

    Kinds reported: ``bar-mismatch``, ``missing-label``, ``bad-label``,
    ``chord-not-synchronous``, ``chord-mixed-voice``, ``chord-mixed-staff``,
    ``voice-overlap``. Grace notes are ignored.
    """
    piece = annotated.piece
    out: list[Violation] = []
    for n in piece.notes:
        if not piece.bars:
            break
        bar = piece.bars[n.bar_index] if 0 <= n.bar_index < len(piece.bars) else None
        if bar is None or not bar.start <= n.onset < bar.end:
            out.append(Violation("bar-mismatch", (n.id,),
                                 f"onset {n.onset} not inside bar {n.bar_index}"))

    regular = [n for n in piece.notes if not n.is_grace]
    for n in regular:
        labels = (annotated.staff[n.id], annotated.voice[n.id], annotated.chord_id[n.id])
        if any(x is None for x in labels):
            out.append(Violation("missing-label", (n.id,)))
        elif labels[0] not in (0, 1) or labels[1] < 0:
            out.append(Violation("bad-label", (n.id,), f"staff/voice out of range: {labels[:2]}"))
    labelled = [n for n in regular if None not in
                (annotated.staff[n.id], annotated.voice[n.id], annotated.chord_id[n.id])]

    chords: dict[int, list[Note]] = {}
    for n in labelled:
        chords.setdefault(annotated.chord_id[n.id], []).append(n)
    for cid, members in sorted(chords.items()):
        ids = tuple(m.id for m in members)
        head = members[0]
        if any((m.onset, m.offset) != (head.onset, head.offset) for m in members):
            out.append(Violation("chord-not-synchronous", ids, f"chord {cid}"))
        if len({annotated.voice[m.id] for m in members}) > 1:
            out.append(Violation("chord-mixed-voice", ids, f"chord {cid}"))
        if len({annotated.staff[m.id] for m in members}) > 1:
            out.append(Violation("chord-mixed-staff", ids, f"chord {cid}"))

    streams: dict[tuple[int, int], list[Note]] = {}
    for n in labelled:
        streams.setdefault((n.bar_index, annotated.voice[n.id]), []).append(n)
    for (bar, voice), members in sorted(streams.items()):
        members.sort(key=lambda m: (m.onset, m.id))
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                if b.onset >= a.offset:
                    break
                if annotated.chord_id[a.id] == annotated.chord_id[b.id]:
                    continue
                out.append(Violation("voice-overlap", (a.id, b.id),
                                     f"bar {bar}, voice {voice}"))
    return out
