"""Standard MIDI File reader (format 0/1, PPQ division).

Only what voice separation needs is kept: notes and time signatures.
Tempo is ignored, so every time stays in ticks.
"""

from __future__ import annotations

import logging
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field

from ..core import Piece, TimeSignature, make_piece
from .annotated import FormatError

log = logging.getLogger(__name__)


@dataclass
class SmfReport:
    format: int = 0
    n_tracks: int = 0
    division: int = 0
    unmatched_note_on: int = 0
    unmatched_note_off: int = 0
    zero_length: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str):
        self.warnings.append(msg)
        log.warning(msg)


def _read_vlq(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise FormatError("smf", "truncated variable-length quantity")
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise FormatError("smf", "variable-length quantity longer than 4 bytes")


# data bytes following a channel status, by high nibble
_CHANNEL_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}


def _parse_track(data: bytes, pos: int, end: int, track: int, events: list):
    """Append ``(tick, track, seq, kind, payload)`` tuples for one MTrk."""
    tick = 0
    status = None
    seq = 0
    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise FormatError("smf", f"track {track}: event truncated")
        b = data[pos]
        if b == 0xFF:
            if pos + 2 > end:
                raise FormatError("smf", f"track {track}: meta event truncated")
            mtype = data[pos + 1]
            length, pos = _read_vlq(data, pos + 2, end)
            if pos + length > end:
                raise FormatError("smf", f"track {track}: meta event overruns chunk")
            payload = data[pos:pos + length]
            pos += length
            if mtype == 0x2F:
                return
            if mtype == 0x58:
                if length < 2:
                    raise FormatError("smf", f"track {track}: short time-signature event")
                events.append((tick, track, seq, "timesig", (payload[0], 2 ** payload[1])))
                seq += 1
            continue
        if b in (0xF0, 0xF7):
            length, pos = _read_vlq(data, pos + 1, end)
            if pos + length > end:
                raise FormatError("smf", f"track {track}: sysex overruns chunk")
            pos += length
            status = None
            continue
        if b & 0x80:
            if b >= 0xF0:
                raise FormatError("smf", f"track {track}: unexpected system message 0x{b:02X}")
            status = b
            pos += 1
        elif status is None:
            raise FormatError("smf", f"track {track}: running status without a prior status byte")
        kind = status >> 4
        n = _CHANNEL_DATA_LEN[kind]
        if pos + n > end:
            raise FormatError("smf", f"track {track}: channel event truncated")
        d = data[pos:pos + n]
        pos += n
        if any(x & 0x80 for x in d):
            raise FormatError("smf", f"track {track}: data byte with high bit set")
        channel = status & 0x0F
        if kind == 0x9 and d[1] > 0:
            events.append((tick, track, seq, "on", (channel, d[0])))
            seq += 1
        elif kind == 0x8 or kind == 0x9:
            events.append((tick, track, seq, "off", (channel, d[0])))
            seq += 1
    raise FormatError("smf", f"track {track}: missing end-of-track event")


def parse_smf_report(data: bytes, pickup: int = 0) -> tuple[Piece, SmfReport]:
    report = SmfReport()
    if len(data) < 14 or data[:4] != b"MThd":
        raise FormatError("smf", "missing MThd header")
    hlen = struct.unpack(">I", data[4:8])[0]
    if hlen < 6 or 8 + hlen > len(data):
        raise FormatError("smf", f"bad header length {hlen}")
    fmt, ntrks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise FormatError("smf", f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise FormatError("smf", "SMPTE time division is not supported (quantized PPQ input expected)")
    if division == 0:
        raise FormatError("smf", "zero ticks-per-quarter division")
    report.format, report.n_tracks, report.division = fmt, ntrks, division

    events: list = []
    pos = 8 + hlen
    track = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise FormatError("smf", "truncated chunk header")
        ctype = data[pos:pos + 4]
        clen = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        body = pos + 8
        if body + clen > len(data):
            raise FormatError("smf", f"chunk length {clen} overruns file")
        if ctype == b"MTrk":
            _parse_track(data, body, body + clen, track, events)
            track += 1
        pos = body + clen
    if track != ntrks:
        report.warn(f"header announces {ntrks} tracks, found {track}")

    events.sort(key=lambda e: (e[0], e[1], e[2]))
    pending: dict[tuple[int, int], deque] = defaultdict(deque)
    notes = []
    signatures: dict[int, tuple[int, int]] = {}
    for tick, trk, _, kind, payload in events:
        if kind == "timesig":
            signatures[tick] = payload
        elif kind == "on":
            pending[payload].append((tick, trk))
        else:
            queue = pending.get(payload)
            if not queue:
                report.unmatched_note_off += 1
                continue
            start, on_track = queue.popleft()
            if tick == start:
                report.zero_length += 1
                continue
            channel, pitch = payload
            notes.append((pitch, start, tick - start, False, channel, on_track))
    for (channel, pitch), queue in sorted(pending.items()):
        for start, _ in queue:
            report.unmatched_note_on += 1
            report.warn(f"note-on ch{channel} pitch {pitch} at tick {start} never released; dropped")
    if report.zero_length:
        report.warn(f"dropped {report.zero_length} zero-length note(s)")

    signatures.setdefault(0, (4, 4))
    sigs = []
    for tick in sorted(signatures):
        num, den = signatures[tick]
        if sigs and (sigs[-1].numerator, sigs[-1].denominator) == (num, den):
            continue
        sigs.append(TimeSignature(num, den, tick))
    piece = make_piece(notes, sigs, division, pickup=pickup)
    return piece, report


def parse_smf(data: bytes, pickup: int = 0) -> Piece:
    """Parse SMF bytes into a :class:`Piece`.

    Note-on/off pairs are matched per (channel, pitch), earliest unmatched
    note-on first, after merging all tracks. ``pickup`` gives the length in
    ticks of an anacrusis bar, which SMF cannot express by itself.
    """
    return parse_smf_report(data, pickup)[0]
