"""Line-oriented annotated note table.

Grammar (version 1)::

    document   := magic header* note*
    magic      := "pianosep-notes" SP version NL
    header     := "resolution" SP INT NL
                | "pickup" SP INT NL
                | "end" SP INT NL
                | "time-signature" SP INT SP INT "/" INT NL
    note       := "note" SP onset SP duration SP pitch SP flag SP staff SP voice SP chord NL
    flag       := "-" | "grace"
    staff, voice, chord := INT | "-"

Blank lines and lines starting with ``#`` are ignored. Headers must come
before the first ``note``; ``resolution`` and at least one
``time-signature`` are required. Labels are either present on every
non-grace note or absent everywhere.
"""

from __future__ import annotations

import logging
from typing import Optional, Union

from ..core import AnnotatedPiece, Piece, PieceError, TimeSignature, make_piece, validate

log = logging.getLogger(__name__)

MAGIC = "pianosep-notes"
SCHEMA_VERSION = "1"


class FormatError(ValueError):
    """Malformed input document. ``code`` names the failure class."""

    def __init__(self, code: str, message: str, line: Optional[int] = None):
        self.code = code
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{code}: {message}{where}")


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError("schema", f"{what} must be an integer, got {tok!r}", lineno) from None


def _label(tok: str, lineno: int, what: str) -> Optional[int]:
    return None if tok == "-" else _int(tok, lineno, what)


def parse_annotated(text: str, strict: bool = True) -> Union[AnnotatedPiece, Piece]:
    """Parse a note table.

    Returns an :class:`AnnotatedPiece` when labels are present and a bare
    :class:`Piece` otherwise. With ``strict`` (the default) any validation
    violation raises; otherwise violations are logged as warnings.
    """
    lines = text.splitlines()
    resolution = None
    pickup = 0
    end = None
    signatures: list[TimeSignature] = []
    rows: list[tuple] = []
    labels: list[tuple] = []
    seen_magic = False

    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if not seen_magic:
            if toks[0] != MAGIC or len(toks) != 2:
                raise FormatError("schema", f"expected '{MAGIC} <version>' header", lineno)
            if toks[1] != SCHEMA_VERSION:
                raise FormatError("version", f"unknown schema version {toks[1]!r}", lineno)
            seen_magic = True
            continue
        key = toks[0]
        if key == "note":
            if len(toks) != 8:
                raise FormatError("schema", "note record needs 7 fields", lineno)
            onset = _int(toks[1], lineno, "onset")
            duration = _int(toks[2], lineno, "duration")
            pitch = _int(toks[3], lineno, "pitch")
            if toks[4] not in ("-", "grace"):
                raise FormatError("schema", f"bad note flag {toks[4]!r}", lineno)
            grace = toks[4] == "grace"
            rows.append((pitch, onset, duration, grace))
            labels.append((_label(toks[5], lineno, "staff"), _label(toks[6], lineno, "voice"),
                           _label(toks[7], lineno, "chord"), grace, lineno))
            continue
        if rows:
            raise FormatError("schema", f"header {key!r} after note records", lineno)
        if key == "resolution" and len(toks) == 2:
            resolution = _int(toks[1], lineno, "resolution")
        elif key == "pickup" and len(toks) == 2:
            pickup = _int(toks[1], lineno, "pickup")
        elif key == "end" and len(toks) == 2:
            end = _int(toks[1], lineno, "end")
        elif key == "time-signature" and len(toks) == 3:
            num, _, den = toks[2].partition("/")
            try:
                signatures.append(TimeSignature(_int(num, lineno, "numerator"),
                                                _int(den, lineno, "denominator"),
                                                _int(toks[1], lineno, "start")))
            except PieceError as exc:
                raise FormatError("schema", str(exc), lineno) from None
        else:
            raise FormatError("schema", f"unknown or malformed header {key!r}", lineno)

    if not seen_magic:
        raise FormatError("schema", "empty document")
    if resolution is None or resolution <= 0:
        raise FormatError("schema", "missing or non-positive resolution")
    if not signatures:
        raise FormatError("schema", "at least one time-signature is required")

    try:
        piece = make_piece(rows, signatures, resolution, end=end, pickup=pickup)
    except PieceError as exc:
        raise FormatError("schema", str(exc)) from None

    # make_piece sorts stably by (onset, pitch, input order); mirror that for labels
    order = sorted(range(len(rows)), key=lambda i: (rows[i][1], rows[i][0], i))
    labels = [labels[i] for i in order]

    regular = [lab for lab in labels if not lab[3]]
    full = [all(x is not None for x in lab[:3]) for lab in regular]
    empty = [all(x is None for x in lab[:3]) for lab in regular]
    if regular and not all(full) and not all(empty):
        bad = next(lab for lab, f in zip(regular, full) if not f)
        raise FormatError("label-partially-present",
                          "labels must be given for every non-grace note or none", bad[4])
    if not regular or all(empty):
        if any(any(x is not None for x in lab[:3]) for lab in labels):
            raise FormatError("label-partially-present", "labels on grace notes only")
        return piece

    annotated = AnnotatedPiece(piece, tuple(lab[0] for lab in labels),
                               tuple(lab[1] for lab in labels), tuple(lab[2] for lab in labels))
    problems = validate(annotated)
    if problems:
        summary = "; ".join(f"{v.kind} {list(v.notes)}" for v in problems[:5])
        if strict:
            raise FormatError("validation", f"{len(problems)} violation(s): {summary}")
        log.warning("annotated document has %d violation(s): %s", len(problems), summary)
    return annotated


def write_annotated(doc: Union[AnnotatedPiece, Piece], check: bool = True) -> str:
    """Serialize to the canonical text form (deterministic)."""
    if isinstance(doc, AnnotatedPiece):
        piece = doc.piece
        if check:
            problems = validate(doc)
            if problems:
                raise FormatError("validation", f"{len(problems)} violation(s), first: "
                                                f"{problems[0].kind} {list(problems[0].notes)}")
        cols = list(zip(doc.staff, doc.voice, doc.chord_id))
    else:
        piece = doc
        cols = [(None, None, None)] * len(piece.notes)

    def fmt(x):
        return "-" if x is None else str(x)

    out = [f"{MAGIC} {SCHEMA_VERSION}", f"resolution {piece.resolution}"]
    if piece.pickup:
        out.append(f"pickup {piece.pickup}")
    out.append(f"end {piece.end}")
    for ts in piece.time_signatures:
        out.append(f"time-signature {ts.start} {ts.numerator}/{ts.denominator}")
    for n, (st, vo, ch) in zip(piece.notes, cols):
        flag = "grace" if n.is_grace else "-"
        out.append(f"note {n.onset} {n.duration} {n.pitch} {flag} {fmt(st)} {fmt(vo)} {fmt(ch)}")
    return "\n".join(out) + "\n"
