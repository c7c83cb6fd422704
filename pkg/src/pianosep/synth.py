"""Synthetic two-voice piano pieces with engraved labels.

Voice 1 is a melody on the upper staff that sometimes doubles into dyads
and dips below middle C; voice 2 is a block-chord accompaniment on the
lower staff that sometimes reaches above it. Both voices may rest. Notes
never cross a barline.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import AnnotatedPiece, TimeSignature, make_piece

METERS = ((4, 4), (3, 4), (6, 8))


def _rhythm(rng, bar_len: int, unit: int, values: tuple[int, ...]) -> list[int]:
    """Random split of a bar into note values (in units)."""
    out, left = [], bar_len
    while left > 0:
        choices = [v * unit for v in values if v * unit <= left] or [left]
        out.append(int(rng.choice(choices)))
        left -= out[-1]
    return out


def generate_piece(rng: np.random.Generator, n_bars: Optional[int] = None,
                   resolution: int = 480) -> AnnotatedPiece:
    n_bars = n_bars or int(rng.integers(4, 9))
    num, den = METERS[int(rng.integers(len(METERS)))]
    ts = TimeSignature(num, den, 0)
    bar_len = ts.bar_ticks(resolution)
    eighth = resolution // 2

    rows, staff, voice, chord = [], [], [], []
    next_chord = 0

    def emit(pitches, onset, dur, st, vo):
        nonlocal next_chord
        for p in pitches:
            rows.append((int(p), onset, dur))
            staff.append(st)
            voice.append(vo)
            chord.append(next_chord)
        next_chord += 1

    melody = int(rng.integers(62, 76))
    for b in range(n_bars):
        start = b * bar_len
        # melody
        t = start
        melody_at = {}
        for dur in _rhythm(rng, bar_len, eighth, (1, 2, 2, 3, 4)):
            if rng.random() < 0.12:
                t += dur
                continue
            melody = int(np.clip(melody + rng.integers(-4, 5), 55, 84))
            pitches = [melody]
            if rng.random() < 0.3:
                pitches.append(melody - int(rng.choice((3, 4, 8, 9))))
            melody_at[t] = set(pitches)
            emit(pitches, t, dur, 0, 1)
            t += dur
        # accompaniment
        t = start
        root = int(rng.integers(38, 56))
        for dur in _rhythm(rng, bar_len, eighth, (2, 2, 3, 4, 6)):
            if rng.random() < 0.1:
                t += dur
                continue
            size = int(rng.integers(1, 4))
            pitches = [root + s for s in (0, 7, 12, 16)[:size]]
            if rng.random() < 0.25:
                pitches = [p + 12 for p in pitches]
            pitches = [p for p in pitches if p not in melody_at.get(t, ())]
            if pitches:
                emit(pitches, t, dur, 1, 2)
            t += dur

    piece = make_piece(rows, [ts], resolution, end=n_bars * bar_len)
    # make_piece reorders notes; carry labels along
    order = sorted(range(len(rows)), key=lambda i: (rows[i][1], rows[i][0], i))
    return AnnotatedPiece(piece, tuple(staff[i] for i in order), tuple(voice[i] for i in order),
                          tuple(chord[i] for i in order))


def generate_corpus(n_pieces: int, seed: int = 0, **kwargs) -> list[AnnotatedPiece]:
    rng = np.random.default_rng(seed)
    return [generate_piece(rng, **kwargs) for _ in range(n_pieces)]
