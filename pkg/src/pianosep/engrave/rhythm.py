"""Beats, beams, rests and tied-note decompositions, all in integer ticks."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from ..core import Bar, TimeSignature

COMPOUND_NUMERATORS = (6, 9, 12)
# written value -> fraction of a whole note, as (numerator, denominator)
BASE_VALUES = (("1", 1, 1), ("2", 1, 2), ("4", 1, 4), ("8", 1, 8), ("16", 1, 16), ("32", 1, 32))


class EngraveError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class Value:
    """A displayable duration: MEI ``dur`` string plus dots."""
    ticks: int
    dur: str
    dots: int = 0


@lru_cache(maxsize=None)
def displayable_values(resolution: int) -> tuple[Value, ...]:
    """Plain and single-dotted values down to the 32nd, longest first.

    A dotted 32nd would need 64th-note granularity, so it is left out.
    """
    out = []
    whole = 4 * resolution
    for dur, num, den in BASE_VALUES:
        if (whole * num) % den:
            continue
        plain = whole * num // den
        out.append(Value(plain, dur, 0))
        if dur != "32" and (plain * 3) % 2 == 0:
            out.append(Value(plain * 3 // 2, dur, 1))
    return tuple(sorted(out, key=lambda v: -v.ticks))


def beat_structure(ts: TimeSignature, resolution: int) -> tuple[int, int]:
    """``(beat_ticks, beats_per_bar)``; 6/x, 9/x, 12/x count dotted beats."""
    unit = 4 * resolution // ts.denominator
    if ts.numerator in COMPOUND_NUMERATORS:
        return 3 * unit, ts.numerator // 3
    return unit, ts.numerator


def beat_grid(ts: TimeSignature, resolution: int) -> list[int]:
    """Beat boundaries of a full bar, relative to its downbeat (both ends included)."""
    beat, count = beat_structure(ts, resolution)
    return [k * beat for k in range(count + 1)]


def bar_beats(bar: Bar, resolution: int) -> list[int]:
    """Absolute beat boundaries inside ``bar`` (pickup bars are right-aligned)."""
    origin = bar.start - bar.pickup_shift
    pts = {origin + b for b in beat_grid(bar.time_signature, resolution)}
    pts = {p for p in pts if bar.start < p < bar.end}
    return sorted(pts | {bar.start, bar.end})


def _beat_index(grid: Sequence[int], t: int) -> int:
    return bisect.bisect_right(grid, t) - 1


def beam_groups(items: Sequence[tuple[int, int, bool]], grid: Sequence[int],
                resolution: int) -> list[list[int]]:
    """Group consecutive sub-quarter chords of one stream into beams.

    ``items`` are ``(onset, duration, single)`` per chord in stream order,
    where ``single`` is False for chords written as several tied values.
    A run breaks at a beat boundary, at a gap, or at any chord that is a
    quarter or longer; runs of one make no beam.
    """
    groups: list[list[int]] = []
    run: list[int] = []

    def flush():
        if len(run) > 1:
            groups.append(list(run))
        run.clear()

    for i, (onset, dur, single) in enumerate(items):
        beat = _beat_index(grid, onset)
        ok = single and dur < resolution and _beat_index(grid, onset + dur - 1) == beat
        if not ok:
            flush()
            continue
        if run:
            p_onset, p_dur, _ = items[run[-1]]
            if p_onset + p_dur != onset or _beat_index(grid, p_onset) != beat:
                flush()
        run.append(i)
    flush()
    return groups


def rest_allowed(pos: int, value: Value, origin: int, beat: int) -> bool:
    """Placement rule for a rest of ``value`` starting at ``pos``.

    ``origin`` is the nominal downbeat of the bar. A rest no longer than a
    beat must stay inside one beat and start on a multiple of its own length
    from the beat start. A longer rest must be a whole number of beats and
    start on a multiple of its own length from the downbeat.
    """
    rel = pos - origin
    if value.ticks <= beat:
        in_beat = rel % beat
        return in_beat + value.ticks <= beat and in_beat % value.ticks == 0
    return value.ticks % beat == 0 and rel % value.ticks == 0


def decompose_rest(start: int, end: int, bar: Bar, resolution: int) -> list[tuple[int, Value]]:
    """Greedy largest-first rest decomposition of ``[start, end)`` inside ``bar``."""
    beat, _ = beat_structure(bar.time_signature, resolution)
    origin = bar.start - bar.pickup_shift
    values = displayable_values(resolution)
    out = []
    pos = start
    while pos < end:
        for v in values:
            if pos + v.ticks <= end and rest_allowed(pos, v, origin, beat):
                out.append((pos, v))
                pos += v.ticks
                break
        else:
            raise EngraveError("unrepresentable-duration",
                               f"rest gap [{pos}, {end}) at resolution {resolution}")
    return out


@dataclass(frozen=True)
class Rest:
    onset: int
    ticks: int
    value: Optional[Value]  # None marks a whole-bar rest

    @property
    def measure_rest(self) -> bool:
        return self.value is None


def infill_rests(occupied: Sequence[tuple[int, int]], bar: Bar, resolution: int) -> list[Rest]:
    """Rests filling every gap of a stream so it spans the whole bar.

    ``occupied`` holds ``(onset, end)`` intervals already clipped to the bar.
    An empty stream gets a single whole-bar rest.
    """
    if not occupied:
        return [Rest(bar.start, bar.duration, None)]
    rests = []
    pos = bar.start
    for onset, end in sorted(occupied):
        if onset < pos:
            raise EngraveError("overlap", f"stream events overlap at tick {onset}")
        if onset > pos:
            rests.extend(Rest(t, v.ticks, v) for t, v in decompose_rest(pos, onset, bar, resolution))
        pos = end
    if pos < bar.end:
        rests.extend(Rest(t, v.ticks, v) for t, v in decompose_rest(pos, bar.end, bar, resolution))
    return rests


@lru_cache(maxsize=4096)
def fewest_values(ticks: int, resolution: int) -> tuple[Value, ...]:
    """Fewest displayable values summing to ``ticks``; ties put longer values first."""
    values = displayable_values(resolution)
    unit = values[-1].ticks
    if ticks <= 0 or ticks % unit:
        raise EngraveError("unrepresentable-duration", f"{ticks} ticks at resolution {resolution}")
    steps = ticks // unit
    inf = float("inf")
    best = [0] + [inf] * steps
    for s in range(1, steps + 1):
        for v in values:
            k = v.ticks // unit
            if v.ticks % unit == 0 and k <= s and best[s - k] + 1 < best[s]:
                best[s] = best[s - k] + 1
    if best[steps] == inf:
        raise EngraveError("unrepresentable-duration", f"{ticks} ticks at resolution {resolution}")
    out = []
    s = steps
    while s:
        for v in values:  # longest first: earliest component as long as possible
            k = v.ticks // unit
            if v.ticks % unit == 0 and k <= s and best[s - k] == best[s] - 1:
                out.append(v)
                s -= k
                break
    return tuple(out)


@dataclass(frozen=True)
class TiedPart:
    onset: int
    value: Value
    bar_index: int
    tie: Optional[str]  # MEI tie: "i", "m", "t" or None


def split_ties(onset: int, duration: int, bars: Sequence[Bar], resolution: int) -> list[TiedPart]:
    """Split a duration at barlines, then into fewest values per bar, tied in sequence."""
    if duration <= 0:
        raise EngraveError("unrepresentable-duration", "non-positive duration")
    starts = [b.start for b in bars]
    parts: list[tuple[int, Value, int]] = []
    t, end = onset, onset + duration
    while t < end:
        k = bisect.bisect_right(starts, t) - 1
        if k < 0 or t >= bars[k].end:
            raise EngraveError("outside-bars", f"tick {t} is outside the bar list")
        seg_end = min(end, bars[k].end)
        for v in fewest_values(seg_end - t, resolution):
            parts.append((t, v, k))
            t += v.ticks
    n = len(parts)
    out = []
    for i, (t, v, k) in enumerate(parts):
        tie = None if n == 1 else "i" if i == 0 else "t" if i == n - 1 else "m"
        out.append(TiedPart(t, v, k, tie))
    return out
