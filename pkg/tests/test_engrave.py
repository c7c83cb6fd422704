import json
import xml.etree.ElementTree as ET
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pianosep.core import AnnotatedPiece, Bar, TimeSignature, make_piece
from pianosep.engrave import (EngraveError, beam_groups, beat_grid, check_mei_structure,
                              decompose_rest, derive_voice_streams, displayable_values,
                              export_mei, export_viz, fewest_values, infill_rests, layout,
                              rest_allowed, split_ties, to_annotated, viz_document)
from pianosep.engrave.mei import MEI_NS
from pianosep.graph import OutputGraph, build_input_graph, candidates, truth_output_graph
from pianosep.synth import generate_corpus

from conftest import scale_piece

R = 480
NS = {"m": MEI_NS}


def bar44(start=0):
    return Bar(0, start, start + 4 * R, TimeSignature(4, 4))


# streams

def test_single_chain_one_stream():
    ann = scale_piece()
    streams = derive_voice_streams(ann.piece, truth_output_graph(ann))
    assert len(streams) == 1 and streams[0].layer == 1 and len(streams[0].chords) == 8


def test_two_chains_ordered_by_mean_pitch():
    piece = make_piece([(72, 0, 960), (60, 0, 480), (72, 960, 960), (60, 480, 480)])
    # ids: 0=(60,0) 1=(72,0) 2=(60,480) 3=(72,960)
    graph = OutputGraph.build([0] * 4, [(0, 2), (1, 3)], [])
    streams = derive_voice_streams(piece, graph)
    layers = {tuple(s.chords[0]): s.layer for s in streams}
    assert layers == {(1,): 1, (0,): 2}


def test_chord_only_bar():
    piece = make_piece([(60, 0, 480), (64, 0, 480), (67, 0, 480)])
    graph = OutputGraph.build([0] * 3, [], [(0, 1), (0, 2), (1, 2)])
    streams = derive_voice_streams(piece, graph)
    assert len(streams) == 1 and streams[0].chords == [[0, 1, 2]]


def test_invalid_graph_rejected():
    piece = make_piece([(60, 0, 480), (62, 480, 480), (64, 480, 240)])
    graph = OutputGraph.build([0] * 3, [(0, 1), (0, 2)], [])
    with pytest.raises(EngraveError) as exc:
        derive_voice_streams(piece, graph)
    assert exc.value.code == "invalid-graph"


def test_to_annotated_round_trip(synth_corpus):
    for ann in synth_corpus:
        truth = truth_output_graph(ann)
        back = to_annotated(ann.piece, truth)
        assert truth_output_graph(back) == truth


# meter, beams

def test_beat_grids():
    assert beat_grid(TimeSignature(12, 8), R) == [0, 720, 1440, 2160, 2880]
    assert beat_grid(TimeSignature(4, 4), R) == [0, 480, 960, 1440, 1920]
    assert beat_grid(TimeSignature(6, 8), R) == [0, 720, 1440]
    assert beat_grid(TimeSignature(9, 8), R) == [0, 720, 1440, 2160]
    assert beat_grid(TimeSignature(3, 8), R) == [0, 240, 480, 720]


def test_beams_split_at_beats():
    items = [(t, 240, True) for t in (0, 240, 480, 720)]
    assert beam_groups(items, beat_grid(TimeSignature(4, 4), R), R) == [[0, 1], [2, 3]]


def test_beams_broken_by_quarter():
    items = [(0, 240, True), (240, 480, True), (720, 240, True)]
    assert beam_groups(items, beat_grid(TimeSignature(4, 4), R), R) == []


def test_beams_compound():
    items = [(240 * k, 240, True) for k in range(6)]
    assert beam_groups(items, beat_grid(TimeSignature(6, 8), R), R) == [[0, 1, 2], [3, 4, 5]]


def test_beams_skip_tied_and_gaps():
    grid = beat_grid(TimeSignature(4, 4), R)
    assert beam_groups([(0, 120, True), (240, 120, True)], grid, R) == []
    assert beam_groups([(0, 240, False), (240, 240, True)], grid, R) == []


# rests

def test_rest_empty_stream():
    rests = infill_rests([], bar44(), R)
    assert len(rests) == 1 and rests[0].measure_rest and rests[0].ticks == 4 * R


def test_rest_first_beat():
    rests = infill_rests([(R, 4 * R)], bar44(), R)
    assert [(r.onset, r.value.dur) for r in rests] == [(0, "4")]


def test_rest_dotted_half_gap_splits():
    rests = infill_rests([(0, R)], bar44(), R)
    assert len(rests) == 2
    assert sorted(r.ticks for r in rests) == [R, 2 * R]
    assert sum(r.ticks for r in rests) == 3 * R


def test_rest_unrepresentable():
    with pytest.raises(EngraveError) as exc:
        infill_rests([(0, 7)], bar44(), R)
    assert exc.value.code == "unrepresentable-duration"


@lru_cache(maxsize=None)
def _min_rests(pos, end, origin, beat):
    """Exhaustive minimum over every allowed rest sequence."""
    if pos == end:
        return 0
    best = None
    for v in displayable_values(R):
        if pos + v.ticks <= end and rest_allowed(pos, v, origin, beat):
            sub = _min_rests(pos + v.ticks, end, origin, beat)
            if sub is not None and (best is None or sub + 1 < best):
                best = sub + 1
    return best


@pytest.mark.parametrize("ts", [TimeSignature(4, 4), TimeSignature(3, 4), TimeSignature(6, 8),
                                TimeSignature(12, 8), TimeSignature(2, 2), TimeSignature(5, 4)])
def test_greedy_rests_are_minimal(ts):
    bar = Bar(0, 0, ts.bar_ticks(R), ts)
    beat = beat_grid(ts, R)[1]
    unit = 60
    for a in range(0, bar.end, unit):
        for b in range(a + unit, bar.end + 1, unit):
            got = decompose_rest(a, b, bar, R)
            assert sum(v.ticks for _, v in got) == b - a
            assert len(got) == _min_rests(a, b, 0, beat)


def test_pickup_bar_rests_follow_nominal_grid():
    ts = TimeSignature(4, 4)
    pickup = Bar(0, 0, R, ts, pickup_shift=3 * R)
    rests = decompose_rest(0, R, pickup, R)
    assert [(t, v.dur) for t, v in rests] == [(0, "4")]


# ties

def test_ties_half_note():
    parts = split_ties(0, 2 * R, [bar44()], R)
    assert len(parts) == 1 and parts[0].tie is None and parts[0].value.dur == "2"


def test_ties_across_barline():
    bars = [bar44(0), Bar(1, 4 * R, 8 * R, TimeSignature(4, 4))]
    parts = split_ties(3 * R, 2 * R, bars, R)
    assert [(p.onset, p.value.dur, p.tie, p.bar_index) for p in parts] == \
        [(3 * R, "4", "i", 0), (4 * R, "4", "t", 1)]


def test_ties_five_eighths():
    parts = fewest_values(5 * R // 2, R)
    assert len(parts) == 2
    assert parts[0].ticks >= parts[1].ticks
    assert sum(p.ticks for p in parts) == 5 * R // 2


@given(st.integers(1, 64), st.integers(0, 15))
@settings(max_examples=200, deadline=None)
def test_ties_conserve_duration(units, start):
    bars = [Bar(k, 4 * R * k, 4 * R * (k + 1), TimeSignature(4, 4)) for k in range(8)]
    parts = split_ties(start * 120, units * 60, bars, R)
    assert sum(p.value.ticks for p in parts) == units * 60
    if len(parts) > 1:
        assert [p.tie for p in parts] == ["i"] + ["m"] * (len(parts) - 2) + ["t"]


# MEI

DOTS = {0: 1.0, 1: 1.5}


def _ticks(el):
    return int(4 * R / int(el.get("dur")) * DOTS[int(el.get("dots", 0))])


def layer_durations(text, piece):
    root = ET.fromstring(text)
    out = []
    for m in root.iter(f"{{{MEI_NS}}}measure"):
        bar = piece.bars[int(m.get("n")) - 1]
        for staff in m.findall("m:staff", NS):
            for layer in staff.findall("m:layer", NS):
                total = 0
                for el in layer.iter():
                    tag = el.tag.split("}")[1]
                    if tag in ("rest", "chord"):
                        total += _ticks(el)
                    elif tag == "note" and el.get("dur"):
                        total += _ticks(el)
                    elif tag == "mRest":
                        total += bar.duration
                out.append((bar.index, staff.get("n"), layer.get("n"), total, bar.duration))
    return out


def test_mei_scale():
    ann = scale_piece()
    text = export_mei(ann.piece, truth_output_graph(ann))
    root = ET.fromstring(text)
    layers = root.findall(".//m:measure/m:staff[@n='1']/m:layer", NS)
    assert len(layers) == 1
    assert len(layers[0].findall(".//m:note", NS)) == 8
    beams = layers[0].findall("m:beam", NS)
    assert [len(b) for b in beams] == [2, 2, 2, 2]
    assert check_mei_structure(text) == []
    lower = root.findall(".//m:measure/m:staff[@n='2']/m:layer/m:mRest", NS)
    assert len(lower) == 1


def test_mei_empty_piece():
    text = export_mei(make_piece([]), OutputGraph.build([], [], []))
    root = ET.fromstring(text)
    assert root.findall(".//m:measure", NS) == []
    assert len(root.findall(".//m:staffDef", NS)) == 2


def test_mei_cross_staff():
    # a chord stream that starts on the upper staff and dips to the lower one
    piece = make_piece([(67, 0, 960), (55, 960, 960)])
    graph = OutputGraph.build([0, 1], [(0, 1)], [])
    text = export_mei(piece, graph)
    root = ET.fromstring(text)
    upper = root.find(".//m:staff[@n='1']/m:layer", NS)
    notes = upper.findall(".//m:note", NS)
    assert [n.get("staff") for n in notes] == [None, "2"]
    assert root.find(".//m:staff[@n='2']/m:layer/m:mRest", NS) is not None


def test_mei_ties_across_barline():
    piece = make_piece([(60, 3 * R, 2 * R)], end=8 * R)
    graph = OutputGraph.build([0], [], [])
    root = ET.fromstring(export_mei(piece, graph))
    notes = root.findall(".//m:staff[@n='1']//m:note", NS)
    assert [n.get("tie") for n in notes] == ["i", "t"]


def test_mei_deterministic_and_complete(synth_corpus):
    for ann in synth_corpus:
        graph = truth_output_graph(ann)
        text = export_mei(ann.piece, graph)
        assert text == export_mei(ann.piece, graph)
        assert check_mei_structure(text) == []
        for bar, staff, layer, total, expected in layer_durations(text, ann.piece):
            assert total == expected, (bar, staff, layer)


def test_layout_beams_legal(synth_corpus):
    for ann in synth_corpus:
        for m in layout(ann.piece, truth_output_graph(ann)):
            bar = ann.piece.bars[m.bar]
            grid = beat_grid(bar.time_signature, R)
            for layers in m.staves.values():
                for layer in layers:
                    for group in layer.beams:
                        beats = {np.searchsorted(grid, layer.events[i].onset - bar.start, "right")
                                 for i in group}
                        assert len(beats) == 1
                        assert all(layer.events[i].ticks < R for i in group)
                        assert group == list(range(group[0], group[-1] + 1))


def test_mei_meter_change_and_short_bar():
    piece = make_piece([(60, 0, 1920), (62, 1920, 1440), (64, 3360, 480)],
                       [TimeSignature(4, 4), TimeSignature(3, 4, 1920)])
    text = export_mei(piece, OutputGraph.build([0, 0, 0], [], []))
    root = ET.fromstring(text)
    assert len(root.findall(".//m:section/m:scoreDef", NS)) == 1
    assert root.findall(".//m:measure", NS)[-1].get("metcon") == "false"
    for _, _, _, total, expected in layer_durations(text, piece):
        assert total == expected


def test_structure_checker_flags_problems():
    bad = f'<mei xmlns="{MEI_NS}"><measure n="1"><staff n="1"><note/></staff></measure></mei>'
    assert check_mei_structure(bad)


# visualization

def test_viz_two_notes():
    piece = make_piece([(60, 0, 480), (62, 480, 480)])
    graph = OutputGraph.build([0, 0], [(0, 1)], [])
    doc = json.loads(export_viz(piece, build_input_graph(piece), graph, candidates(piece)))
    assert len(doc["notes"]) == 2
    assert doc["predicted"]["voice"]["edges"] == [[0, 1]]
    assert doc["predicted"]["voice"]["color"] == "red"
    assert doc["predicted"]["chord"]["color"] == "blue"
    assert doc["candidates"]["voice"] == [[0, 1]]
    assert set(doc["notes"][0]) >= {"pitch", "onset", "duration", "bar", "staff"}


def test_viz_counts_match(synth_corpus):
    ann = synth_corpus[0]
    piece, graph = ann.piece, truth_output_graph(ann)
    ig, cands = build_input_graph(piece), candidates(piece)
    doc = viz_document(piece, ig, graph, cands)
    assert len(doc["predicted"]["voice"]["edges"]) == len(graph.voice_edges)
    assert len(doc["predicted"]["chord"]["edges"]) == len(graph.chord_edges)
    assert len(doc["candidates"]["voice"]) == len(cands.voice)
    assert sum(len(v) for v in doc["input_edges"].values()) == len(ig.triples())
    assert export_viz(piece, ig, graph, cands) == export_viz(piece, ig, graph, cands)
