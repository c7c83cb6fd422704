from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional

from ..core import Piece
from ..graph import OutputGraph
from .rhythm import Value
from .streams import Event, Layer, layout

MEI_NS = "http://www.music-encoding.org/ns/mei"
XML_ID = "{http://www.w3.org/XML/1998/namespace}id"
PNAMES = ("c", "c", "d", "d", "e", "f", "f", "g", "g", "a", "a", "b")
SHARP = {1, 3, 6, 8, 10}
CLEFS = {1: ("G", "2"), 2: ("F", "4")}

ET.register_namespace("", MEI_NS)


def _q(tag: str) -> str:
    return f"{{{MEI_NS}}}{tag}"


def _sub(parent, tag, **attrs):
    return ET.SubElement(parent, _q(tag), {k.replace("_", "."): str(v) for k, v in attrs.items()})


def _duration_attrs(value: Value) -> dict:
    attrs = {"dur": value.dur}
    if value.dots:
        attrs["dots"] = str(value.dots)
    return attrs


def _note(parent, piece: Piece, graph: OutputGraph, note_id: int, staff_n: int, event: Event,
          part: int, with_dur: bool):
    n = piece.notes[note_id]
    attrs = {"pname": PNAMES[n.pitch % 12], "oct": str(n.pitch // 12 - 1)}
    if n.pitch % 12 in SHARP:
        attrs["accid"] = "s"
    if with_dur:
        attrs.update(_duration_attrs(event.value))
    own_staff = graph.staff[note_id] + 1
    if own_staff != staff_n:
        attrs["staff"] = str(own_staff)
    if note_id in event.ties:
        attrs["tie"] = event.ties[note_id]
    el = ET.SubElement(parent, _q("note"), attrs)
    el.set(XML_ID, f"n{note_id}" if part == 0 else f"n{note_id}-{part}")
    return el


def _layer(staff_el, piece: Piece, graph: OutputGraph, layer: Layer, staff_n: int, counter: dict):
    layer_el = _sub(staff_el, "layer", n=layer.n)
    beam_of = {}
    for g in layer.beams:
        for i in g:
            beam_of[i] = g
    current_beam = None
    for i, ev in enumerate(layer.events):
        parent = layer_el
        if i in beam_of:
            if beam_of[i][0] == i:
                current_beam = _sub(layer_el, "beam")
            parent = current_beam
        if ev.is_rest:
            if ev.value is None:
                _sub(parent, "mRest")
            else:
                ET.SubElement(parent, _q("rest"), _duration_attrs(ev.value))
            continue
        notes = sorted(ev.notes, key=lambda k: piece.notes[k].pitch)
        part = counter.get(tuple(notes), 0)
        counter[tuple(notes)] = part + 1
        if len(notes) == 1:
            _note(parent, piece, graph, notes[0], staff_n, ev, part, True)
        else:
            chord = ET.SubElement(parent, _q("chord"), _duration_attrs(ev.value))
            for k in notes:
                _note(chord, piece, graph, k, staff_n, ev, part, False)


def export_mei(piece: Piece, graph: OutputGraph, title: Optional[str] = None) -> str:
    """Two-staff MEI score: one layer per voice stream, rests filled in, ties and beams."""
    mei = ET.Element(_q("mei"), {"meiversion": "5.0"})
    head = _sub(mei, "meiHead")
    title_stmt = _sub(_sub(head, "fileDesc"), "titleStmt")
    _sub(title_stmt, "title").text = title or "Untitled"
    score = _sub(_sub(_sub(_sub(mei, "music"), "body"), "mdiv"), "score")

    first = piece.time_signatures[0]
    score_def = _sub(score, "scoreDef", meter_count=first.numerator, meter_unit=first.denominator)
    grp = _sub(score_def, "staffGrp", symbol="brace", bar_thru="true")
    for n, (shape, line) in CLEFS.items():
        _sub(grp, "staffDef", n=n, lines=5, clef_shape=shape, clef_line=line)
    section = _sub(score, "section")

    current = first
    counter: dict = {}
    for m in layout(piece, graph):
        bar = piece.bars[m.bar]
        ts = bar.time_signature
        if ts != current:
            _sub(section, "scoreDef", meter_count=ts.numerator, meter_unit=ts.denominator)
            current = ts
        attrs = {"n": m.bar + 1}
        if bar.duration != ts.bar_ticks(piece.resolution):
            attrs["metcon"] = "false"
        measure = _sub(section, "measure", **attrs)
        for staff_label in (0, 1):
            staff_el = _sub(measure, "staff", n=staff_label + 1)
            for layer in m.staves[staff_label]:
                _layer(staff_el, piece, graph, layer, staff_label + 1, counter)
    ET.indent(mei, space="  ")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(mei, encoding="unicode") + "\n"


def check_mei_structure(text: str) -> list[str]:
    """Element-level nesting check: measure > staff > layer > events."""
    problems = []
    root = ET.fromstring(text)
    if root.tag != _q("mei"):
        problems.append("root element is not mei")
    events = {_q(t) for t in ("note", "chord", "rest", "mRest", "beam")}
    for measure in root.iter(_q("measure")):
        staves = [c for c in measure if c.tag == _q("staff")]
        if [s.get("n") for s in staves] != ["1", "2"]:
            problems.append(f"measure {measure.get('n')}: expected staves 1 and 2")
        for staff in staves:
            layers = [c for c in staff if c.tag == _q("layer")]
            if not layers or len(layers) != len(staff):
                problems.append(f"measure {measure.get('n')}: staff without layers or stray children")
            for layer in layers:
                for child in layer:
                    if child.tag not in events:
                        problems.append(f"measure {measure.get('n')}: unexpected {child.tag}")
    return problems
