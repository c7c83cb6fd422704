import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pianosep.core import AnnotatedPiece, TimeSignature, make_piece
from pianosep.graph import (RELATIONS, GraphError, OutputGraph, build_input_graph, candidates,
                            check_output_graph, chord_candidates, node_features,
                            truth_output_graph, voice_candidates)

from conftest import random_piece


def oracle_triples(piece):
    """All-pairs application of the four relation predicates."""
    notes = piece.notes
    out = set()
    for u, v in itertools.permutations(notes, 2):
        if u.onset == v.onset:
            out.add((u.id, "onset", v.id))
        if u.onset < v.onset < u.offset:
            out.add((u.id, "during", v.id))
            out.add((v.id, "during_inv", u.id))
        if u.offset == v.onset:
            out.add((u.id, "follow", v.id))
            out.add((v.id, "follow_inv", u.id))
        if u.offset < v.onset:
            gap_free = not any(w.onset < v.onset and w.offset > u.offset for w in notes)
            latest = max(w.offset for w in notes if w.offset <= v.onset)
            if gap_free and u.offset == latest:
                out.add((u.id, "silence", v.id))
                out.add((v.id, "silence_inv", u.id))
    return out


@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
@settings(max_examples=60, deadline=None)
def test_input_graph_matches_oracle(seed, n):
    piece = random_piece(np.random.default_rng(seed), n, grid=240, span_bars=6)
    graph = build_input_graph(piece)
    assert set(graph.triples()) == oracle_triples(piece)
    assert len(graph.triples()) == len(set(graph.triples()))


def test_input_graph_matches_oracle_200_notes():
    rng = np.random.default_rng(99)
    for _ in range(3):
        piece = random_piece(rng, 200, grid=120, span_bars=30)
        assert set(build_input_graph(piece).triples()) == oracle_triples(piece)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_input_graph_invariants(seed):
    piece = random_piece(np.random.default_rng(seed), 30)
    triples = set(build_input_graph(piece).triples())
    for s, rel, d in triples:
        assert s != d
        if rel == "onset":
            assert (d, "onset", s) in triples
        elif not rel.endswith("_inv"):
            assert (d, rel + "_inv", s) in triples
    # at most one forward relation per ordered pair with onset(u) <= onset(v)
    forward = {}
    for s, rel, d in triples:
        if rel in ("onset", "during", "follow", "silence") and \
                piece.notes[s].onset <= piece.notes[d].onset:
            forward.setdefault((s, d), []).append(rel)
    assert all(len(v) == 1 for v in forward.values())


def test_two_synchronous_notes():
    g = build_input_graph(make_piece([(60, 0, 480), (64, 0, 480)]))
    assert g.triples() == [(0, "onset", 1), (1, "onset", 0)]


def test_follow_pair():
    g = build_input_graph(make_piece([(60, 0, 480), (62, 480, 480)]))
    assert g.triples() == [(0, "follow", 1), (1, "follow_inv", 0)]


def test_silence_pair():
    g = build_input_graph(make_piece([(60, 0, 480), (62, 960, 480)]))
    assert g.triples() == [(0, "silence", 1), (1, "silence_inv", 0)]


def test_empty_piece_rejected():
    with pytest.raises(GraphError):
        build_input_graph(make_piece([]))


def test_grace_notes_rejected():
    with pytest.raises(GraphError):
        build_input_graph(make_piece([(60, 0, 0, True), (62, 0, 480)]))


def test_features_middle_c_quarter():
    x = node_features(make_piece([(60, 0, 480)], end=1920))
    assert x.shape == (1, 20)
    assert x[0, 0] == 1 and x[0, :12].sum() == 1
    assert x[0, 12 + 4 - 1] == 1 and x[0, 12:19].sum() == 1
    assert x[0, 19] == pytest.approx(0.244919, abs=1e-6)
    assert x[0, 19] == math.tanh(0.25)


def test_features_octave_clamp_and_whole_note():
    x = node_features(make_piece([(21, 0, 1920), (127, 0, 480)]))
    assert x[0, 12] == 1          # A0 clamps to octave 1
    assert x[1, 18] == 1          # G9 clamps to octave 7
    assert x[0, 19] == pytest.approx(0.761594, abs=1e-6)


def test_features_use_containing_bar():
    piece = make_piece([(60, 1920, 480)], [TimeSignature(4, 4), TimeSignature(2, 4, 1920)], end=2880)
    assert node_features(piece)[0, 19] == pytest.approx(math.tanh(0.5))


def test_chord_candidates_examples():
    piece = make_piece([(60, 0, 480), (64, 0, 480), (67, 0, 480), (72, 0, 480)])
    assert len(chord_candidates(piece)) == 6
    assert len(chord_candidates(make_piece([(60, 0, 480), (64, 0, 960)]))) == 0
    assert chord_candidates(make_piece([])).shape == (0, 2)


def test_voice_candidates_examples():
    piece = make_piece([(60, 0, 480), (62, 480, 480), (64, 480, 480)])
    assert voice_candidates(piece).tolist() == [[0, 1], [0, 2]]
    piece = make_piece([(60, 1440, 480), (62, 1920, 480)])
    assert voice_candidates(piece).tolist() == []
    piece = make_piece([(60, 0, 960), (62, 480, 960)])
    assert voice_candidates(piece).tolist() == []


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_candidate_predicates(seed):
    piece = random_piece(np.random.default_rng(seed), 40)
    c = candidates(piece)
    expected_chord = {(u.id, v.id) for u, v in itertools.combinations(piece.notes, 2)
                      if u.onset == v.onset and u.offset == v.offset}
    expected_voice = {(u.id, v.id) for u, v in itertools.permutations(piece.notes, 2)
                      if u.bar_index == v.bar_index and u.offset <= v.onset}
    assert {tuple(e) for e in c.chord.tolist()} == expected_chord
    assert {tuple(e) for e in c.voice.tolist()} == expected_voice


def _ann(notes, staff, voice, chord):
    return AnnotatedPiece(make_piece(notes), tuple(staff), tuple(voice), tuple(chord))


def test_truth_chord_sizes_two_then_three():
    ann = _ann([(60, 0, 480), (64, 0, 480), (62, 480, 480), (65, 480, 480), (69, 480, 480)],
               [0] * 5, [1] * 5, [0, 0, 1, 1, 1])
    g = truth_output_graph(ann)
    assert len(g.voice_edges) == 6
    assert len(g.chord_edges) == 1 + 3


def test_truth_single_four_note_chord():
    ann = _ann([(60, 0, 480), (64, 0, 480), (67, 0, 480), (72, 0, 480)], [0] * 4, [1] * 4, [0] * 4)
    g = truth_output_graph(ann)
    assert len(g.directed_chord_edges) == 12 and g.voice_edges == ()


def test_truth_monophonic_path():
    ann = _ann([(60 + k, 480 * k, 480) for k in range(4)], [0] * 4, [1] * 4, range(4))
    assert truth_output_graph(ann).voice_edges == ((0, 1), (1, 2), (2, 3))


def test_truth_no_edges_across_bars():
    ann = _ann([(60, 1440, 480), (62, 1920, 480)], [0, 0], [1, 1], [0, 1])
    assert truth_output_graph(ann).voice_edges == ()


def test_truth_rejects_invalid():
    ann = _ann([(60, 0, 480), (62, 240, 480)], [0, 0], [1, 1], [0, 1])
    with pytest.raises(GraphError):
        truth_output_graph(ann)


def test_candidate_completeness_on_synth(synth_corpus):
    for ann in synth_corpus:
        g = truth_output_graph(ann)
        c = candidates(ann.piece)
        assert set(g.voice_edges) <= {tuple(e) for e in c.voice.tolist()}
        assert set(g.chord_edges) <= {tuple(e) for e in c.chord.tolist()}
        assert check_output_graph(ann.piece, g) == []


def test_check_output_graph_detects_problems():
    piece = make_piece([(60, 0, 480), (64, 0, 480), (62, 480, 480), (67, 480, 480), (70, 0, 240)])
    # notes: 0:(60,0) 1:(64,0) 2:(70,0,240) 3:(62,480) 4:(67,480)
    split = OutputGraph.build([0] * 5, [(0, 3), (0, 4)], [])
    assert {v.kind for v in check_output_graph(piece, split)} == {"voice-split"}
    merge = OutputGraph.build([0] * 5, [(0, 3), (1, 3)], [])
    assert {v.kind for v in check_output_graph(piece, merge)} == {"voice-merge"}
    disagree = OutputGraph.build([0] * 5, [(0, 3)], [(0, 1)])
    assert {v.kind for v in check_output_graph(piece, disagree)} == {"chord-mates-disagree"}
    async_chord = OutputGraph.build([0] * 5, [], [(0, 2)])
    assert {v.kind for v in check_output_graph(piece, async_chord)} == {"chord-not-synchronous"}
    not_clique = OutputGraph.build([0] * 5, [], [(0, 1), (1, 2)])
    assert "chord-not-clique" in {v.kind for v in check_output_graph(piece, not_clique)}
    overlap = OutputGraph.build([0] * 5, [(0, 1)], [])
    assert {v.kind for v in check_output_graph(piece, overlap)} == {"voice-not-candidate"}
    assert check_output_graph(piece, OutputGraph.build([0, 2, 0, 0, 0], [], []))[0].kind == "bad-staff"
    assert check_output_graph(piece, OutputGraph.build([0], [], []))[0].kind == "size-mismatch"


def test_permuted_graph_relabels():
    piece = random_piece(np.random.default_rng(3), 12)
    g = build_input_graph(piece)
    perm = np.random.default_rng(4).permutation(12)
    pg = g.permuted(perm)
    assert np.array_equal(pg.features[perm], g.features)
    for rel in RELATIONS:
        assert {tuple(e) for e in pg.edges[rel].T.tolist()} == \
            {(int(perm[s]), int(perm[d])) for s, d in g.edges[rel].T}
