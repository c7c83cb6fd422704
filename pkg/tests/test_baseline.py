import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pianosep.baseline import baseline_predict
from pianosep.core import make_piece
from pianosep.graph import GraphError, check_output_graph

from conftest import random_piece


def test_split_at_middle_c():
    g = baseline_predict(make_piece([(59, 0, 480), (60, 480, 480)]))
    assert g.staff == (1, 0)


def test_synchronous_chord_per_staff():
    g = baseline_predict(make_piece([(60, 0, 480), (64, 0, 480), (48, 0, 480)]))
    # notes sorted by pitch within the onset: 48, 60, 64
    assert g.chord_edges == ((1, 2),)
    assert len(g.directed_chord_edges) == 2


def test_chain_of_beats():
    piece = make_piece([(60, 0, 480), (64, 0, 480), (62, 480, 480), (65, 480, 480),
                        (64, 960, 480), (67, 960, 480)])
    g = baseline_predict(piece)
    assert len(g.voice_edges) == 8   # 2x2 between beats 1-2 and 2-3, nothing skips a beat
    assert all(piece.notes[v].onset - piece.notes[u].offset == 0 for u, v in g.voice_edges)


def test_empty_piece_rejected():
    with pytest.raises(GraphError):
        baseline_predict(make_piece([]))


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
@settings(max_examples=80, deadline=None)
def test_baseline_valid_and_deterministic(seed, n):
    piece = random_piece(np.random.default_rng(seed), n)
    g = baseline_predict(piece)
    assert check_output_graph(piece, g) == []
    assert baseline_predict(piece) == g
    assert g.staff == tuple(int(x.pitch < 60) for x in piece.notes)
    for u, v in g.voice_edges:
        assert g.staff[u] == g.staff[v]


def test_baseline_weights_change_links():
    # one upper-staff voice: a high and a low line; pitch weight keeps lines apart
    piece = make_piece([(84, 0, 480), (62, 0, 240), (83, 480, 480), (64, 480, 240)])
    by_pitch = baseline_predict(piece, alpha=0.0, beta=1.0)
    pitch = {n.id: n.pitch for n in piece.notes}
    linked = {(pitch[u], pitch[v]) for u, v in by_pitch.voice_edges}
    assert linked == {(84, 83), (62, 64)}
