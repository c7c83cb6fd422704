"""Evaluation of predicted output graphs against ground truth."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from .core import Piece
from .graph import OutputGraph, _components


class MetricError(ValueError):
    pass


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _chord_sizes(graph: OutputGraph) -> list[int]:
    size = [1] * len(graph.staff)
    for comp in graph.chord_components():
        for i in comp:
            size[i] = len(comp)
    return size


def _in_domain(piece: Piece, i: int, j: int) -> bool:
    a, b = piece.notes[i], piece.notes[j]
    return a.bar_index == b.bar_index and a.offset <= b.onset


@dataclass
class VoiceCounts:
    """Weighted sums behind the homophonic voice precision/recall."""
    hit_pred: float = 0.0   # sum a*â/ŵ
    pred: float = 0.0       # sum â/ŵ
    hit_truth: float = 0.0  # sum a*â/w
    truth: float = 0.0      # sum a/w

    def __iadd__(self, other: "VoiceCounts"):
        self.hit_pred += other.hit_pred
        self.pred += other.pred
        self.hit_truth += other.hit_truth
        self.truth += other.truth
        return self

    def prf(self) -> tuple[float, float, float]:
        if self.pred == 0 and self.truth == 0:
            return 1.0, 1.0, 1.0
        p = self.hit_pred / self.pred if self.pred else 0.0
        r = self.hit_truth / self.truth if self.truth else 0.0
        return p, r, f1_score(p, r)


def voice_counts(truth: OutputGraph, pred: OutputGraph, piece: Piece,
                 bar: Optional[int] = None) -> VoiceCounts:
    n = len(piece.notes)
    if len(truth.staff) != n or len(pred.staff) != n:
        raise MetricError("graphs and piece disagree on the note count")
    w = _chord_sizes(truth)
    w_hat = _chord_sizes(pred)
    t_edges = {e for e in truth.voice_edges if _in_domain(piece, *e)}
    p_edges = {e for e in pred.voice_edges if _in_domain(piece, *e)}
    if bar is not None:
        t_edges = {e for e in t_edges if piece.notes[e[0]].bar_index == bar}
        p_edges = {e for e in p_edges if piece.notes[e[0]].bar_index == bar}
    c = VoiceCounts()
    for i, j in p_edges:
        c.pred += 1.0 / w_hat[i]
        if (i, j) in t_edges:
            c.hit_pred += 1.0 / w_hat[i]
    for i, j in t_edges:
        c.truth += 1.0 / w[i]
        if (i, j) in p_edges:
            c.hit_truth += 1.0 / w[i]
    return c


def voice_f1(truth: OutputGraph, pred: OutputGraph, piece: Piece) -> tuple[float, float, float]:
    """Homophonic voice precision, recall and F1.

    Pairs ``(i, j)`` count when both notes share a bar and
    ``offset(i) <= onset(j)``; each edge from note ``i`` is weighted by the
    inverse size of the chord holding ``i`` (truth chords for recall,
    predicted chords for precision).
    """
    return voice_counts(truth, pred, piece).prf()


@dataclass
class ChordCounts:
    tp: int = 0
    pred: int = 0
    truth: int = 0

    def __iadd__(self, other: "ChordCounts"):
        self.tp += other.tp
        self.pred += other.pred
        self.truth += other.truth
        return self

    def f1(self) -> float:
        if self.pred == 0 and self.truth == 0:
            return 1.0
        p = self.tp / self.pred if self.pred else 0.0
        r = self.tp / self.truth if self.truth else 0.0
        return f1_score(p, r)


def chord_counts(truth: OutputGraph, pred: OutputGraph) -> ChordCounts:
    t, p = set(truth.chord_edges), set(pred.chord_edges)
    return ChordCounts(len(t & p), len(p), len(t))


def chord_f1(truth: OutputGraph, pred: OutputGraph) -> float:
    """F1 over undirected chord pairs; 1.0 when neither side has chords."""
    return chord_counts(truth, pred).f1()


def staff_accuracy(truth: OutputGraph, pred: OutputGraph) -> float:
    if len(truth.staff) != len(pred.staff):
        raise MetricError("staff label lengths differ")
    if not truth.staff:
        return 1.0
    return sum(a == b for a, b in zip(truth.staff, pred.staff)) / len(truth.staff)


def bar_voice_count(truth: OutputGraph, piece: Piece, bar: int) -> int:
    """Weakly connected voice components among the bar's notes, chords collapsed."""
    ids = [n.id for n in piece.notes if n.bar_index == bar]
    if not ids:
        return 0
    local = {i: k for k, i in enumerate(ids)}
    edges = [(local[u], local[v]) for u, v in list(truth.voice_edges) + list(truth.chord_edges)
             if u in local and v in local]
    return len(_components(len(ids), edges))


def bar_voice_f1(truth: OutputGraph, pred: OutputGraph, piece: Piece, bar: int) -> float:
    c = voice_counts(truth, pred, piece, bar)
    if c.truth == 0:
        return 1.0 if c.pred == 0 else 0.0
    return c.prf()[2]


def per_bar_rows(truth: OutputGraph, pred: OutputGraph, piece: Piece) -> list[tuple[int, int, float]]:
    """``(bar_index, truth_voice_count, bar_voice_f1)`` for every non-empty bar."""
    bars = sorted({n.bar_index for n in piece.notes})
    return [(b, bar_voice_count(truth, piece, b), bar_voice_f1(truth, pred, piece, b)) for b in bars]


def per_voice_count_report(rows: Iterable[tuple[int, int, float]]) -> list[tuple[int, int, float]]:
    """Aggregate per-bar rows into ``(voices, bars, mean F1)``, sorted by voice count."""
    groups: dict[int, list[float]] = defaultdict(list)
    for _, voices, f1 in rows:
        groups[voices].append(f1)
    return [(v, len(fs), sum(fs) / len(fs)) for v, fs in sorted(groups.items())]


@dataclass
class EvalReport:
    voice_precision: float
    voice_recall: float
    voice_f1: float
    chord_f1: float
    staff_accuracy: float
    n_pieces: int = 1
    n_notes: int = 0
    per_bar: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["per_bar"] = [list(r) for r in self.per_bar]
        return json.dumps(d, indent=2)

    def voice_count_table(self) -> str:
        lines = ["voices\tbars\tvoice_f1"]
        for v, b, f in per_voice_count_report(self.per_bar):
            lines.append(f"{v}\t{b}\t{f:.4f}")
        return "\n".join(lines) + "\n"


def evaluate(truth: OutputGraph, pred: OutputGraph, piece: Piece) -> EvalReport:
    return evaluate_corpus([(truth, pred, piece)])


def evaluate_corpus(items: Iterable[tuple[OutputGraph, OutputGraph, Piece]]) -> EvalReport:
    """Micro-averaged metrics over pieces (weighted sums pooled before dividing)."""
    vc, cc = VoiceCounts(), ChordCounts()
    correct = total = pieces = 0
    rows = []
    for truth, pred, piece in items:
        vc += voice_counts(truth, pred, piece)
        cc += chord_counts(truth, pred)
        if len(truth.staff) != len(pred.staff):
            raise MetricError("staff label lengths differ")
        correct += sum(a == b for a, b in zip(truth.staff, pred.staff))
        total += len(truth.staff)
        pieces += 1
        rows.extend(per_bar_rows(truth, pred, piece))
    p, r, f = vc.prf()
    return EvalReport(p, r, f, cc.f1(), correct / total if total else 1.0, pieces, total, rows)
