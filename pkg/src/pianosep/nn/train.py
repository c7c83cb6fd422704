from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import AnnotatedPiece, Piece, drop_grace_annotated, drop_grace_notes
from ..graph import CandidateSet, InputGraph, OutputGraph, build_input_graph, candidates, \
    truth_output_graph
from ..metrics import EvalReport, evaluate_corpus
from ..postprocess import PostprocessConfig, postprocess
from .model import ModelConfig, ParamStore, Targets, loss_and_grad, predict
from .optim import AdamState, NonFiniteError, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    weight_decay: float = 5e-4
    seed: int = 0


@dataclass
class Example:
    piece: Piece
    graph: InputGraph
    cands: CandidateSet
    truth: OutputGraph
    targets: Targets

    @classmethod
    def from_annotated(cls, annotated: AnnotatedPiece) -> "Example":
        annotated, _ = drop_grace_annotated(annotated)
        piece = annotated.piece
        cands = candidates(piece)
        truth = truth_output_graph(annotated)
        return cls(piece, build_input_graph(piece), cands, truth, Targets.from_truth(truth, cands))


@dataclass
class EpochRecord:
    epoch: int
    staff_loss: float
    voice_loss: float
    chord_loss: float
    validation: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass
class History:
    epochs: list[EpochRecord] = field(default_factory=list)

    def to_log(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.epochs)


def infer(piece: Piece, params: ParamStore, post: Optional[PostprocessConfig] = None
          ) -> OutputGraph:
    """Full prediction for a piece: grace notes must already be removed."""
    if not piece.notes:
        return OutputGraph.build([], [], [])
    cands = candidates(piece)
    probs = predict(build_input_graph(piece), cands, params)
    post = post or PostprocessConfig(chord_threshold=params.config.chord_threshold)
    return postprocess(piece, probs, cands, post)


def evaluate_model(examples: Sequence[Example], params: ParamStore) -> EvalReport:
    return evaluate_corpus((ex.truth, infer(ex.piece, params), ex.piece) for ex in examples)


def train(corpus: Sequence[AnnotatedPiece], config: ModelConfig,
          train_config: TrainConfig = TrainConfig(),
          validation: Sequence[AnnotatedPiece] = (),
          params: Optional[ParamStore] = None) -> tuple[ParamStore, History]:
    """Joint training of all three heads, one piece per optimizer step.

    Deterministic given the seeds: initialisation uses ``config.seed``, the
    per-epoch piece order and dropout use ``train_config.seed``.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    examples = [Example.from_annotated(a) for a in corpus]
    examples = [ex for ex in examples if ex.piece.notes]
    if not examples:
        raise ValueError("training corpus has no notes")
    val_examples = [ex for ex in (Example.from_annotated(a) for a in validation) if ex.piece.notes]

    params = params.copy() if params is not None else ParamStore.init(config)
    rng = np.random.default_rng(train_config.seed)
    state = AdamState()
    history = History()
    for epoch in range(train_config.epochs):
        sums = {"staff": 0.0, "voice": 0.0, "chord": 0.0}
        for idx in rng.permutation(len(examples)):
            ex = examples[idx]
            total, parts, grads = loss_and_grad(params, ex.graph, ex.cands, ex.targets,
                                                rng if config.dropout > 0 else None)
            if not np.isfinite(total):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, piece {idx}: {parts}")
            adam_step(params, grads, state, train_config.lr, train_config.weight_decay)
            for k, v in parts.items():
                sums[k] += v
        record = EpochRecord(epoch, *(sums[k] / len(examples) for k in ("staff", "voice", "chord")))
        if val_examples:
            rep = evaluate_model(val_examples, params)
            record.validation = {"voice_f1": rep.voice_f1, "chord_f1": rep.chord_f1,
                                 "staff_accuracy": rep.staff_accuracy}
        history.epochs.append(record)
        log.info("epoch %d %s", epoch, record.to_json())
    return params, history
