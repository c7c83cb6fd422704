"""Command-line entry point: predict, baseline, train, evaluate, graph, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baseline import baseline_predict
from .core import AnnotatedPiece, Piece, PieceError, drop_grace_annotated, drop_grace_notes
from .engrave import EngraveError, export_mei, export_viz, to_annotated
from .graph import GraphError, OutputGraph, RELATIONS, build_input_graph, candidates, \
    check_output_graph, truth_output_graph
from .ingest import FormatError, parse_annotated, parse_smf, write_annotated
from .metrics import MetricError, evaluate_corpus
from .nn import BlobError, ModelConfig, NonFiniteError, TrainConfig, load_params, save_params, \
    train
from .nn.train import infer
from .postprocess import PostprocessConfig
from .synth import generate_corpus

log = logging.getLogger("pianosep")

# exit codes
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_CONFIG = 5
EXIT_MODEL = 6
EXIT_GRAPH = 7
EXIT_EVAL = 8

MIDI_SUFFIXES = {".mid", ".midi", ".smf"}
ANNOTATED_SUFFIX = ".ann"


class CliError(Exception):
    def __init__(self, code: int, diagnostic: str, message: str):
        self.code = code
        self.diagnostic = diagnostic
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int = 0
    chord_threshold: float = 0.5
    voice_cutoff: float = 0.5
    staff_threshold: float = 0.5
    epochs: int = 100
    val_fraction: float = 0.0

    def check(self):
        for name in ("chord_threshold", "voice_cutoff", "staff_threshold"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise CliError(EXIT_CONFIG, "config", f"{name.replace('_', '-')} must be in (0, 1), got {v}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise CliError(EXIT_CONFIG, "config", f"val-fraction must be in [0, 1), got {self.val_fraction}")
        if self.epochs < 0:
            raise CliError(EXIT_CONFIG, "config", "epochs must be non-negative")


def _read_bytes(path: Path) -> bytes:
    if not path.is_file():
        raise CliError(EXIT_MISSING, "missing-file", f"no such file: {path}")
    return path.read_bytes()


def read_input(path: Path) -> Piece | AnnotatedPiece:
    data = _read_bytes(path)
    if path.suffix.lower() in MIDI_SUFFIXES:
        return parse_smf(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("schema", f"{path} is neither MIDI nor UTF-8 text") from None
    return parse_annotated(text)


def read_piece(path: Path) -> Piece:
    """Input piece with grace notes removed (they are not predicted)."""
    doc = read_input(path)
    piece = doc.piece if isinstance(doc, AnnotatedPiece) else doc
    if any(n.is_grace for n in piece.notes):
        log.warning("%s: dropping grace notes", path)
        piece, _ = drop_grace_notes(piece)
    return piece


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _emit(piece: Piece, graph: OutputGraph, out: Path, mei: bool, viz: bool):
    problems = check_output_graph(piece, graph)
    if problems:
        raise CliError(EXIT_GRAPH, "invalid-output", f"prediction fails validity: {problems[0].message}")
    if piece.notes:
        text = write_annotated(to_annotated(piece, graph))
    else:
        text = write_annotated(piece, check=False)
    _write(out, text)
    if mei:
        _write(out.with_suffix(".mei"), export_mei(piece, graph))
    if viz:
        ig = build_input_graph(piece) if piece.notes else None
        cands = candidates(piece) if piece.notes else None
        _write(out.with_suffix(".viz.json"), export_viz(piece, ig, graph, cands))


def _post_config(args) -> PostprocessConfig:
    return PostprocessConfig(args.chord_threshold, args.voice_cutoff, args.staff_threshold)


def cmd_predict(args) -> int:
    blob = _read_bytes(Path(args.model))
    params = load_params(blob)
    piece = read_piece(Path(args.input))
    graph = infer(piece, params, _post_config(args))
    _emit(piece, graph, Path(args.out), args.mei, args.viz)
    return EXIT_OK


def cmd_baseline(args) -> int:
    piece = read_piece(Path(args.input))
    graph = (baseline_predict(piece, args.split_pitch, args.alpha, args.beta)
             if piece.notes else OutputGraph.build([], [], []))
    _emit(piece, graph, Path(args.out), args.mei, args.viz)
    return EXIT_OK


def _corpus_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise CliError(EXIT_MISSING, "missing-file", f"no such directory: {directory}")
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix == ANNOTATED_SUFFIX)


def _read_annotated(path: Path) -> AnnotatedPiece:
    doc = read_input(path)
    if not isinstance(doc, AnnotatedPiece):
        raise FormatError("schema", f"{path} carries no labels")
    return doc


def split_corpus(names: Sequence[str], fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded shuffle, then the first ``round(fraction * n)`` pieces go to validation."""
    order = np.random.default_rng(seed).permutation(len(names))
    n_val = int(round(fraction * len(names)))
    if n_val >= len(names) and names:
        n_val = len(names) - 1
    return sorted(order[n_val:].tolist()), sorted(order[:n_val].tolist())


def cmd_train(args) -> int:
    files = _corpus_files(Path(args.corpus))
    if not files:
        raise CliError(EXIT_MISSING, "missing-file", f"no {ANNOTATED_SUFFIX} files in {args.corpus}")
    docs = [_read_annotated(p) for p in files]
    tr, va = split_corpus([p.name for p in files], args.val_fraction, args.seed)
    model_cfg = ModelConfig(hidden_size=args.hidden_size, num_conv_layers=args.layers,
                            chord_threshold=args.chord_threshold, seed=args.seed)
    train_cfg = TrainConfig(epochs=args.epochs, lr=args.lr, weight_decay=args.weight_decay,
                            seed=args.seed)
    params, history = train([docs[i] for i in tr], model_cfg, train_cfg,
                            validation=[docs[i] for i in va])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_params(params))
    log_text = history.to_log()
    if args.log:
        _write(Path(args.log), log_text)
    else:
        sys.stderr.write(log_text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    truth_files = _corpus_files(Path(args.truth))
    pred_dir = Path(args.pred)
    if not pred_dir.is_dir():
        raise CliError(EXIT_MISSING, "missing-file", f"no such directory: {pred_dir}")
    items = []
    for tf in truth_files:
        pf = pred_dir / tf.name
        if not pf.is_file():
            raise CliError(EXIT_MISSING, "missing-file", f"no prediction for {tf.name}")
        truth, _ = drop_grace_annotated(_read_annotated(tf))
        pred, _ = drop_grace_annotated(_read_annotated(pf))
        if truth.piece.notes != pred.piece.notes:
            raise CliError(EXIT_EVAL, "note-mismatch", f"{tf.name}: prediction notes differ from truth")
        items.append((truth_output_graph(truth), truth_output_graph(pred), truth.piece))
    report = evaluate_corpus(items)
    text = report.to_json() + "\n"
    table = report.voice_count_table()
    if args.out:
        _write(Path(args.out), text)
        _write(Path(args.out).with_suffix(".tsv"), table)
    else:
        sys.stdout.write(text)
        sys.stdout.write(table)
    return EXIT_OK


def graph_document(piece: Piece) -> dict:
    ig = build_input_graph(piece)
    cands = candidates(piece)
    return {
        "notes": [{"id": n.id, "pitch": n.pitch, "onset": n.onset, "duration": n.duration,
                   "bar": n.bar_index} for n in piece.notes],
        "features": ig.features.round(12).tolist(),
        "edges": {r: ig.edges[r].T.tolist() for r in RELATIONS},
        "candidates": {"voice": cands.voice.tolist(), "chord": cands.chord.tolist()},
    }


def cmd_graph(args) -> int:
    piece = read_piece(Path(args.input))
    _write(Path(args.out), json.dumps(graph_document(piece), indent=1) + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, doc in enumerate(generate_corpus(args.count, seed=args.seed)):
        _write(out / f"piece{k:04d}{ANNOTATED_SUFFIX}", write_annotated(doc))
    return EXIT_OK


def _add_post_flags(p):
    p.add_argument("--chord-threshold", type=float, default=0.5)
    p.add_argument("--voice-cutoff", type=float, default=0.5)
    p.add_argument("--staff-threshold", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pianosep",
                                     description="Voice and staff separation for piano scores.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="predict voices, chords and staves with a trained model")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mei", action="store_true", help="also write <out>.mei")
    p.add_argument("--viz", action="store_true", help="also write <out>.viz.json")
    _add_post_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("baseline", help="heuristic prediction without a model")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--split-pitch", type=int, default=60)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mei", action="store_true")
    p.add_argument("--viz", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("train", help="train on a directory of annotated files")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-size", type=int, default=256)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--chord-threshold", type=float, default=0.5)
    p.add_argument("--log", help="write the per-epoch JSON log here instead of stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("truth")
    p.add_argument("pred")
    p.add_argument("--out", help="write the JSON report here and the table next to it (.tsv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("graph", help="dump the input graph and candidate edges as JSON")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("synth", help="write a synthetic annotated corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def _run_config(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        seed=getattr(args, "seed", 0),
        chord_threshold=getattr(args, "chord_threshold", 0.5),
        voice_cutoff=getattr(args, "voice_cutoff", 0.5),
        staff_threshold=getattr(args, "staff_threshold", 0.5),
        epochs=getattr(args, "epochs", 0),
        val_fraction=getattr(args, "val_fraction", 0.0),
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run_config(args).check()
        return args.func(args)
    except CliError as e:
        err = e
    except FormatError as e:
        err = CliError(EXIT_FORMAT, f"format-{e.code}", str(e))
    except (PieceError,) as e:
        err = CliError(EXIT_FORMAT, "piece", str(e))
    except BlobError as e:
        err = CliError(EXIT_MODEL, f"model-{e.code}", str(e))
    except (GraphError, EngraveError) as e:
        err = CliError(EXIT_GRAPH, getattr(e, "code", "graph"), str(e))
    except MetricError as e:
        err = CliError(EXIT_EVAL, "metric", str(e))
    except NonFiniteError as e:
        err = CliError(EXIT_INTERNAL, "non-finite", str(e))
    except OSError as e:
        err = CliError(EXIT_MISSING, "io", str(e))
    sys.stderr.write(f"pianosep: error [{err.diagnostic}]: {err}\n")
    return err.code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
