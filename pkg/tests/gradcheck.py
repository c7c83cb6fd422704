"""Central finite differences against the analytic gradients of the full loss.

Errors are measured per tensor: the largest deviation over the sampled
entries divided by the largest analytic gradient magnitude of that tensor.
Per-entry ratios are meaningless for entries whose size is comparable to
the rounding noise of the loss divided by the step.
"""

import numpy as np

from pianosep.graph import build_input_graph, candidates, truth_output_graph
from pianosep.nn import ModelConfig, ParamStore, Targets, loss_and_grad, loss_value
from pianosep.synth import generate_piece

TINY = 1e-12


def small_instance(seed, hidden=16, max_notes=20):
    rng = np.random.default_rng(seed)
    while True:
        ann = generate_piece(rng, n_bars=1)
        if 2 <= len(ann.piece.notes) <= max_notes:
            break
    piece = ann.piece
    cands = candidates(piece)
    targets = Targets.from_truth(truth_output_graph(ann), cands)
    config = ModelConfig(hidden_size=hidden, num_conv_layers=3, seed=seed)
    params = ParamStore.init(config)
    # non-zero biases so their gradients are exercised away from a symmetric start
    for k in params:
        if k.endswith(".bias"):
            params[k] = rng.normal(0, 0.1, size=params[k].shape)
    return params, build_input_graph(piece), cands, targets


def gradient_errors(params, graph, cands, targets, per_tensor=8, top=2, step=1e-5, seed=0):
    """Tensor name -> relative error; samples the ``top`` largest entries plus random ones."""
    rng = np.random.default_rng(seed)
    _, _, grads = loss_and_grad(params, graph, cands, targets)
    out = {}
    for name, value in params.items():
        flat = value.reshape(-1)
        g = grads[name].reshape(-1)
        largest = np.argsort(-np.abs(g), kind="stable")[:top]
        rest = np.setdiff1d(np.arange(flat.size), largest)
        extra = rng.choice(rest, size=min(per_tensor - len(largest), rest.size), replace=False)
        worst = 0.0
        for i in np.concatenate([largest, extra]):
            old = flat[i]
            flat[i] = old + step
            up = loss_value(params, graph, cands, targets)
            flat[i] = old - step
            down = loss_value(params, graph, cands, targets)
            flat[i] = old
            worst = max(worst, abs(g[i] - (up - down) / (2 * step)))
        scale = np.abs(g).max()
        out[name] = worst / scale if scale > TINY else worst
    return out


def max_gradient_error(*instance, **kwargs):
    return max(gradient_errors(*instance, **kwargs).values())
