from .model import (ModelConfig, ParamStore, PredictionSet, Targets, decode, embed,
                    encoder_forward, loss, loss_and_grad, loss_value, param_shapes, predict,
                    sage_layer_forward)
from .optim import AdamState, NonFiniteError, adam_step
from .serialize import BlobError, load_params, save_params
from .train import Example, History, TrainConfig, evaluate_model, infer, train

__all__ = [
    "ModelConfig", "ParamStore", "PredictionSet", "Targets", "decode", "embed",
    "encoder_forward", "loss", "loss_and_grad", "loss_value", "param_shapes", "predict",
    "sage_layer_forward", "AdamState", "NonFiniteError", "adam_step", "BlobError",
    "load_params", "save_params", "Example", "History", "TrainConfig", "evaluate_model",
    "infer", "train",
]
