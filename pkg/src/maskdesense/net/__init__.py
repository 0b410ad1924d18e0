from .model import Model, FsmModule, fsm_gate, DEFAULT_WIDTHS
from .train import TrainConfig, train, evaluate, lr_at
from .checkpoint import save_checkpoint, load_checkpoint, save_model, load_model

__all__ = [
    "Model", "FsmModule", "fsm_gate", "DEFAULT_WIDTHS",
    "TrainConfig", "train", "evaluate", "lr_at",
    "save_checkpoint", "load_checkpoint", "save_model", "load_model",
]
