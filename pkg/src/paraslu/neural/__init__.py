from .checkpoint import (Checkpoint, CheckpointError, ManifestMismatchError,
                         ShapeMismatchError, TruncatedCheckpointError,
                         VocabMismatchError, load_checkpoint, save_checkpoint)
from .gradcheck import grad_check, rel_error
from .ops import (Adam, ShapeError, adam_update, attention, attention_backward,
                  clip_global_norm, lstm_step, lstm_step_backward, softmax,
                  softmax_xent)

__all__ = [
    "Adam", "Checkpoint", "CheckpointError", "ManifestMismatchError",
    "ShapeError", "ShapeMismatchError", "TruncatedCheckpointError",
    "VocabMismatchError", "adam_update", "attention", "attention_backward",
    "clip_global_norm", "grad_check", "load_checkpoint", "lstm_step",
    "lstm_step_backward", "rel_error", "save_checkpoint", "softmax",
    "softmax_xent",
]
