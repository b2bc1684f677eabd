from .tasks import PAD, Task, make_task, shift_targets
from .train import ArchSpec, TrainReport, accuracy, count_positional_params, train
from .transformer import (
    MODES,
    ToyModelConfig,
    forward,
    forward_batch,
    init_params,
    loss_and_grads,
    tisa_stack,
)

__all__ = [
    "PAD", "Task", "make_task", "shift_targets",
    "ArchSpec", "TrainReport", "accuracy", "count_positional_params", "train",
    "MODES", "ToyModelConfig", "forward", "forward_batch", "init_params", "loss_and_grads",
    "tisa_stack",
]
