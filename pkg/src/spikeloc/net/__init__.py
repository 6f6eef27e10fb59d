from .checkpoint import Checkpoint, checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint
from .loss import batch_loss, decode, diou_loss
from .model import Network, Tape, accumulator_forward
from .optim import Adam
from .spec import LayerSpec, NetworkSpec, snn_tiny
from .train import TrainResult, evaluate, train

__all__ = [
    "Adam", "Checkpoint", "LayerSpec", "Network", "NetworkSpec", "Tape", "TrainResult",
    "accumulator_forward", "batch_loss", "checkpoint_from_bytes", "checkpoint_to_bytes", "decode",
    "diou_loss", "evaluate", "load_checkpoint", "save_checkpoint", "snn_tiny", "train",
]
