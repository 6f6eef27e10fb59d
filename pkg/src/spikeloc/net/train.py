"""Mini-batch training with Adam on the DIoU loss, plus clean-set evaluation.

Samples are duck-typed: anything with ``.input`` (image or event stream) and
``.label`` (:class:`~spikeloc.core.BBox`) works.

Random streams are addressed, never consumed in sequence, so results do not
depend on batch composition: the training input of sample ``i`` in epoch ``e``
is encoded with ``Rng(encode_seed).derive(1, e, i)`` and the evaluation input
with ``Rng(encode_seed).derive(2, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..codec import CodingScheme
from ..core import Rng
from ..metrics import mean_iou
from .checkpoint import Checkpoint
from .loss import batch_loss, decode
from .model import Network, Tape
from .optim import Adam

TRAIN_STREAM = 1
EVAL_STREAM = 2


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list = field(default_factory=list)

    @property
    def best_val_miou(self) -> float:
        return max((h["val_miou"] for h in self.history), default=float("nan"))


def targets_of(samples) -> np.ndarray:
    return np.stack([s.label.as_array() for s in samples]) if len(samples) else np.zeros((0, 4))


def encode_samples(samples, scheme: CodingScheme, rng_for) -> np.ndarray:
    """Encode ``samples`` into a ``(B, T, C, H, W)`` batch; ``rng_for(i)`` gives sample i's stream."""
    return np.stack([scheme.encode(s.input, rng_for(i)) for i, s in enumerate(samples)])


def predict(net: Network, inputs: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Decoded ``(N, 4)`` boxes for an encoded batch."""
    out = [decode(net.forward(inputs[i:i + batch_size])[0]) for i in range(0, len(inputs), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, 4))


def evaluate(net: Network, samples, scheme: CodingScheme, encode_seed: int = 0,
             batch_size: int = 64, inputs: np.ndarray | None = None) -> float:
    """Clean mIoU (percent) of ``net`` on ``samples``."""
    if inputs is None:
        base = Rng(encode_seed)
        inputs = encode_samples(samples, scheme, lambda i: base.derive(EVAL_STREAM, i))
    return mean_iou(predict(net, inputs, batch_size), targets_of(samples))


def train(net: Network, train_set, val_set, scheme: CodingScheme, *, epochs: int = 40,
          batch_size: int = 32, lr: float = 3e-3, seed: int = 0, encode_seed: int = 0,
          log=None) -> TrainResult:
    """Train ``net`` in place; return the checkpoint with the best validation mIoU."""
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    opt = Adam(lr)
    base = Rng(encode_seed)
    targets = targets_of(train_set)
    deterministic = scheme.name != "rate"
    cached = encode_samples(train_set, scheme, lambda i: base.derive(TRAIN_STREAM, 0, i)) if deterministic else None
    val_inputs = encode_samples(val_set, scheme, lambda i: base.derive(EVAL_STREAM, i)) if len(val_set) else None
    meta = dict(seed=seed, scheme=scheme.to_dict())
    best = Checkpoint(net.spec, net.copy_params(), {}, 0, adam_step=0, **meta)
    best_miou = -np.inf
    history = []
    tape = Tape()
    n = len(train_set)
    for epoch in range(1, epochs + 1):
        order = Rng(seed).derive(TRAIN_STREAM, epoch).gen.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            if deterministic:
                x = cached[idx]
            else:
                x = np.stack([scheme.encode(train_set[i].input, base.derive(TRAIN_STREAM, epoch, int(i)))
                              for i in idx])
            raw, _ = net.forward(x, tape)
            loss, g_raw = batch_loss(raw, targets[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            grads = net.backward(tape, g_raw)
            opt.step(net.params, grads)
            losses.append(loss * len(idx))
        train_loss = float(np.sum(losses) / n)
        val_miou = evaluate(net, val_set, scheme, inputs=val_inputs) if val_inputs is not None else float("nan")
        row = {"epoch": epoch, "train_loss": train_loss, "val_miou": val_miou}
        history.append(row)
        if log is not None:
            log(row)
        if val_inputs is None or val_miou > best_miou:
            best_miou = val_miou
            best = Checkpoint(net.spec, net.copy_params(), {k: v.copy() for k, v in opt.state().items()},
                              epoch, adam_step=opt.t, metrics={"val_miou": val_miou, "train_loss": train_loss},
                              **meta)
    return TrainResult(best, history)
