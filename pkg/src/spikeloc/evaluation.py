"""Clean and corrupted evaluation, and the full corruption x severity sweep.

Static corruptions are applied to the image before coding; event corruptions
to the sliced spike tensor after coding. Every sample keeps its clean encoding
stream (``derive(2, i)``) so corrupted and clean runs differ only by the
corruption. Corruption noise for sample ``i`` comes from
``Rng(corrupt_seed).derive(3, k, severity, i)`` with ``k`` the corruption's
index in its family.
"""

from __future__ import annotations

import numpy as np

from . import corrupt
from .codec import CodingScheme
from .core import Rng
from .metrics import EvalReport, N_SEVERITIES, mean_iou
from .net.train import EVAL_STREAM, predict, targets_of

CORRUPT_STREAM = 3


class ModalityError(ValueError):
    """A corruption was requested for a pipeline of the other modality."""


def check_modality(name: str, scheme: CodingScheme) -> None:
    kind = corrupt.modality(name)
    if kind != scheme.modality:
        raise ModalityError(
            f"{name} is an {kind} corruption but the {scheme.name} pipeline consumes "
            f"{scheme.modality} inputs; use one of "
            f"{corrupt.STATIC_CORRUPTIONS if scheme.modality == 'static' else corrupt.EVENT_CORRUPTIONS}")


def corruptions_for(scheme: CodingScheme) -> tuple[str, ...]:
    return corrupt.STATIC_CORRUPTIONS if scheme.modality == "static" else corrupt.EVENT_CORRUPTIONS


def encode_corrupted(samples, scheme: CodingScheme, name: str | None = None, severity: int = 1,
                     encode_seed: int = 0, corrupt_seed: int = 0) -> np.ndarray:
    """``(N, T, C, H, W)`` network inputs, optionally corrupted by ``name`` at ``severity``."""
    enc = Rng(encode_seed)
    if name is None:
        return np.stack([scheme.encode(s.input, enc.derive(EVAL_STREAM, i)) for i, s in enumerate(samples)])
    check_modality(name, scheme)
    corrupt.severity_param(name, severity)
    k = corruptions_for(scheme).index(name)
    noise = Rng(corrupt_seed)
    out = []
    for i, s in enumerate(samples):
        rng = noise.derive(CORRUPT_STREAM, k, severity, i)
        if scheme.modality == "static":
            x = scheme.encode(corrupt.apply(name, s.input, severity, rng), enc.derive(EVAL_STREAM, i))
        else:
            x = corrupt.apply(name, scheme.encode(s.input, enc.derive(EVAL_STREAM, i)), severity, rng)
        out.append(x)
    return np.stack(out)


def evaluate_miou(net, samples, scheme: CodingScheme, name: str | None = None, severity: int = 1,
                  encode_seed: int = 0, corrupt_seed: int = 0, batch_size: int = 64) -> float:
    """mIoU (percent) on ``samples``, clean when ``name`` is None."""
    if not len(samples):
        raise ValueError("evaluation set is empty")
    x = encode_corrupted(samples, scheme, name, severity, encode_seed, corrupt_seed)
    return mean_iou(predict(net, x, batch_size), targets_of(samples))


def sweep(net, samples, scheme: CodingScheme, corruptions=None, *, encode_seed: int = 0,
          corrupt_seed: int = 0, batch_size: int = 64, log=None) -> EvalReport:
    """Clean mIoU plus every corruption at severities 1..5."""
    corruptions = tuple(corruptions) if corruptions is not None else corruptions_for(scheme)
    for name in corruptions:
        check_modality(name, scheme)
    clean = evaluate_miou(net, samples, scheme, None, 1, encode_seed, corrupt_seed, batch_size)
    report = EvalReport(clean)
    for name in corruptions:
        row = []
        for sev in range(1, N_SEVERITIES + 1):
            m = evaluate_miou(net, samples, scheme, name, sev, encode_seed, corrupt_seed, batch_size)
            row.append(m)
            if log is not None:
                log({"corruption": name, "severity": sev, "miou": m})
        report.corrupted[name] = row
    return report
