"""Spiking neural networks for single-object localization.

Neuron dynamics and surrogate gradients live in :mod:`spikeloc.neuron`, coding
schemes in :mod:`spikeloc.codec`, the trainable network in :mod:`spikeloc.net`,
and robustness and energy analysis in :mod:`spikeloc.corrupt`,
:mod:`spikeloc.metrics` and :mod:`spikeloc.energy`.
"""

from .codec import SCHEMES, CodingScheme
from .core import BBox, EventStream, FormatError, Rng, load_events, load_spikes, save_events, save_spikes
from .metrics import EvalReport, iou, mean_iou, mrad, rad
from .neuron import IFConfig, if_forward, if_step, surrogate_grad, surrogate_value

__version__ = "0.1.0"

__all__ = [
    "BBox", "CodingScheme", "EvalReport", "EventStream", "FormatError", "IFConfig", "Rng", "SCHEMES",
    "if_forward", "if_step", "iou", "load_events", "load_spikes", "mean_iou", "mrad", "rad", "save_events",
    "save_spikes", "surrogate_grad", "surrogate_value",
]
