"""
Corruptions at five severities
==============================

Apply each static corruption to one image and each event corruption to its
spike tensor, and print how far the result drifts from the clean input.
"""

import numpy as np

from spikeloc import corrupt
from spikeloc.codec import CodingScheme
from spikeloc.core import Rng
from spikeloc.data import GenParams, gen_static_sample

img = gen_static_sample(Rng(1), GenParams(texture=0.2)).image

print("static corruptions, mean absolute pixel change")
for name in corrupt.STATIC_CORRUPTIONS:
    errs = [np.abs(corrupt.apply(name, img, s, Rng(s)) - img).mean() for s in range(1, 6)]
    print(f"  {name:15s}", " ".join(f"{e:.3f}" for e in errs))

# event corruptions act on sliced spike tensors; saccades provide one here
spikes = CodingScheme("saccades", 6).encode(img, Rng(0))
print(f"\nsaccade tensor {spikes.shape}, {int(spikes.sum())} spikes")
print("event corruptions, extra spikes added")
for name in corrupt.EVENT_CORRUPTIONS:
    extra = [int(corrupt.apply(name, spikes, s, Rng(s)).sum() - spikes.sum()) for s in range(1, 6)]
    print(f"  {name:20s}", extra)

###############################################################################
# Background activity flips each silent bit on with probability 1 - exp(-lambda).

quiet = np.zeros((10, 2, 100, 50), np.uint8)
for s in range(1, 6):
    lam = corrupt.severity_param("background_activity", s)
    got = corrupt.apply("background_activity", quiet, s, Rng(s)).mean()
    print(f"severity {s}: lambda {lam}  observed {got:.4f}  expected {1 - np.exp(-lam):.4f}")
