from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import Rng


def value_noise(rng: Rng, shape: tuple[int, int], octaves: int = 3, base_cells: int = 4,
                persistence: float = 0.5) -> np.ndarray:
    """Multi-octave value noise in ``[0, 1]``: random lattices upsampled bilinearly and summed."""
    h, w = shape
    total = np.zeros(shape)
    amp, norm = 1.0, 0.0
    for o in range(octaves):
        cells = base_cells * 2 ** o
        lattice = rng.gen.random((cells + 1, cells + 1))
        ys = np.linspace(0, cells, h)
        xs = np.linspace(0, cells, w)
        grid = np.meshgrid(ys, xs, indexing="ij")
        total += amp * ndimage.map_coordinates(lattice, grid, order=1, mode="nearest")
        norm += amp
        amp *= persistence
    return total / norm
