"""Small neighbourhood filters with clamp-to-edge borders."""

import numpy as np
from scipy import ndimage


def box_filter(image: np.ndarray, size: int) -> np.ndarray:
    return ndimage.uniform_filter(np.asarray(image, dtype=float), size=size, mode="nearest")


def median_filter(image: np.ndarray, size: int) -> np.ndarray:
    return ndimage.median_filter(np.asarray(image, dtype=float), size=size, mode="nearest")
