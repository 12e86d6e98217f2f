"""Objectives for exercising the optimizer.

Analytic benchmarks (sphere, Rastrigin), a mixed-variable function with a
known optimum over the learning-rate/batch-size/epochs preset, and a small
deterministic segmentation pipeline scored with the categorical dice loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyDataset, InvalidEpsilon, InvalidParams
from .params import CategoricalParam, ContinuousParam, DiscreteParam, ParamSpace, Position, hyperparameter_preset
from .filters import box_filter, median_filter
from .metrics import categorical_dice_loss, one_hot

__all__ = [
    "Objective",
    "sphere",
    "rastrigin",
    "mixed_test",
    "ToySegParams",
    "TOY_KERNELS",
    "toy_seg_space",
    "toy_segment",
    "toy_seg_objective",
    "ToySegObjective",
    "sphere_objective",
    "rastrigin_objective",
    "mixed_test_objective",
]


@dataclass(frozen=True)
class Objective:
    """A named, pure objective over a parameter space.

    ``known_optimum`` is ``(values, objective_value)`` when the minimizer is
    known analytically.
    """

    name: str
    space: ParamSpace
    fn: Callable[[Position], float]
    known_optimum: Optional[tuple] = None

    def __call__(self, position: Position) -> float:
        return self.fn(position)

    def evaluate_values(self, values: Sequence) -> float:
        return self.fn(self.space.position(values))


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.dot(x, x))


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


_BATCHES = (4, 8, 16, 32, 64, 128)


def mixed_test(p) -> float:
    """Bowl with its unique minimum 0 at lr=1e-3, batch=32, epochs=50.

    Accepts a Position over :func:`hyperparameter_preset` or a
    ``(learning_rate, batch_size, epochs)`` tuple.
    """
    lr, batch, epochs = p.values if isinstance(p, Position) else p
    return ((math.log10(lr) + 3.0) ** 2
            + 0.05 * abs(epochs - 50)
            + abs(_BATCHES.index(batch) - 3))


def _continuous_space(dim: int, lo: float, hi: float) -> ParamSpace:
    return ParamSpace([ContinuousParam(f"x{j}", lo, hi) for j in range(dim)])


def sphere_objective(dim: int = 2, lo: float = -5.0, hi: float = 5.0) -> Objective:
    return Objective("sphere", _continuous_space(dim, lo, hi), lambda p: sphere(p.values),
                     ((0.0,) * dim, 0.0))


def rastrigin_objective(dim: int = 2, lo: float = -5.12, hi: float = 5.12) -> Objective:
    return Objective("rastrigin", _continuous_space(dim, lo, hi), lambda p: rastrigin(p.values),
                     ((0.0,) * dim, 0.0))


def mixed_test_objective(lr_hi: float = 1e-2) -> Objective:
    return Objective("mixed_test", hyperparameter_preset(lr_hi), mixed_test, ((1e-3, 32, 50), 0.0))


# -- toy segmentation ---------------------------------------------------------

TOY_KERNELS = ("none", "box3", "box5", "median3")


@dataclass(frozen=True)
class ToySegParams:
    threshold: float = 0.5
    smooth_iters: int = 0
    kernel: str = "none"

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidParams(f"threshold must lie in [0, 1], got {self.threshold}")
        if int(self.smooth_iters) != self.smooth_iters or not 0 <= self.smooth_iters <= 10:
            raise InvalidParams(f"smooth_iters must be an integer in [0, 10], got {self.smooth_iters}")
        if self.kernel not in TOY_KERNELS:
            raise InvalidParams(f"kernel must be one of {TOY_KERNELS}, got {self.kernel!r}")

    @classmethod
    def from_position(cls, p: Position) -> "ToySegParams":
        return cls(**p.as_dict())


def toy_seg_space() -> ParamSpace:
    return ParamSpace([
        ContinuousParam("threshold", 0.0, 1.0),
        DiscreteParam("smooth_iters", 0, 10),
        CategoricalParam("kernel", TOY_KERNELS),
    ])


def _prefilter(image: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "none":
        return image
    if kernel == "box3":
        return box_filter(image, 3)
    if kernel == "box5":
        return box_filter(image, 5)
    return median_filter(image, 3)


def _smoothed(image: np.ndarray, kernel: str, smooth_iters: int) -> np.ndarray:
    out = _prefilter(np.asarray(image, dtype=float), kernel)
    for _ in range(smooth_iters):
        out = box_filter(out, 3)
    return out


def toy_segment(image: np.ndarray, p: ToySegParams) -> np.ndarray:
    """Kernel, then ``smooth_iters`` 3x3 box passes, then ``value >= threshold``.

    Returns a 0/1 ``uint8`` mask.
    """
    return (_smoothed(image, p.kernel, p.smooth_iters) >= p.threshold).astype(np.uint8)


def _foreground(mask: np.ndarray) -> np.ndarray:
    return (np.asarray(mask) > 0).astype(np.uint8)


def toy_seg_objective(dataset, p: ToySegParams, epsilon: float = 1e-7) -> float:
    """Mean two-class categorical dice loss of :func:`toy_segment` over a dataset.

    ``dataset`` is a sequence of ``(image, mask)`` pairs; any non-zero mask
    label counts as foreground.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("toy segmentation objective needs at least one sample")
    losses = [
        categorical_dice_loss(one_hot(toy_segment(img, p), 2), _foreground(gt), epsilon)
        for img, gt in dataset
    ]
    return float(np.mean(losses))


class ToySegObjective:
    """Cached :func:`toy_seg_objective` over a fixed dataset, callable on Positions.

    Smoothed images depend only on ``(kernel, smooth_iters)``, so they are
    computed once per combination; results are identical to the uncached
    function.
    """

    name = "toy_seg"

    def __init__(self, dataset, epsilon: float = 1e-7):
        pairs = [(np.asarray(img, dtype=float), _foreground(gt)) for img, gt in dataset]
        if not pairs:
            raise EmptyDataset("toy segmentation objective needs at least one sample")
        if not epsilon > 0:
            raise InvalidEpsilon(f"epsilon must be > 0, got {epsilon}")
        self.dataset = pairs
        self._gt = [gt.astype(bool) for _, gt in pairs]
        self._gt_fg = [float(np.count_nonzero(g)) for g in self._gt]
        self.epsilon = epsilon
        self.space = toy_seg_space()
        self.known_optimum = None
        self._cache = {}

    def smoothed(self, kernel: str, smooth_iters: int) -> list:
        key = (kernel, smooth_iters)
        if key not in self._cache:
            if smooth_iters == 0:
                self._cache[key] = [_prefilter(img, kernel) for img, _ in self.dataset]
            else:
                self._cache[key] = [box_filter(s, 3) for s in self.smoothed(kernel, smooth_iters - 1)]
        return self._cache[key]

    def evaluate(self, p: ToySegParams) -> float:
        # two-class dice loss from pixel counts; the sums are exact integers, so
        # this matches categorical_dice_loss on the one-hot masks bit for bit
        eps = self.epsilon
        losses = []
        for s, g, g_fg in zip(self.smoothed(p.kernel, p.smooth_iters), self._gt, self._gt_fg):
            pred = s >= p.threshold
            n = float(pred.size)
            p_fg = float(np.count_nonzero(pred))
            inter_fg = float(np.count_nonzero(pred & g))
            inter_bg = n - p_fg - g_fg + inter_fg
            ratio = np.array([(2.0 * inter_bg + eps) / ((n - p_fg) + (n - g_fg) + eps),
                              (2.0 * inter_fg + eps) / (p_fg + g_fg + eps)])
            losses.append(float(1.0 - ratio.mean()))
        return float(np.mean(losses))

    def __call__(self, position: Position) -> float:
        return self.evaluate(ToySegParams.from_position(position))
