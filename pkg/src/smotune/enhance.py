"""Perona-Malik diffusion, CLAHE, and an enhancement score for tuning them.

Images are 2-D float arrays with values in [0, 1]. All borders are handled
by clamping to the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, InvalidParams
from .params import CategoricalParam, ContinuousParam, DiscreteParam, ParamSpace, Position

__all__ = [
    "PmdParams",
    "ClaheParams",
    "EDGE_FUNCTIONS",
    "check_image",
    "pmd_filter",
    "clahe",
    "clahe_tile_mappings",
    "enhance",
    "enhancement_score",
    "enhance_space",
    "params_from_position",
    "EnhanceObjective",
]

EDGE_FUNCTIONS = ("exponential", "rational")
ORDERS = ("pmd_first", "clahe_first")


def check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise InvalidInput(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.isfinite(img).all() or img.min() < 0.0 or img.max() > 1.0:
        raise InvalidInput("image values must be finite and lie in [0, 1]")
    return img


@dataclass(frozen=True)
class PmdParams:
    kappa: float = 0.1
    lam: float = 0.2
    iterations: int = 10
    edge_fn: str = "exponential"

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise InvalidParams(f"kappa must be > 0, got {self.kappa}")
        # explicit 4-neighbour scheme is only stable up to 1/4
        if not 0 < self.lam <= 0.25:
            raise InvalidParams(f"lam must lie in (0, 0.25], got {self.lam}")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise InvalidParams(f"iterations must be a non-negative integer, got {self.iterations}")
        if self.edge_fn not in EDGE_FUNCTIONS:
            raise InvalidParams(f"edge_fn must be one of {EDGE_FUNCTIONS}, got {self.edge_fn!r}")


@dataclass(frozen=True)
class ClaheParams:
    clip_limit: float = 2.0
    tiles_x: int = 8
    tiles_y: int = 8
    bins: int = 256

    def __post_init__(self):
        if not self.clip_limit >= 1:
            raise InvalidParams(f"clip_limit must be >= 1, got {self.clip_limit}")
        for name in ("tiles_x", "tiles_y"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParams(f"{name} must be an integer >= 1, got {value}")
        if int(self.bins) != self.bins or self.bins < 2:
            raise InvalidParams(f"bins must be an integer >= 2, got {self.bins}")


def _conductance(grad: np.ndarray, kappa: float, edge_fn: str) -> np.ndarray:
    s = (grad / kappa) ** 2
    if edge_fn == "exponential":
        return np.exp(-s)
    return 1.0 / (1.0 + s)


def pmd_filter(img, p: PmdParams = PmdParams()) -> np.ndarray:
    """Perona-Malik anisotropic diffusion with an explicit 4-neighbour scheme.

    Each iteration applies ``I += lam * sum_d g(|dI_d|) * dI_d`` over the
    north/south/east/west differences ``dI_d``.
    """
    u = check_image(img).copy()
    for _ in range(int(p.iterations)):
        padded = np.pad(u, 1, mode="edge")
        flow = np.zeros_like(u)
        for d in (padded[:-2, 1:-1] - u, padded[2:, 1:-1] - u,
                  padded[1:-1, 2:] - u, padded[1:-1, :-2] - u):
            flow += _conductance(np.abs(d), p.kappa, p.edge_fn) * d
        u = u + p.lam * flow
    return np.clip(u, 0.0, 1.0)


def _tile_edges(n: int, tiles: int) -> np.ndarray:
    return (np.arange(tiles + 1) * n) // tiles


def _bin_index(img: np.ndarray, bins: int) -> np.ndarray:
    return np.minimum((img * bins).astype(np.int64), bins - 1)


def clahe_tile_mappings(img, p: ClaheParams = ClaheParams()) -> np.ndarray:
    """Per-tile grey-level mappings, shape ``(tiles_y, tiles_x, bins)``.

    Each tile histogram is clipped at ``clip_limit * n / bins``; the clipped
    excess is spread uniformly over all bins in one pass, with anything that
    would push a bin back over the limit discarded. The mapping is the
    normalized cumulative histogram, so it is non-decreasing.
    """
    img = check_image(img)
    h, w = img.shape
    if w < p.tiles_x or h < p.tiles_y:
        raise InvalidParams(f"image {w}x{h} is smaller than the {p.tiles_x}x{p.tiles_y} tile grid")
    bins = int(p.bins)
    b = _bin_index(img, bins)
    ey, ex = _tile_edges(h, p.tiles_y), _tile_edges(w, p.tiles_x)
    maps = np.empty((p.tiles_y, p.tiles_x, bins))
    for ty in range(p.tiles_y):
        for tx in range(p.tiles_x):
            tile = b[ey[ty]:ey[ty + 1], ex[tx]:ex[tx + 1]]
            hist = np.bincount(tile.ravel(), minlength=bins).astype(float)
            if math.isfinite(p.clip_limit):
                limit = p.clip_limit * tile.size / bins
                excess = np.maximum(hist - limit, 0.0).sum()
                hist = np.minimum(np.minimum(hist, limit) + excess / bins, limit)
            cdf = np.cumsum(hist)
            maps[ty, tx] = cdf / cdf[-1]
    return maps


def _axis_weights(n: int, edges: np.ndarray):
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    t = np.interp(np.arange(n, dtype=float), centers, np.arange(len(centers), dtype=float))
    i0 = np.minimum(np.floor(t).astype(int), len(centers) - 1)
    i1 = np.minimum(i0 + 1, len(centers) - 1)
    return i0, i1, t - i0


def clahe(img, p: ClaheParams = ClaheParams()) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Tile mappings from :func:`clahe_tile_mappings` are blended bilinearly
    between tile centres; pixels outside the outermost centres use the
    nearest tiles.
    """
    img = check_image(img)
    maps = clahe_tile_mappings(img, p)
    h, w = img.shape
    b = _bin_index(img, int(p.bins))
    y0, y1, wy = _axis_weights(h, _tile_edges(h, p.tiles_y))
    x0, x1, wx = _axis_weights(w, _tile_edges(w, p.tiles_x))
    y0, y1, wy = y0[:, None], y1[:, None], wy[:, None]
    # lerp form keeps equal neighbouring mappings exact
    top = maps[y0, x0, b] + wx * (maps[y0, x1, b] - maps[y0, x0, b])
    bottom = maps[y1, x0, b] + wx * (maps[y1, x1, b] - maps[y1, x0, b])
    return np.clip(top + wy * (bottom - top), 0.0, 1.0)


def enhance(img, pmd: PmdParams = PmdParams(), cl: ClaheParams = ClaheParams(),
            order: str = "pmd_first") -> np.ndarray:
    """Denoise with Perona-Malik diffusion, then equalize with CLAHE (or the reverse)."""
    if order == "pmd_first":
        return clahe(pmd_filter(img, pmd), cl)
    if order == "clahe_first":
        return pmd_filter(clahe(img, cl), pmd)
    raise InvalidParams(f"order must be one of {ORDERS}, got {order!r}")


def enhancement_score(img, block: int = 8) -> float:
    """``-(entropy + 0.5 * mean local std)``; lower is better.

    Entropy is in bits over a 256-bin histogram. The local standard deviation
    is averaged over non-overlapping ``block x block`` tiles; incomplete tiles
    at the right and bottom edges are ignored unless the image is smaller
    than one block, in which case the whole image is one tile.
    """
    img = check_image(img)
    counts = np.bincount(_bin_index(img, 256).ravel(), minlength=256)
    prob = counts[counts > 0] / img.size
    entropy = float(-(prob * np.log2(prob)).sum())
    h, w = img.shape
    by, bx = min(block, h), min(block, w)
    ny, nx = h // by, w // bx
    tiles = img[: ny * by, : nx * bx].reshape(ny, by, nx, bx)
    local_std = float(tiles.std(axis=(1, 3)).mean())
    return -(entropy + 0.5 * local_std) + 0.0


def enhance_space(max_tiles: int = 16) -> ParamSpace:
    """Search space over the diffusion and CLAHE settings (square tile grid)."""
    return ParamSpace([
        ContinuousParam("kappa", 0.01, 0.5, log_scale=True),
        ContinuousParam("lam", 0.05, 0.25),
        DiscreteParam("iterations", 0, 30),
        CategoricalParam("edge_fn", EDGE_FUNCTIONS),
        ContinuousParam("clip_limit", 1.0, 4.0),
        DiscreteParam("tiles", 1, max_tiles),
    ])


def params_from_position(p: Position, bins: int = 256) -> tuple:
    v = p.as_dict()
    pmd = PmdParams(v["kappa"], v["lam"], v["iterations"], v["edge_fn"])
    cl = ClaheParams(v["clip_limit"], v["tiles"], v["tiles"], bins)
    return pmd, cl


class EnhanceObjective:
    """Mean :func:`enhancement_score` of :func:`enhance` over sample images."""

    name = "enhance_score"

    def __init__(self, images, max_tiles: int = 16, order: str = "pmd_first"):
        self.images = [check_image(im) for im in images]
        if not self.images:
            raise InvalidInput("enhancement tuning needs at least one image")
        smallest = min(min(im.shape) for im in self.images)
        self.space = enhance_space(max(2, min(max_tiles, smallest)))
        self.order = order
        self.known_optimum = None

    def __call__(self, position: Position) -> float:
        pmd, cl = params_from_position(position)
        return float(np.mean([enhancement_score(enhance(im, pmd, cl, self.order))
                              for im in self.images]))
