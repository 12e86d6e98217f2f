"""Mixed-variable search spaces and the repair rules that keep SMO updates valid.

Every parameter has a real-valued *raw* coordinate that the swarm moves
around in, and a *value* that the objective sees:

* continuous parameters: raw is the value itself, or ``log10(value)`` when
  ``log_scale`` is set;
* discrete parameters: raw is rounded half-up and clipped to ``[lo, hi]``;
* categorical parameters: raw is a real index in ``[0, m - 1]``; the value is
  the category at the nearest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .errors import InvalidFitness, InvalidSpace, LengthMismatch

__all__ = [
    "ContinuousParam",
    "DiscreteParam",
    "CategoricalParam",
    "ParamSpace",
    "Position",
    "sample",
    "from_unit",
    "repair",
    "adopt_category",
    "hyperparameter_preset",
    "round_half_up",
]

CONTINUOUS, DISCRETE, CATEGORICAL = 0, 1, 2


def round_half_up(x):
    """Round to the nearest integer with ties going up (2.5 -> 3, -2.5 -> -2)."""
    return np.floor(np.asarray(x, dtype=float) + 0.5)


@dataclass(frozen=True)
class ContinuousParam:
    name: str
    lo: float
    hi: float
    log_scale: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidSpace(f"{self.name}: bounds must be finite")
        if not self.lo < self.hi:
            raise InvalidSpace(f"{self.name}: lo must be < hi (got {self.lo}, {self.hi})")
        if self.log_scale and self.lo <= 0:
            raise InvalidSpace(f"{self.name}: log-scale parameter needs lo > 0")

    @property
    def kind(self) -> str:
        return "continuous"

    def raw_bounds(self) -> tuple[float, float]:
        if self.log_scale:
            return math.log10(self.lo), math.log10(self.hi)
        return float(self.lo), float(self.hi)

    def contains(self, value) -> bool:
        return isinstance(value, float) and self.lo <= value <= self.hi


@dataclass(frozen=True)
class DiscreteParam:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        for bound in (self.lo, self.hi):
            if isinstance(bound, bool) or int(bound) != bound:
                raise InvalidSpace(f"{self.name}: discrete bounds must be integers")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if not self.lo < self.hi:
            raise InvalidSpace(f"{self.name}: lo must be < hi (got {self.lo}, {self.hi})")

    @property
    def kind(self) -> str:
        return "discrete"

    def raw_bounds(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    def contains(self, value) -> bool:
        return isinstance(value, int) and self.lo <= value <= self.hi


@dataclass(frozen=True)
class CategoricalParam:
    name: str
    categories: tuple

    def __post_init__(self):
        cats = tuple(self.categories)
        object.__setattr__(self, "categories", cats)
        if len(cats) < 2:
            raise InvalidSpace(f"{self.name}: need at least two categories")
        if len(set(map(_hashable, cats))) != len(cats):
            raise InvalidSpace(f"{self.name}: duplicate categories in {list(cats)}")

    @property
    def kind(self) -> str:
        return "categorical"

    @property
    def m(self) -> int:
        return len(self.categories)

    def raw_bounds(self) -> tuple[float, float]:
        return 0.0, float(self.m - 1)

    def index_of(self, value) -> int:
        for k, c in enumerate(self.categories):
            if type(c) is type(value) and c == value:
                return k
        raise ValueError(f"{value!r} is not a category of {self.name}")

    def contains(self, value) -> bool:
        try:
            self.index_of(value)
        except ValueError:
            return False
        return True


Param = Union[ContinuousParam, DiscreteParam, CategoricalParam]


def _hashable(value):
    # 1 and 1.0 and True must count as distinct categories
    return (type(value).__name__, repr(value))


class ParamSpace:
    """Ordered, immutable collection of parameter descriptors.

    Parameters
    ----------
    params : sequence of ContinuousParam, DiscreteParam or CategoricalParam
        Parameters in search order. Names must be unique.
    """

    def __init__(self, params: Sequence[Param]):
        params = tuple(params)
        if not params:
            raise InvalidSpace("parameter space is empty")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise InvalidSpace(f"duplicate parameter names in {names}")
        self._params = params
        bounds = np.array([p.raw_bounds() for p in params], dtype=float)
        self.raw_lo = bounds[:, 0]
        self.raw_hi = bounds[:, 1]
        self.raw_lo.setflags(write=False)
        self.raw_hi.setflags(write=False)
        self._kinds = np.array(
            [
                CONTINUOUS if isinstance(p, ContinuousParam)
                else DISCRETE if isinstance(p, DiscreteParam)
                else CATEGORICAL
                for p in params
            ]
        )
        self._rounded = self._kinds != CONTINUOUS
        self._log = np.array([isinstance(p, ContinuousParam) and p.log_scale for p in params])
        self.categorical_dims = np.flatnonzero(self._kinds == CATEGORICAL)
        self.numeric_dims = np.flatnonzero(self._kinds != CATEGORICAL)

    @property
    def params(self) -> tuple:
        return self._params

    @property
    def dim(self) -> int:
        return len(self._params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self._params]

    def __len__(self):
        return self.dim

    def __iter__(self):
        return iter(self._params)

    def __getitem__(self, key):
        if isinstance(key, str):
            for p in self._params:
                if p.name == key:
                    return p
            raise KeyError(key)
        return self._params[key]

    def __eq__(self, other):
        return isinstance(other, ParamSpace) and self._params == other._params

    def __hash__(self):
        return hash(self._params)

    def __repr__(self):
        return f"ParamSpace({list(self._params)!r})"

    def repair_raw(self, raw: np.ndarray) -> np.ndarray:
        """Vectorized repair of raw coordinates; works on ``(dim,)`` or ``(n, dim)``.

        Rounded dimensions are rounded half-up first, then clipped. Categorical
        raw indices are clipped but not snapped, so they can drift between
        neighbouring categories across updates.
        """
        raw = np.asarray(raw, dtype=float)
        if raw.shape[-1] != self.dim:
            raise LengthMismatch(f"raw vector has length {raw.shape[-1]}, space has dim {self.dim}")
        if np.isnan(raw).any():
            raise ValueError("raw vector contains NaN")
        out = raw.copy()
        disc = self._kinds == DISCRETE
        if disc.any():
            out[..., disc] = round_half_up(out[..., disc])
        return np.clip(out, self.raw_lo, self.raw_hi)

    def decode(self, fixed_raw: np.ndarray) -> tuple:
        """Map an already repaired raw vector to parameter values."""
        values = []
        for p, x in zip(self._params, fixed_raw):
            if isinstance(p, ContinuousParam):
                v = 10.0 ** x if p.log_scale else x
                values.append(float(min(max(v, p.lo), p.hi)))
            elif isinstance(p, DiscreteParam):
                values.append(int(x))
            else:
                k = int(round_half_up(x))
                values.append(p.categories[min(max(k, 0), p.m - 1)])
        return tuple(values)

    def indices(self, fixed_raw: np.ndarray) -> np.ndarray:
        """Category indices (nearest, clipped) for the categorical columns."""
        idx = round_half_up(np.asarray(fixed_raw)[..., self.categorical_dims])
        hi = self.raw_hi[self.categorical_dims]
        return np.clip(idx, 0, hi).astype(int)

    def encode(self, values: Sequence[Any]) -> np.ndarray:
        """Raw coordinates of an in-domain value tuple."""
        if len(values) != self.dim:
            raise LengthMismatch(f"got {len(values)} values for a space of dim {self.dim}")
        raw = np.empty(self.dim)
        for j, (p, v) in enumerate(zip(self._params, values)):
            if isinstance(p, CategoricalParam):
                raw[j] = p.index_of(v)
            elif isinstance(p, ContinuousParam) and p.log_scale:
                raw[j] = math.log10(v)
            else:
                raw[j] = v
        return raw

    def contains(self, values: Sequence[Any]) -> bool:
        return len(values) == self.dim and all(
            p.contains(v) for p, v in zip(self._params, values)
        )

    def position(self, values: Sequence[Any]) -> "Position":
        """Build a Position from parameter values (validated against the space)."""
        return repair(self, self.encode(values))

    def to_config(self) -> list[dict]:
        out = []
        for p in self._params:
            if isinstance(p, ContinuousParam):
                out.append({"name": p.name, "kind": "continuous", "lo": p.lo,
                            "hi": p.hi, "log_scale": p.log_scale})
            elif isinstance(p, DiscreteParam):
                out.append({"name": p.name, "kind": "discrete", "lo": p.lo, "hi": p.hi})
            else:
                out.append({"name": p.name, "kind": "categorical",
                            "choices": list(p.categories)})
        return out

    @classmethod
    def from_config(cls, entries: Iterable[dict]) -> "ParamSpace":
        """Build a space from a list of parameter records.

        Each record has ``name`` and ``kind`` plus ``lo``/``hi`` (and optional
        ``log_scale``) for numeric kinds or ``choices`` for categorical ones.
        Unknown keys are rejected.
        """
        allowed = {
            "continuous": {"name", "kind", "lo", "hi", "log_scale"},
            "discrete": {"name", "kind", "lo", "hi"},
            "categorical": {"name", "kind", "choices"},
        }
        params = []
        for n, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise InvalidSpace(f"params[{n}]: expected an object")
            kind = entry.get("kind")
            if kind not in allowed:
                raise InvalidSpace(f"params[{n}].kind: unknown kind {kind!r}")
            extra = set(entry) - allowed[kind]
            if extra:
                raise InvalidSpace(f"params[{n}]: unknown keys {sorted(extra)}")
            missing = allowed[kind] - set(entry) - {"log_scale"}
            if missing:
                raise InvalidSpace(f"params[{n}]: missing keys {sorted(missing)}")
            name = entry["name"]
            try:
                if kind == "continuous":
                    params.append(ContinuousParam(name, float(entry["lo"]), float(entry["hi"]),
                                                  bool(entry.get("log_scale", False))))
                elif kind == "discrete":
                    params.append(DiscreteParam(name, entry["lo"], entry["hi"]))
                else:
                    params.append(CategoricalParam(name, tuple(entry["choices"])))
            except InvalidSpace as exc:
                raise InvalidSpace(f"params[{n}] ({name}): {exc}") from None
            except (TypeError, ValueError) as exc:
                raise InvalidSpace(f"params[{n}] ({name}): {exc}") from None
        return cls(params)


@dataclass(eq=False)
class Position:
    """One candidate solution: repaired raw coordinates plus decoded values."""

    raw: np.ndarray
    values: tuple
    names: tuple = field(default=(), repr=False)

    def __eq__(self, other):
        return (
            isinstance(other, Position)
            and self.values == other.values
            and np.array_equal(self.raw, other.raw)
        )

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.values[self.names.index(key)]
        return self.values[key]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


def repair(space: ParamSpace, raw) -> Position:
    """Map an arbitrary raw vector to the nearest valid Position."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1:
        raise LengthMismatch(f"expected a 1-D raw vector, got shape {raw.shape}")
    fixed = space.repair_raw(raw)
    fixed.setflags(write=False)
    return Position(fixed, space.decode(fixed), tuple(space.names))


def from_unit(space: ParamSpace, r) -> Position:
    """Position for per-dimension uniform draws ``r`` in [0, 1]."""
    r = np.asarray(r, dtype=float)
    return repair(space, space.raw_lo + r * (space.raw_hi - space.raw_lo))


def sample(space: ParamSpace, rng: np.random.Generator) -> Position:
    """Uniform random position inside the raw box."""
    return from_unit(space, rng.random(space.dim))


def adopt_category(current_idx: int, leader_idx: int, leader_fitness: float,
                   population_fitness_sum: float, rng: np.random.Generator) -> int:
    """Adopt the leader's category with probability leader_fitness / fitness_sum.

    Returns ``leader_idx`` on adoption and ``current_idx`` otherwise. One
    uniform draw is consumed per call.
    """
    for value in (leader_fitness, population_fitness_sum):
        if not math.isfinite(value) or value < 0:
            raise InvalidFitness(f"fitness must be finite and non-negative, got {value}")
    if population_fitness_sum <= 0:
        raise InvalidFitness("population fitness sum must be positive")
    p = min(leader_fitness / population_fitness_sum, 1.0)
    return leader_idx if rng.random() < p else current_idx


def hyperparameter_preset(lr_hi: float = 1e-2) -> ParamSpace:
    """Learning rate, batch size and epoch count as tuned for the segmentation model."""
    return ParamSpace(
        [
            ContinuousParam("learning_rate", 1e-5, lr_hi, log_scale=True),
            CategoricalParam("batch_size", (4, 8, 16, 32, 64, 128)),
            DiscreteParam("epochs", 10, 100),
        ]
    )
