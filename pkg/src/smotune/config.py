"""JSON run configuration for ``smotune optimize``.

Example::

    {
      "objective": "mixed_test",
      "seed": 7,
      "output_dir": "runs/mixed",
      "smo": {"population_size": 40, "max_evaluations": 5000}
    }

Keys:

``objective``
    One of ``sphere``, ``rastrigin``, ``mixed_test``, ``toy_seg``,
    ``enhance_score``.
``params``
    Optional list of parameter records (see ``ParamSpace.from_config``).
    Defaults to the objective's own space.
``dim``, ``lo``, ``hi``
    Dimension and bounds of the default sphere/Rastrigin box.
``smo``
    Any :class:`~smotune.smo.SmoConfig` field except ``seed``.
``seed``
    Unsigned 64-bit seed; ``$SMO_SEED`` overrides it.
``dataset``
    For data-driven objectives: ``{"path": dir}`` (``images/`` + ``masks/``
    layout) or ``{"synthetic": {"n": 20, "seed": 0, "size": 256}}``. The
    enhancement objective only uses the images; ``max_images`` caps how many.
``output_dir``
    Where ``runlog.csv`` and ``result.json`` are written.

Unknown keys anywhere are rejected with a :class:`ConfigError` naming them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError, InvalidSpace
from .params import ContinuousParam, ParamSpace
from .rng import env_seed
from .smo import SmoConfig

OBJECTIVES = ("sphere", "rastrigin", "mixed_test", "toy_seg", "enhance_score")
TOP_KEYS = {"objective", "params", "dim", "lo", "hi", "smo", "seed", "dataset", "output_dir"}
DATASET_KEYS = {"path", "synthetic", "max_images", "manifest"}
SYNTH_KEYS = {"n", "seed", "size"}


@dataclass(frozen=True)
class RunConfig:
    objective: str
    smo: SmoConfig
    params: Optional[list] = None
    dim: int = 2
    lo: Optional[float] = None
    hi: Optional[float] = None
    dataset: Optional[dict] = None
    output_dir: str = "smo_output"
    base_dir: str = field(default=".", compare=False)

    @property
    def seed(self) -> int:
        return self.smo.seed

    def with_overrides(self, **kw) -> "RunConfig":
        smo_kw = {k: v for k, v in kw.items() if k in SmoConfig.field_names() and v is not None}
        top_kw = {k: v for k, v in kw.items() if k not in smo_kw and v is not None}
        try:
            smo = replace(self.smo, **smo_kw) if smo_kw else self.smo
        except ConfigError as exc:
            raise ConfigError(f"smo.{exc}") from None
        return replace(self, smo=smo, **top_kw)

    def resolve(self, path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def space(self, default: ParamSpace) -> ParamSpace:
        if self.params is None:
            return default
        try:
            return ParamSpace.from_config(self.params)
        except InvalidSpace as exc:
            raise ConfigError(str(exc)) from None


def _number(name, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return int(value) if integer else float(value)


def parse_config(data: Any, base_dir=".", env: bool = True) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    objective = data.get("objective")
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective: must be one of {list(OBJECTIVES)}, got {objective!r}")

    smo_data = data.get("smo", {})
    if not isinstance(smo_data, dict):
        raise ConfigError("smo: expected an object")
    allowed = set(SmoConfig.field_names()) - {"seed"}
    unknown = set(smo_data) - allowed
    if unknown:
        raise ConfigError(f"smo: unknown keys {sorted(unknown)}")
    smo_kw = {}
    for key, value in smo_data.items():
        integer = isinstance(getattr(SmoConfig(), key), int)
        smo_kw[key] = _number(f"smo.{key}", value, integer=integer)

    seed = data.get("seed", 0)
    seed = _number("seed", seed, integer=True)
    if env:
        try:
            seed = env_seed(seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        smo = SmoConfig(seed=seed, **smo_kw)
    except ConfigError as exc:
        raise ConfigError(f"smo.{exc}" if not str(exc).startswith("seed") else str(exc)) from None

    params = data.get("params")
    if params is not None:
        if not isinstance(params, list):
            raise ConfigError("params: expected a list of parameter records")
        try:
            ParamSpace.from_config(params)
        except InvalidSpace as exc:
            raise ConfigError(str(exc)) from None

    dim = _number("dim", data.get("dim", 2), integer=True)
    if dim < 1:
        raise ConfigError("dim: must be >= 1")
    lo = data.get("lo")
    hi = data.get("hi")
    lo = None if lo is None else _number("lo", lo)
    hi = None if hi is None else _number("hi", hi)

    dataset = data.get("dataset")
    if objective in ("toy_seg", "enhance_score"):
        if dataset is None:
            raise ConfigError(f"dataset: required for objective {objective}")
    if dataset is not None:
        if not isinstance(dataset, dict):
            raise ConfigError("dataset: expected an object")
        unknown = set(dataset) - DATASET_KEYS
        if unknown:
            raise ConfigError(f"dataset: unknown keys {sorted(unknown)}")
        if ("path" in dataset) == ("synthetic" in dataset):
            raise ConfigError("dataset: give exactly one of 'path' or 'synthetic'")
        if "synthetic" in dataset:
            synth = dataset["synthetic"]
            if not isinstance(synth, dict) or set(synth) - SYNTH_KEYS:
                raise ConfigError(f"dataset.synthetic: expected an object with keys {sorted(SYNTH_KEYS)}")
            n = _number("dataset.synthetic.n", synth.get("n", 20), integer=True)
            if n < 1:
                raise ConfigError("dataset.synthetic.n: must be >= 1")
            _number("dataset.synthetic.seed", synth.get("seed", 0), integer=True)
            size = _number("dataset.synthetic.size", synth.get("size", 256), integer=True)
            if size < 8:
                raise ConfigError("dataset.synthetic.size: must be >= 8")
        elif not isinstance(dataset["path"], str):
            raise ConfigError("dataset.path: expected a string")
        if "max_images" in dataset:
            if _number("dataset.max_images", dataset["max_images"], integer=True) < 1:
                raise ConfigError("dataset.max_images: must be >= 1")

    output_dir = data.get("output_dir", "smo_output")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")
    return RunConfig(objective, smo, params, dim, lo, hi, dataset, output_dir, str(base_dir))


def load_config(path, env: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(data, base_dir=path.parent, env=env)


def build_objective(cfg: RunConfig):
    """Instantiate the configured objective; returns ``(objective, space)``."""
    from . import objectives as ob

    if cfg.objective in ("sphere", "rastrigin"):
        factory = ob.sphere_objective if cfg.objective == "sphere" else ob.rastrigin_objective
        base = factory(cfg.dim)
        lo = cfg.lo if cfg.lo is not None else base.space[0].lo
        hi = cfg.hi if cfg.hi is not None else base.space[0].hi
        try:
            default = ParamSpace([ContinuousParam(f"x{j}", lo, hi) for j in range(cfg.dim)])
        except InvalidSpace as exc:
            raise ConfigError(f"lo/hi: {exc}") from None
        space = cfg.space(default)
        for p in space:
            if not isinstance(p, ContinuousParam):
                raise ConfigError(f"params: {cfg.objective} needs continuous parameters, {p.name} is {p.kind}")
        return base.fn, space

    if cfg.objective == "mixed_test":
        space = cfg.space(ob.mixed_test_objective().space)
        if space.names != ["learning_rate", "batch_size", "epochs"]:
            raise ConfigError("params: mixed_test needs learning_rate, batch_size, epochs in that order")
        return ob.mixed_test, space

    pairs = load_dataset_config(cfg)
    if cfg.objective == "toy_seg":
        obj = ob.ToySegObjective([(p.image, p.mask) for p in pairs])
        return obj, cfg.space(obj.space)

    from .enhance import EnhanceObjective
    obj = EnhanceObjective([p.image for p in pairs])
    return obj, cfg.space(obj.space)


def load_dataset_config(cfg: RunConfig) -> list:
    from .data import load_dataset, synth_dataset

    ds = cfg.dataset
    if "synthetic" in ds:
        s = ds["synthetic"]
        pairs = synth_dataset(int(s.get("n", 20)), int(s.get("seed", 0)), int(s.get("size", 256)))
    else:
        root = cfg.resolve(ds["path"])
        if not root.is_dir():
            raise ConfigError(f"dataset.path: {root} is not a directory")
        manifest = cfg.resolve(ds["manifest"]) if "manifest" in ds else None
        pairs = load_dataset(root, manifest=manifest)
        if not pairs:
            raise ConfigError(f"dataset.path: no image/mask pairs under {root}")
    if "max_images" in ds:
        pairs = pairs[: int(ds["max_images"])]
    return pairs


def dump_config(cfg: RunConfig) -> str:
    smo = {k: getattr(cfg.smo, k) for k in SmoConfig.field_names() if k != "seed"}
    data = {"objective": cfg.objective, "seed": cfg.seed, "smo": smo, "output_dir": cfg.output_dir}
    if cfg.params is not None:
        data["params"] = cfg.params
    if cfg.objective in ("sphere", "rastrigin"):
        data["dim"] = cfg.dim
        if cfg.lo is not None:
            data["lo"] = cfg.lo
        if cfg.hi is not None:
            data["hi"] = cfg.hi
    if cfg.dataset is not None:
        data["dataset"] = cfg.dataset
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
