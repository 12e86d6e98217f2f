"""Spider Monkey Optimization over mixed-variable parameter spaces.

One iteration runs the six phases in order::

    local leader -> global leader -> leader learning
        -> local leader decision -> global leader decision

Positions live in the raw coordinates of a :class:`~smotune.params.ParamSpace`
and are repaired after every update, so the objective only ever sees valid
parameter values. Objectives are minimized; the swarm internally works with
the positive, maximization-oriented fitness ``fitness_transform(objective)``.

Candidate positions for a phase are generated from the swarm state at the
start of the phase (or pass), evaluated as one batch, and applied in monkey
index order. Passing a parallel ``map_fn`` (e.g. ``ThreadPoolExecutor.map``)
therefore changes nothing but wall time.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InvalidFitness, NonFiniteObjective, ObjectiveFailure
from .params import ParamSpace, Position
from .rng import make_rng

__all__ = [
    "SmoConfig",
    "Monkey",
    "Group",
    "Swarm",
    "IterationRecord",
    "RunLog",
    "Evaluator",
    "fitness_transform",
    "selection_probability",
    "position_update",
    "initialize",
    "local_leader_phase",
    "global_leader_phase",
    "leader_learning",
    "local_leader_decision",
    "global_leader_decision",
    "mean_pairwise_distance",
    "check_stop",
    "run",
]

STOP_BUDGET = "budget"
STOP_STAGNATION = "stagnation"
STOP_DIVERSITY = "diversity"
STOP_FAILURE = "objective_failure"


@dataclass(frozen=True)
class SmoConfig:
    population_size: int = 40
    max_groups: int = 5
    local_leader_limit: int = 30
    global_leader_limit: int = 50
    perturbation_rate: float = 1.0
    max_iterations: int = 1000
    max_evaluations: int = 10_000
    stagnation_epsilon: float = 1e-8
    stagnation_window: int = 25
    diversity_epsilon: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        ints = ("population_size", "max_groups", "local_leader_limit", "global_leader_limit",
                "max_iterations", "max_evaluations", "stagnation_window", "seed")
        for name in ints:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
        if self.population_size < 4:
            raise ConfigError("population_size: must be >= 4")
        if self.max_groups < 1:
            raise ConfigError("max_groups: must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations: must be >= 1")
        if self.max_evaluations < self.population_size:
            raise ConfigError("max_evaluations: must cover the initial population")
        if self.local_leader_limit < 0 or self.global_leader_limit < 0:
            raise ConfigError("leader limits must be >= 0")
        if self.stagnation_window < 1:
            raise ConfigError("stagnation_window: must be >= 1")
        if not 0 < self.perturbation_rate <= 1:
            raise ConfigError("perturbation_rate: must lie in (0, 1]")
        for name in ("stagnation_epsilon", "diversity_epsilon"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value >= 0):
                raise ConfigError(f"{name}: must be a non-negative number")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must fit in an unsigned 64-bit integer")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def fitness_transform(objective: float) -> float:
    """Positive fitness that decreases strictly with the (minimized) objective."""
    if not math.isfinite(objective):
        raise NonFiniteObjective(f"objective is not finite: {objective}")
    if objective >= 0:
        return 1.0 / (1.0 + objective)
    return 1.0 + abs(objective)


def _fitness_array(objective: np.ndarray) -> np.ndarray:
    objective = np.asarray(objective, dtype=float)
    if not np.isfinite(objective).all():
        raise NonFiniteObjective("objective values must be finite")
    return np.where(objective >= 0, 1.0 / (1.0 + np.abs(objective)), 1.0 + np.abs(objective))


def selection_probability(swarm_or_fitness) -> np.ndarray:
    """Global-leader phase selection probability ``0.9 * f / max(f) + 0.1``."""
    fitness = swarm_or_fitness.fitness if isinstance(swarm_or_fitness, Swarm) else swarm_or_fitness
    fitness = np.asarray(fitness, dtype=float)
    if fitness.size == 0 or not np.isfinite(fitness).all() or (fitness <= 0).any():
        raise InvalidFitness("selection probabilities need finite, positive fitness values")
    prob = 0.9 * (fitness / fitness.max()) + 0.1
    # guard the closed interval against the last ulp of rounding
    return np.clip(prob, 0.1, 1.0)


def position_update(x, attractor, partner_diff, r, u):
    """``x + r * (attractor - x) + u * partner_diff``; the shared update form.

    ``partner_diff`` is ``SM_r - SM_i`` for the leader phases and
    ``SM_r - LL_k`` for the local leader decision phase.
    """
    return x + r * (attractor - x) + u * partner_diff


@dataclass(frozen=True)
class Monkey:
    position: Position
    objective: float
    fitness: float


@dataclass
class Group:
    members: list
    local_leader: int
    local_limit_count: int = 0
    leader_objective: float = math.inf


@dataclass(eq=False)
class Swarm:
    raw: np.ndarray
    positions: list
    objective: np.ndarray
    groups: list
    global_leader: int
    global_limit_count: int = 0
    global_objective: float = math.inf

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def fitness(self) -> np.ndarray:
        return _fitness_array(self.objective)

    def monkey(self, i: int) -> Monkey:
        return Monkey(self.positions[i], float(self.objective[i]),
                      fitness_transform(float(self.objective[i])))

    def group_of(self, i: int) -> int:
        for k, g in enumerate(self.groups):
            if i in g.members:
                return k
        raise IndexError(i)

    def copy(self) -> "Swarm":
        return Swarm(
            self.raw.copy(), list(self.positions), self.objective.copy(),
            [Group(list(g.members), g.local_leader, g.local_limit_count, g.leader_objective)
             for g in self.groups],
            self.global_leader, self.global_limit_count, self.global_objective,
        )


class Evaluator:
    """Budgeted, checked objective evaluation.

    Batches that would overrun ``max_evaluations`` are truncated; callers see
    fewer results and ``exhausted`` turns true.
    """

    def __init__(self, objective: Callable[[Position], float], space: ParamSpace,
                 max_evaluations: int = math.inf, map_fn: Callable = map):
        self.objective = objective
        self.space = space
        self.max_evaluations = max_evaluations
        self.map_fn = map_fn
        self.count = 0

    @property
    def remaining(self):
        return self.max_evaluations - self.count

    @property
    def exhausted(self) -> bool:
        return self.count >= self.max_evaluations

    def _one(self, position: Position) -> float:
        if not self.space.contains(position.values):
            raise AssertionError(f"out-of-domain position reached the objective: {position.values}")
        try:
            value = float(self.objective(position))
        except ObjectiveFailure:
            raise
        except Exception as exc:
            raise ObjectiveFailure(f"objective raised {type(exc).__name__}: {exc}") from exc
        if not math.isfinite(value):
            raise ObjectiveFailure(f"objective returned non-finite value {value} at {position.values}")
        return value

    def __call__(self, positions: list) -> np.ndarray:
        n = int(min(len(positions), max(self.remaining, 0)))
        values = np.fromiter(self.map_fn(self._one, positions[:n]), dtype=float, count=n)
        self.count += n
        return values


def _positions(space: ParamSpace, fixed_raw: np.ndarray) -> list:
    names = tuple(space.names)
    out = []
    for row in fixed_raw:
        row = row.copy()
        row.setflags(write=False)
        out.append(Position(row, space.decode(row), names))
    return out


def _partners(members: np.ndarray, local: np.ndarray, rng) -> Optional[np.ndarray]:
    """Random partner ``r != i`` from the same group for each local slot."""
    n = len(members)
    if n < 2:
        return None
    offsets = rng.integers(1, n, size=len(local))
    return members[(local + offsets) % n]


def _propose(swarm: Swarm, space: ParamSpace, rng, members: np.ndarray, local: np.ndarray,
             attractor_idx: int, update_mask: np.ndarray, adopt_p: float) -> np.ndarray:
    """Leader-attraction candidates for ``members[local]``.

    Numeric dimensions follow ``x + R (A - x) + U(-1,1) (x_r - x)``;
    categorical dimensions use the leader term only and then adopt the
    leader's category with probability ``adopt_p``.
    """
    idx = members[local]
    x = swarm.raw[idx]
    a = swarm.raw[attractor_idx]
    k, d = x.shape
    r = rng.random((k, d))
    u = rng.uniform(-1.0, 1.0, (k, d))
    partner = _partners(members, local, rng)
    diff = swarm.raw[partner] - x if partner is not None else np.zeros_like(x)
    new = position_update(x, a, diff, r, u)
    cat = space.categorical_dims
    if cat.size:
        new[:, cat] = position_update(x[:, cat], a[cat], 0.0, r[:, cat], 0.0)
        adopt = rng.random((k, cat.size)) < adopt_p
        leader_cat = space.indices(a).astype(float)
        block = new[:, cat]
        block[adopt] = np.broadcast_to(leader_cat, block.shape)[adopt]
        new[:, cat] = block
    new = np.where(update_mask, new, x)
    return space.repair_raw(new)


def _greedy_apply(swarm: Swarm, idx: np.ndarray, fixed: np.ndarray, positions: list,
                  values: np.ndarray) -> int:
    accepted = 0
    for n, value in enumerate(values):
        i = idx[n]
        if value < swarm.objective[i]:
            swarm.raw[i] = fixed[n]
            swarm.positions[i] = positions[n]
            swarm.objective[i] = value
            accepted += 1
    return accepted


def _select_leaders(swarm: Swarm) -> None:
    for g in swarm.groups:
        members = np.asarray(g.members)
        g.local_leader = int(members[np.argmin(swarm.objective[members])])
        g.leader_objective = float(swarm.objective[g.local_leader])
    swarm.global_leader = int(np.argmin(swarm.objective))
    swarm.global_objective = float(swarm.objective[swarm.global_leader])


def initialize(objective, space: ParamSpace, config: SmoConfig, rng=None,
               evaluator: Optional[Evaluator] = None) -> Swarm:
    """Uniformly sampled swarm in a single group, leaders chosen greedily."""
    rng = make_rng(config.seed) if rng is None else rng
    evaluator = evaluator or Evaluator(objective, space, config.max_evaluations)
    n = config.population_size
    raw = space.raw_lo + rng.random((n, space.dim)) * (space.raw_hi - space.raw_lo)
    fixed = space.repair_raw(raw)
    positions = _positions(space, fixed)
    values = evaluator(positions)
    if len(values) < n:
        raise ConfigError("max_evaluations: budget too small for the initial population")
    swarm = Swarm(fixed, positions, values, [Group(list(range(n)), 0)], 0)
    _select_leaders(swarm)
    return swarm


def local_leader_phase(swarm: Swarm, space: ParamSpace, rng, evaluator: Evaluator,
                       perturbation_rate: float = 1.0) -> Swarm:
    """Every monkey moves toward its local leader; improvements are kept."""
    fitness = swarm.fitness
    for g in swarm.groups:
        if evaluator.exhausted:
            break
        members = np.asarray(g.members)
        n = len(members)
        local = np.arange(n)
        if perturbation_rate < 1.0:
            mask = rng.random((n, space.dim)) < perturbation_rate
        else:
            mask = np.ones((n, space.dim), dtype=bool)
        adopt_p = fitness[g.local_leader] / fitness[members].sum()
        fixed = _propose(swarm, space, rng, members, local, g.local_leader, mask, adopt_p)
        positions = _positions(space, fixed)
        values = evaluator(positions)
        _greedy_apply(swarm, members, fixed, positions, values)
    return swarm


def global_leader_phase(swarm: Swarm, space: ParamSpace, rng, evaluator: Evaluator) -> Swarm:
    """Fitness-proportional monkeys move one dimension toward the global leader.

    Each group gets as many update attempts as it has members, spent over
    repeated passes in which every member is selected with its probability.
    """
    fitness = swarm.fitness
    prob = selection_probability(fitness)
    adopt_p = fitness[swarm.global_leader] / fitness.sum()
    for g in swarm.groups:
        members = np.asarray(g.members)
        n = len(members)
        attempts = 0
        while attempts < n and not evaluator.exhausted:
            chosen = np.flatnonzero(rng.random(n) < prob[members])[: n - attempts]
            if chosen.size == 0:
                continue
            attempts += chosen.size
            mask = np.zeros((chosen.size, space.dim), dtype=bool)
            mask[np.arange(chosen.size), rng.integers(0, space.dim, size=chosen.size)] = True
            fixed = _propose(swarm, space, rng, members, chosen, swarm.global_leader, mask, adopt_p)
            positions = _positions(space, fixed)
            values = evaluator(positions)
            _greedy_apply(swarm, members[chosen], fixed, positions, values)
    return swarm


def leader_learning(swarm: Swarm) -> bool:
    """Greedy leader refresh; returns True when any leader improved.

    A leader whose objective did not strictly improve has its limit counter
    incremented, otherwise the counter resets. Ties go to the lowest index.
    """
    changed = False
    best = int(np.argmin(swarm.objective))
    if swarm.objective[best] < swarm.global_objective:
        swarm.global_limit_count = 0
        changed = True
    else:
        swarm.global_limit_count += 1
    swarm.global_leader = best
    swarm.global_objective = float(swarm.objective[best])
    for g in swarm.groups:
        members = np.asarray(g.members)
        lead = int(members[np.argmin(swarm.objective[members])])
        if swarm.objective[lead] < g.leader_objective:
            g.local_limit_count = 0
            changed = True
        else:
            g.local_limit_count += 1
        g.local_leader = lead
        g.leader_objective = float(swarm.objective[lead])
    return changed


def local_leader_decision(swarm: Swarm, space: ParamSpace, rng, evaluator: Evaluator,
                          local_leader_limit: int, perturbation_rate: float = 1.0) -> list:
    """Scatter groups whose local leader has stagnated past the limit.

    Each coordinate is redrawn uniformly with probability
    ``perturbation_rate`` and otherwise moved by
    ``x + R (GL - x) + U(0,1) (x_r - LL)``. Results replace the old positions
    unconditionally, except for the global leader, which is kept so the best
    solution is never lost. Returns the indices of the groups that were reset.
    """
    reset = []
    gl = swarm.raw[swarm.global_leader].copy()
    for k, g in enumerate(swarm.groups):
        if g.local_limit_count <= local_leader_limit:
            continue
        reset.append(k)
        g.local_limit_count = 0
        members = np.asarray(g.members)
        local = np.flatnonzero(members != swarm.global_leader)
        if local.size and not evaluator.exhausted:
            idx = members[local]
            x = swarm.raw[idx]
            shape = x.shape
            redraw = rng.random(shape) < perturbation_rate
            fresh = space.raw_lo + rng.random(shape) * (space.raw_hi - space.raw_lo)
            r = rng.random(shape)
            u = rng.random(shape)
            partner = _partners(members, local, rng)
            ll = swarm.raw[g.local_leader]
            diff = swarm.raw[partner] - ll if partner is not None else np.zeros(shape)
            new = np.where(redraw, fresh, position_update(x, gl, diff, r, u))
            fixed = space.repair_raw(new)
            positions = _positions(space, fixed)
            values = evaluator(positions)
            for n, value in enumerate(values):
                i = idx[n]
                swarm.raw[i] = fixed[n]
                swarm.positions[i] = positions[n]
                swarm.objective[i] = value
        lead = int(members[np.argmin(swarm.objective[members])])
        g.local_leader = lead
        g.leader_objective = float(swarm.objective[lead])
    return reset


def global_leader_decision(swarm: Swarm, config: SmoConfig) -> Optional[str]:
    """Fission or fusion once the global leader has stagnated past the limit.

    Fission splits the largest group (lowest index on ties) into two
    contiguous halves; when the group cap is reached, or nothing can be split,
    all groups fuse back into one. Returns ``"fission"``, ``"fusion"`` or None.
    """
    if swarm.global_limit_count <= config.global_leader_limit:
        return None
    swarm.global_limit_count = 0
    sizes = [len(g.members) for g in swarm.groups]
    largest = int(np.argmax(sizes))
    if len(swarm.groups) < config.max_groups and sizes[largest] >= 2:
        members = sorted(swarm.groups[largest].members)
        half = len(members) // 2
        swarm.groups[largest : largest + 1] = [Group(members[:half], members[0]),
                                               Group(members[half:], members[half])]
        event = "fission"
    else:
        swarm.groups = [Group(list(range(swarm.size)), 0)]
        event = "fusion"
    for g in swarm.groups:
        members = np.asarray(g.members)
        g.local_leader = int(members[np.argmin(swarm.objective[members])])
        g.leader_objective = float(swarm.objective[g.local_leader])
    return event


def mean_pairwise_distance(raw: np.ndarray) -> float:
    """Mean Euclidean distance over all unordered pairs of rows."""
    raw = np.asarray(raw, dtype=float)
    n = len(raw)
    if n < 2:
        return 0.0
    diff = raw[:, None, :] - raw[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    return float(dist[np.triu_indices(n, 1)].mean())


@dataclass
class IterationRecord:
    iteration: int
    evaluations: int
    best_objective: float
    best_values: tuple
    group_count: int
    events: list = field(default_factory=list)
    leaders_changed: bool = True


@dataclass
class RunLog:
    records: list = field(default_factory=list)
    evaluations: int = 0
    stop_reason: Optional[str] = None
    stop_detail: str = ""
    best_position: Optional[Position] = None
    best_objective: float = math.inf
    seed: Optional[int] = None

    CSV_COLUMNS = ("iteration", "evaluations", "best_objective", "group_count", "stop_reason")

    @property
    def iterations(self) -> int:
        return len(self.records)

    def best_curve(self) -> np.ndarray:
        return np.array([r.best_objective for r in self.records])

    def to_csv(self, target=None) -> str:
        """Write the per-iteration trace; the stop reason fills the last row only."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        last = len(self.records) - 1
        for n, rec in enumerate(self.records):
            writer.writerow([rec.iteration, rec.evaluations, repr(float(rec.best_objective)),
                             rec.group_count, self.stop_reason if n == last else ""])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text

    def result_dict(self, objective_name: str = "") -> dict:
        pos = self.best_position
        return {
            "objective": objective_name,
            "best_objective": self.best_objective,
            "best_position": pos.as_dict() if pos is not None else None,
            "raw": [float(v) for v in pos.raw] if pos is not None else None,
            "evaluations": self.evaluations,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "stop_detail": self.stop_detail,
            "seed": self.seed,
        }

    def write_result(self, target, objective_name: str = "") -> str:
        text = json.dumps(self.result_dict(objective_name), indent=2, sort_keys=True) + "\n"
        with open(target, "w") as fh:
            fh.write(text)
        return text


def check_stop(swarm: Swarm, log: RunLog, config: SmoConfig) -> tuple:
    """Return ``(stop, reason, detail)`` for the state after an iteration."""
    if not log.records:
        return False, None, ""
    if log.records[-1].iteration >= config.max_iterations:
        return True, STOP_BUDGET, "max_iterations"
    if log.evaluations >= config.max_evaluations:
        return True, STOP_BUDGET, "max_evaluations"
    w = config.stagnation_window
    if len(log.records) > w:
        delta = abs(log.records[-1].best_objective - log.records[-1 - w].best_objective)
        if delta < config.stagnation_epsilon:
            return True, STOP_STAGNATION, "best_objective"
    if mean_pairwise_distance(swarm.raw) < config.diversity_epsilon:
        return True, STOP_DIVERSITY, "population"
    if len(log.records) >= w and not any(r.leaders_changed for r in log.records[-w:]):
        return True, STOP_STAGNATION, "leaders"
    return False, None, ""


def run(objective: Callable[[Position], float], space: ParamSpace, config: SmoConfig = SmoConfig(),
        map_fn: Callable = map, callback: Optional[Callable] = None) -> tuple:
    """Minimize ``objective`` over ``space``.

    Parameters
    ----------
    objective : callable
        Pure function of a :class:`Position` returning a finite float.
    space : ParamSpace
    config : SmoConfig
    map_fn : callable, optional
        ``map``-compatible function used to evaluate candidate batches.
    callback : callable, optional
        Called as ``callback(swarm, record)`` after every iteration.

    Returns
    -------
    log : RunLog
    best : Position
        Best position ever evaluated.

    Raises
    ------
    ObjectiveFailure
        With ``exc.log`` holding the partial log.
    """
    rng = make_rng(config.seed)
    evaluator = Evaluator(objective, space, config.max_evaluations, map_fn)
    log = RunLog(seed=config.seed)

    def track_best():
        i = int(np.argmin(swarm.objective))
        if swarm.objective[i] < log.best_objective:
            log.best_objective = float(swarm.objective[i])
            log.best_position = swarm.positions[i]

    try:
        swarm = initialize(objective, space, config, rng, evaluator)
        track_best()
        iteration = 0
        while True:
            iteration += 1
            events = []
            local_leader_phase(swarm, space, rng, evaluator, config.perturbation_rate)
            global_leader_phase(swarm, space, rng, evaluator)
            changed = leader_learning(swarm)
            track_best()
            for k in local_leader_decision(swarm, space, rng, evaluator,
                                           config.local_leader_limit, config.perturbation_rate):
                events.append(f"lld_reset:{k}")
            topology = global_leader_decision(swarm, config)
            if topology:
                events.append(topology)
            track_best()
            log.evaluations = evaluator.count
            log.records.append(IterationRecord(
                iteration, evaluator.count, log.best_objective, log.best_position.values,
                len(swarm.groups), events, changed,
            ))
            if callback is not None:
                callback(swarm, log.records[-1])
            stop, reason, detail = check_stop(swarm, log, config)
            if stop:
                log.stop_reason, log.stop_detail = reason, detail
                return log, log.best_position
    except ObjectiveFailure as exc:
        log.evaluations = evaluator.count
        log.stop_reason = STOP_FAILURE
        log.stop_detail = str(exc)
        exc.log = log
        raise
