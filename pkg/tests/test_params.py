import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smotune.errors import InvalidFitness, InvalidSpace, LengthMismatch
from smotune.params import (
    CategoricalParam,
    ContinuousParam,
    DiscreteParam,
    ParamSpace,
    adopt_category,
    from_unit,
    hyperparameter_preset,
    repair,
    round_half_up,
    sample,
)
from smotune.rng import make_rng

BATCHES = (4, 8, 16, 32, 64, 128)


@pytest.fixture
def preset():
    return hyperparameter_preset()


def test_preset_matches_tuned_hyperparameters(preset):
    assert preset.dim == 3
    lr, batch, epochs = preset.params
    assert (lr.lo, lr.hi, lr.log_scale) == (1e-5, 1e-2, True)
    assert len(batch.categories) == 6
    assert batch.categories == BATCHES
    assert (epochs.lo, epochs.hi) == (10, 100)


def test_from_unit_endpoints():
    unit = ParamSpace([ContinuousParam("x", 0.0, 1.0)])
    assert from_unit(unit, [0.5]).values == (0.5,)
    epochs = ParamSpace([DiscreteParam("epochs", 10, 100)])
    assert from_unit(epochs, [0.0]).values == (10,)
    batch = ParamSpace([CategoricalParam("batch", BATCHES)])
    pos = from_unit(batch, [1.0])
    assert pos.raw[0] == 5.0
    assert pos.values == (128,)


def test_sample_is_seeded_and_in_domain(preset):
    a = sample(preset, make_rng(3))
    b = sample(preset, make_rng(3))
    assert a == b
    assert preset.contains(a.values)


@pytest.mark.parametrize("raw, expected", [(54.3, 54), (104.0, 100), (3.0, 10), (9.4, 10),
                                           (100.5, 100), (54.5, 55), (10.49, 10)])
def test_discrete_round_then_clamp(raw, expected):
    space = ParamSpace([DiscreteParam("epochs", 10, 100)])
    assert repair(space, [raw]).values == (expected,)


def test_categorical_nearest_index(preset):
    pos = repair(preset, [-3.0, 2.6, 50])
    assert pos.values[1] == 32
    # raw categorical index is kept, not snapped
    assert pos.raw[1] == 2.6
    assert repair(preset, [-3.0, 2.5, 50]).values[1] == 32
    assert repair(preset, [-3.0, 2.49, 50]).values[1] == 16
    assert repair(preset, [-3.0, 99.0, 50]).values[1] == 128
    assert repair(preset, [-3.0, -4.0, 50]).values[1] == 4


def test_log_scale_clamp(preset):
    pos = repair(preset, [0.0, 0.0, 10])
    assert pos.raw[0] == math.log10(1e-2)
    assert pos.values[0] == 1e-2
    assert repair(preset, [-9.0, 0.0, 10]).values[0] == 1e-5
    assert repair(preset, [-3.0, 0.0, 10]).values[0] == pytest.approx(1e-3, rel=1e-12)


def test_round_half_up():
    assert list(round_half_up([0.5, 1.5, 2.5, -0.5, -1.5, 2.4999])) == [1, 2, 3, 0, -1, 2]


def test_length_mismatch(preset):
    with pytest.raises(LengthMismatch):
        repair(preset, [1.0, 2.0])


@pytest.mark.parametrize("make", [
    lambda: ContinuousParam("x", 1.0, 1.0),
    lambda: ContinuousParam("x", 2.0, 1.0),
    lambda: ContinuousParam("x", 0.0, 1.0, log_scale=True),
    lambda: DiscreteParam("n", 5, 5),
    lambda: DiscreteParam("n", 1.5, 5),
    lambda: CategoricalParam("c", (1,)),
    lambda: CategoricalParam("c", (4, 8, 8)),
    lambda: ParamSpace([ContinuousParam("x", 0, 1), DiscreteParam("x", 0, 3)]),
])
def test_invalid_spaces(make):
    with pytest.raises(InvalidSpace):
        make()


def test_config_round_trip(preset):
    assert ParamSpace.from_config(preset.to_config()) == preset


def test_config_rejects_duplicate_category():
    with pytest.raises(InvalidSpace, match="duplicate"):
        ParamSpace.from_config([{"name": "b", "kind": "categorical", "choices": [4, 8, 8]}])


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidSpace, match="unknown keys"):
        ParamSpace.from_config([{"name": "x", "kind": "discrete", "lo": 0, "hi": 3, "step": 1}])


def test_position_lookup(preset):
    pos = preset.position((1e-3, 32, 50))
    assert pos["batch_size"] == 32
    assert pos.as_dict() == {"learning_rate": pytest.approx(1e-3), "batch_size": 32, "epochs": 50}


raw_vectors = st.lists(st.floats(-1e12, 1e12, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=300, deadline=None)
@given(raw_vectors)
def test_repair_idempotent_and_in_domain(raw):
    space = hyperparameter_preset()
    once = repair(space, raw)
    assert space.contains(once.values)
    assert repair(space, once.raw) == once


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_discrete_repair_equals_clamped_round(x):
    space = ParamSpace([DiscreteParam("epochs", 10, 100)])
    assert repair(space, [x]).values[0] == int(min(max(math.floor(x + 0.5), 10), 100))


def test_categorical_mapping_is_bijection(preset):
    seen = {repair(preset, [-3.0, float(k), 50]).values[1] for k in range(6)}
    assert seen == set(BATCHES)
    for k, b in enumerate(BATCHES):
        assert preset[1].index_of(b) == k


# -- probabilistic category adoption ----------------------------------------

def test_adopt_certain_and_never():
    rng = make_rng(0)
    assert all(adopt_category(1, 4, 2.5, 2.5, rng) == 4 for _ in range(200))
    assert all(adopt_category(1, 4, 0.0, 2.5, rng) == 1 for _ in range(200))


@pytest.mark.parametrize("lf, total", [(-1.0, 1.0), (1.0, math.inf), (math.nan, 1.0), (0.0, 0.0)])
def test_adopt_invalid_fitness(lf, total):
    with pytest.raises(InvalidFitness):
        adopt_category(0, 1, lf, total, make_rng(0))


def test_adopt_frequency_monte_carlo():
    rng = make_rng(2024)
    n = 10_000
    hits = sum(adopt_category(0, 5, 1.0, 4.0, rng) == 5 for _ in range(n))
    assert abs(hits / n - 0.25) <= 0.02


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.9])
def test_adopt_frequency_chi_square(p):
    from scipy.stats import chisquare

    rng = make_rng(7)
    n = 20_000
    hits = sum(adopt_category(0, 1, p, 1.0, rng) == 1 for _ in range(n))
    stat = chisquare([hits, n - hits], [n * p, n * (1 - p)])
    assert stat.pvalue > 0.01
