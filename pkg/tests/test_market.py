import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fppe.market import (
    GenerationError,
    ItemBatch,
    MarketDefinition,
    ValueDistribution,
    load_problem,
    problem_from_json,
    problem_to_json,
    sample_items,
    save_problem,
    scale_budgets_and_values,
    scale_values_and_supply,
    values_from_csv,
    values_to_csv,
)


def uniform_market(budgets):
    return MarketDefinition(
        budgets=np.asarray(budgets, dtype=float),
        value_process=ValueDistribution.uniform(),
    )


def test_constant_family_batch():
    mdef = MarketDefinition(
        budgets=np.array([0.5]), value_process=ValueDistribution.constant(1.0)
    )
    batch = sample_items(mdef, 3, seed=7)
    np.testing.assert_array_equal(batch.values, [[1.0, 1.0, 1.0]])
    assert batch.supply_weight == pytest.approx(1.0 / 3.0)


def test_sampling_is_deterministic():
    mdef = uniform_market([0.3, 0.7])
    a = sample_items(mdef, 50, seed=11)
    b = sample_items(mdef, 50, seed=11)
    np.testing.assert_array_equal(a.values, b.values)
    c = sample_items(mdef, 50, seed=12)
    assert not np.array_equal(a.values, c.values)


def test_uniform_sample_mean_lln():
    # mean of 10000 uniforms has sd ~ 0.0029; 0.02 is a ~7-sigma band
    mdef = uniform_market([1.0, 1.0])
    batch = sample_items(mdef, 10_000, seed=1)
    means = batch.values.mean(axis=1)
    assert np.all(np.abs(means - 0.5) < 0.02)


@pytest.mark.parametrize(
    "process,bound",
    [
        (ValueDistribution.uniform(), 1.0),
        (ValueDistribution.exponential(), 12.0),
        (ValueDistribution.exponential(clip_bound=3.0), 3.0),
        (ValueDistribution.truncated_normal(), 3.0),
    ],
)
def test_draws_respect_value_bound(process, bound):
    mdef = MarketDefinition(budgets=np.ones(3), value_process=process)
    assert mdef.value_bound == pytest.approx(bound)
    batch = sample_items(mdef, 4000, seed=5)
    assert batch.values.min() >= 0.0
    assert batch.values.max() <= bound + 1e-12


def test_exponential_clip_mass():
    # a tight clip must actually bind with the tail probability mass
    mdef = MarketDefinition(
        budgets=np.ones(2),
        value_process=ValueDistribution.exponential(clip_bound=3.0),
    )
    batch = sample_items(mdef, 50_000, seed=9)
    assert (batch.values == 3.0).mean() == pytest.approx(np.exp(-3.0), abs=5e-3)


def test_scale_budgets_and_values_identity_and_arithmetic():
    mdef = MarketDefinition(
        budgets=np.array([0.5]), value_process=ValueDistribution.constant(1.0)
    )
    batch = ItemBatch(values=np.array([[1.0]]), supply_weight=1.0)
    same_mdef, same_batch = scale_budgets_and_values(mdef, batch, 1.0)
    np.testing.assert_array_equal(same_mdef.budgets, mdef.budgets)
    np.testing.assert_array_equal(same_batch.values, batch.values)

    scaled_mdef, scaled_batch = scale_budgets_and_values(mdef, batch, 2.0)
    np.testing.assert_array_equal(scaled_mdef.budgets, [1.0])
    np.testing.assert_array_equal(scaled_batch.values, [[2.0]])
    assert scaled_batch.supply_weight == batch.supply_weight


def test_scale_values_and_supply_arithmetic():
    batch = ItemBatch(values=np.array([[1.0, 2.0]]), supply_weight=0.5)
    out = scale_values_and_supply(batch, 1.0)
    np.testing.assert_array_equal(out.values, batch.values)
    out = scale_values_and_supply(batch, 2.0)
    np.testing.assert_array_equal(out.values, [[2.0, 4.0]])
    assert out.supply_weight == pytest.approx(0.25)


@pytest.mark.parametrize("alpha", [0.0, -1.0])
def test_scale_rejects_nonpositive_alpha(alpha):
    mdef = uniform_market([1.0])
    batch = sample_items(mdef, 2, seed=0)
    with pytest.raises(ValueError):
        scale_budgets_and_values(mdef, batch, alpha)
    with pytest.raises(ValueError):
        scale_values_and_supply(batch, alpha)


@settings(max_examples=30, deadline=None)
@given(
    alpha=st.floats(min_value=0.1, max_value=10.0),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_scaling_round_trip_property(alpha, seed):
    mdef = uniform_market([0.4, 1.3])
    batch = sample_items(mdef, 8, seed=seed)
    _, up = scale_budgets_and_values(mdef, batch, alpha)
    np.testing.assert_allclose(up.values, alpha * batch.values, rtol=1e-12)
    down = scale_values_and_supply(batch, alpha)
    assert down.supply_weight * alpha == pytest.approx(batch.supply_weight, rel=1e-12)


def test_batch_validation():
    with pytest.raises(GenerationError):
        ItemBatch(values=np.array([[np.nan]]), supply_weight=1.0)
    with pytest.raises(GenerationError):
        ItemBatch(values=np.array([[-0.1]]), supply_weight=1.0)
    with pytest.raises(ValueError):
        ItemBatch(values=np.array([[1.0]]), supply_weight=0.0)
    with pytest.raises(ValueError):
        sample_items(uniform_market([1.0]), 0, seed=0)
    with pytest.raises(ValueError):
        MarketDefinition(budgets=np.array([0.0]), value_process=ValueDistribution.uniform())


def test_custom_matrix_family_draws_columns():
    matrix = np.array([[1.0, 0.0], [0.0, 2.0]])
    mdef = MarketDefinition(
        budgets=np.ones(2), value_process=ValueDistribution.custom(matrix)
    )
    batch = sample_items(mdef, 1000, seed=3)
    cols = {tuple(c) for c in batch.values.T}
    assert cols == {(1.0, 0.0), (0.0, 2.0)}
    share = (batch.values[0] == 1.0).mean()
    assert abs(share - 0.5) < 0.06


def test_market_json_round_trip():
    mdef = MarketDefinition(
        budgets=np.array([0.2, 1.1]),
        value_process=ValueDistribution.exponential(rate=[1.0, 2.0]),
    )
    clone = MarketDefinition.from_json(json.loads(json.dumps(mdef.to_json())))
    np.testing.assert_array_equal(clone.budgets, mdef.budgets)
    assert clone.value_process.family == "exponential"
    a = sample_items(mdef, 20, seed=4).values
    b = sample_items(clone, 20, seed=4).values
    np.testing.assert_array_equal(a, b)


def test_problem_json_schema_and_round_trip(tmp_path):
    mdef = uniform_market([0.2, 0.9])
    batch = sample_items(mdef, 6, seed=13)
    obj = problem_to_json(mdef.budgets, batch)
    assert set(obj) == {"n", "budgets", "values", "supply_weight", "seed"}
    assert obj["n"] == 2 and obj["seed"] == 13
    budgets, clone = problem_from_json(obj)
    np.testing.assert_array_equal(budgets, mdef.budgets)
    np.testing.assert_array_equal(clone.values, batch.values)

    path = tmp_path / "problem.json"
    save_problem(path, mdef.budgets, batch)
    budgets2, clone2 = load_problem(path)
    np.testing.assert_array_equal(budgets2, mdef.budgets)
    np.testing.assert_array_equal(clone2.values, batch.values)


def test_values_csv_round_trip(tmp_path):
    batch = sample_items(uniform_market([0.5, 0.5, 0.5]), 7, seed=2)
    path = tmp_path / "values.csv"
    values_to_csv(batch, path)
    clone = values_from_csv(path, supply_weight=batch.supply_weight)
    np.testing.assert_array_equal(clone.values, batch.values)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 3  # one row per buyer


def test_batches_are_immutable():
    batch = sample_items(uniform_market([1.0]), 3, seed=0)
    with pytest.raises(ValueError):
        batch.values[0, 0] = 2.0
