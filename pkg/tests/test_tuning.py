import numpy as np
import pytest

from nested_covar.errors import BudgetExhausted, DomainError
from nested_covar.models.surface import SmootherFamily, TrainingSet
from nested_covar.schemas.smoothing import BasisConfig, HyperparameterGrid, SmoothingConfig
from nested_covar.services.smoothers import bandwidth_rule, select_and_fit, sup_error, tune
from nested_covar.services.smoothers.tuning import candidates, fold_assignment


@pytest.fixture
def quadratic_data(rng):
    inputs = rng.normal(size=(300, 2))
    targets = inputs[:, 0] ** 2 - inputs[:, 1] + 0.1 * rng.normal(size=300)
    return TrainingSet.from_arrays(inputs, targets)


@pytest.fixture
def constant_data(rng):
    return TrainingSet.from_arrays(rng.normal(size=(60, 2)), np.full(60, 2.0))


def test_folds_are_balanced_and_seeded():
    assignment = fold_assignment(103, 5, seed=7)
    counts = np.bincount(assignment)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(assignment, fold_assignment(103, 5, seed=7))
    assert not np.array_equal(assignment, fold_assignment(103, 5, seed=8))


def test_folds_partition_every_row_once():
    assignment = fold_assignment(12, 4, seed=3)
    assert sorted(np.bincount(assignment)) == [3, 3, 3, 3]
    held_out = np.concatenate([np.flatnonzero(assignment == fold) for fold in range(4)])
    np.testing.assert_array_equal(np.sort(held_out), np.arange(12))


def test_more_folds_than_samples():
    with pytest.raises(DomainError, match="5-fold"):
        fold_assignment(4, 5, seed=0)


def test_candidate_order_follows_grid():
    grid = HyperparameterGrid(kernels=["gaussian", "matern"], length_scales=[1.0, 2.0], lambdas=[1e-3, 1e-2])
    pool = candidates(SmootherFamily.KRR, grid)
    assert len(pool) == 8
    assert [(c["kernel"], c["length_scale"], c["lam"]) for c in pool[:3]] == [
        ("gaussian", 1.0, 1e-3), ("gaussian", 1.0, 1e-2), ("gaussian", 2.0, 1e-3),
    ]


def test_linear_candidates_carry_knots():
    grid = HyperparameterGrid(bases=[BasisConfig(degree=1, hinges=False), BasisConfig(degree=2)])
    pool = candidates(SmootherFamily.LINEAR_REGRESSION, grid, knots=[(0, 105.0)])
    assert pool[0]["basis"]["hinge_knots"] == []
    assert pool[1]["basis"]["hinge_knots"] == [105.0]


def test_tune_prefers_matching_basis(quadratic_data):
    grid = HyperparameterGrid(bases=[BasisConfig(degree=1), BasisConfig(degree=2)])
    best, table = tune(quadratic_data, SmootherFamily.LINEAR_REGRESSION, grid)
    assert best["basis"]["degree"] == 2
    assert [row["index"] for row in table] == [0, 1]
    assert table[1]["cv_mse"] < table[0]["cv_mse"]


def test_tune_table_is_reproducible(quadratic_data):
    grid = HyperparameterGrid(lambdas=[1e-3, 1e-1], length_scales=[1.0])
    _, first = tune(quadratic_data, SmootherFamily.KRR, grid, threads=1)
    _, second = tune(quadratic_data, SmootherFamily.KRR, grid, threads=3)
    assert [row["cv_mse"] for row in first] == [row["cv_mse"] for row in second]


def test_krr_ties_go_to_smaller_lambda_then_longer_scale(constant_data):
    grid = HyperparameterGrid(lambdas=[1e-2, 1e-4, 1e-3], length_scales=[0.5, 2.0, 1.0])
    smoothing = SmoothingConfig(krr={"center_targets": True})
    best, table = tune(constant_data, SmootherFamily.KRR, grid, smoothing)
    assert all(row["cv_mse"] == 0.0 for row in table)
    assert (best["lam"], best["length_scale"]) == (1e-4, 2.0)


def test_kernel_ties_go_to_larger_bandwidth(constant_data):
    grid = HyperparameterGrid(bandwidth_constants=[0.5, 2.0, 1.0])
    best, _ = tune(constant_data, SmootherFamily.KERNEL_SMOOTHING, grid)
    assert best == {"bandwidth_constant": 2.0}


def test_mlp_ties_go_to_smaller_width(constant_data):
    smoothing = SmoothingConfig(mlp={"epochs": 1, "batch_size": 32})
    grid = HyperparameterGrid(widths=[8, 4], learning_rates=[1e-3], cv_folds=2)
    best, _ = tune(constant_data, SmootherFamily.MLP, grid, smoothing)
    assert best["width"] == 4


def test_budget_exhaustion_returns_partial_table(quadratic_data):
    grid = HyperparameterGrid(lambdas=[1e-3, 1e-2, 1e-1], length_scales=[1.0], budget_seconds=1e-9)
    with pytest.raises(BudgetExhausted) as info:
        tune(quadratic_data, SmootherFamily.KRR, grid)
    assert len(info.value.table) == 1
    assert info.value.best["lam"] == 1e-3


def test_select_and_fit_resolves_auto_bandwidth(quadratic_data):
    smoothing = SmoothingConfig(family="kernel", tune=False, grid={"bandwidth_constants": [0.5, 1.0]})
    model, hyperparameters, _, _ = select_and_fit(quadratic_data, SmootherFamily.KERNEL_SMOOTHING, smoothing)
    assert set(hyperparameters) == {"bandwidth"}
    assert hyperparameters["bandwidth"] in (
        pytest.approx(bandwidth_rule(0.5, 300, 2)), pytest.approx(bandwidth_rule(1.0, 300, 2))
    )
    assert model.hyperparameters["bandwidth"] == hyperparameters["bandwidth"]


def test_select_and_fit_uses_configured_values_without_tuning(quadratic_data):
    smoothing = SmoothingConfig(family="krr", tune=False, krr={"lam": 0.5, "length_scale": 3.0})
    model, hyperparameters, _, _ = select_and_fit(quadratic_data, SmootherFamily.KRR, smoothing)
    assert hyperparameters["lam"] == 0.5
    assert model.hyperparameters["length_scale"] == 3.0


def test_select_and_fit_tunes_when_asked(quadratic_data):
    smoothing = SmoothingConfig(family="linear", grid={"bases": [{"degree": 1}, {"degree": 2}]})
    model, hyperparameters, _, _ = select_and_fit(quadratic_data, SmootherFamily.LINEAR_REGRESSION, smoothing)
    assert hyperparameters["basis"]["degree"] == 2
    assert model.family is SmootherFamily.LINEAR_REGRESSION


def bowl_and_wave(points):
    return points[:, 0] ** 2 + np.sin(points[:, 1])


@pytest.mark.slow
def test_tuned_krr_recovers_surface_on_grid(rng):
    inputs = rng.uniform(-2.0, 2.0, size=(2000, 2))
    data = TrainingSet.from_arrays(inputs, bowl_and_wave(inputs) + rng.normal(0.0, 0.05, size=2000))
    smoothing = SmoothingConfig(
        family="krr",
        grid=HyperparameterGrid(lambdas=[1e-5, 1e-4, 1e-3], length_scales=[0.5, 1.0], cv_folds=3),
    )
    model, _, _, _ = select_and_fit(data, SmootherFamily.KRR, smoothing)

    axis = np.linspace(-2.0, 2.0, 41)
    grid = np.array([(a, b) for a in axis for b in axis])
    values = bowl_and_wave(grid)
    sup, _ = sup_error(model, bowl_and_wave, lambda count: grid[:count], len(grid))
    assert sup < 0.08 * (values.max() - values.min())


@pytest.mark.slow
def test_kernel_smoother_error_shrinks_with_sample_size(rng):
    axis = np.linspace(-2.0, 2.0, 81)[:, None]

    def grid_error(size):
        inputs = rng.uniform(-3.0, 3.0, size=(size, 1))
        data = TrainingSet.from_arrays(inputs, np.sin(inputs[:, 0]) + rng.normal(0.0, 0.1, size=size))
        model, _, _, _ = select_and_fit(data, SmootherFamily.KERNEL_SMOOTHING, SmoothingConfig(family="kernel"))
        sup, _ = sup_error(model, lambda points: np.sin(points[:, 0]), lambda count: axis[:count], len(axis))
        return sup

    assert grid_error(10_000) < grid_error(1_000)
