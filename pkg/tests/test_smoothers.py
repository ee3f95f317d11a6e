import numpy as np
import pytest

from nested_covar.config import settings
from nested_covar.errors import DimensionMismatch, Diverged, DomainError, EmptyNeighborhood, RankDeficient
from nested_covar.models.surface import SmootherFamily, TrainingSet
from nested_covar.services.smoothers import (
    BasisSpec,
    KERNELS,
    bandwidth_rule,
    evaluate,
    fit_kernel_smoother,
    fit_krr,
    fit_linear,
    fit_mlp,
    fit_surface,
    loss_and_gradient,
    predict,
    scenario_probe,
    sup_error,
)
from nested_covar.services.rng import Stream
from nested_covar.services.smoothers.krr import kernel_matrix
from nested_covar.services.smoothers.mlp import init_params, model_params


def quadratic(points):
    return 1.0 + 2.0 * points[:, 0] - points[:, 1] + 0.5 * points[:, 0] ** 2 + 0.3 * points[:, 1] ** 2


@pytest.fixture
def plane(rng):
    inputs = rng.normal(size=(400, 2))
    return inputs, inputs[:, 0] + inputs[:, 1]


@pytest.fixture
def wave(rng):
    inputs = rng.uniform(0.0, 2 * np.pi, size=(2000, 1))
    return inputs, np.sin(inputs[:, 0])


def test_linear_recovers_quadratic_exactly(rng):
    inputs = rng.normal(size=(200, 2))
    model = fit_linear(TrainingSet.from_arrays(inputs, quadratic(inputs)), BasisSpec(degree=2))
    points = rng.normal(size=(20, 2))
    np.testing.assert_allclose(evaluate(model, points), quadratic(points), atol=1e-8)
    assert model.sample_size == 200


def test_linear_hinge_captures_payoff_kink(rng):
    inputs = rng.uniform(80.0, 120.0, size=(300, 1))
    targets = 3.0 * np.maximum(inputs[:, 0] - 105.0, 0.0)
    basis = BasisSpec.with_hinges(1, [(0, 105.0)])
    model = fit_linear(TrainingSet.from_arrays(inputs, targets), basis)
    points = np.array([[90.0], [105.0], [115.0]])
    np.testing.assert_allclose(evaluate(model, points), [0.0, 0.0, 30.0], atol=1e-8)


def test_linear_flags_dependent_column(rng):
    x = rng.normal(size=100)
    data = TrainingSet.from_arrays(np.column_stack((x, x)), x)
    with pytest.raises(RankDeficient) as info:
        fit_linear(data, BasisSpec(degree=1))
    assert info.value.column in (1, 2)


def test_linear_needs_more_samples_than_basis_functions(rng):
    inputs = rng.normal(size=(5, 2))
    with pytest.raises(DomainError, match="more samples"):
        fit_linear(TrainingSet.from_arrays(inputs, inputs[:, 0]), BasisSpec(degree=2))


def test_basis_rejects_unpaired_hinges():
    with pytest.raises(DomainError):
        BasisSpec(degree=1, hinge_columns=(0,), hinge_knots=())


def test_training_set_rejects_mismatched_lengths():
    with pytest.raises(DimensionMismatch):
        TrainingSet.from_arrays(np.zeros((3, 2)), np.zeros(4))


def test_training_set_rejects_non_finite():
    with pytest.raises(DomainError, match="non-finite"):
        TrainingSet.from_arrays(np.array([[1.0], [np.nan]]), np.zeros(2))


def test_standardized_columns_have_zero_mean_unit_scale(rng):
    inputs = np.column_stack((100.0 + 20.0 * rng.normal(size=500), np.full(500, 120.0), rng.uniform(size=500)))
    data = TrainingSet.from_arrays(inputs, inputs[:, 0])
    standardized = data.standardized_inputs()
    np.testing.assert_allclose(standardized.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(standardized[:, [0, 2]].std(axis=0), 1.0, rtol=1e-9)
    np.testing.assert_array_equal(data.standardization.constant, [False, True, False])
    assert data.standardization.scale[1] == 1.0


def test_kernel_smoother_preserves_constants(rng):
    inputs = rng.normal(size=(50, 3))
    model = fit_kernel_smoother(TrainingSet.from_arrays(inputs, np.full(50, 2.0)), bandwidth=0.5)
    np.testing.assert_array_equal(evaluate(model, rng.normal(size=(10, 3))), 2.0)


def test_kernel_smoother_falls_back_to_nearest_sample():
    data = TrainingSet.from_arrays(np.array([[0.0], [1.0], [2.0]]), np.array([10.0, 20.0, 30.0]))
    model = fit_kernel_smoother(data, bandwidth=1e-3)
    with pytest.warns(EmptyNeighborhood):
        values = evaluate(model, np.array([[100.0], [-50.0]]))
    np.testing.assert_array_equal(values, [30.0, 10.0])


def test_kernel_smoother_tracks_smooth_function(wave):
    inputs, targets = wave
    data = TrainingSet.from_arrays(inputs, targets)
    model = fit_kernel_smoother(data, bandwidth_rule(0.5, data.size, data.dimension))
    points = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
    np.testing.assert_allclose(evaluate(model, points), np.sin(points[:, 0]), atol=0.05)


def test_kernel_smoother_rejects_bad_bandwidth(plane):
    with pytest.raises(DomainError):
        fit_kernel_smoother(TrainingSet.from_arrays(*plane), bandwidth=0.0)


def test_bandwidth_rule():
    assert bandwidth_rule(2.0, 10_000, 4) == pytest.approx(2.0 * 10_000 ** (-1 / 8))


def test_krr_interpolates_smooth_function(rng):
    inputs = rng.uniform(0.0, 2 * np.pi, size=(300, 1))
    model = fit_krr(TrainingSet.from_arrays(inputs, np.sin(inputs[:, 0])), lam=1e-8, length_scale=0.5)
    points = np.linspace(1.0, 5.0, 9)[:, None]
    np.testing.assert_allclose(evaluate(model, points), np.sin(points[:, 0]), atol=1e-2)


def test_krr_heavy_penalty_shrinks_to_mean(plane):
    inputs, targets = plane
    model = fit_krr(TrainingSet.from_arrays(inputs, targets + 7.0), lam=1e6, center_targets=True)
    np.testing.assert_allclose(evaluate(model, inputs[:5]), targets.mean() + 7.0, atol=1e-3)


def test_krr_heavy_penalty_shrinks_to_zero_by_default(plane):
    inputs, targets = plane
    model = fit_krr(TrainingSet.from_arrays(inputs, targets + 7.0), lam=1e6)
    np.testing.assert_allclose(evaluate(model, inputs[:5]), 0.0, atol=1e-3)


@pytest.mark.parametrize("lam", [0.5, 1e-3, 4.0])
def test_krr_single_sample_shrinks_by_penalty(lam):
    data = TrainingSet.from_arrays(np.array([[0.3]]), np.array([2.0]))
    model = fit_krr(data, kernel="gaussian", lam=lam)
    assert evaluate(model, np.array([[0.3]]))[0] == pytest.approx(2.0 / (1.0 + lam), rel=1e-12)


def test_krr_rejects_oversized_training_set(monkeypatch, plane):
    monkeypatch.setattr(settings, "KRR_MAX_SAMPLES", 100)
    with pytest.raises(DomainError, match="KRR_MAX_SAMPLES"):
        fit_krr(TrainingSet.from_arrays(*plane))


def test_krr_rejects_non_positive_penalty(plane):
    with pytest.raises(DomainError, match="lambda"):
        fit_krr(TrainingSet.from_arrays(*plane), lam=0.0)


def test_matern_closed_forms_agree_with_bessel_form():
    distance = np.array([0.0, 0.3, 1.0, 2.5])
    for nu in (1.5, 2.5):
        np.testing.assert_allclose(
            KERNELS["matern"](distance, 1.0, nu), KERNELS["matern"](distance, 1.0, nu + 1e-9), rtol=1e-6
        )
    assert KERNELS["matern"](distance, 1.0, 3.7)[0] == 1.0


def test_kernel_matrix_rejects_unknown_kernel():
    with pytest.raises(DomainError, match="unknown kernel"):
        kernel_matrix(np.zeros((2, 1)), np.zeros((2, 1)), "laplace", 1.0)


def test_mlp_constant_targets_are_exact(rng):
    inputs = rng.normal(size=(64, 2))
    model = fit_mlp(TrainingSet.from_arrays(inputs, np.full(64, 3.0)), width=8, epochs=5, batch_size=16)
    np.testing.assert_allclose(evaluate(model, rng.normal(size=(10, 2))), 3.0, atol=1e-12)


def test_mlp_gradient_matches_finite_differences(rng):
    x = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    params = [p + 0.3 * rng.normal(size=p.shape) for p in init_params(3, 2, 4, 10.0, seed=1)]
    _, grads = loss_and_gradient(params, x, y)
    eps = 1e-6
    for i, p in enumerate(params):
        flat = p.reshape(-1)
        for j in range(0, flat.size, max(1, flat.size // 5)):
            saved = flat[j]
            flat[j] = saved + eps
            up, _ = loss_and_gradient(params, x, y)
            flat[j] = saved - eps
            down, _ = loss_and_gradient(params, x, y)
            flat[j] = saved
            assert grads[i].reshape(-1)[j] == pytest.approx((up - down) / (2 * eps), rel=1e-4, abs=1e-7)


def test_mlp_training_is_seeded(plane):
    data = TrainingSet.from_arrays(*plane)
    first = fit_mlp(data, width=8, epochs=3, seed=4)
    second = fit_mlp(data, width=8, epochs=3, seed=4)
    for a, b in zip(model_params(first), model_params(second)):
        np.testing.assert_array_equal(a, b)


def test_mlp_weights_respect_bound(plane):
    model = fit_mlp(TrainingSet.from_arrays(*plane), width=8, epochs=20, learning_rate=0.1, weight_bound=0.05)
    for weights in model_params(model)[0::2]:
        assert np.abs(weights).max() <= 0.05


def test_mlp_divergence_detected(plane):
    inputs, targets = plane
    data = TrainingSet.from_arrays(inputs[:50], targets[:50])
    with pytest.raises(Diverged):
        fit_mlp(data, width=4, epochs=5, batch_size=10, learning_rate=1e300)


@pytest.mark.slow
def test_mlp_learns_plane(plane):
    inputs, targets = plane
    model = fit_mlp(
        TrainingSet.from_arrays(inputs, targets), layers=1, width=16, epochs=300, batch_size=64, learning_rate=0.01
    )
    rmse = np.sqrt(np.mean((evaluate(model, inputs) - targets) ** 2))
    assert rmse < 0.15


@pytest.mark.parametrize("family, hyperparameters", [
    (SmootherFamily.KRR, {"lam": 1e-4, "length_scale": 1.0}),
    (SmootherFamily.KERNEL_SMOOTHING, {"bandwidth": 0.4}),
    (SmootherFamily.MLP, {"width": 8, "epochs": 2}),
])
def test_evaluation_independent_of_batching(monkeypatch, plane, family, hyperparameters):
    inputs, targets = plane
    model = fit_surface(TrainingSet.from_arrays(inputs[:200], targets[:200]), family, hyperparameters)
    points = inputs[200:260]
    together = evaluate(model, points)
    monkeypatch.setattr(settings, "EVAL_CHUNK_ROWS", 7)
    one_by_one = np.concatenate([evaluate(model, points[i:i + 1]) for i in range(points.shape[0])])
    np.testing.assert_allclose(one_by_one, together, rtol=1e-13, atol=1e-13)


def test_evaluate_checks_dimension(plane):
    model = fit_surface(TrainingSet.from_arrays(*plane), SmootherFamily.KERNEL_SMOOTHING, {"bandwidth": 0.4})
    with pytest.raises(DimensionMismatch):
        evaluate(model, np.zeros((3, 5)))
    assert evaluate(model, np.empty((0, 2))).shape == (0,)


def test_fit_surface_resolves_bandwidth_constant(plane):
    data = TrainingSet.from_arrays(*plane)
    model = fit_surface(data, SmootherFamily.KERNEL_SMOOTHING, {"bandwidth_constant": 1.0})
    assert model.hyperparameters["bandwidth"] == pytest.approx(bandwidth_rule(1.0, 400, 2))


def test_sup_error_against_itself_is_zero(rng, plane):
    model = fit_surface(TrainingSet.from_arrays(*plane), SmootherFamily.KRR, {"lam": 1e-3})
    sup, rms = sup_error(model, lambda points: predict(model, points), lambda n: rng.normal(size=(n, 2)), 50)
    assert sup == 0.0 and rms == 0.0


def test_sup_error_of_exact_linear_fit(rng, plane):
    inputs, targets = plane
    model = fit_linear(TrainingSet.from_arrays(inputs, targets), BasisSpec(degree=1))
    sup, rms = sup_error(model, lambda p: p[:, 0] + p[:, 1], lambda n: rng.normal(size=(n, 2)), 100)
    assert sup < 1e-10 and rms <= sup


def test_sup_error_needs_probes(plane):
    with pytest.raises(DomainError):
        sup_error(lambda p: p[:, 0], lambda p: p[:, 0], lambda n: np.zeros((n, 2)), 0)


def test_scenario_probe_draws_fresh_scenarios(toy_problem):
    probe = scenario_probe(toy_problem, seed=3)
    points = probe(200)
    training = toy_problem.outer(200, 3, Stream.STAGE1_OUTER).features()
    assert points.shape == (200, 2)
    assert not np.array_equal(points, training)
    np.testing.assert_array_equal(points, probe(200))


def test_exact_linear_surface_on_toy_probes(toy_problem):
    inputs = toy_problem.outer(500, 1, Stream.STAGE1_OUTER).features()
    model = fit_linear(TrainingSet.from_arrays(inputs, inputs[:, 0]), BasisSpec(degree=1))
    sup, _ = sup_error(model, lambda points: toy_problem.exact_from_features(points)[0], scenario_probe(toy_problem, seed=9), 1000)
    assert sup < 1e-9


def test_linear_coefficients_within_ols_standard_errors(rng):
    inputs = rng.uniform(-2.0, 2.0, size=(1000, 1))
    truth = np.array([1.0, -0.5, 0.8])
    basis = BasisSpec(degree=2)
    design = basis.design(inputs)
    targets = design @ truth + rng.normal(0.0, 0.1, size=1000)
    model = fit_linear(TrainingSet.from_arrays(inputs, targets), basis)

    standard_errors = 0.1 * np.sqrt(np.diag(np.linalg.inv(design.T @ design)))
    assert np.all(np.abs(model.parameters["coefficients"] - truth) < 5.0 * standard_errors)


def test_linear_basis_reads_in_raw_units(rng):
    inputs = rng.uniform(90.0, 110.0, size=(200, 1))
    model = fit_linear(TrainingSet.from_arrays(inputs, 3.0 + 2.0 * inputs[:, 0]), BasisSpec(degree=1))
    np.testing.assert_allclose(model.parameters["coefficients"], [3.0, 2.0], atol=1e-8)
