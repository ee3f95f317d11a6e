import argparse
import json

import numpy as np
import pytest

from conftest import TOY_COVAR
from nested_covar.cli import deps, main
from nested_covar.cli.commands import price as price_command
from nested_covar.config import settings
from nested_covar.services.results import read_results


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_price_black_scholes(capsys):
    code, out, _ = run(capsys, "price", "bs", "--s", "100", "--k", "100", "--r", "0.05", "--sigma", "0.2", "--ttm", "1")
    assert code == 0
    assert out == "10.45058357\n"


def test_price_knocked_out_barrier_is_zero(capsys):
    code, out, err = run(capsys, "price", "barrier", "--s", "125", "--k", "100", "--b", "120", "--ttm", "1")
    assert code == 0
    assert out == "0\n"
    assert "knocked out" in err


def test_price_asian_before_last_fixing(capsys):
    code, out, _ = run(capsys, "price", "asian", "--s", "100", "--k", "100", "--steps", "10", "--tau-index", "2")
    assert code == 0
    assert 0.0 < float(out) < 100.0


def test_price_asian_rejects_conditioning_at_maturity(capsys):
    code, _, err = run(
        capsys, "price", "asian", "--s", "100", "--k", "105", "--geo", "110", "--steps", "10", "--tau-index", "10",
    )
    assert code == 2
    assert "tau_index" in err


def test_price_domain_error_exit_code(capsys):
    code, _, err = run(capsys, "price", "bs", "--s", "-1", "--k", "100", "--ttm", "1")
    assert code == 2
    assert err.startswith("error:")


def test_unknown_flag_exit_code(capsys):
    code, _, err = run(capsys, "price", "bs", "--s", "100", "--k", "100", "--ttm", "1", "--bogus")
    assert code == 4
    assert "unrecognized arguments" in err


def test_missing_required_flag_exit_code(capsys):
    code, _, _ = run(capsys, "price", "bs", "--s", "100")
    assert code == 2


def test_estimate_is_reproducible(capsys, toy_plan):
    argv = ("estimate", "--config", str(toy_plan), "--method", "batching", "--deterministic")
    code, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert code == 0
    assert first == second
    report = json.loads(first)
    assert report["method"] == "batching"
    assert report["coupling"] == "exact"
    assert report["timings"]["t_sim2"] == 0.0
    assert report["scenario_block"] == settings.SCENARIO_BLOCK
    assert report["covar_hat"] == pytest.approx(TOY_COVAR, abs=0.3)


def test_seed_flag_changes_the_draws(capsys, toy_plan):
    base = ("estimate", "--config", str(toy_plan), "--method", "sns", "--deterministic")
    _, one, _ = run(capsys, *base, "--seed", "1")
    _, two, _ = run(capsys, *base, "--seed", "2")
    assert json.loads(one)["seed"] == 1
    assert json.loads(one)["covar_hat"] != json.loads(two)["covar_hat"]


def test_unknown_override_key(capsys, toy_plan):
    code, _, err = run(capsys, "estimate", "--config", str(toy_plan), "--override", "ESTIMATOR__FOO=1")
    assert code == 2
    assert "unknown configuration key ESTIMATOR__FOO" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "estimate", "--config", str(tmp_path / "absent.env"))
    assert code == 2
    assert "not found" in err


def test_oracle_needs_decoupled_method(capsys, toy_plan):
    code, _, err = run(capsys, "estimate", "--config", str(toy_plan), "--method", "sns", "--oracle")
    assert code == 2
    assert "--oracle" in err


def test_fit_then_estimate_from_saved_surfaces(capsys, toy_plan, tmp_path):
    surfaces = tmp_path / "surfaces"
    code, out, _ = run(capsys, "fit", "--config", str(toy_plan), "--family", "linear", "--out", str(surfaces))
    assert code == 0
    summary = json.loads(out)
    assert summary["m"] == 2000
    assert (surfaces / "mu.cvsm").is_file() and (surfaces / "pi.cvsm").is_file()

    code, out, _ = run(
        capsys, "estimate", "--config", str(toy_plan), "--method", "decoupled", "--fitted", str(surfaces),
        "--override", 'ESTIMATOR__K=200', "--override", "ESTIMATOR__H=100",
    )
    assert code == 0
    report = json.loads(out)
    assert report["family"] == "linear"
    assert report["allocation"]["n"] == 20_000
    assert report["timings"]["t_sim1"] == 0.0


def test_simulate_csv(capsys, toy_plan):
    code, out, _ = run(capsys, "simulate", "--config", str(toy_plan), "--count", "5", "--exact")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "id,z1,z2,mu,pi"
    assert len(lines) == 6
    _, z1, _, mu, _ = lines[1].split(",")
    assert z1 == mu


def test_simulate_portfolio_json(capsys, portfolio_plan):
    code, out, _ = run(capsys, "simulate", "--config", str(portfolio_plan), "--count", "3", "--inner", "4", "--format", "json")
    records = json.loads(out)
    assert code == 0
    assert len(records) == 3
    assert {"s_tau_0", "run_max_1", "geo_0", "x_bar", "y_bar"} <= set(records[0])


def test_tune_emits_candidate_table(capsys, toy_plan):
    code, out, _ = run(
        capsys, "tune", "--config", str(toy_plan), "--family", "kernel", "--side", "y",
        "--override", "SMOOTHING__GRID__BANDWIDTH_CONSTANTS=[0.5, 1.0]",
    )
    table = json.loads(out)
    assert code == 0
    assert table["side"] == "y"
    assert [row["hyperparameters"]["bandwidth_constant"] for row in table["candidates"]] == [0.5, 1.0]
    assert table["best"] in [row["hyperparameters"] for row in table["candidates"]]


def test_reference_on_toy(capsys, toy_plan):
    code, out, _ = run(
        capsys, "reference", "--config", str(toy_plan),
        "--override", "REFERENCE__K=100", "--override", "REFERENCE__H=100",
        "--override", "REFERENCE__REPLICATIONS=3", "--override", "REFERENCE__PRECISION=0.5",
        "--override", "REFERENCE__START_N=10000",
    )
    payload = json.loads(out)
    assert code == 0
    assert payload["n"] == 10_000
    assert payload["analytic"] == pytest.approx(TOY_COVAR, abs=1e-4)
    assert payload["relative_half_width"] < 0.5


def test_experiment_writes_results(capsys, toy_plan, tmp_path):
    path = tmp_path / "study.csv"
    code, out, _ = run(capsys, "experiment", "--config", str(toy_plan), "--theta", str(TOY_COVAR), "--out", str(path))
    assert code == 0
    assert f"results: {path}" in out
    assert out.startswith("theta = 2.2469")
    rows = read_results(path)
    assert len(rows) == 1 and rows[0]["k"] == 100


def test_experiment_defaults_to_plan_output_dir(capsys, toy_plan, tmp_path):
    code, _, _ = run(capsys, "experiment", "--config", str(toy_plan), "--format", "json", "--deterministic")
    assert code == 0
    records = json.loads((tmp_path / "results" / "experiment.json").read_text())
    assert records[0]["t_sim2"] == 0.0


def test_experiment_with_failed_row_exits_3(capsys, monkeypatch, toy_plan, tmp_path):
    monkeypatch.setattr(settings, "KRR_MAX_SAMPLES", 10)
    code, out, _ = run(
        capsys, "experiment", "--config", str(toy_plan), "--theta", "2.2469", "--out", str(tmp_path / "f.csv"),
        "--override", 'EXPERIMENT__ROWS=[{"method": "decoupled", "family": "krr", "gamma": 1000}]',
    )
    assert code == 3
    assert "FAILED decoupled/krr/1000" in out
    assert read_results(tmp_path / "f.csv") == []


def test_unexpected_failure_exits_3(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("singular matrix")

    monkeypatch.setattr(price_command, "bs_call_price", broken)
    code, out, err = run(capsys, "price", "bs", "--s", "100", "--k", "100", "--ttm", "1")
    assert code == 3
    assert out == ""
    assert "error: LinAlgError: singular matrix" in err


def test_seed_flag_reseeds_tuning_and_training(toy_plan):
    args = argparse.Namespace(config=str(toy_plan), override=[], seed=11)
    plan = deps.get_plan(args)
    assert plan.seed == 11 and plan.estimator.seed == 11
    assert plan.smoothing.grid.seed == 11
    assert plan.smoothing.mlp.seed == 11


def test_plan_keeps_tuning_seed_without_seed_flag(toy_plan):
    args = argparse.Namespace(config=str(toy_plan), override=["SMOOTHING__MLP__SEED=5"], seed=None)
    assert deps.get_plan(args).smoothing.mlp.seed == 5


def test_experiment_records_scenario_block(capsys, monkeypatch, toy_plan, tmp_path):
    monkeypatch.setattr(settings, "SCENARIO_BLOCK", 512)
    path = tmp_path / "study.csv"
    code, out, _ = run(capsys, "experiment", "--config", str(toy_plan), "--theta", str(TOY_COVAR), "--out", str(path))
    record = json.loads((tmp_path / "study.csv.run.json").read_text())
    assert code == 0
    assert f"run record: {path}.run.json" in out
    assert record["scenario_block"] == 512
    assert record["theta"] == pytest.approx(TOY_COVAR)
    assert read_results(path)[0]["k"] == 100


def test_fit_summary_records_scenario_block(capsys, toy_plan, tmp_path):
    code, out, _ = run(capsys, "fit", "--config", str(toy_plan), "--family", "linear", "--out", str(tmp_path / "s"))
    assert code == 0
    assert json.loads(out)["scenario_block"] == settings.SCENARIO_BLOCK
