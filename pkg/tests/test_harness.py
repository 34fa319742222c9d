import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ota_consensus.harness import (
    ALGORITHMS,
    ExperimentSpec,
    MetricTrace,
    compare_algorithms,
    consensus_error,
    emit_csv,
    final_bias,
    prepare,
    read_metrics,
    rmse,
    run_experiment,
)

SMALL = dict(iterations=40, realizations=3, seed=5)


def naive_ce(x, x_star):
    return np.sqrt(sum((v - x_star) ** 2 for v in x) / len(x))


def naive_rmse(x):
    mean = sum(x) / len(x)
    return np.sqrt(sum((v - mean) ** 2 for v in x) / len(x))


@pytest.fixture(scope="module")
def small_setup():
    return prepare(ExperimentSpec(**SMALL))


def test_metric_examples():
    assert consensus_error([1, 1, 1], 1) == 0.0
    assert consensus_error([0.0, 2.0], 1.0) == pytest.approx(1.0)
    assert rmse([3.0, 3.0, 3.0]) == 0.0
    assert rmse([-1.0, 1.0]) == pytest.approx(1.0)


def test_metrics_match_naive(rng):
    for _ in range(50):
        x = rng.uniform(-250, 250, int(rng.integers(1, 20)))
        s = float(rng.uniform(-250, 250))
        assert consensus_error(x, s) == pytest.approx(naive_ce(x, s), rel=1e-12)
        assert rmse(x) == pytest.approx(naive_rmse(x), rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-250, 250), min_size=2, max_size=12), st.floats(-100, 100))
def test_rmse_shift_invariant(x, shift):
    x = np.array(x)
    assert rmse(x + shift) == pytest.approx(rmse(x), abs=1e-9)
    assert consensus_error(x + shift, x.mean() + shift) == pytest.approx(rmse(x), abs=1e-9)


def test_single_iteration_reports_initial_error(small_setup):
    spec = ExperimentSpec(**{**SMALL, "iterations": 1})
    trace = run_experiment(spec, small_setup)
    x0 = small_setup.x0
    assert len(trace) == 1
    assert trace.ce[0] == pytest.approx(naive_ce(x0, x0.mean()), rel=1e-12)
    assert trace.rmse[0] == pytest.approx(naive_rmse(x0), rel=1e-12)
    assert np.array_equal(trace.final_states, np.broadcast_to(x0, (3, 9)))


def test_runs_are_deterministic(small_setup):
    spec = ExperimentSpec(**SMALL)
    a = run_experiment(spec, small_setup)
    b = run_experiment(spec, prepare(spec))
    assert np.array_equal(a.ce, b.ce) and np.array_equal(a.rmse, b.rmse)


def test_seed_changes_results():
    a = run_experiment(ExperimentSpec(**{**SMALL, "seed": 1}))
    b = run_experiment(ExperimentSpec(**{**SMALL, "seed": 2}))
    assert not np.array_equal(a.ce, b.ce)


def test_compare_shares_initial_error_and_channels(small_setup):
    spec = ExperimentSpec(**SMALL)
    traces = compare_algorithms(spec, small_setup)
    assert [t.algorithm for t in traces] == list(ALGORITHMS)
    assert len({t.ce[0] for t in traces}) == 1
    for tr in traces:
        alone = run_experiment(ExperimentSpec(**{**SMALL, "algorithm": tr.algorithm}), small_setup)
        assert np.allclose(alone.ce, tr.ce, rtol=1e-12, atol=0)


def test_realizations_replay_independently(small_setup):
    # the channel stream of realization m does not depend on how many realizations run
    one = run_experiment(ExperimentSpec(**{**SMALL, "realizations": 1}), small_setup)
    three = run_experiment(ExperimentSpec(**SMALL), small_setup)
    assert np.allclose(one.final_states[0], three.final_states[0], rtol=1e-12)


def test_projected_variants_stay_in_box(small_setup):
    for tr in compare_algorithms(ExperimentSpec(**SMALL), small_setup):
        if tr.algorithm.startswith("DPGD"):
            assert tr.max_abs_state <= 250.0


def test_final_bias_example():
    tr = MetricTrace("AC", np.ones(2), np.ones(2), final_states=np.array([[1.0, 3.0], [2.0, 2.0]]), extras={"x_star": 1.5})
    assert final_bias(tr) == pytest.approx(0.5)


def test_emit_csv_layout_and_round_trip(tmp_path, small_setup):
    spec = ExperimentSpec(**{**SMALL, "iterations": 3})
    trace = run_experiment(spec, small_setup)
    path = tmp_path / "m.csv"
    emit_csv(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,algorithm,ce,rmse" and len(lines) == 4
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0", "1", "2"]
    back = read_metrics(path)["DPGD_AC_PCSS"]
    assert np.array_equal(back[0], trace.ce) and np.array_equal(back[1], trace.rmse)


def test_emit_csv_rejects_empty_trace(tmp_path):
    with pytest.raises(ValueError):
        emit_csv(MetricTrace("AC", np.array([]), np.array([])), tmp_path / "m.csv")


def test_emit_csv_reports_path_on_io_error(tmp_path, small_setup):
    trace = run_experiment(ExperimentSpec(**{**SMALL, "iterations": 2}), small_setup)
    bad = tmp_path / "missing_dir" / "m.csv"
    with pytest.raises(OSError, match="missing_dir"):
        emit_csv(trace, bad)


def test_trajectory_output(tmp_path, small_setup):
    spec = ExperimentSpec(**{**SMALL, "iterations": 25, "trajectories": "sampled", "trajectory_stride": 10})
    trace = run_experiment(spec, small_setup)
    assert list(trace.trajectory_t) == [0, 10, 20]
    emit_csv(trace, tmp_path / "m.csv", tmp_path / "traj.csv")
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0] == "t,realization,agent,x"
    assert len(lines) == 1 + 3 * 9
    assert float(lines[1].split(",")[3]) == small_setup.x0[0]

    full = ExperimentSpec(**{**SMALL, "iterations": 5, "trajectories": "full", "algorithm": "compare"})
    traces = compare_algorithms(full, small_setup)
    emit_csv(traces, tmp_path / "m2.csv", tmp_path / "traj2.csv")
    lines = (tmp_path / "traj2.csv").read_text().splitlines()
    assert lines[0] == "t,algorithm,realization,agent,x"
    assert len(lines) == 1 + 4 * 5 * 9


def test_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nalgorithm = AC\niterations: 12\nnoise_variance = 1e-6\n\n")
    spec = ExperimentSpec.from_file(cfg, seed=9, realizations=None)
    assert (spec.algorithm, spec.iterations, spec.noise_variance, spec.seed) == ("AC", 12, 1e-6, 9)
    cfg.write_text("colour = blue\n")
    with pytest.raises(ValueError, match="colour"):
        ExperimentSpec.from_file(cfg)


@pytest.mark.parametrize(
    "kwargs",
    [dict(algorithm="XYZ"), dict(iterations=0), dict(realizations=0), dict(noise_variance=-1.0), dict(x_max=0.0)],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentSpec(**kwargs)
