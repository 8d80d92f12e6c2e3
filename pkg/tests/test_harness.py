import numpy as np
import pytest

from huberloc import harness, metrics, solver
from huberloc.dataio import ScenarioConfig

SMALL = ScenarioConfig(n_sensors=15, n_trials=3, n_resample=200, max_iterations=400)


def test_scenario_is_reproducible():
    a = harness.run_scenario(SMALL)
    b = harness.run_scenario(SMALL)
    assert a.trials == b.trials
    assert len(a.trials) == 3 * 5
    assert [t.trial for t in a.trials] == sorted(t.trial for t in a.trials)


def test_parallel_matches_serial():
    serial = harness.run_scenario(SMALL)
    parallel = harness.run_scenario(SMALL, jobs=2)
    assert serial.trials == parallel.trials


def test_trials_are_paired():
    net_a, ms_a = harness.make_trial(SMALL, 1)
    net_b, ms_b = harness.make_trial(SMALL, 1)
    np.testing.assert_array_equal(net_a.positions, net_b.positions)
    np.testing.assert_array_equal(ms_a.ranges, ms_b.ranges)
    results, _ = harness.run_trial(SMALL, 1)
    seed = harness.derive(SMALL.master_seed, 1, 7)
    for algo in SMALL.algorithms:
        _, alone, _ = harness.run_algorithm(algo, net_a, ms_a, SMALL, seed, 1)
        assert next(r for r in results if r.algorithm == algo) == alone


def test_topologies_fresh_or_fixed():
    a, _ = harness.make_trial(SMALL, 0)
    b, _ = harness.make_trial(SMALL, 1)
    assert not np.array_equal(a.positions, b.positions)
    fixed = SMALL.replace(fixed_topology=True)
    c, mc = harness.make_trial(fixed, 0)
    d, md = harness.make_trial(fixed, 1)
    np.testing.assert_array_equal(c.positions, d.positions)
    assert not np.array_equal(mc.ranges, md.ranges)


def test_min_degree_resampling():
    cfg = SMALL.replace(comm_range=2.0, min_sensor_degree=1)
    for t in range(5):
        net, _ = harness.make_trial(cfg, t)
        assert net.isolated_sensors().size == 0


def test_message_accounting():
    net, ms = harness.make_trial(SMALL, 0)
    per_round = net.sensor_degree_sum()
    _, s1, t1 = harness.run_algorithm("stage1", net, ms, SMALL, 5)
    assert s1.messages_sent == s1.iterations_used * per_round
    _, boot, tb = harness.run_algorithm("stage1_bootstrap", net, ms, SMALL, 5)
    assert boot.messages_sent == (boot.iterations_used + SMALL.samples_per_link) * per_round
    assert boot.iterations_used > s1.iterations_used


def test_noiseless_all_algorithms_accurate():
    cfg = ScenarioConfig(n_sensors=12, noise_sigma=1e-12, nlos_ratio=0.0, comm_range=15.0, huber_sigma=0.5,
                         n_trials=2, gamma=0.02, max_iterations=8000, epsilon=1e-6, n_resample=100)
    res = harness.run_scenario(cfg)
    for algo in cfg.algorithms:
        assert max(r.rmse for r in res.results_for(algo)) < 0.05, algo


def test_divergence_cap():
    cfg = SMALL.replace(gamma=50.0, gamma_halvings=0, algorithms=("nls_original",), noise_sigma=0.5)
    with pytest.raises(harness.DivergenceCapExceeded):
        harness.run_scenario(cfg)


def test_gamma_halving_recovers(monkeypatch):
    calls = []
    real_run = solver.run

    def flaky(*args, **kw):
        cfg = args[3]
        calls.append(cfg.gamma)
        if cfg.gamma > 0.02:
            raise solver.SolverDiverged(1, cfg.gamma)
        return real_run(*args, **kw)

    monkeypatch.setattr(solver, "run", flaky)
    net, ms = harness.make_trial(SMALL, 0)
    _, res, _ = harness.run_algorithm("nls_relaxed", net, ms, SMALL, 0)
    assert calls[:2] == [0.04, 0.02] and res.gamma_used == 0.02 and not res.diverged


def test_diverged_trial_flagged(monkeypatch):
    def always(*args, **kw):
        raise solver.SolverDiverged(3, args[3].gamma)

    monkeypatch.setattr(solver, "run", always)
    net, ms = harness.make_trial(SMALL, 0)
    est, res, trace = harness.run_algorithm("nls_original", net, ms, SMALL, 0)
    assert est is None and trace is None and res.diverged


def test_sweep_size_one_is_rerun():
    cfg = SMALL.replace(n_trials=2)
    sweep = harness.sample_size_sweep(cfg, [1, 5])
    for t in range(2):
        net, ms = harness.make_trial(cfg.replace(samples_per_link=5, algorithms=("stage1_bootstrap",)), t)
        seed = harness.derive(cfg.master_seed, t, 7)
        s1, _, _ = harness.run_algorithm("stage1", net, ms, cfg, seed, t)
        rerun, _ = solver.run(net, ms.ranges[:, 0], harness.estimator(cfg, cfg.stage2_estimator),
                              harness.solver_config(cfg), initial=s1)
        assert sweep.trials[1][t].rmse == pytest.approx(metrics.rmse(rerun, net.positions, net.sensor_ids), abs=1e-9)
    assert set(sweep.ecdfs()) == {1, 5}
    with pytest.raises(ValueError):
        harness.sample_size_sweep(cfg, [0])


def test_summary_and_ecdfs():
    res = harness.run_scenario(SMALL)
    summary = res.summary()
    assert set(summary) == set(SMALL.algorithms)
    for algo, rep in summary.items():
        rs = res.results_for(algo)
        pooled = np.sqrt(sum(r.rmse**2 * r.n_sensors for r in rs) / sum(r.n_sensors for r in rs))
        assert res.pooled_rmse(algo) == pytest.approx(pooled)
        assert rep.rmse == pytest.approx(np.mean([r.rmse for r in rs]))
        assert rep.n_trials == 3
    for (algo, ratio), table in res.ecdfs().items():
        assert ratio == SMALL.nlos_ratio and len(table) == 3


def test_compare_covers_ratios():
    out = harness.compare(SMALL.replace(n_trials=1, nlos_ratios=(0.0, 1.0)))
    assert set(out) == {0.0, 1.0}
    assert all(len(r.trials) == 5 for r in out.values())
