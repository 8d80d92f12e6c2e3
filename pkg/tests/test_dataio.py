import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from huberloc import dataio, harness, metrics, model, ranging, solver
from huberloc.dataio import ConfigError, DatasetError, ScenarioConfig
from huberloc.solver import SolverTrace


def test_paper_defaults_file():
    cfg = dataio.paper_defaults()
    assert cfg.n_sensors == 50 and len(cfg.anchor_positions) == 4
    assert cfg.anchor_positions == ((0, 0), (0, 10), (10, 10), (10, 0))
    assert (cfg.comm_range, cfg.noise_sigma, cfg.nlos_bias_mean_m) == (3.0, 0.5, 1.0)
    assert (cfg.samples_per_link, cfg.n_resample) == (10, 1000)
    assert cfg.nlos_ratios == (0.05, 0.5, 0.95)
    assert cfg.area == (10.0, 10.0)


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert dataio.load_config(p) == ScenarioConfig()


def test_bad_ratio_named(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("nlos_ratio: 1.5\n")
    with pytest.raises(ConfigError, match="nlos_ratio") as info:
        dataio.load_config(p)
    assert info.value.key == "nlos_ratio"


@pytest.mark.parametrize("text,key", [
    ("typo_key: 3\n", "typo_key"),
    ("gamma: -1\n", "gamma"),
    ("n_sensors: 2.5\n", "n_sensors"),
    ("anchor_positions: [[0, 0], [1, 1]]\n", "anchor_positions"),
    ("algorithms: [stage3]\n", "algorithms"),
    ("init_strategy: spiral\n", "init_strategy"),
    ("[1, 2]\n", "config"),
])
def test_config_errors(tmp_path, text, key):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError) as info:
        dataio.load_config(p)
    assert info.value.key == key


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        dataio.load_config(tmp_path / "nope.yaml")


@given(
    n=st.integers(0, 100), r=st.floats(0.1, 20), ratio=st.floats(0, 1), seed=st.integers(0, 2**31),
    algos=st.lists(st.sampled_from(dataio.ALGORITHMS), min_size=1, max_size=5, unique=True),
    hs=st.one_of(st.none(), st.floats(0.01, 5)),
)
def test_config_round_trip(tmp_path_factory, n, r, ratio, seed, algos, hs):
    cfg = ScenarioConfig(n_sensors=n, comm_range=r, nlos_ratio=ratio, master_seed=seed,
                         algorithms=tuple(algos), huber_sigma=hs)
    p = tmp_path_factory.mktemp("cfg") / "c.yaml"
    dataio.save_config(cfg, p)
    assert dataio.load_config(p) == cfg
    assert isinstance(yaml.safe_load(p.read_text()), dict)


def _toy_files(tmp_path, mirrored=False):
    nodes = tmp_path / "nodes.csv"
    ranges = tmp_path / "ranges.csv"
    nodes.write_text("id,role,x,y\nA1,anchor,0.0,0.0\nS1,sensor,1.0,1.0\nA2,anchor,4.0,0.0\nA3,anchor,0.0,4.0\n")
    rows = ["i,j,l,range_m", "S1,A1,1,1.5", "S1,A1,2,1.3", "S1,A2,1,3.2", "S1,A2,2,3.1",
            "A1,A2,1,4.0", "A1,A2,2,4.0"]
    if mirrored:
        rows += ["A1,S1,1,1.5", "A1,S1,2,1.3", "A2,S1,1,3.2", "A2,S1,2,3.1", "A2,A1,1,4.0", "A2,A1,2,4.0"]
    ranges.write_text("\n".join(rows) + "\n")
    return nodes, ranges


def test_load_toy_dataset(tmp_path):
    net, ms = dataio.load_dataset(*_toy_files(tmp_path))
    assert (net.n_sensors, net.n_anchors) == (1, 3)
    assert list(net.labels) == ["S1", "A1", "A2", "A3"]
    np.testing.assert_array_equal(net.positions[0], [1.0, 1.0])
    # three distinct measured pairs, no invented links
    assert net.n_links == 3 and ms.samples_per_link == 2
    assert ms.range(0, 1, 1) == 1.3
    assert len(net.neighbors[3]) == 0


def test_one_sided_equals_mirrored(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, a = dataio.load_dataset(*_toy_files(tmp_path / "a"))
    _, b = dataio.load_dataset(*_toy_files(tmp_path / "b", mirrored=True))
    np.testing.assert_array_equal(a.links, b.links)
    np.testing.assert_array_equal(a.ranges, b.ranges)


def test_round_trip_through_export(tmp_path):
    net, ms = dataio.load_dataset(*_toy_files(tmp_path))
    out_nodes, out_ranges = tmp_path / "n2.csv", tmp_path / "r2.csv"
    dataio.export_dataset(net, ms, out_nodes, out_ranges)
    net2, ms2 = dataio.load_dataset(out_nodes, out_ranges)
    np.testing.assert_array_equal(net.positions, net2.positions)
    np.testing.assert_array_equal(ms.ranges, ms2.ranges)
    assert list(net.labels) == list(net2.labels)


def test_simulated_round_trip(tmp_path):
    net = model.generate_topology(12, comm_range=4.0, seed=3)
    ms = ranging.measure(net, model.assign_link_conditions(net.links, 0.5, 0), samples_per_link=3, seed=1)
    dataio.export_dataset(net, ms, tmp_path / "n.csv", tmp_path / "r.csv")
    net2, ms2 = dataio.load_dataset(tmp_path / "n.csv", tmp_path / "r.csv", comm_range=4.0)
    np.testing.assert_array_equal(net.positions, net2.positions)
    np.testing.assert_array_equal(net.links, net2.links)
    np.testing.assert_array_equal(ms.ranges, ms2.ranges)


@pytest.mark.parametrize("nodes,ranges,match", [
    ("id,role,x,y\nA1,anchor,0,0\nA2,anchor,4,0\nA3,anchor,0,4\nS1,sensor,1,1\n",
     "i,j,l,range_m\nS1,A9,1,1.0\n", "unknown node id A9"),
    ("id,role,x,y\nA1,anchor,0,0\nA2,anchor,4,0\nA3,anchor,0,4\nS1,sensor,-1,1\n",
     "i,j,l,range_m\nS1,A1,1,1.0\n", "non-negative"),
    ("id,role,x,y\nA1,anchor,0,0\nA2,anchor,4,0\nS1,sensor,1,1\n",
     "i,j,l,range_m\nS1,A1,1,1.0\n", "3 anchors"),
    ("id,role,x,y\nA1,anchor,0,0\nA2,anchor,4,0\nA3,anchor,0,4\nS1,sensor,1,1\n",
     "i,j,l,range_m\nS1,A1,1,1.0\nS1,A1,2,1.0\nS1,A2,1,3.0\n", "same number of samples"),
    ("id,role,x,y\nA1,anchor,0,0\nA2,anchor,4,0\nA3,anchor,0,4\nS1,sensor,1,1\n",
     "a,b,c\n", "expected header"),
])
def test_dataset_errors(tmp_path, nodes, ranges, match):
    (tmp_path / "n.csv").write_text(nodes)
    (tmp_path / "r.csv").write_text(ranges)
    with pytest.raises(DatasetError, match=match):
        dataio.load_dataset(tmp_path / "n.csv", tmp_path / "r.csv")


def test_single_sample_dataset_stage2_is_rerun(tmp_path):
    # 40 sensors + 4 anchors, one sample per link
    net = model.generate_topology(40, comm_range=3.5, seed=8)
    ms = ranging.measure(net, model.assign_link_conditions(net.links, 0.1, 1), samples_per_link=1, seed=2)
    dataio.export_dataset(net, ms, tmp_path / "n.csv", tmp_path / "r.csv")
    net2, ms2 = dataio.load_dataset(tmp_path / "n.csv", tmp_path / "r.csv", comm_range=3.5)
    assert net2.n_nodes == 44 and ms2.samples_per_link == 1
    cfg = ScenarioConfig(samples_per_link=1, max_iterations=300)
    s1, _, _ = harness.run_algorithm("stage1", net2, ms2, cfg, seed=1)
    boot, _, _ = harness.run_algorithm("stage1_bootstrap", net2, ms2, cfg, seed=1)
    rerun, _ = solver.run(net2, ms2.ranges[:, 0], harness.estimator(cfg, cfg.stage2_estimator),
                          harness.solver_config(cfg), initial=s1)
    np.testing.assert_allclose(boot, rerun, atol=1e-9)


class _Row:
    def __init__(self, algorithm, nlos_ratio, trial):
        self.algorithm, self.nlos_ratio, self.trial = algorithm, nlos_ratio, trial
        self.rmse, self.ger, self.gde = 0.5 + trial, 0.01, 0.1


def test_export_results(tmp_path):
    paths = dataio.export_results([], {}, {}, tmp_path / "empty")
    assert paths[0].read_text() == "algorithm,nlos_ratio,trial,rmse,ger,gde\n"

    rows = [_Row(a, r, t) for a in ("stage1", "nls_original") for r in (0.05, 0.5) for t in range(3)]
    trace = SolverTrace([0.1, 0.01], [3.0, 2.0], 10, 10, True, 2, 0)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        dataio.export_results(rows[::-1] if out is out2 else rows,
                              {("stage1", 0.05): metrics.ecdf([1.0, 2.0])},
                              {("stage1", 0.05, 0): trace}, out)
    lines = (out1 / "metrics.csv").read_text().splitlines()
    assert len(lines) == 13
    assert (out1 / "ecdf_stage1_0.05.csv").read_text() == "rmse,probability\n1.0,0.5\n2.0,1.0\n"
    assert (out1 / "trace_stage1_0.05_0.csv").exists()
    for name in ("metrics.csv", "ecdf_stage1_0.05.csv", "trace_stage1_0.05_0.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
