"""Monte Carlo comparison of the localization pipelines.

Every trial draws one topology, one set of link conditions and one set of
range samples, and every algorithm runs on that same realization, so the
comparison between algorithms is paired. Random streams are keyed by
``(master_seed, trial, purpose)``.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bootstrap, metrics, model, ranging, solver
from ._seeding import derive
from .dataio import ScenarioConfig
from .estimators import EstimatorSpec

log = logging.getLogger(__name__)

# stream purposes
_TOPOLOGY, _CONDITIONS, _RANGES, _INIT, _BOOTSTRAP = 1, 2, 3, 4, 5


class AlgorithmId(str, enum.Enum):
    STAGE1 = "stage1"
    STAGE1_STAGE2 = "stage1_stage2"
    NLS_ORIGINAL = "nls_original"
    NLS_RELAXED = "nls_relaxed"
    STAGE1_BOOTSTRAP = "stage1_bootstrap"


class DivergenceCapExceeded(RuntimeError):
    pass


@dataclass
class TrialResult:
    algorithm: str
    nlos_ratio: float
    trial: int
    rmse: float = np.nan
    ger: float = np.nan
    gde: float = np.nan
    iterations_used: int = 0
    messages_sent: int = 0
    converged: bool = False
    diverged: bool = False
    gamma_used: float = np.nan
    # sum of squared sensor position errors, for pooling across trials
    sse: float = np.nan
    n_sensors: int = 0


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trials: list
    traces: dict = field(default_factory=dict)

    def results_for(self, algo) -> list:
        algo = AlgorithmId(algo).value
        return [t for t in self.trials if t.algorithm == algo and not t.diverged]

    def pooled_rmse(self, algo) -> float:
        """Square root of the mean squared sensor error over all kept trials."""
        rs = self.results_for(algo)
        return float(np.sqrt(sum(r.sse for r in rs) / sum(r.n_sensors for r in rs)))

    def mean(self, algo, metric: str = "rmse") -> float:
        return float(np.mean([getattr(r, metric) for r in self.results_for(algo)]))

    def diverged_count(self, algo) -> int:
        algo = AlgorithmId(algo).value
        return sum(t.diverged for t in self.trials if t.algorithm == algo)

    def ecdfs(self) -> dict:
        out = {}
        for algo in self.config.algorithms:
            rs = self.results_for(algo)
            if rs:
                out[(algo, self.config.nlos_ratio)] = metrics.ecdf(sorted(r.rmse for r in rs))
        return out

    def summary(self) -> dict:
        """Per-algorithm averages of the per-trial metrics over kept trials."""
        return {
            algo: metrics.MetricsReport(
                rmse=self.mean(algo, "rmse"),
                ger=self.mean(algo, "ger"),
                gde=self.mean(algo, "gde"),
                n_trials=len(self.results_for(algo)),
            )
            for algo in self.config.algorithms
            if self.results_for(algo)
        }


def estimator(cfg: ScenarioConfig, kind: str, mirrored: bool = False) -> EstimatorSpec:
    return EstimatorSpec.make(kind, cfg.huber_alpha, cfg.cutoff_sigma, mirrored)


def solver_config(cfg: ScenarioConfig) -> solver.SolverConfig:
    return solver.SolverConfig(
        gamma=cfg.gamma,
        epsilon=cfg.epsilon,
        max_iterations=cfg.max_iterations,
        init_strategy=cfg.init_strategy,
    )


def _with_retries(cfg: ScenarioConfig, solve):
    """Call ``solve(solver_config)``, halving gamma after each divergence."""
    scfg = solver_config(cfg)
    for attempt in range(cfg.gamma_halvings + 1):
        try:
            est, trace = solve(scfg)
            return est, trace, scfg.gamma
        except solver.SolverDiverged as exc:
            if attempt == cfg.gamma_halvings:
                raise
            log.info("%s; retrying with gamma=%g", exc, scfg.gamma / 2)
            scfg = solver.with_gamma(scfg, scfg.gamma / 2)


def make_trial(cfg: ScenarioConfig, trial: int, nlos_ratio: float | None = None):
    """Topology, NLOS mask and measurements for one trial."""
    ratio = cfg.nlos_ratio if nlos_ratio is None else nlos_ratio
    topo_trial = 0 if cfg.fixed_topology else trial
    net = None
    for attempt in range(1000):
        net = model.generate_topology(
            cfg.n_sensors, cfg.anchor_positions, cfg.area, cfg.comm_range,
            seed=derive(cfg.master_seed, topo_trial, attempt, _TOPOLOGY),
        )
        if cfg.n_sensors == 0 or net.degree()[: cfg.n_sensors].min() >= cfg.min_sensor_degree:
            break
    else:
        raise RuntimeError(f"no topology with min sensor degree {cfg.min_sensor_degree} in 1000 draws")
    poor = net.poorly_connected_sensors(3)
    if len(poor):
        log.debug("trial %d: %d sensors with fewer than 3 neighbors", trial, len(poor))
    nlos = model.assign_link_conditions(net.links, ratio, seed=derive(cfg.master_seed, trial, _CONDITIONS))
    noise = ranging.NoiseModel(cfg.noise_sigma, cfg.nlos_bias_mean_m, cfg.fresh_bias_per_sample)
    ms = ranging.measure(net, nlos, noise, cfg.samples_per_link, seed=derive(cfg.master_seed, trial, _RANGES))
    return net, ms


def _trial_result(algo, ratio, trial, net, cfg, est, trace, gamma) -> TrialResult:
    ids = np.arange(net.n_nodes) if cfg.include_anchors else net.sensor_ids
    return TrialResult(
        algorithm=AlgorithmId(algo).value,
        nlos_ratio=float(ratio),
        trial=trial,
        rmse=metrics.rmse(est, net.positions, net.sensor_ids),
        ger=metrics.ger(est, net.positions, ids),
        gde=metrics.gde(est, net.positions, ids, net.comm_range),
        iterations_used=trace.iterations_used,
        messages_sent=trace.messages_sent,
        converged=trace.converged,
        gamma_used=gamma,
        sse=metrics.squared_error_sum(est, net.positions, net.sensor_ids),
        n_sensors=net.n_sensors,
    )


def run_algorithm(algo, network, ms, cfg: ScenarioConfig, seed=0, trial: int = 0,
                  nlos_ratio: float | None = None, stage1=None):
    """Run one pipeline on one realization.

    Returns ``(estimates, TrialResult, trace)``. ``seed`` keys the random
    initialization and the bootstrap streams. ``stage1`` may carry a
    precomputed ``(estimates, trace, gamma)`` for the Stage I solve, which
    three of the pipelines share. Divergence after all gamma halvings yields
    a result flagged ``diverged`` and ``None`` estimates.
    """
    algo = AlgorithmId(algo)
    ratio = cfg.nlos_ratio if nlos_ratio is None else nlos_ratio
    r1 = ranging.first_sample_view(ms)
    init_seed = derive(seed, _INIT)

    def first_stage():
        if stage1 is not None:
            return stage1
        return _with_retries(cfg, lambda sc: solver.run(network, r1, estimator(cfg, "huber_relaxed"), sc, init_seed))

    try:
        if algo is AlgorithmId.STAGE1:
            est, trace, gamma = first_stage()
        elif algo in (AlgorithmId.NLS_ORIGINAL, AlgorithmId.NLS_RELAXED):
            spec = estimator(cfg, algo.value)
            est, trace, gamma = _with_retries(cfg, lambda sc: solver.run(network, r1, spec, sc, init_seed))
        elif algo is AlgorithmId.STAGE1_STAGE2:
            s1, t1, _ = first_stage()
            spec = estimator(cfg, "huber_original")
            est, t2, gamma = _with_retries(cfg, lambda sc: solver.run(network, r1, spec, sc, initial=s1))
            trace = t1.extend(t2)
        else:
            s1, t1, _ = first_stage()
            spec = estimator(cfg, cfg.stage2_estimator, cfg.stage2_mirrored)
            bcfg = bootstrap.BootstrapConfig(cfg.samples_per_link, cfg.n_resample, derive(seed, _BOOTSTRAP))
            est, t2, gamma = _with_retries(
                cfg, lambda sc: bootstrap.run_stage2(network, ms, s1, spec, sc, bcfg))
            trace = t1.extend(t2)
    except solver.SolverDiverged as exc:
        log.warning("trial %d %s: %s", trial, algo.value, exc)
        return None, TrialResult(algo.value, float(ratio), trial, diverged=True, gamma_used=exc.gamma,
                                 n_sensors=network.n_sensors), None
    return est, _trial_result(algo, ratio, trial, network, cfg, est, trace, gamma), trace


def run_trial(cfg: ScenarioConfig, trial: int, nlos_ratio: float | None = None):
    """All configured algorithms on one paired realization.

    Returns ``(results, traces)`` with traces keyed by algorithm name.
    """
    ratio = cfg.nlos_ratio if nlos_ratio is None else nlos_ratio
    net, ms = make_trial(cfg, trial, ratio)
    seed = derive(cfg.master_seed, trial, 7)
    stage1 = None
    results, traces = [], {}
    algos = [AlgorithmId(a) for a in cfg.algorithms]
    needs_stage1 = {AlgorithmId.STAGE1, AlgorithmId.STAGE1_STAGE2, AlgorithmId.STAGE1_BOOTSTRAP}
    if needs_stage1.intersection(algos):
        est, res, trace = run_algorithm(AlgorithmId.STAGE1, net, ms, cfg, seed, trial, ratio)
        if est is not None:
            stage1 = (est, trace, res.gamma_used)
        if AlgorithmId.STAGE1 in algos:
            results.append(res)
            traces[res.algorithm] = trace
    for algo in algos:
        if algo is AlgorithmId.STAGE1:
            continue
        if algo in needs_stage1 and stage1 is None:
            results.append(TrialResult(algo.value, float(ratio), trial, diverged=True, n_sensors=net.n_sensors))
            continue
        _, res, trace = run_algorithm(algo, net, ms, cfg, seed, trial, ratio, stage1=stage1)
        results.append(res)
        traces[res.algorithm] = trace
    return results, traces


def _run_trial_star(args):
    return run_trial(*args)


def run_scenario(cfg: ScenarioConfig, jobs: int = 1, nlos_ratio: float | None = None) -> ScenarioResult:
    """Run ``cfg.n_trials`` paired trials at one NLOS ratio."""
    if nlos_ratio is not None:
        cfg = cfg.replace(nlos_ratio=nlos_ratio)
    work = [(cfg, t, cfg.nlos_ratio) for t in range(cfg.n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_trial_star, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        outputs = [run_trial(*w) for w in work]

    trials, traces = [], {}
    for t, (results, tr) in enumerate(outputs):
        trials.extend(results)
        if cfg.save_traces:
            for algo, trace in tr.items():
                if trace is not None:
                    traces[(algo, cfg.nlos_ratio, t)] = trace
    trials.sort(key=lambda r: (r.trial, list(cfg.algorithms).index(r.algorithm)))
    result = ScenarioResult(cfg, trials, traces)
    _check_divergence(result)
    return result


def _check_divergence(result: ScenarioResult) -> None:
    cfg = result.config
    for algo in cfg.algorithms:
        n_div = result.diverged_count(algo)
        if n_div:
            log.warning("%s at NLOS %g: %d of %d trials diverged and are excluded",
                        algo, cfg.nlos_ratio, n_div, cfg.n_trials)
        if n_div > cfg.max_divergence_fraction * cfg.n_trials:
            raise DivergenceCapExceeded(
                f"{algo} at NLOS {cfg.nlos_ratio:g}: {n_div}/{cfg.n_trials} trials diverged "
                f"(cap {cfg.max_divergence_fraction:.0%})")


def compare(cfg: ScenarioConfig, jobs: int = 1) -> dict:
    """:func:`run_scenario` at each of ``cfg.nlos_ratios``."""
    return {r: run_scenario(cfg, jobs, nlos_ratio=r) for r in cfg.nlos_ratios}


@dataclass
class SweepResult:
    sizes: tuple
    trials: dict  # size -> list of TrialResult

    def ecdfs(self) -> dict:
        return {s: metrics.ecdf([r.rmse for r in rs if not r.diverged]) for s, rs in self.trials.items()}

    def mean_rmse(self, size) -> float:
        return float(np.mean([r.rmse for r in self.trials[size] if not r.diverged]))

    def pooled_rmse(self, size) -> float:
        rs = [r for r in self.trials[size] if not r.diverged]
        return float(np.sqrt(sum(r.sse for r in rs) / sum(r.n_sensors for r in rs)))


def sample_size_sweep(cfg: ScenarioConfig, sizes, jobs: int = 1) -> SweepResult:
    """Stage I + bootstrap with ``samples_per_link`` set to each of ``sizes``.

    Each trial draws ``max(sizes)`` samples per link once and every size uses
    a prefix of them, so sizes are compared on the same realizations and
    share the Stage I solve.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or min(sizes) < 1:
        raise ValueError(f"sample sizes must be >= 1, got {sizes}")
    big = cfg.replace(samples_per_link=max(sizes), algorithms=("stage1_bootstrap",))
    work = [(big, sizes, t) for t in range(cfg.n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_sweep_trial_star, work))
    else:
        outputs = [_sweep_trial(*w) for w in work]
    out = {s: [] for s in sizes}
    for per_size in outputs:
        for s, res in per_size.items():
            out[s].append(res)
    return SweepResult(sizes, out)


def _sweep_trial_star(args):
    return _sweep_trial(*args)


def _sweep_trial(cfg: ScenarioConfig, sizes, trial: int) -> dict:
    net, ms = make_trial(cfg, trial)
    seed = derive(cfg.master_seed, trial, 7)
    est1, res1, trace1 = run_algorithm(AlgorithmId.STAGE1, net, ms, cfg, seed, trial)
    stage1 = (est1, trace1, res1.gamma_used) if est1 is not None else None
    out = {}
    for s in sizes:
        sub = cfg.replace(samples_per_link=s)
        if stage1 is None:
            out[s] = TrialResult(AlgorithmId.STAGE1_BOOTSTRAP.value, cfg.nlos_ratio, trial, diverged=True)
            continue
        _, res, _ = run_algorithm(AlgorithmId.STAGE1_BOOTSTRAP, net, ms.with_samples(s), sub, seed, trial,
                                  stage1=stage1)
        out[s] = res
    return out
