"""Monte Carlo engine: episodes, aggregation, sweeps, and paired comparisons.

Episodes are deterministic functions of (master_seed, run index, loop index)
through counter-based stream splitting, so runs can execute in any order or
concurrently with identical results.  Single-loop episodes on the abstracted
channel run through a compiled kernel; the full contention network and the
cross-check path run through a plain Python slot loop built from the
estimator, scheduler, and network objects.

Cost is estimated two ways per episode: directly from the stage cost
x'Qx + u'Ru, and through the variance-reduced decomposition
tr(P W) + avg(e_bar' Y e_bar), which is the estimate reported as J.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernel
from .estimation import (LocalEstimator, RemoteEstimator, compute_errors,
                         kalman_predict, kalman_update, remote_predict,
                         remote_update)
from .network import ABSTRACTED, FULL, NetworkConfig, resolve_slot, resolve_slot_abstracted
from .plants import PlantParams, covariance_factor, sample_initial_state
from .riccati import GainSet, solve_gains
from .scheduling import (CETT, PST, STETT, SchedulerState, decide,
                         lambda_from_probability, propagate_psi)
from .streams import scheduler_purpose, stream
from .analysis import mss_check

COSTS = "costs"
MOMENTS = "moments"
TRACE = "trace"
RECORD_LEVELS = (COSTS, MOMENTS, TRACE)

INIT_ZERO = "zero"
INIT_STATIONARY = "stationary"

DIVERGENCE_NORM = 1e12
TUNABILITY_BIN_CAP = 16
MOMENT_D_CAP = 8

_POLICY_CODES = {PST: _kernel.POLICY_PST, STETT: _kernel.POLICY_STETT,
                 CETT: _kernel.POLICY_CETT}


@dataclass(frozen=True)
class LoopSpec:
    """One control loop: plant, triggering policy, and initial condition."""

    params: PlantParams
    policy: str = PST
    p: float = 0.5
    init: str = INIT_ZERO
    init_mean: np.ndarray = None

    def __post_init__(self):
        if self.policy not in _POLICY_CODES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if self.policy != PST and self.p >= 1.0:
            raise ValueError("threshold-based policies require p < 1")
        if self.init not in (INIT_ZERO, INIT_STATIONARY):
            raise ValueError(f"unknown init mode {self.init!r}")
        mean = self.init_mean
        if mean is None:
            mean = np.zeros(self.params.n)
        mean = np.asarray(mean, dtype=float).reshape(self.params.n)
        object.__setattr__(self, "init_mean", mean)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a Monte Carlo experiment."""

    loops: list
    network: NetworkConfig = field(default_factory=NetworkConfig)
    horizon: int = 100_000
    runs: int = 10
    master_seed: int = 0
    record_level: str = COSTS
    div_threshold: float = DIVERGENCE_NORM
    k_scale: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.loops:
            raise ValueError("at least one loop is required")
        if self.record_level not in RECORD_LEVELS:
            raise ValueError(f"unknown record level {self.record_level!r}")
        if self.network.mode == FULL and self.network.m != len(self.loops):
            raise ValueError("full network mode requires m == number of loops")


@dataclass
class EpisodeLoopRecord:
    """Per-loop outcome of one episode."""

    cost: float
    cost_direct: float
    trigger_freq: float
    success_freq: float
    collision_freq: float
    diverged: bool
    max_norm: float
    slots: int
    moments: dict = None
    trace: dict = None


@dataclass
class LoopStats:
    """Aggregate over runs for one loop."""

    J_mean: float
    J_stderr: float
    trigger_freq: float
    success_freq: float
    collision_freq: float
    diverged_runs: int


@dataclass
class SimResult:
    """All per-run records plus per-loop aggregates."""

    records: list        # records[run][loop] -> EpisodeLoopRecord
    stats: list          # stats[loop] -> LoopStats
    config: ExperimentConfig


@dataclass
class GainResult:
    """Paired relative improvement of an event policy over constant-rate."""

    gain: float
    gain_stderr: float
    J_baseline: float
    J_event: float


@dataclass
class SweepRow:
    policy: str
    p: float
    q: float
    J_mean: float
    J_stderr: float
    trigger_freq: float
    success_freq: float
    gain_pct: float
    gain_stderr: float
    diverged_runs: int


class CostAccumulator:
    """Running sum of per-slot stage costs."""

    def __init__(self):
        self.total = 0.0
        self.count = 0

    def add(self, stage_cost: float):
        self.total += float(stage_cost)
        self.count += 1

    @property
    def estimate(self) -> float:
        return self.total / self.count if self.count else 0.0


class _ArrayRNG:
    """Sequential reader over a pre-drawn uniform array (Generator-shaped)."""

    def __init__(self, values: np.ndarray):
        self._values = values
        self._pos = 0

    def random(self) -> float:
        u = self._values[self._pos]
        self._pos += 1
        return float(u)


@dataclass
class _EpisodeInputs:
    w: np.ndarray
    v: np.ndarray
    u_sched: np.ndarray
    u_chan: np.ndarray
    x0: np.ndarray


def _episode_inputs(cfg: ExperimentConfig, run: int, loop: int, spec: LoopSpec,
                    gains: GainSet) -> _EpisodeInputs:
    """Pre-draw every random input of one (run, loop) episode."""
    T, seed = cfg.horizon, cfg.master_seed
    n, o = spec.params.n, spec.params.n_outputs
    lw = covariance_factor(spec.params.W)
    lv = covariance_factor(spec.params.V)
    w = stream(seed, run, loop, "process").standard_normal((T, n)) @ lw.T
    v = stream(seed, run, loop, "measurement").standard_normal((T, o)) @ lv.T
    u_sched = stream(seed, run, loop, scheduler_purpose(spec.policy)).random(T)
    if cfg.network.mode == ABSTRACTED:
        u_chan = stream(seed, run, loop, "channel").random(T)
    else:
        u_chan = np.empty(0)
    if spec.init == INIT_STATIONARY:
        x0 = spec.init_mean + sample_initial_state(gains, stream(seed, run, loop, "init"))
    else:
        x0 = spec.init_mean.copy()
    return _EpisodeInputs(w=w, v=v, u_sched=u_sched, u_chan=u_chan, x0=x0)


def _kernel_episode(cfg: ExperimentConfig, run: int, loop: int, spec: LoopSpec,
                    gains: GainSet) -> EpisodeLoopRecord:
    inp = _episode_inputs(cfg, run, loop, spec, gains)
    T = cfg.horizon
    n, mu = spec.params.n, spec.params.n_inputs
    lam = 0.0 if spec.policy == PST else lambda_from_probability(spec.p, n)
    want_moments = cfg.record_level in (MOMENTS, TRACE)
    want_trace = cfg.record_level == TRACE

    trig_bins = np.zeros((TUNABILITY_BIN_CAP, 2), dtype=np.int64)
    tot_bins = np.zeros((TUNABILITY_BIN_CAP, 2), dtype=np.int64)
    post0_outer = np.zeros((n, n))
    postc_outer = np.zeros((n, n))
    ehat_outer = np.zeros((n, n))
    d_mom = MOMENT_D_CAP if want_moments else 1
    ebar_d_cnt = np.zeros(d_mom, dtype=np.int64)
    ebar_d_sum = np.zeros((d_mom, n))
    ebar_d_sumsq = np.zeros((d_mom, n))
    tr = T if want_trace else 1
    delta_tr = np.zeros(tr, dtype=np.uint8)
    sigma_tr = np.zeros(tr, dtype=np.uint8)
    epred_tr = np.zeros((tr, n))
    ebar_tr = np.zeros((tr, n))
    x_tr = np.zeros((tr, n))
    u_tr = np.zeros((tr, mu))

    out = _kernel.episode_kernel(
        np.ascontiguousarray(spec.params.A), np.ascontiguousarray(spec.params.B),
        np.ascontiguousarray(spec.params.C),
        np.ascontiguousarray(gains.K * cfg.k_scale), np.ascontiguousarray(gains.L),
        np.ascontiguousarray(gains.Y), np.ascontiguousarray(spec.params.Q),
        np.ascontiguousarray(spec.params.R), np.ascontiguousarray(gains.Phi),
        _POLICY_CODES[spec.policy], float(spec.p), float(lam),
        float(cfg.network.q),
        inp.x0, inp.x0 - spec.init_mean,
        inp.w, inp.v, inp.u_sched, inp.u_chan,
        float(cfg.div_threshold),
        trig_bins, tot_bins,
        want_moments, post0_outer, postc_outer, ehat_outer,
        ebar_d_cnt, ebar_d_sum, ebar_d_sumsq,
        want_trace, delta_tr, sigma_tr, epred_tr, ebar_tr, x_tr, u_tr)
    (slots, cost_err, cost_direct, n_trig, n_succ, n_coll,
     post_tot, post_trig, post0_cnt, postc_cnt, diverged, max_norm,
     err_code) = out

    if err_code == _kernel.ERR_STETT_COLLISION:
        from .scheduling import SchedulingError
        raise SchedulingError(
            "pure threshold triggering is undefined after a collision; "
            "use the combined policy")
    if err_code == _kernel.ERR_PSI_NOT_PD:
        from .scheduling import SchedulingError
        raise SchedulingError("singular Psi covariance")

    slots = max(int(slots), 1)
    cost = np.inf if diverged else float(
        np.trace(gains.P @ spec.params.W)) + cost_err / slots
    moments = None
    if want_moments:
        moments = {
            "trig_bins": trig_bins, "tot_bins": tot_bins,
            "post_trig": int(post_trig), "post_tot": int(post_tot),
            "post0_outer": post0_outer, "post0_count": int(post0_cnt),
            "postc_outer": postc_outer, "postc_count": int(postc_cnt),
            "ehat_outer": ehat_outer,
            "ebar_d_count": ebar_d_cnt, "ebar_d_sum": ebar_d_sum,
            "ebar_d_sumsq": ebar_d_sumsq,
        }
    trace = None
    if want_trace:
        trace = {"delta": delta_tr[:slots].astype(bool),
                 "sigma": sigma_tr[:slots].astype(bool),
                 "e_pred": epred_tr[:slots], "e_bar": ebar_tr[:slots],
                 "x": x_tr[:slots], "u": u_tr[:slots]}
    return EpisodeLoopRecord(
        cost=cost, cost_direct=cost_direct / slots,
        trigger_freq=n_trig / slots, success_freq=n_succ / slots,
        collision_freq=n_coll / slots, diverged=bool(diverged),
        max_norm=float(max_norm), slots=slots, moments=moments, trace=trace)


def run_episode_reference(cfg: ExperimentConfig, run_index: int,
                          gains_list: list = None) -> list:
    """Plain Python slot loop over estimator/scheduler/network objects.

    Handles the full contention network and any loop count; also serves as
    an independent cross-check of the compiled kernel (identical stream
    consumption, so trigger and success sequences must match bit for bit).
    """
    if gains_list is None:
        gains_list = [solve_gains(spec.params) for spec in cfg.loops]
    m = len(cfg.loops)
    T = cfg.horizon
    full = cfg.network.mode == FULL
    want_trace = cfg.record_level == TRACE

    inputs = [_episode_inputs(cfg, run_index, i, spec, gains_list[i])
              for i, spec in enumerate(cfg.loops)]
    xs = [inp.x0.copy() for inp in inputs]
    locals_ = [LocalEstimator(params=spec.params, gains=g, x_pred=spec.init_mean)
               for spec, g in zip(cfg.loops, gains_list)]
    remotes = [RemoteEstimator(params=spec.params, x_pred=spec.init_mean)
               for spec in cfg.loops]
    scheds = [SchedulerState(policy=spec.policy, p=spec.p, A=spec.params.A,
                             Phi=g.Phi, rng=_ArrayRNG(inp.u_sched))
              for spec, g, inp in zip(cfg.loops, gains_list, inputs)]
    chans = [None if full else _ArrayRNG(inp.u_chan) for inp in inputs]
    u_prev = [np.zeros(spec.params.n_inputs) for spec in cfg.loops]

    acc_err = [CostAccumulator() for _ in range(m)]
    acc_direct = [CostAccumulator() for _ in range(m)]
    n_trig = [0] * m
    n_succ = [0] * m
    n_coll = [0] * m
    max_norm = [0.0] * m
    diverged = [False] * m
    traces = None
    if want_trace:
        traces = [{"delta": [], "sigma": [], "e_pred": [], "e_bar": [],
                   "x": [], "u": []} for _ in range(m)]

    slots = 0
    for k in range(T):
        deltas = np.empty(m, dtype=bool)
        errs = []
        for i, spec in enumerate(cfg.loops):
            if k > 0:
                kalman_predict(locals_[i], u_prev[i])
            y = spec.params.C @ xs[i] + inputs[i].v[k]
            kalman_update(locals_[i], y)
            err = compute_errors(xs[i], locals_[i], remotes[i])
            errs.append(err)
            deltas[i] = decide(scheds[i], err.e_pred)
        if full:
            outcome = resolve_slot(deltas)
            rhos, sigmas = outcome.rho, outcome.sigma
        else:
            rhos = np.empty(m, dtype=bool)
            sigmas = np.empty(m, dtype=bool)
            for i in range(m):
                rhos[i], sigmas[i] = resolve_slot_abstracted(
                    bool(deltas[i]), cfg.network.q, chans[i])
        stop = False
        for i, spec in enumerate(cfg.loops):
            g = gains_list[i]
            payload = locals_[i].x_upd.copy() if sigmas[i] else None
            remote_update(remotes[i], bool(sigmas[i]), payload)
            e_bar = xs[i] - remotes[i].x_upd
            u = (g.K * cfg.k_scale) @ remotes[i].x_upd
            acc_err[i].add(e_bar @ g.Y @ e_bar)
            acc_direct[i].add(xs[i] @ spec.params.Q @ xs[i] + u @ spec.params.R @ u)
            n_trig[i] += int(deltas[i])
            n_succ[i] += int(sigmas[i])
            n_coll[i] += int(deltas[i] and not rhos[i])
            if want_trace:
                tr = traces[i]
                tr["delta"].append(bool(deltas[i]))
                tr["sigma"].append(bool(sigmas[i]))
                tr["e_pred"].append(errs[i].e_pred.copy())
                tr["e_bar"].append(e_bar.copy())
                tr["x"].append(xs[i].copy())
                tr["u"].append(u.copy())
            remote_predict(remotes[i], u)
            xs[i] = spec.params.A @ xs[i] + spec.params.B @ u + inputs[i].w[k]
            u_prev[i] = u
            propagate_psi(scheds[i], bool(deltas[i]), bool(rhos[i]), bool(sigmas[i]))
            norm = float(np.linalg.norm(xs[i]))
            max_norm[i] = max(max_norm[i], norm)
            if norm > cfg.div_threshold:
                diverged[i] = True
                stop = True
        slots = k + 1
        if stop:
            break

    records = []
    for i, spec in enumerate(cfg.loops):
        cost = np.inf if diverged[i] else float(
            np.trace(gains_list[i].P @ spec.params.W)) + acc_err[i].estimate
        trace = None
        if want_trace:
            trace = {key: np.asarray(vals) for key, vals in traces[i].items()}
        records.append(EpisodeLoopRecord(
            cost=cost, cost_direct=acc_direct[i].estimate,
            trigger_freq=n_trig[i] / slots, success_freq=n_succ[i] / slots,
            collision_freq=n_coll[i] / slots, diverged=diverged[i],
            max_norm=max_norm[i], slots=slots, moments=None, trace=trace))
    return records


def _run_one(cfg: ExperimentConfig, run_index: int, gains_list: list) -> list:
    if cfg.network.mode == ABSTRACTED:
        return [_kernel_episode(cfg, run_index, i, spec, gains_list[i])
                for i, spec in enumerate(cfg.loops)]
    return run_episode_reference(cfg, run_index, gains_list)


def _advisory_mss_warning(cfg: ExperimentConfig):
    for i, spec in enumerate(cfg.loops):
        if cfg.network.mode == ABSTRACTED:
            q_i = cfg.network.q
        else:
            others = [s.p for j, s in enumerate(cfg.loops) if j != i]
            q_i = float(np.prod([1.0 - pj for pj in others])) if others else 1.0
        if not mss_check(spec.params, spec.p, q_i):
            warnings.warn(
                f"loop {i}: mean-square stability condition fails at "
                f"p={spec.p}, q={q_i:.4g}; runs may diverge", RuntimeWarning)


def run_episode(cfg: ExperimentConfig, run_index: int) -> list:
    """Run one episode; returns one EpisodeLoopRecord per loop."""
    gains_list = [solve_gains(spec.params) for spec in cfg.loops]
    _advisory_mss_warning(cfg)
    return _run_one(cfg, run_index, gains_list)


def _aggregate(cfg: ExperimentConfig, records: list) -> SimResult:
    stats = []
    for i in range(len(cfg.loops)):
        costs = np.array([records[r][i].cost for r in range(cfg.runs)])
        slots = np.array([records[r][i].slots for r in range(cfg.runs)], dtype=float)
        trig = sum(records[r][i].trigger_freq * records[r][i].slots
                   for r in range(cfg.runs))
        succ = sum(records[r][i].success_freq * records[r][i].slots
                   for r in range(cfg.runs))
        coll = sum(records[r][i].collision_freq * records[r][i].slots
                   for r in range(cfg.runs))
        total_slots = slots.sum()
        n_div = sum(records[r][i].diverged for r in range(cfg.runs))
        mean = float(np.mean(costs))
        if cfg.runs > 1 and np.all(np.isfinite(costs)):
            stderr = float(np.std(costs, ddof=1) / np.sqrt(cfg.runs))
        elif np.all(np.isfinite(costs)):
            stderr = 0.0
        else:
            stderr = np.inf
        stats.append(LoopStats(
            J_mean=mean, J_stderr=stderr,
            trigger_freq=trig / total_slots, success_freq=succ / total_slots,
            collision_freq=coll / total_slots, diverged_runs=int(n_div)))
    return SimResult(records=records, stats=stats, config=cfg)


def run_monte_carlo(cfg: ExperimentConfig, n_jobs: int = None) -> SimResult:
    """Aggregate run_episode over cfg.runs runs.

    The aggregate is independent of execution order; with n_jobs > 1 the
    runs execute on a thread pool (the compiled kernel releases the GIL).
    """
    gains_list = [solve_gains(spec.params) for spec in cfg.loops]
    _advisory_mss_warning(cfg)
    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(
                lambda r: _run_one(cfg, r, gains_list), range(cfg.runs)))
    else:
        records = [_run_one(cfg, r, gains_list) for r in range(cfg.runs)]
    return _aggregate(cfg, records)


def performance_gain(cfg_baseline: ExperimentConfig,
                     cfg_event: ExperimentConfig,
                     n_jobs: int = None) -> list:
    """Paired relative cost improvement (J_base - J_event) / J_base per loop.

    Both configs must agree on everything except the triggering policies.
    Plant, measurement, and channel streams coincide by construction
    (common random numbers); scheduler streams are policy-keyed and differ.
    """
    if len(cfg_baseline.loops) != len(cfg_event.loops):
        raise ValueError("configs must have the same number of loops")
    for a, b in zip(cfg_baseline.loops, cfg_event.loops):
        if a.params is not b.params and not (
                np.array_equal(a.params.A, b.params.A)
                and np.array_equal(a.params.W, b.params.W)):
            raise ValueError("configs must share plant parameters")
        if a.p != b.p:
            raise ValueError("configs must share the triggering probability p")
    for name in ("horizon", "runs", "master_seed", "div_threshold"):
        if getattr(cfg_baseline, name) != getattr(cfg_event, name):
            raise ValueError(f"configs must agree on {name}")
    if cfg_baseline.network != cfg_event.network:
        raise ValueError("configs must agree on the network")

    res_b = run_monte_carlo(cfg_baseline, n_jobs=n_jobs)
    res_e = run_monte_carlo(cfg_event, n_jobs=n_jobs)
    out = []
    for i in range(len(cfg_baseline.loops)):
        jb = np.array([res_b.records[r][i].cost for r in range(cfg_baseline.runs)])
        je = np.array([res_e.records[r][i].cost for r in range(cfg_event.runs)])
        jb_mean = float(np.mean(jb))
        if not jb_mean > 0.0:
            raise ValueError("baseline cost must be positive")
        diff = jb - je
        gain = float(np.mean(diff)) / jb_mean
        if len(diff) > 1 and np.all(np.isfinite(diff)):
            stderr = float(np.std(diff, ddof=1) / np.sqrt(len(diff))) / jb_mean
        elif np.all(np.isfinite(diff)):
            stderr = 0.0
        else:
            stderr = np.inf
        out.append(GainResult(gain=gain, gain_stderr=stderr,
                              J_baseline=jb_mean, J_event=float(np.mean(je))))
    return out


def sweep_grid(params: PlantParams, p_grid, q_grid, policies=(PST, CETT),
               horizon: int = 100_000, runs: int = 10, master_seed: int = 0,
               n_jobs: int = None) -> list:
    """Cross-product (policy, p, q) evaluation on the abstracted channel.

    Returns one SweepRow per (policy, p, q), policy-major.  Event-policy
    rows carry the paired gain over the constant-rate baseline at the same
    grid point; baseline rows carry gain 0 (self-comparison).
    """
    for pol in policies:
        if pol not in _POLICY_CODES:
            raise ValueError(f"unknown policy {pol!r}")
    p_grid = [float(p) for p in p_grid]
    q_grid = [float(q) for q in q_grid]

    def _cfg(policy, p, q):
        return ExperimentConfig(
            loops=[LoopSpec(params=params, policy=policy, p=p)],
            network=NetworkConfig(mode=ABSTRACTED, q=q),
            horizon=horizon, runs=runs, master_seed=master_seed)

    base = {}
    for p in p_grid:
        for q in q_grid:
            base[(p, q)] = run_monte_carlo(_cfg(PST, p, q), n_jobs=n_jobs)

    rows = []
    for policy in policies:
        for p in p_grid:
            for q in q_grid:
                res_b = base[(p, q)]
                if policy == PST:
                    res = res_b
                    gain, gstderr = 0.0, 0.0
                else:
                    res = run_monte_carlo(_cfg(policy, p, q), n_jobs=n_jobs)
                    jb = np.array([res_b.records[r][0].cost for r in range(runs)])
                    je = np.array([res.records[r][0].cost for r in range(runs)])
                    jb_mean = float(np.mean(jb))
                    diff = jb - je
                    gain = float(np.mean(diff)) / jb_mean
                    if runs > 1 and np.all(np.isfinite(diff)):
                        gstderr = float(np.std(diff, ddof=1)
                                        / np.sqrt(runs)) / jb_mean
                    elif np.all(np.isfinite(diff)):
                        gstderr = 0.0
                    else:
                        gstderr = np.inf
                st = res.stats[0]
                rows.append(SweepRow(
                    policy=policy, p=p, q=q,
                    J_mean=st.J_mean, J_stderr=st.J_stderr,
                    trigger_freq=st.trigger_freq, success_freq=st.success_freq,
                    gain_pct=100.0 * gain, gain_stderr=100.0 * gstderr,
                    diverged_runs=st.diverged_runs))
    return rows
