"""Command-line front end: config parsing, presets, CSV emission.

Configuration files are TOML.  Results are written as a CSV table with a
JSON manifest sidecar carrying the config digest, seed, tool version, and
timestamps, so every emitted row is regenerable bit-exactly.

Exit codes: 0 success, 2 validation failure, 3 acceptance failure,
4 numerical divergence in a non-sweep command.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (UtilityConfig, closed_form_pst_cost, mss_check,
                       priority_coefficients, utility_optimal_probabilities)
from .network import ABSTRACTED, FULL, NetworkConfig
from .plants import PlantParams, validate_plant
from .riccati import solve_gains
from .scheduling import CETT, PST, POLICIES
from .simulator import (COSTS, RECORD_LEVELS, ExperimentConfig, LoopSpec,
                        SweepRow, run_monte_carlo, sweep_grid)
from .presets import PRESET_TEXTS, preset_text

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ACCEPTANCE = 3
EXIT_DIVERGENCE = 4

SEED_ENV_VAR = "CONTENTION_LQG_SEED"

CSV_HEADER = ("policy,p,q,J_mean,J_stderr,trigger_freq,success_freq,"
              "gain_pct,gain_stderr,diverged_runs")

_TOP_KEYS = {"master_seed", "horizon", "runs", "record_level",
             "div_threshold", "network", "loop", "sweep", "priorities"}
_NETWORK_KEYS = {"mode", "m", "q"}
_LOOP_KEYS = {"policy", "p", "init", "init_mean",
              "A", "B", "C", "W", "V", "Q", "R"}
_SWEEP_KEYS = {"grid_p", "grid_q", "policies"}
_PRIORITY_KEYS = {"c", "alpha", "m"}


class ConfigError(ValueError):
    pass


@dataclass
class SweepSpec:
    grid_p: list
    grid_q: list
    policies: list


@dataclass
class LoadedConfig:
    """Resolved experiment plus the optional sweep/priorities sections."""

    experiment: ExperimentConfig
    sweep: SweepSpec
    priorities: dict
    digest: str


@dataclass
class RunManifest:
    """Sidecar metadata sufficient to regenerate an output file."""

    config_digest: str
    master_seed: int
    tool_version: str
    started_at: str
    finished_at: str

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def _check_keys(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _canonical(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    return value


def config_digest(loaded_dict: dict) -> str:
    """Platform-stable content hash of a resolved configuration."""
    text = json.dumps(_canonical(loaded_dict), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _build(data: dict) -> LoadedConfig:
    _check_keys(data, _TOP_KEYS, "top level")
    net_raw = data.get("network", {})
    _check_keys(net_raw, _NETWORK_KEYS, "[network]")
    loops_raw = data.get("loop")
    if not loops_raw:
        raise ConfigError("missing required [[loop]] section")

    try:
        network = NetworkConfig(
            mode=net_raw.get("mode", ABSTRACTED),
            m=int(net_raw.get("m", len(loops_raw))),
            q=float(net_raw.get("q", 1.0)))
        loops = []
        for i, raw in enumerate(loops_raw):
            _check_keys(raw, _LOOP_KEYS, f"[[loop]] entry {i}")
            missing = sorted(k for k in ("A", "B", "C", "W", "V", "Q", "R")
                             if k not in raw)
            if missing:
                raise ConfigError(
                    f"[[loop]] entry {i} missing keys: {', '.join(missing)}")
            params = PlantParams(A=raw["A"], B=raw["B"], C=raw["C"],
                                 W=raw["W"], V=raw["V"], Q=raw["Q"],
                                 R=raw["R"])
            loops.append(LoopSpec(params=params,
                                  policy=raw.get("policy", PST),
                                  p=float(raw.get("p", 0.5)),
                                  init=raw.get("init", "zero"),
                                  init_mean=raw.get("init_mean")))
        experiment = ExperimentConfig(
            loops=loops, network=network,
            horizon=int(data.get("horizon", 100_000)),
            runs=int(data.get("runs", 10)),
            master_seed=int(data.get("master_seed",
                                     os.environ.get(SEED_ENV_VAR, 0))),
            record_level=data.get("record_level", COSTS),
            div_threshold=float(data.get("div_threshold", 1e12)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sweep = None
    if "sweep" in data:
        raw = data["sweep"]
        _check_keys(raw, _SWEEP_KEYS, "[sweep]")
        policies = list(raw.get("policies", [PST, CETT]))
        for pol in policies:
            if pol not in POLICIES:
                raise ConfigError(f"unknown policy in [sweep]: {pol!r}")
        grid_p = [float(x) for x in raw.get("grid_p", [])]
        grid_q = [float(x) for x in raw.get("grid_q", [])]
        for val in grid_p + grid_q:
            if not 0.0 <= val <= 1.0:
                raise ConfigError(f"grid probability out of range: {val}")
        sweep = SweepSpec(grid_p=grid_p, grid_q=grid_q, policies=policies)

    priorities = data.get("priorities")
    if priorities is not None:
        _check_keys(priorities, _PRIORITY_KEYS, "[priorities]")

    digest_source = {
        "master_seed": experiment.master_seed,
        "horizon": experiment.horizon,
        "runs": experiment.runs,
        "record_level": experiment.record_level,
        "div_threshold": experiment.div_threshold,
        "network": {"mode": network.mode, "m": network.m, "q": network.q},
        "loops": [{
            "policy": s.policy, "p": s.p, "init": s.init,
            "init_mean": s.init_mean, "A": s.params.A, "B": s.params.B,
            "C": s.params.C, "W": s.params.W, "V": s.params.V,
            "Q": s.params.Q, "R": s.params.R} for s in experiment.loops],
        "sweep": None if sweep is None else sweep.__dict__,
        "priorities": priorities,
    }
    return LoadedConfig(experiment=experiment, sweep=sweep,
                        priorities=priorities,
                        digest=config_digest(digest_source))


def load_config(path: str) -> LoadedConfig:
    """Parse a TOML config file or a built-in preset name."""
    if path in PRESET_TEXTS and not os.path.exists(path):
        text = preset_text(path)
    else:
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return _build(data)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.10g" % float(value)


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            r.policy, _fmt(r.p), _fmt(r.q), _fmt(r.J_mean), _fmt(r.J_stderr),
            _fmt(r.trigger_freq), _fmt(r.success_freq), _fmt(r.gain_pct),
            _fmt(r.gain_stderr), str(int(r.diverged_runs))]))
    return "\n".join(lines) + "\n"


def emit_results(rows, path: str, manifest: RunManifest = None):
    """Write the CSV table, plus a manifest sidecar when one is given."""
    text = rows_to_csv(rows)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        if manifest is not None:
            with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(manifest.to_json())
    except OSError as exc:
        raise ConfigError(f"cannot write output {path!r}: {exc}") from exc


def _emit(rows, args, loaded, started_at):
    manifest = RunManifest(
        config_digest=loaded.digest,
        master_seed=loaded.experiment.master_seed,
        tool_version=__version__,
        started_at=started_at,
        finished_at=datetime.now(timezone.utc).isoformat())
    if args.out:
        emit_results(rows, args.out, manifest)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        sys.stdout.write(rows_to_csv(rows))


def _override(loaded: LoadedConfig, args) -> LoadedConfig:
    """Apply command-line flags on top of the config; flags win, loudly."""
    exp = loaded.experiment
    changes = {}
    if args.seed is not None and args.seed != exp.master_seed:
        changes["master_seed"] = args.seed
    if args.runs is not None and args.runs != exp.runs:
        changes["runs"] = args.runs
    if args.horizon is not None and args.horizon != exp.horizon:
        changes["horizon"] = args.horizon
    loops = exp.loops
    if args.policy is not None and any(s.policy != args.policy for s in loops):
        loops = [LoopSpec(params=s.params, policy=args.policy, p=s.p,
                          init=s.init, init_mean=s.init_mean) for s in loops]
        changes["loops"] = loops
    sweep = loaded.sweep
    if args.grid_p is not None or args.grid_q is not None:
        base_p = sweep.grid_p if sweep else [s.p for s in loops]
        base_q = sweep.grid_q if sweep else [exp.network.q]
        policies = sweep.policies if sweep else [loops[0].policy]
        sweep = SweepSpec(
            grid_p=args.grid_p if args.grid_p is not None else base_p,
            grid_q=args.grid_q if args.grid_q is not None else base_q,
            policies=policies)
    if not changes and sweep is loaded.sweep:
        return loaded
    if changes:
        warnings.warn("command-line flags override config values: "
                      + ", ".join(sorted(changes)), RuntimeWarning)
    exp = ExperimentConfig(
        loops=changes.get("loops", exp.loops), network=exp.network,
        horizon=changes.get("horizon", exp.horizon),
        runs=changes.get("runs", exp.runs),
        master_seed=changes.get("master_seed", exp.master_seed),
        record_level=exp.record_level, div_threshold=exp.div_threshold)
    digest_source = {
        "master_seed": exp.master_seed, "horizon": exp.horizon,
        "runs": exp.runs, "record_level": exp.record_level,
        "div_threshold": exp.div_threshold,
        "network": {"mode": exp.network.mode, "m": exp.network.m,
                    "q": exp.network.q},
        "loops": [{
            "policy": s.policy, "p": s.p, "init": s.init,
            "init_mean": s.init_mean, "A": s.params.A, "B": s.params.B,
            "C": s.params.C, "W": s.params.W, "V": s.params.V,
            "Q": s.params.Q, "R": s.params.R} for s in exp.loops],
        "sweep": None if sweep is None else sweep.__dict__,
        "priorities": loaded.priorities,
    }
    return LoadedConfig(experiment=exp, sweep=sweep,
                        priorities=loaded.priorities,
                        digest=config_digest(digest_source))


def _cmd_gains(loaded: LoadedConfig, args) -> int:
    for i, spec in enumerate(loaded.experiment.loops):
        g = solve_gains(spec.params)
        print(f"loop {i}:")
        for name, mat in (("K", g.K), ("L", g.L), ("P", g.P),
                          ("Theta_bar", g.Theta_bar), ("Theta", g.Theta),
                          ("Phi", g.Phi), ("Y", g.Y)):
            flat = np.atleast_2d(mat)
            body = "; ".join(" ".join(f"{v:.4f}" for v in row) for row in flat)
            print(f"  {name} = {body}")
    return EXIT_OK


def _cmd_check(loaded: LoadedConfig, args) -> int:
    exp = loaded.experiment
    ok = True
    for i, spec in enumerate(exp.loops):
        report = validate_plant(spec.params)
        if exp.network.mode == ABSTRACTED:
            q_i = exp.network.q
        else:
            q_i = float(np.prod([1.0 - s.p for j, s in enumerate(exp.loops)
                                 if j != i])) if len(exp.loops) > 1 else 1.0
        stable = mss_check(spec.params, spec.p, q_i)
        status = "ok" if report.ok else "INVALID"
        print(f"loop {i}: plant {status}; mean-square stable at "
              f"p={spec.p:g}, q={q_i:g}: {'yes' if stable else 'NO'}")
        for failure in report.failures:
            print(f"  - {failure}")
        ok = ok and report.ok
    return EXIT_OK if ok else EXIT_VALIDATION


def _cmd_cost(loaded: LoadedConfig, args) -> int:
    exp = loaded.experiment
    spec = exp.loops[0]
    gains = solve_gains(spec.params)
    sweep = loaded.sweep
    grid_p = sweep.grid_p if sweep else [spec.p]
    grid_q = sweep.grid_q if sweep else [exp.network.q]
    single = len(grid_p) == 1 and len(grid_q) == 1
    rows = []
    for p in grid_p:
        for q in grid_q:
            stable = mss_check(spec.params, p, q)
            if not stable and single:
                print("error: cost diverges (mean-square stability fails)",
                      file=sys.stderr)
                return EXIT_DIVERGENCE
            cost = closed_form_pst_cost(spec.params, gains, p, q) \
                if stable else np.inf
            rows.append(SweepRow(policy=PST, p=p, q=q, J_mean=cost,
                                 J_stderr=0.0, trigger_freq=p,
                                 success_freq=q * p, gain_pct=0.0,
                                 gain_stderr=0.0, diverged_runs=0))
    _emit(rows, args, loaded, datetime.now(timezone.utc).isoformat())
    return EXIT_OK


def _cmd_simulate(loaded: LoadedConfig, args) -> int:
    exp = loaded.experiment
    started = datetime.now(timezone.utc).isoformat()
    if loaded.sweep is not None and loaded.sweep.grid_p:
        if exp.network.mode != ABSTRACTED:
            raise ConfigError("grid sweeps require the abstracted network")
        rows = sweep_grid(exp.loops[0].params, loaded.sweep.grid_p,
                          loaded.sweep.grid_q or [exp.network.q],
                          policies=tuple(loaded.sweep.policies),
                          horizon=exp.horizon, runs=exp.runs,
                          master_seed=exp.master_seed, n_jobs=args.jobs)
        _emit(rows, args, loaded, started)
        return EXIT_OK
    result = run_monte_carlo(exp, n_jobs=args.jobs)
    rows = []
    for i, spec in enumerate(exp.loops):
        st = result.stats[i]
        q_i = exp.network.q if exp.network.mode == ABSTRACTED else float("nan")
        rows.append(SweepRow(policy=spec.policy, p=spec.p, q=q_i,
                             J_mean=st.J_mean, J_stderr=st.J_stderr,
                             trigger_freq=st.trigger_freq,
                             success_freq=st.success_freq, gain_pct=0.0,
                             gain_stderr=0.0,
                             diverged_runs=st.diverged_runs))
    _emit(rows, args, loaded, started)
    if any(st.diverged_runs for st in result.stats):
        return EXIT_DIVERGENCE
    return EXIT_OK


def _cmd_tune(loaded: LoadedConfig, args) -> int:
    raw = loaded.priorities
    if raw is None:
        raise ConfigError("tune requires a [priorities] section")
    if "c" in raw:
        c = np.asarray(raw["c"], dtype=float)
    elif "alpha" in raw:
        specs = loaded.experiment.loops
        gains = [solve_gains(s.params) for s in specs]
        c = priority_coefficients([s.params for s in specs], gains,
                                  raw["alpha"])
    elif "m" in raw:
        c = np.ones(int(raw["m"]))
    else:
        raise ConfigError("[priorities] needs one of: c, alpha, m")
    p_star = utility_optimal_probabilities(UtilityConfig(c=c))
    for i, val in enumerate(p_star):
        print(f"loop {i}: p* = {_fmt(val)}")
    return EXIT_OK


def _cmd_reproduce(loaded: LoadedConfig, args) -> int:
    from .acceptance import run_all
    started = datetime.now(timezone.utc).isoformat()
    results, rows = run_all(master_seed=loaded.experiment.master_seed,
                            n_jobs=args.jobs)
    if args.out:
        _emit(rows, args, loaded, started)
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        print(f"criterion {res.number} ({res.name}): {mark} -- {res.detail}")
    if all(res.passed for res in results):
        print("all acceptance criteria passed")
        return EXIT_OK
    failed = [str(r.number) for r in results if not r.passed]
    print(f"acceptance failed for criteria: {', '.join(failed)}")
    return EXIT_ACCEPTANCE


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contention-lqg",
        description="Event-triggered LQG loops on a contention network")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gains": "print the solved controller and estimator gains",
        "check": "validate plants and report mean-square stability",
        "cost": "closed-form constant-rate cost over a (p, q) grid",
        "simulate": "Monte Carlo estimate or (policy, p, q) sweep",
        "tune": "utility-optimal triggering probabilities",
        "reproduce-paper": "run the benchmark preset and acceptance checks",
    }
    for name, help_text in commands.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default="paper-example",
                         help="config file path or preset name")
        cmd.add_argument("--seed", type=int, default=None,
                         help="master seed (overrides config)")
        cmd.add_argument("--out", default=None,
                         help="output CSV path (manifest written alongside)")
        cmd.add_argument("--runs", type=int, default=None)
        cmd.add_argument("--horizon", type=int, default=None)
        cmd.add_argument("--grid-p", type=_float_list, default=None,
                         help="comma-separated p grid")
        cmd.add_argument("--grid-q", type=_float_list, default=None,
                         help="comma-separated q grid")
        cmd.add_argument("--policy", default=None, choices=POLICIES)
        cmd.add_argument("--jobs", type=int, default=None,
                         help="worker threads for Monte Carlo runs")
    return parser


_COMMANDS = {
    "gains": _cmd_gains,
    "check": _cmd_check,
    "cost": _cmd_cost,
    "simulate": _cmd_simulate,
    "tune": _cmd_tune,
    "reproduce-paper": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        loaded = load_config(args.config)
        loaded = _override(loaded, args)
        return _COMMANDS[args.command](loaded, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
