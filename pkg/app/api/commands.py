"""
Subcommand handlers. Each takes the parsed arguments, writes its artifacts
and returns the exit code.
"""
import logging
import time
from pathlib import Path

import numpy as np

from app.config import settings
from app.core.errors import ConfigError
from app.experiments.builders import compile_scenario, with_overrides
from app.experiments.compare import oracle_compare
from app.experiments.config import ScenarioConfig, parse_config
from app.experiments.feedback_study import (
    check_kmax,
    estimate_lambda_star,
    feedback_master_equation,
    lambda_scan,
    locate_minima,
    switching_protocol,
    with_constant_lambda,
)
from app.experiments.runner import run_ensemble, run_trajectory
from app.heom.indices import aux_count
from app.noise.paths import record_trajectory_path
from app.storage.artifacts import build_manifest, write_csv, write_manifest, write_noise_path

logger = logging.getLogger(__name__)


def _overrides(args) -> dict:
    return {
        "seed": getattr(args, "seed", None),
        "trajectories": getattr(args, "trajectories", None),
        "dt": getattr(args, "dt", None),
        "k_max": getattr(args, "kmax", None),
    }


def _load(args, apply_kmax: bool = True) -> tuple[ScenarioConfig, dict]:
    overrides = _overrides(args)
    if not apply_kmax:
        overrides["k_max"] = None
    config = with_overrides(parse_config(args.config), **overrides)
    return config, overrides


def _output_dir(args, config: ScenarioConfig) -> Path:
    if args.output:
        return Path(args.output)
    return Path(settings.output_dir) / f"{config.name}-{args.command}"


def _parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_range(text: str) -> np.ndarray:
    """'start:stop:step' (stop inclusive) or a comma list."""
    if ":" not in text:
        return np.array(_parse_floats(text))
    start, stop, step = (float(part) for part in text.split(":"))
    count = int(round((stop - start) / step)) + 1
    return np.round(np.linspace(start, stop, count), 12)


def cmd_run(args) -> int:
    config, overrides = _load(args)
    out = _output_dir(args, config)
    started = time.perf_counter()
    scenario = compile_scenario(config)
    record = run_trajectory(scenario, args.trajectory_index)
    write_csv(record.to_frame(), out / "trajectory.csv")
    if record.jump_times:
        write_csv(record.jumps_frame(), out / "jumps.csv")
    if args.save_noise:
        path = record_trajectory_path(scenario.master_seed, args.trajectory_index, scenario.steps, scenario.dt, scenario.driver_kinds)
        write_noise_path(path, out / "noise.chnp")
    manifest = build_manifest(
        config, "run", trajectories=1, overrides=overrides,
        wall_time_s=time.perf_counter() - started,
        extra={"trajectory_index": args.trajectory_index},
    )
    write_manifest(manifest, out)
    return 0


def cmd_ensemble(args) -> int:
    config, overrides = _load(args)
    out = _output_dir(args, config)
    started = time.perf_counter()
    result = run_ensemble(config, args.trajectories, args.threads)
    write_csv(result.to_frame(), out / "ensemble.csv")
    write_manifest(build_manifest(config, "ensemble", result.trajectories, overrides, time.perf_counter() - started), out)
    return 0


def cmd_scan_lambda(args) -> int:
    config, overrides = _load(args)
    out = _output_dir(args, config)
    started = time.perf_counter()
    lambdas = _parse_range(args.lambdas) if args.lambdas else None
    scan = lambda_scan(config, lambdas, args.threads)
    minima = locate_minima(scan)
    write_csv(scan, out / "scan.csv")
    write_csv(minima, out / "minima.csv")
    extra = {
        "minima": minima["lambda"].tolist(),
        "boundary_minima": minima.loc[minima["boundary"], "lambda"].tolist(),
        "estimate": estimate_lambda_star(config),
    }
    if args.check_kmax:
        extra["kmax_check"] = check_kmax(config, threads=args.threads, scan=scan)
    write_manifest(build_manifest(config, "scan-lambda", None, overrides, time.perf_counter() - started, extra), out)
    return 0


def cmd_switch_protocol(args) -> int:
    config, overrides = _load(args)
    out = _output_dir(args, config)
    started = time.perf_counter()
    switched = switching_protocol(config, args.lambda_plus, args.lambda_minus, args.t1, args.t2)
    constant = feedback_master_equation(with_constant_lambda(config, args.lambda_plus))
    frame = switched.to_frame()
    frame["xi2.constant"] = constant.series["xi2"]
    write_csv(frame, out / "switching.csv")
    extra = {
        "lambda_plus": args.lambda_plus,
        "lambda_minus": args.lambda_minus,
        "t1": args.t1,
        "t2": args.t2,
        "xi2_min": switched.xi2_min,
        "xi2_min_constant": constant.xi2_min,
    }
    write_manifest(build_manifest(config, "switch-protocol", None, overrides, time.perf_counter() - started, extra), out)
    return 0


def cmd_compare_oracle(args) -> int:
    config, overrides = _load(args, apply_kmax=False)
    out = _output_dir(args, config)
    started = time.perf_counter()
    k_max_list = [int(k) for k in _parse_floats(args.kmax)] if args.kmax else [config.truncation.k_max]
    overrides["k_max_list"] = k_max_list
    result = oracle_compare(config, args.trajectories, k_max_list, args.drive, args.nmax, args.threads)
    write_csv(result.frame, out / "comparison.csv")
    manifest = build_manifest(
        config, "compare-oracle", result.summary["trajectories"], overrides,
        time.perf_counter() - started, result.summary,
    )
    write_manifest(manifest, out)
    return 0


def cmd_count_aux(args) -> int:
    if args.modes < 1:
        raise ConfigError("--modes", f"need at least one mode, got {args.modes}")
    if args.kmax < 0:
        raise ConfigError("--kmax", f"k_max must be nonnegative, got {args.kmax}")
    print(aux_count(args.modes, args.kmax))
    return 0


def cmd_validate(args) -> int:
    config = parse_config(args.config)
    compile_scenario(config)
    print(f"valid: {config.name}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "ensemble": cmd_ensemble,
    "scan-lambda": cmd_scan_lambda,
    "switch-protocol": cmd_switch_protocol,
    "compare-oracle": cmd_compare_oracle,
    "count-aux": cmd_count_aux,
    "validate": cmd_validate,
}


def dispatch(args) -> int:
    handler = COMMANDS.get(args.command)
    if handler is None:
        raise ValueError(f"unknown subcommand '{args.command}'")
    return handler(args)
