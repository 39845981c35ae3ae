"""Command-line harness.

Subcommands:
  run            play N independent trials and export CSV/JSON results
  replicability  paired trials with shared algorithm randomness
  validate       check an instance file and report problems

Values may come from a JSON experiment config (--config); explicit
command-line flags override config values.  Exit codes: 0 success,
1 validation/configuration error, 2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .algorithms import ALGORITHM_NAMES, ConfigError
from .environment import ValidationError, load_instance
from .harness import aggregate_and_export, run_batch, run_replicability_experiment

_CONFIG_KEYS = {
    "instance",
    "algo",
    "horizon",
    "delta",
    "rho",
    "trials",
    "pairs",
    "seed",
    "out",
}


class _Parser(argparse.ArgumentParser):
    # bad flags are input validation, not runtime failure
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repmab", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--instance", help="instance JSON file")
        p.add_argument("--algo", choices=ALGORITHM_NAMES, help="algorithm name")
        p.add_argument("--horizon", type=int, help="override the instance horizon")
        p.add_argument("--delta", type=float, help="failure probability (default 0.05)")
        p.add_argument("--rho", type=float, help="replicability target (default 0.2)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="JSON experiment file with default values")

    run_p = sub.add_parser("run", help="run independent trials and export results")
    common(run_p)
    run_p.add_argument("--trials", type=int, help="number of trials (default 1)")

    rep_p = sub.add_parser("replicability", help="run paired-replicability trials")
    common(rep_p)
    rep_p.add_argument("--pairs", type=int, help="number of trial pairs (default 50)")

    val_p = sub.add_parser("validate", help="validate an instance file")
    val_p.add_argument("--instance", required=True, help="instance JSON file")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    unknown = sorted(set(payload) - _CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return payload


def _resolve(args, config: dict, key: str, default=None, required: bool = False):
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    if required and value is None:
        raise ValidationError(f"missing required option --{key}")
    return value


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValidationError(f"--seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    spec = load_instance(_resolve(args, config, "instance", required=True))
    algo = _resolve(args, config, "algo", required=True)
    if algo not in ALGORITHM_NAMES:
        raise ValidationError(f"unknown algorithm {algo!r}")
    logs = run_batch(
        spec,
        algo,
        delta=float(_resolve(args, config, "delta", 0.05)),
        rho=float(_resolve(args, config, "rho", 0.2)),
        trials=int(_resolve(args, config, "trials", 1)),
        seed=_check_seed(_resolve(args, config, "seed", 0)),
        horizon=_resolve(args, config, "horizon"),
    )
    out_dir = _resolve(args, config, "out", required=True)
    for path in aggregate_and_export(logs, None, out_dir):
        print(path)
    return 0


def _cmd_replicability(args) -> int:
    config = _load_config(args.config)
    spec = load_instance(_resolve(args, config, "instance", required=True))
    algo = _resolve(args, config, "algo", required=True)
    if algo not in ALGORITHM_NAMES:
        raise ValidationError(f"unknown algorithm {algo!r}")
    rho = float(_resolve(args, config, "rho", 0.2))
    delta = float(_resolve(args, config, "delta", 0.05))
    report = run_replicability_experiment(
        spec,
        algo,
        rho=rho,
        delta=delta,
        n_pairs=int(_resolve(args, config, "pairs", 50)),
        seed=_check_seed(_resolve(args, config, "seed", 0)),
        horizon=_resolve(args, config, "horizon"),
    )
    out_dir = Path(_resolve(args, config, "out", required=True))
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "replicability.json"
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(report_path)
    pairs_path = out_dir / "pairs.csv"
    with pairs_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("pair,xi_seed,env_seed_1,env_seed_2,strategies_match,actions_match\n")
        for row in report.pair_results:
            fh.write(
                f"{row['pair']},{row['xi_seed']},{row['env_seed_1']},"
                f"{row['env_seed_2']},{int(row['strategies_match'])},"
                f"{int(row['actions_match'])}\n"
            )
    print(pairs_path)
    return 0


def _cmd_validate(args) -> int:
    spec = load_instance(args.instance)
    print(
        f"{args.instance}: valid instance "
        f"(K={spec.k}, m={spec.m}, horizon={spec.horizon}, family={spec.family})"
    )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "replicability": _cmd_replicability,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
