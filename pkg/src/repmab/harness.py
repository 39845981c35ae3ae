"""Experiment runner: single trials, batches, paired-replicability runs.

A trial is deterministic given (instance, algorithm, algorithm seed,
environment seed): algorithm randomness and environment randomness come
from two separate labeled-stream roots, so paired trials can fix the
former while redrawing the latter.  Per-round work is kept to plain
scalar operations; everything epoch-shaped (estimate refreshes, oracle
monitors, expected regret and violation) happens once per epoch.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import environment
from .algorithms import epoch_budget, make_policy
from .environment import (
    InstanceSpec,
    OracleSolution,
    feedback_tables,
    instant_regret,
    instant_violation,
    solve_oracle,
)
from .randomness import RandomSource, StreamLabel, first_uniforms, validate_strategy

__all__ = [
    "EpochRecord",
    "ReplicabilityReport",
    "TrialLog",
    "aggregate_and_export",
    "run_batch",
    "run_replicability_experiment",
    "run_trial",
]

SAFETY_TOL = environment.SAFETY_TOL


@dataclass
class EpochRecord:
    """State snapshot taken when an epoch begins."""

    h: int
    t_start: int
    x: np.ndarray
    zeta: np.ndarray
    r_hat: np.ndarray
    g_hat: np.ndarray
    sigma: float
    x_tilde: np.ndarray | None
    fallback: bool
    clean: bool
    contains_x_star: bool
    safe: bool


@dataclass
class TrialLog:
    """Complete record of one trial.

    Per-round arrays are parallel over t = 1..T; epoch records carry the
    strategies, so the per-round strategy is epochs[epoch_of_round[t-1]].x
    (or the one-hot of the action for the per-round baseline).
    """

    algo: str
    horizon: int
    m: int
    xi_seed: int
    env_seed: int
    actions: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    epoch_of_round: np.ndarray
    inst_regret: np.ndarray
    inst_violation: np.ndarray
    epochs: list[EpochRecord]
    per_round_strategy: bool
    _k_hint: int = 1
    regret_total: float = 0.0
    violation_total: float = 0.0
    epoch_count: int = 0
    fallback_count: int = 0
    unsafe_rounds: int = 0
    any_unsafe: bool = False
    clean_all: bool = True
    containment_ok: bool = True

    def finalize(self) -> None:
        self.regret_total = float(np.sum(self.inst_regret))
        if self.m:
            # max over constraints of the summed clamped excess, never
            # the sum of per-round maxima
            self.violation_total = float(np.max(np.sum(self.inst_violation, axis=1)))
        else:
            self.violation_total = 0.0
        self.epoch_count = self.epochs[-1].h if self.epochs else 0
        self.fallback_count = sum(1 for e in self.epochs if e.fallback)
        self.clean_all = all(e.clean for e in self.epochs)
        self.containment_ok = all(e.contains_x_star for e in self.epochs)
        self.any_unsafe = self.unsafe_rounds > 0

    def strategy_matrix(self) -> np.ndarray:
        """Per-round strategies as a (T, K) matrix."""
        if self.per_round_strategy:
            out = np.zeros((self.horizon, self._k_hint))
            out[np.arange(self.horizon), self.actions] = 1.0
            return out
        stack = np.vstack([e.x for e in self.epochs])
        return stack[self.epoch_of_round]

    def clean_flags(self) -> np.ndarray:
        """Per-round clean-event flag (True while estimates stay inside
        their widths), expanded from the epoch records."""
        if self.per_round_strategy:
            return np.ones(self.horizon, dtype=bool)
        per_epoch = np.array([e.clean for e in self.epochs], dtype=bool)
        return per_epoch[self.epoch_of_round]

    def same_strategy_sequence(self, other: "TrialLog") -> bool:
        return bool(np.array_equal(self.strategy_matrix(), other.strategy_matrix()))

    def same_action_sequence(self, other: "TrialLog") -> bool:
        return bool(np.array_equal(self.actions, other.actions))

    def equals(self, other: "TrialLog") -> bool:
        """Bit-exact equality of everything recorded (replay checks)."""
        if (
            self.algo != other.algo
            or self.horizon != other.horizon
            or self.m != other.m
            or len(self.epochs) != len(other.epochs)
        ):
            return False
        arrays = (
            (self.actions, other.actions),
            (self.rewards, other.rewards),
            (self.costs, other.costs),
            (self.epoch_of_round, other.epoch_of_round),
            (self.inst_regret, other.inst_regret),
            (self.inst_violation, other.inst_violation),
        )
        if not all(np.array_equal(a, b) for a, b in arrays):
            return False
        for mine, theirs in zip(self.epochs, other.epochs):
            if mine.h != theirs.h or mine.t_start != theirs.t_start:
                return False
            if not np.array_equal(mine.x, theirs.x):
                return False
            if mine.sigma != theirs.sigma:
                return False
        return True


def _epoch_record(policy, oracle, spec, t_start: int) -> EpochRecord:
    st = policy.state
    h = st.h
    clean = True
    if h >= 1:
        played = st.epoch_start_counts >= 1
        if bool(np.any(played)):
            r_err = np.abs(st.r_hat - spec.reward_means) > st.zeta
            clean = not bool(np.any(r_err[played]))
            if clean and policy.m:
                g_err = (
                    np.abs(st.g_hat - spec.cost_means) > st.zeta[None, :]
                )
                clean = not bool(np.any(g_err[:, played]))
    if policy.m:
        lower = st.g_hat - st.zeta[None, :]
        contains = bool(np.all(lower @ oracle.x_star <= spec.thresholds + SAFETY_TOL))
    else:
        contains = True
    if spec.m:
        safe = bool(
            np.all(spec.cost_means @ st.x_current <= spec.thresholds + SAFETY_TOL)
        )
    else:
        safe = True
    return EpochRecord(
        h=h,
        t_start=t_start,
        x=st.x_current.copy(),
        zeta=st.zeta.copy(),
        r_hat=st.r_hat.copy(),
        g_hat=st.g_hat.copy(),
        sigma=st.sigma,
        x_tilde=None if st.x_tilde is None else st.x_tilde.copy(),
        fallback=policy.last_fallback,
        clean=clean,
        contains_x_star=contains,
        safe=safe,
    )


def run_trial(
    spec: InstanceSpec,
    algo: str,
    xi_seed: int,
    env_seed: int,
    *,
    delta: float,
    rho: float,
    horizon: int | None = None,
    oracle: OracleSolution | None = None,
) -> TrialLog:
    """Play one trial of ``algo`` on ``spec`` for T rounds.

    Deterministic in the full argument tuple; two calls with equal
    arguments produce bit-identical logs.
    """
    horizon = spec.horizon if horizon is None else int(horizon)
    if oracle is None:
        oracle = solve_oracle(spec)
    xi = RandomSource(xi_seed)
    env = RandomSource(env_seed)
    policy = make_policy(algo, spec, horizon, delta, rho, xi, oracle)
    k = spec.k
    m = spec.m

    rewards_tab, costs_tab = feedback_tables(spec, env, horizon)
    reward_rows = rewards_tab.tolist()
    cost_rows = [costs_tab[i].tolist() for i in range(m)]

    actions = np.empty(horizon, dtype=np.int32)
    rewards = np.empty(horizon)
    costs = np.empty((m, horizon))
    epoch_of_round = np.zeros(horizon, dtype=np.int32)
    inst_regret = np.empty(horizon)
    inst_violation = np.empty((m, horizon))

    log = TrialLog(
        algo=algo,
        horizon=horizon,
        m=m,
        xi_seed=xi_seed,
        env_seed=env_seed,
        actions=actions,
        rewards=rewards,
        costs=costs,
        epoch_of_round=epoch_of_round,
        inst_regret=inst_regret,
        inst_violation=inst_violation,
        epochs=[],
        per_round_strategy=(policy.kind == "per-round"),
    )
    log._k_hint = k

    per_round = policy.kind == "per-round"
    deterministic = policy.kind == "deterministic"
    if per_round:
        _run_per_round(log, policy, spec, oracle, reward_rows, cost_rows)
        log.finalize()
        return log

    action_u = (
        None
        if deterministic
        else first_uniforms(xi, "action", rnd=np.arange(1, horizon + 1)).tolist()
    )

    observe = policy.observe
    epochs = log.epochs
    unsafe_rounds = 0

    def open_epoch(t: int):
        rec = _epoch_record(policy, oracle, spec, t)
        epochs.append(rec)
        x = validate_strategy(rec.x)
        regret_const = instant_regret(spec, oracle, x)
        viol_const = instant_violation(spec, x)
        cdf = np.cumsum(x).tolist()
        return rec, regret_const, viol_const, cdf

    rec, regret_const, viol_const, cdf = open_epoch(1)
    span_start = 1

    def close_span(t_end: int) -> None:
        # rounds span_start..t_end (inclusive) belonged to the current epoch
        lo, hi = span_start - 1, t_end
        epoch_of_round[lo:hi] = rec.h
        inst_regret[lo:hi] = regret_const
        for i in range(m):
            inst_violation[i, lo:hi] = viol_const[i]

    current_arm = getattr(policy, "current_arm", 0)
    for t in range(1, horizon + 1):
        if policy.pending_close:
            close_span(t - 1)
            policy.close_epoch()
            rec, regret_const, viol_const, cdf = open_epoch(t)
            span_start = t
            if deterministic:
                current_arm = policy.current_arm
        if deterministic:
            a = current_arm
        else:
            u = action_u[t - 1]
            a = bisect_left(cdf, u)
            if a >= k:
                a = k - 1
                while a > 0 and cdf[a] == cdf[a - 1]:
                    a -= 1
        tm1 = t - 1
        r = reward_rows[tm1][a]
        if m:
            c_row = [cost_rows[i][tm1][a] for i in range(m)]
            for i in range(m):
                costs[i, tm1] = c_row[i]
        else:
            c_row = ()
        observe(a, r, c_row)
        actions[tm1] = a
        rewards[tm1] = r
        if not rec.safe:
            unsafe_rounds += 1
    close_span(horizon)

    log.unsafe_rounds = unsafe_rounds
    log.finalize()
    if log.epoch_count > epoch_budget(k, horizon):
        raise RuntimeError("epoch budget exceeded")
    return log


def _run_per_round(log, policy, spec, oracle, reward_rows, cost_rows) -> None:
    """Baseline path: strategy is the one-hot of the per-round pick."""
    m = spec.m
    horizon = log.horizon
    regret_of_arm = [
        instant_regret(spec, oracle, _onehot(spec.k, a)) for a in range(spec.k)
    ]
    viol_of_arm = [instant_violation(spec, _onehot(spec.k, a)) for a in range(spec.k)]
    eye = np.eye(spec.k)
    unsafe_arm = [
        bool(np.any(spec.cost_means @ eye[a] > spec.thresholds + SAFETY_TOL))
        for a in range(spec.k)
    ]
    unsafe = 0
    for t in range(1, horizon + 1):
        a = policy.pick(t)
        tm1 = t - 1
        r = reward_rows[tm1][a]
        c_row = [cost_rows[i][tm1][a] for i in range(m)]
        policy.observe(a, r, c_row)
        log.actions[tm1] = a
        log.rewards[tm1] = r
        for i in range(m):
            log.costs[i, tm1] = c_row[i]
        log.epoch_of_round[tm1] = tm1
        log.inst_regret[tm1] = regret_of_arm[a]
        for i in range(m):
            log.inst_violation[i, tm1] = viol_of_arm[a][i]
        if unsafe_arm[a]:
            unsafe += 1
    log.unsafe_rounds = unsafe


def _onehot(k: int, a: int) -> np.ndarray:
    x = np.zeros(k)
    x[a] = 1.0
    return x


def trial_seeds(master_seed: int, trial: int) -> tuple[int, int]:
    """Algorithm and environment seeds for one trial of a batch."""
    master = RandomSource(master_seed)
    xi = master.derive_stream(StreamLabel("trial-xi", rnd=trial)).next_raw64()
    env = master.derive_stream(StreamLabel("trial-env", rnd=trial)).next_raw64()
    return xi, env


def pair_seeds(master_seed: int, pair: int) -> tuple[int, int, int]:
    """One shared algorithm seed plus two environment seeds for a pair."""
    master = RandomSource(master_seed)
    xi = master.derive_stream(StreamLabel("pair-xi", rnd=pair)).next_raw64()
    env_a = master.derive_stream(StreamLabel("pair-env", cons=0, rnd=pair)).next_raw64()
    env_b = master.derive_stream(StreamLabel("pair-env", cons=1, rnd=pair)).next_raw64()
    return xi, env_a, env_b


def run_batch(
    spec: InstanceSpec,
    algo: str,
    *,
    delta: float,
    rho: float,
    trials: int,
    seed: int,
    horizon: int | None = None,
) -> list[TrialLog]:
    """Run ``trials`` independent trials, seeds derived from one master."""
    oracle = solve_oracle(spec)
    logs = []
    for j in range(trials):
        xi_seed, env_seed = trial_seeds(seed, j)
        logs.append(
            run_trial(
                spec,
                algo,
                xi_seed,
                env_seed,
                delta=delta,
                rho=rho,
                horizon=horizon,
                oracle=oracle,
            )
        )
    return logs


@dataclass
class ReplicabilityReport:
    """Empirical estimate of the probability that paired runs diverge."""

    pairs: int
    mismatches: int
    rate: float
    rho_target: float
    half_width: float
    action_mismatches: int
    action_rate: float
    pair_results: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "mismatches": self.mismatches,
            "rate": self.rate,
            "rho_target": self.rho_target,
            "half_width": self.half_width,
            "action_mismatches": self.action_mismatches,
            "action_rate": self.action_rate,
        }


def run_replicability_experiment(
    spec: InstanceSpec,
    algo: str,
    *,
    rho: float,
    delta: float,
    n_pairs: int,
    seed: int,
    horizon: int | None = None,
    keep_pair_results: bool = True,
) -> ReplicabilityReport:
    """Paired trials with shared algorithm randomness.

    Each pair runs the algorithm twice with the same algorithm seed and
    independent environment seeds, then compares the full strategy
    sequences element-wise (exact equality; the sequences come from
    deterministic code paths).  Action sequences are compared as well
    and reported separately.
    """
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    oracle = solve_oracle(spec)
    mismatches = 0
    action_mismatches = 0
    results = []
    for p in range(n_pairs):
        xi_seed, env_a, env_b = pair_seeds(seed, p)
        kwargs = dict(delta=delta, rho=rho, horizon=horizon, oracle=oracle)
        log_a = run_trial(spec, algo, xi_seed, env_a, **kwargs)
        log_b = run_trial(spec, algo, xi_seed, env_b, **kwargs)
        same_seq = log_a.same_strategy_sequence(log_b)
        same_act = log_a.same_action_sequence(log_b)
        mismatches += 0 if same_seq else 1
        action_mismatches += 0 if same_act else 1
        if keep_pair_results:
            results.append(
                {
                    "pair": p,
                    "xi_seed": xi_seed,
                    "env_seed_1": env_a,
                    "env_seed_2": env_b,
                    "strategies_match": same_seq,
                    "actions_match": same_act,
                }
            )
    half_width = 3.0 * math.sqrt(rho * (1.0 - rho) / n_pairs)
    return ReplicabilityReport(
        pairs=n_pairs,
        mismatches=mismatches,
        rate=mismatches / n_pairs,
        rho_target=rho,
        half_width=half_width,
        action_mismatches=action_mismatches,
        action_rate=action_mismatches / n_pairs,
        pair_results=results,
    )


# -- export ------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _strategy_cell(x: np.ndarray) -> str:
    return ";".join(_fmt(v) for v in x)


def aggregate_and_export(
    logs: list[TrialLog],
    report: ReplicabilityReport | None,
    out_dir: str | Path,
) -> list[Path]:
    """Write per-round CSV, summary JSON, and the regret-curve CSV.

    Output bytes are a pure function of the inputs: floats are rendered
    with repr (shortest round-trip form), JSON keys are sorted, newlines
    are fixed.  Violation columns are omitted for unconstrained runs.
    """
    if not logs:
        raise ValueError("need at least one trial log")
    m = logs[0].m
    horizon = logs[0].horizon
    if any(log.m != m or log.horizon != horizon for log in logs):
        raise ValueError("trial logs must share one horizon and constraint count")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rounds_path = out / "rounds.csv"
    header = ["trial", "t", "epoch", "action", "x_t", "reward"]
    header += [f"cost_{i + 1}" for i in range(m)]
    header += ["inst_regret"]
    header += [f"inst_violation_{i + 1}" for i in range(m)]
    with rounds_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for trial_idx, log in enumerate(logs):
            strategies = log.strategy_matrix()
            for t in range(1, log.horizon + 1):
                tm1 = t - 1
                row = [
                    str(trial_idx),
                    str(t),
                    str(int(log.epoch_of_round[tm1])),
                    str(int(log.actions[tm1])),
                    _strategy_cell(strategies[tm1]),
                    _fmt(log.rewards[tm1]),
                ]
                row += [_fmt(log.costs[i, tm1]) for i in range(m)]
                row.append(_fmt(log.inst_regret[tm1]))
                row += [_fmt(log.inst_violation[i, tm1]) for i in range(m)]
                fh.write(",".join(row) + "\n")
    written.append(rounds_path)

    regrets = np.array([log.regret_total for log in logs])
    violations = np.array([log.violation_total for log in logs])
    epoch_counts = np.array([log.epoch_count for log in logs])
    summary = {
        "trials": len(logs),
        "algo": logs[0].algo,
        "horizon": horizon,
        "constraints": m,
        "regret": {
            "mean": float(np.mean(regrets)),
            "median": float(np.median(regrets)),
        },
        "violation": {
            "mean": float(np.mean(violations)),
            "median": float(np.median(violations)),
        },
        "epochs": {
            "mean": float(np.mean(epoch_counts)),
            "median": float(np.median(epoch_counts)),
            "max": int(np.max(epoch_counts)),
        },
        "safety_failure_rate": float(np.mean([log.any_unsafe for log in logs])),
        "fallback_total": int(sum(log.fallback_count for log in logs)),
        "clean_event_flag_rate": float(
            np.mean([0.0 if log.clean_all else 1.0 for log in logs])
        ),
        "replicability": None if report is None else report.to_dict(),
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(summary_path)

    curve_path = out / "regret_curve.csv"
    cum_regret = np.zeros(horizon)
    cum_violation = np.zeros(horizon)
    for log in logs:
        cum_regret += np.cumsum(log.inst_regret)
        if m:
            cum_violation += np.max(np.cumsum(log.inst_violation, axis=1), axis=0)
    cum_regret /= len(logs)
    cum_violation /= len(logs)
    with curve_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,mean_cum_regret,mean_cum_violation\n")
        for t in range(horizon):
            fh.write(
                f"{t + 1},{_fmt(cum_regret[t])},{_fmt(cum_violation[t])}\n"
            )
    written.append(curve_path)

    if report is not None and report.pair_results:
        pairs_path = out / "pairs.csv"
        with pairs_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("pair,xi_seed,env_seed_1,env_seed_2,strategies_match,actions_match\n")
            for row in report.pair_results:
                fh.write(
                    f"{row['pair']},{row['xi_seed']},{row['env_seed_1']},"
                    f"{row['env_seed_2']},{int(row['strategies_match'])},"
                    f"{int(row['actions_match'])}\n"
                )
        written.append(pairs_path)
    return written
