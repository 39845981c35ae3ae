"""Ground-truth constrained bandit instances.

An instance holds the true Bernoulli means for one reward signal and m
cost signals, plus the cost thresholds and horizon.  The module samples
feedback from labeled environment streams, solves the oracle programs
(optimal safe strategy, max-margin strictly safe strategy), and scores
strategies by expected instantaneous regret and violation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import polytope
from .polytope import Infeasible, SimplexPolytopeLP
from .randomness import RandomSource, StreamLabel, first_uniforms

__all__ = [
    "InstanceSpec",
    "OracleSolution",
    "ValidationError",
    "feedback_tables",
    "instant_regret",
    "instant_violation",
    "load_instance",
    "sample_feedback",
    "solve_oracle",
]

SAFETY_TOL = 1e-9


class ValidationError(ValueError):
    """Instance or configuration rejected; message lists the problems."""


@dataclass(frozen=True, eq=False)
class InstanceSpec:
    """Immutable description of one constrained bandit instance."""

    reward_means: np.ndarray
    cost_means: np.ndarray
    thresholds: np.ndarray
    horizon: int
    family: str = "bernoulli"

    def __post_init__(self) -> None:
        r = np.asarray(self.reward_means, dtype=np.float64)
        g = np.asarray(self.cost_means, dtype=np.float64)
        a = np.asarray(self.thresholds, dtype=np.float64)
        if g.size == 0:
            g = g.reshape(0, r.size)
        problems = _shape_problems(r, g, a, self.horizon, self.family)
        if problems:
            raise ValidationError("\n".join(problems))
        for arr in (r, g, a):
            arr.flags.writeable = False
        object.__setattr__(self, "reward_means", r)
        object.__setattr__(self, "cost_means", g)
        object.__setattr__(self, "thresholds", a)
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def k(self) -> int:
        return self.reward_means.size

    @property
    def m(self) -> int:
        return self.cost_means.shape[0]

    def to_dict(self) -> dict:
        return {
            "K": self.k,
            "m": self.m,
            "reward_means": self.reward_means.tolist(),
            "cost_means": self.cost_means.tolist(),
            "thresholds": self.thresholds.tolist(),
            "horizon": self.horizon,
            "family": self.family,
        }


def _shape_problems(r, g, a, horizon, family) -> list[str]:
    out = []
    if r.ndim != 1 or r.size < 1:
        out.append("reward_means must be a nonempty vector")
        return out
    if g.ndim != 2 or g.shape[1] != r.size:
        out.append(f"cost_means must be an m x {r.size} matrix, got shape {g.shape}")
        return out
    if a.shape != (g.shape[0],):
        out.append(f"thresholds must have one entry per constraint, got {a.shape}")
        return out
    for idx, value in enumerate(r):
        if not (0.0 <= value <= 1.0):
            out.append(f"reward_means[{idx}] = {value!r} outside [0, 1]")
    for i in range(g.shape[0]):
        for idx, value in enumerate(g[i]):
            if not (0.0 <= value <= 1.0):
                out.append(f"cost_means[{i}][{idx}] = {value!r} outside [0, 1]")
        if not (0.0 <= a[i] <= 1.0):
            out.append(f"thresholds[{i}] = {a[i]!r} outside [0, 1]")
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        out.append(f"horizon must be a positive integer, got {horizon!r}")
    if family != "bernoulli":
        out.append(f"unsupported distribution family {family!r}")
    return out


_REQUIRED_KEYS = ("K", "m", "reward_means", "cost_means", "thresholds", "horizon")
_ALLOWED_KEYS = set(_REQUIRED_KEYS) | {"family"}


def instance_from_dict(payload: dict, where: str = "instance") -> InstanceSpec:
    """Build and validate an instance from its JSON-style payload.

    Collects every schema problem it can find before rejecting, so a bad
    file is diagnosed in one pass.
    """
    if not isinstance(payload, dict):
        raise ValidationError(f"{where}: expected a JSON object, got {type(payload).__name__}")
    problems = []
    for key in _REQUIRED_KEYS:
        if key not in payload:
            problems.append(f"{where}: missing required key {key!r}")
    for key in payload:
        if key not in _ALLOWED_KEYS:
            problems.append(f"{where}: unknown key {key!r}")
    if problems:
        raise ValidationError("\n".join(problems))

    k = payload["K"]
    m = payload["m"]
    if not isinstance(k, int) or k < 1:
        problems.append(f"{where}.K must be an integer >= 1, got {k!r}")
    if not isinstance(m, int) or m < 0:
        problems.append(f"{where}.m must be an integer >= 0, got {m!r}")
    if problems:
        raise ValidationError("\n".join(problems))

    reward = payload["reward_means"]
    costs = payload["cost_means"]
    thresholds = payload["thresholds"]
    if not isinstance(reward, list) or len(reward) != k:
        problems.append(f"{where}.reward_means must be a list of length K={k}")
    if not isinstance(costs, list) or len(costs) != m:
        problems.append(f"{where}.cost_means must be a list of m={m} rows")
    else:
        for i, row in enumerate(costs):
            if not isinstance(row, list) or len(row) != k:
                problems.append(f"{where}.cost_means[{i}] must be a list of length K={k}")
    if not isinstance(thresholds, list) or len(thresholds) != m:
        problems.append(f"{where}.thresholds must be a list of length m={m}")
    if problems:
        raise ValidationError("\n".join(problems))

    try:
        spec = InstanceSpec(
            reward_means=np.asarray(reward, dtype=np.float64),
            cost_means=np.asarray(costs, dtype=np.float64).reshape(m, k),
            thresholds=np.asarray(thresholds, dtype=np.float64),
            horizon=payload["horizon"],
            family=payload.get("family", "bernoulli"),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc

    if spec.m > 0:
        try:
            polytope.solve(
                SimplexPolytopeLP(np.zeros(spec.k), spec.cost_means, spec.thresholds)
            )
        except Infeasible:
            raise ValidationError(
                f"{where}: safe set is empty (no strategy satisfies all constraints)"
            ) from None
    return spec


def load_instance(path: str | Path) -> InstanceSpec:
    """Load an instance file, reporting decode errors with line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read file: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    return instance_from_dict(payload, where=str(path))


@dataclass(frozen=True, eq=False)
class OracleSolution:
    """Ground-truth optima of an instance.

    lam holds the costs of the max-margin strictly safe strategy;
    lambda_min is its worst-case slack (inf when there are no
    constraints).
    """

    x_star: np.ndarray
    opt_value: float
    x_diamond: np.ndarray
    lam: np.ndarray
    lambda_min: float
    gaps: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.x_star, self.x_diamond, self.lam, self.gaps):
            arr.flags.writeable = False


def solve_oracle(spec: InstanceSpec) -> OracleSolution:
    """Solve for the optimal safe strategy and the max-margin strategy."""
    try:
        x_star, opt_value = polytope.solve(
            SimplexPolytopeLP(spec.reward_means, spec.cost_means, spec.thresholds)
        )
    except Infeasible:
        raise ValidationError("instance rejected: safe set is empty") from None
    if spec.m == 0:
        x_diamond = np.zeros(spec.k)
        x_diamond[0] = 1.0
        lam = np.zeros(0)
        lambda_min = math.inf
    else:
        x_diamond, worst_excess = polytope.least_violation_strategy(
            spec.cost_means, spec.thresholds
        )
        lam = spec.cost_means @ x_diamond
        lambda_min = -worst_excess
    gaps = float(np.max(spec.reward_means)) - spec.reward_means
    return OracleSolution(
        x_star=x_star,
        opt_value=opt_value,
        x_diamond=x_diamond,
        lam=lam,
        lambda_min=lambda_min,
        gaps=gaps,
    )


def sample_feedback(
    spec: InstanceSpec, arm: int, rnd: int, env: RandomSource
) -> tuple[float, np.ndarray]:
    """One round of realized feedback for pulling ``arm`` at round ``rnd``.

    Each signal consumes the first uniform of its own (round, arm,
    signal) labeled stream, so realizations form a fixed table over
    (round, arm) pairs for a given environment seed.
    """
    if not (0 <= arm < spec.k):
        raise ValueError(f"arm index {arm} outside [0, {spec.k})")
    u = env.uniform(StreamLabel("env-reward", arm=arm, rnd=rnd))
    reward = 1.0 if u < spec.reward_means[arm] else 0.0
    costs = np.empty(spec.m)
    for i in range(spec.m):
        ui = env.uniform(StreamLabel("env-cost", arm=arm, cons=i, rnd=rnd))
        costs[i] = 1.0 if ui < spec.cost_means[i, arm] else 0.0
    return reward, costs


def feedback_tables(
    spec: InstanceSpec, env: RandomSource, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Full realization tables: rewards (T, K) and costs (m, T, K).

    Entry [t-1, a] equals what sample_feedback(spec, a, t, env) returns,
    which is what lets trial loops read realizations by position.
    """
    rounds = np.arange(1, horizon + 1)[:, None]
    arms = np.arange(spec.k)[None, :]
    u = first_uniforms(env, "env-reward", arm=arms, rnd=rounds)
    rewards = (u < spec.reward_means[None, :]).astype(np.float64)
    costs = np.empty((spec.m, horizon, spec.k))
    for i in range(spec.m):
        ui = first_uniforms(env, "env-cost", arm=arms, cons=i, rnd=rounds)
        costs[i] = (ui < spec.cost_means[i][None, :]).astype(np.float64)
    return rewards, costs


def instant_regret(spec: InstanceSpec, oracle: OracleSolution, x: np.ndarray) -> float:
    """Expected per-round regret of strategy x against the safe optimum."""
    return float(oracle.opt_value - spec.reward_means @ x)


def instant_violation(spec: InstanceSpec, x: np.ndarray) -> np.ndarray:
    """Per-constraint positive part of the expected threshold excess."""
    if spec.m == 0:
        return np.zeros(0)
    return np.maximum(spec.cost_means @ x - spec.thresholds, 0.0)
