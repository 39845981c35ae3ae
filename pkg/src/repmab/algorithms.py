"""Bandit policies: three replicable epoch-doubling variants and UCB1.

The replicable policies freeze their strategy for the length of an
epoch and close the epoch once some arm has doubled its pull count
since the epoch started.  At a close they refresh mean estimates
through the randomized-grid estimator, with the grid cell width matched
to each arm's sample count (the same width that serves as the
exploration bonus), then reselect:

* ``debora``      plays the single arm with the highest optimistic index;
* ``debora-s``    plays the strategy maximizing the optimistic reward over
  the optimistically safe polytope;
* ``debora-h``    additionally blends that strategy toward a known
  strictly safe strategy whenever some constraint looks at risk, which
  keeps every played strategy safe with high probability.

``ucb1`` is the classic per-round index policy, included as a
non-replicable contrast; it shares no epoch machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import polytope
from .environment import InstanceSpec, OracleSolution
from .estimator import confidence_widths, snap_to_grid
from .polytope import Infeasible, SimplexPolytopeLP
from .randomness import RandomSource, StreamLabel

__all__ = [
    "ALGORITHM_NAMES",
    "ConfigError",
    "EpochState",
    "ceil_log2",
    "epoch_budget",
    "make_policy",
    "mixing_coefficient",
    "optimistic_strategy",
]

ALGORITHM_NAMES = ("debora", "debora-s", "debora-h", "ucb1")


class ConfigError(ValueError):
    """Algorithm and instance/parameters are incompatible."""


def ceil_log2(n: int) -> int:
    """Exact ceil(log2(n)) for n >= 1, with ceil_log2(1) = 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()


def epoch_budget(k: int, horizon: int) -> int:
    """Upper bound on the final epoch index: K * ceil(log2(T))."""
    return k * ceil_log2(horizon)


def _split(delta: float, rho: float, denominator: int) -> tuple[float, float]:
    if not (0.0 < 2.0 * delta < rho < 1.0):
        raise ConfigError(f"need 0 < 2*delta < rho < 1, got delta={delta}, rho={rho}")
    return delta / denominator, rho / denominator


@dataclass
class EpochState:
    """Mutable per-epoch memory shared by the replicable policies."""

    h: int
    counts: np.ndarray
    epoch_start_counts: np.ndarray
    r_hat: np.ndarray
    g_hat: np.ndarray
    zeta: np.ndarray
    x_current: np.ndarray
    delta_prime: float
    rho_prime: float
    sigma: float = 0.0
    x_tilde: np.ndarray | None = None


def optimistic_strategy(
    ucb: np.ndarray, pessimistic_costs: np.ndarray, thresholds: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Argmax of the optimistic reward over the optimistic safe polytope.

    Returns (strategy, fallback_used).  Off the high-probability event
    the polytope can be empty; the fallback then plays the strategy with
    the least worst-case excess instead of crashing the run.
    """
    try:
        x, _ = polytope.solve(SimplexPolytopeLP(ucb, pessimistic_costs, thresholds))
        return x, False
    except Infeasible:
        x, _ = polytope.least_violation_strategy(pessimistic_costs, thresholds)
        return x, True


def mixing_coefficient(
    optimistic_costs: np.ndarray,
    thresholds: np.ndarray,
    margins: np.ndarray,
) -> float:
    """Blend weight toward the strictly safe strategy.

    ``optimistic_costs`` holds the upper cost estimates of the candidate
    strategy per constraint.  Constraints whose estimate exceeds the
    threshold are at risk; the weight is the largest ratio of capped
    excess over (capped excess + safe-strategy margin), and 0 when
    nothing is at risk.
    """
    at_risk = optimistic_costs > thresholds
    if not bool(np.any(at_risk)):
        return 0.0
    capped = np.minimum(optimistic_costs[at_risk], 1.0)
    excess = capped - thresholds[at_risk]
    return float(np.max(excess / (excess + margins[at_risk])))


class _EpochDoublingPolicy:
    """Shared machinery: counts, sample buffers, close detection."""

    kind = "sampled"  # harness draws the action from x_current

    def __init__(
        self,
        spec: InstanceSpec,
        horizon: int,
        delta: float,
        rho: float,
        xi: RandomSource,
        oracle: OracleSolution,
        denominator: int,
        track_costs: bool,
    ):
        dp, rp = _split(delta, rho, denominator)
        k = spec.k
        m = spec.m if track_costs else 0
        zeros = np.zeros(k, dtype=np.int64)
        self.spec = spec
        self.horizon = horizon
        self.xi = xi
        self.oracle = oracle
        self.m = m
        self.state = EpochState(
            h=0,
            counts=zeros,
            epoch_start_counts=zeros.copy(),
            r_hat=np.full(k, 0.5),
            g_hat=np.full((m, k), 0.5),
            zeta=confidence_widths(zeros, dp, rp),
            x_current=np.zeros(k),
            delta_prime=dp,
            rho_prime=rp,
        )
        self.counts = [0] * k
        self.thresholds = [1] * k
        self.buf_r = [np.empty(horizon) for _ in range(k)]
        self.buf_g = [[np.empty(horizon) for _ in range(k)] for _ in range(m)]
        self.last_fallback = False
        self._pending = False
        self._select()

    # -- hot path -----------------------------------------------------

    def observe(self, arm: int, reward: float, costs) -> None:
        n = self.counts[arm]
        self.buf_r[arm][n] = reward
        for i in range(self.m):
            self.buf_g[i][arm][n] = costs[i]
        n += 1
        self.counts[arm] = n
        if n >= self.thresholds[arm]:
            self._pending = True

    @property
    def pending_close(self) -> bool:
        return self._pending

    # -- epoch boundary -----------------------------------------------

    def close_epoch(self) -> None:
        """Advance to the next epoch: refresh estimates and reselect."""
        self._pending = False
        st = self.state
        counts = np.asarray(self.counts, dtype=np.int64)
        prior_caps = np.maximum(2 * st.epoch_start_counts, 1)
        if np.any(counts > prior_caps):
            raise RuntimeError("doubling discipline violated inside an epoch")
        st.h += 1
        if st.h > epoch_budget(self.spec.k, self.horizon):
            raise RuntimeError(
                f"epoch index {st.h} exceeded budget "
                f"{epoch_budget(self.spec.k, self.horizon)}"
            )
        st.counts = counts
        st.epoch_start_counts = counts.copy()
        st.zeta = confidence_widths(counts, st.delta_prime, st.rho_prime)
        self._update_estimates()
        self._select()
        self.thresholds = np.maximum(2 * counts, 1).tolist()

    def _prefix_mean(self, buf: np.ndarray, n: int) -> float:
        # cumsum is a strict left-to-right accumulation, matching the
        # sample-order contract of the estimator.
        return float(np.cumsum(buf[:n])[-1]) / n

    def _offset(self, purpose: str, arm: int, cons: int | None, cell: float) -> float:
        label = StreamLabel(purpose, epoch=self.state.h, arm=arm, cons=cons)
        return self.xi.uniform(label) * cell

    def _update_estimates(self) -> None:
        raise NotImplementedError

    def _select(self) -> None:
        raise NotImplementedError


class Debora(_EpochDoublingPolicy):
    """Unconstrained variant: one optimistic arm per epoch, chosen
    deterministically, so no action sampling happens at all."""

    name = "debora"
    kind = "deterministic"

    def __init__(self, spec, horizon, delta, rho, xi, oracle):
        denominator = 2 * spec.k * max(1, ceil_log2(horizon))
        self.current_arm = 0
        super().__init__(
            spec, horizon, delta, rho, xi, oracle, denominator, track_costs=False
        )

    def _update_estimates(self) -> None:
        st = self.state
        prev = self.current_arm
        n = int(st.epoch_start_counts[prev])
        cell = float(st.zeta[prev])
        mean = self._prefix_mean(self.buf_r[prev], n)
        offset = self._offset("offset-reward", prev, None, cell)
        st.r_hat[prev] = snap_to_grid(mean, cell, offset)

    def _select(self) -> None:
        st = self.state
        # np.argmax returns the first maximizer: ties go to the lowest arm.
        arm = int(np.argmax(st.r_hat + st.zeta))
        self.current_arm = arm
        x = np.zeros(self.spec.k)
        x[arm] = 1.0
        st.x_current = x


class DeboraS(_EpochDoublingPolicy):
    """Soft-constraint variant: optimistic strategy over the
    optimistically safe polytope, action sampled from it."""

    name = "debora-s"

    def __init__(self, spec, horizon, delta, rho, xi, oracle):
        denominator = 2 * (spec.m + 1) * spec.k * spec.k * max(1, ceil_log2(horizon))
        super().__init__(
            spec, horizon, delta, rho, xi, oracle, denominator, track_costs=True
        )

    def _update_estimates(self) -> None:
        st = self.state
        for arm in range(self.spec.k):
            n = int(st.epoch_start_counts[arm])
            if n == 0:
                continue  # never played: keep the symmetric prior
            cell = float(st.zeta[arm])
            mean = self._prefix_mean(self.buf_r[arm], n)
            offset = self._offset("offset-reward", arm, None, cell)
            st.r_hat[arm] = snap_to_grid(mean, cell, offset)
            for i in range(self.m):
                mean_i = self._prefix_mean(self.buf_g[i][arm], n)
                offset_i = self._offset("offset-cost", arm, i, cell)
                st.g_hat[i, arm] = snap_to_grid(mean_i, cell, offset_i)

    def _select(self) -> None:
        st = self.state
        ucb = st.r_hat + st.zeta
        pessimistic = st.g_hat - st.zeta[None, :]
        x, fallback = optimistic_strategy(ucb, pessimistic, self.spec.thresholds)
        self.last_fallback = fallback
        st.x_current = x


class DeboraH(DeboraS):
    """Hard-constraint variant: blends the optimistic strategy with the
    known strictly safe strategy whenever a constraint is at risk."""

    name = "debora-h"

    def __init__(self, spec, horizon, delta, rho, xi, oracle):
        denominator = 2 * (spec.m + 1) * spec.k * spec.k * max(1, ceil_log2(horizon))
        if spec.m > 0 and not oracle.lambda_min > 0.0:
            raise ConfigError(
                "hard-constraint variant requires a strictly feasible strategy "
                f"(margin {oracle.lambda_min!r} is not positive)"
            )
        self.margins = np.asarray(spec.thresholds, dtype=np.float64) - oracle.lam
        self.sigma_cap = 1.0 / (1.0 + oracle.lambda_min) if spec.m else 0.0
        _EpochDoublingPolicy.__init__(
            self, spec, horizon, delta, rho, xi, oracle, denominator, track_costs=True
        )

    def _select(self) -> None:
        st = self.state
        ucb = st.r_hat + st.zeta
        pessimistic = st.g_hat - st.zeta[None, :]
        x_tilde, fallback = optimistic_strategy(ucb, pessimistic, self.spec.thresholds)
        self.last_fallback = fallback
        if self.m == 0:
            st.sigma = 0.0
            st.x_tilde = x_tilde
            st.x_current = x_tilde
            return
        optimistic_costs = (st.g_hat + st.zeta[None, :]) @ x_tilde
        sigma = mixing_coefficient(optimistic_costs, self.spec.thresholds, self.margins)
        if sigma > self.sigma_cap:
            raise RuntimeError(f"mixing coefficient {sigma} exceeded 1/(1+margin)")
        st.sigma = sigma
        st.x_tilde = x_tilde
        st.x_current = sigma * self.oracle.x_diamond + (1.0 - sigma) * x_tilde


class Ucb1:
    """Plain per-round UCB index policy (non-replicable comparator).

    Round-robin over the arms once, then argmax of mean + sqrt(2 ln t /
    n); ties go to the lowest index.  Deterministic given the realized
    feedback, but carries no device to absorb resampled feedback, which
    is exactly the contrast being measured.
    """

    name = "ucb1"
    kind = "per-round"

    def __init__(self, spec, horizon, delta, rho, xi, oracle):
        self.spec = spec
        self.k = spec.k
        self.sums = [0.0] * spec.k
        self.n = [0] * spec.k

    def pick(self, t: int) -> int:
        if t <= self.k:
            return t - 1
        log_term = 2.0 * math.log(t)
        best_arm = 0
        best_index = -math.inf
        for a in range(self.k):
            n = self.n[a]
            index = self.sums[a] / n + math.sqrt(log_term / n)
            if index > best_index:
                best_index = index
                best_arm = a
        return best_arm

    def observe(self, arm: int, reward: float, costs) -> None:
        self.sums[arm] += reward
        self.n[arm] += 1


_POLICIES = {
    "debora": Debora,
    "debora-s": DeboraS,
    "debora-h": DeboraH,
    "ucb1": Ucb1,
}


def make_policy(
    name: str,
    spec: InstanceSpec,
    horizon: int,
    delta: float,
    rho: float,
    xi: RandomSource,
    oracle: OracleSolution,
):
    """Instantiate the named policy, validating compatibility."""
    try:
        cls = _POLICIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHM_NAMES)}"
        ) from None
    return cls(spec, horizon, delta, rho, xi, oracle)
