"""Exact analysis of the online schedule under flag suppression.

With a fixed detector window z0 the pair (tau, sigma) is a Markov chain,
where tau counts consecutive losses since the last arrival and sigma is the
attacker's duty-cycle position.  Flags fire exactly when tau is a nonzero
multiple of z0 (the drop counter restarts at each flag, so flag epochs tile
the loss streak), which keeps the chain finite: a passed flag forces an
arrival one step later, and at most r consecutive flags can be blocked.

The module builds the column-stochastic transition matrix of that chain,
solves for its stationary distribution, and derives the long-run average
error trace, flag and energy rates, the all-blocked ceiling, the attack
budget at which the online schedule stops beating the offline one, and a
simple arrival-rate test for detecting suppression from the remote side.

Blocked fractions beta = 0 and beta = 1 fall outside the (r, t) duty cycle
machinery and are covered by :func:`no_attack_chain` and :func:`j_max`.
Randomized windows (mu strictly between 0 and 1) are out of scope here; the
Monte Carlo engine handles them.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AnalysisError
from .lds_core import SteadyState, SystemModel
from .schedule import EnergyModel, build_offline_schedule, offline_J_closed_form

__all__ = [
    "ChainModel",
    "ThresholdReport",
    "enumerate_states",
    "build_transition_matrix",
    "no_attack_chain",
    "stationary_distribution",
    "chain_J",
    "chain_flag_rates",
    "j_max",
    "threshold_beta",
    "recommend_schedule",
    "detect_attack",
]


def _check_params(z0: int, r: int, t: int) -> None:
    if z0 < 1:
        raise ValueError("window length z0 must be at least 1")
    if not (0 <= r < t):
        raise ValueError(f"duty cycle requires 0 <= r < t, got r={r}, t={t}")
    if math.gcd(r, t) != 1:
        raise ValueError(f"duty cycle (r, t) = ({r}, {t}) must be coprime")


def enumerate_states(z0: int, r: int, t: int) -> tuple[tuple[int, int], ...]:
    """Reachable (tau, sigma) pairs in canonical order.

    For sigma = 0..r the streak can have survived up to sigma blocked flags,
    so tau ranges over 0..z0*(sigma+1); for sigma = r+1..t-1 the previous
    flag passed and forced an arrival, so tau ranges over 0..z0 only.
    """
    _check_params(z0, r, t)
    states = []
    for sigma in range(r + 1):
        states.extend((tau, sigma) for tau in range(z0 * (sigma + 1) + 1))
    for sigma in range(r + 1, t):
        states.extend((tau, sigma) for tau in range(z0 + 1))
    assert len(states) == r * (r + 1) * z0 // 2 + t * (z0 + 1)
    return tuple(states)


@dataclass(eq=False)
class ChainModel:
    """Finite chain of the online schedule under a duty-cycle attacker.

    T is column-stochastic: T[i, j] is the probability of moving from state
    j to state i, so the stationary vector satisfies T pi = pi.  pi_star is
    filled lazily by :func:`stationary_distribution`.
    """

    z0: int
    r: int
    t: int
    lam: float
    states: tuple[tuple[int, int], ...]
    T: np.ndarray
    pi_star: np.ndarray | None = None
    index: dict = field(default_factory=dict)

    def is_flag_state(self, tau: int) -> bool:
        return tau != 0 and tau % self.z0 == 0


def build_transition_matrix(z0: int, r: int, t: int, lam: float) -> ChainModel:
    """Assemble the chain for window z0 and duty cycle (r, t).

    From a non-flag state the next acknowledgment decides between renewal
    (tau -> 0) and streak growth (tau -> tau+1).  A flag state advances the
    attacker counter; a blocked flag leaves the channel on low power so the
    same two-way branch applies with the incremented counter, while a passed
    flag forces a high-power arrival and lands in (0, sigma+1 mod t) surely.
    """
    if not (0.0 < lam < 1.0):
        raise ValueError("erasure arrival rate lam must lie in (0, 1)")
    states = enumerate_states(z0, r, t)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    T = np.zeros((n, n))
    for j, (tau, sigma) in enumerate(states):
        if tau != 0 and tau % z0 == 0:
            if sigma < r:
                T[index[(0, sigma + 1)], j] += lam
                T[index[(tau + 1, sigma + 1)], j] += 1.0 - lam
            else:
                T[index[(0, (sigma + 1) % t)], j] += 1.0
        else:
            T[index[(0, sigma)], j] += lam
            T[index[(tau + 1, sigma)], j] += 1.0 - lam
    return ChainModel(z0=z0, r=r, t=t, lam=lam, states=states, T=T, index=index)


def no_attack_chain(z0: int, lam: float) -> ChainModel:
    """Chain of the unattacked online schedule (every flag passes).

    The trivial duty cycle (r, t) = (0, 1) blocks nothing, which collapses
    the state space to tau in 0..z0 and yields the fixed-window reference
    value of the average error trace.
    """
    return build_transition_matrix(z0, 0, 1, lam)


def stationary_distribution(cm: ChainModel) -> np.ndarray:
    """Stationary vector of the chain, cached on the model.

    Solves (T - I) pi = 0 with one row replaced by the normalization
    sum(pi) = 1; falls back to power iteration (tol 1e-12, at most 10^6
    sweeps) when the direct solve is singular or leaves a residual.  Tiny
    negative entries from roundoff are clamped and the vector renormalized.
    """
    if cm.pi_star is not None:
        return cm.pi_star
    n = cm.T.shape[0]
    A = cm.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = None
    try:
        cand = np.linalg.solve(A, b)
        if (np.linalg.norm(cm.T @ cand - cand, ord=np.inf) < 1e-10
                and cand.min() > -1e-12):
            pi = cand
    except np.linalg.LinAlgError:
        pi = None
    if pi is None:
        pi = np.full(n, 1.0 / n)
        for _ in range(10 ** 6):
            nxt = cm.T @ pi
            nxt /= nxt.sum()
            if np.linalg.norm(nxt - pi, ord=np.inf) < 1e-12:
                pi = nxt
                break
            pi = nxt
        else:
            raise AnalysisError(
                f"stationary distribution did not converge for "
                f"(z0, r, t, lam) = ({cm.z0}, {cm.r}, {cm.t}, {cm.lam})"
            )
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    cm.pi_star = pi
    return pi


def chain_J(cm: ChainModel, ss: SteadyState) -> float:
    """Long-run average error trace of the attacked online schedule.

    The error covariance in state (tau, sigma) is the tau-fold propagation
    of the renewal covariance, so the average is the stationary expectation
    of trace(h^tau(Pbar)).
    """
    pi = stationary_distribution(cm)
    return float(sum(p * ss.h_trace(tau) for p, (tau, _) in zip(pi, cm.states)))


def chain_flag_rates(cm: ChainModel, z0: int | None = None,
                     r: int | None = None, t: int | None = None):
    """Long-run flag and passed-flag rates, plus an energy evaluator.

    A flag fires on every visit to a state with tau a nonzero multiple of
    z0; it passes when the attacker counter has already cleared the blocked
    range (sigma >= r).  The returned energy function maps per-slot levels
    (delta_high, delta_low) to the long-run average, charging high power
    exactly on the slot that answers a passed flag.
    """
    z0 = cm.z0 if z0 is None else z0
    r = cm.r if r is None else r
    t = cm.t if t is None else t
    pi = stationary_distribution(cm)
    flag_rate = 0.0
    passed_rate = 0.0
    for p, (tau, sigma) in zip(pi, cm.states):
        if tau != 0 and tau % z0 == 0:
            flag_rate += p
            if sigma >= r:
                passed_rate += p

    def energy_rate(delta_high, delta_low):
        return passed_rate * delta_high + (1.0 - passed_rate) * delta_low

    return flag_rate, passed_rate, energy_rate


def j_max(model: SystemModel, ss: SteadyState, tail_tol: float = 1e-12) -> float:
    """Average error trace when every flag is suppressed.

    Without any high-power slot the loss streak renews only on chance
    arrivals, giving the series sum_i lam (1-lam)^i trace(h^i(Pbar)).  The
    series converges iff rho(A)^2 (1-lam) < 1 because the propagated trace
    grows like rho(A)^(2i); summation stops once the geometric tail bound
    term / (1 - (1-lam) rho(A)^2) drops below tail_tol.
    """
    lam = model.lam
    rho2 = model.spectral_radius() ** 2
    contraction = (1.0 - lam) * rho2
    if contraction >= 1.0:
        raise AnalysisError(
            f"all-blocked series diverges: rho(A)^2 (1 - lam) = "
            f"{contraction:.6g} >= 1"
        )
    total = 0.0
    weight = lam
    i = 0
    while True:
        tr = ss.h_trace(i)
        if not np.isfinite(tr):
            raise AnalysisError(
                f"propagated trace overflowed at power {i}; "
                f"loosen tail_tol (currently {tail_tol:g})"
            )
        term = weight * tr
        total += term
        if term / (1.0 - contraction) < tail_tol:
            return total
        weight *= 1.0 - lam
        i += 1


def _coprime_grid(t_max: int) -> list[tuple[int, int, Fraction]]:
    grid = [
        (r, t, Fraction(r, t))
        for t in range(2, t_max + 1)
        for r in range(1, t)
        if math.gcd(r, t) == 1
    ]
    grid.sort(key=lambda rtb: rtb[2])
    return grid


@dataclass(eq=False)
class ThresholdReport:
    """Outcome of the attack-budget scan.

    Unpacks as the triple (beta_low, beta_high, beta_bar_estimate).  The
    indicator distinguishes a genuine grid crossing from the degenerate
    regimes: 'offline-always' (the offline schedule wins even unattacked),
    'online-always' (the online schedule wins even fully suppressed), and
    'crossing-above-grid' (the crossing lies between the largest grid
    fraction and 1).  Grid rows hold (r, t, beta, chain value) sorted by
    beta, with per-row schedule recommendations alongside; monotonicity
    violations along the sorted grid are reported, never asserted.
    """

    beta_low: Fraction
    beta_high: Fraction
    beta_bar_estimate: float
    indicator: str
    j_offline: float
    j_online: float
    j_all_blocked: float
    rows: list
    recommendations: list
    monotonicity_violations: list

    def __iter__(self):
        return iter((self.beta_low, self.beta_high, self.beta_bar_estimate))


def threshold_beta(
    model: SystemModel,
    ss: SteadyState,
    em: EnergyModel,
    z0: int,
    t_max: int = 12,
    *,
    j_offline: float | None = None,
    tail_tol: float = 1e-12,
    threads: int | None = None,
) -> ThresholdReport:
    """Bracket the attack budget where online stops beating offline.

    Evaluates the chain value over every coprime duty cycle (r, t) with
    t <= t_max, sorted by beta = r/t, and locates the first grid point whose
    value reaches the offline average (computed from the energy budget
    unless j_offline overrides it).  The budget is a rational quantity, so a
    grid over reduced fractions is the natural search space; the returned
    estimate is the bracket midpoint.
    """
    if j_offline is None:
        j_offline = offline_J_closed_form(build_offline_schedule(em), ss, model.lam)
    j_online = chain_J(no_attack_chain(z0, model.lam), ss)
    j_blocked = j_max(model, ss, tail_tol)

    grid = _coprime_grid(t_max)

    def evaluate(rtb):
        r, t, _ = rtb
        return chain_J(build_transition_matrix(z0, r, t, model.lam), ss)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(evaluate, grid))
    else:
        values = [evaluate(rtb) for rtb in grid]

    rows = [(r, t, beta, j) for (r, t, beta), j in zip(grid, values)]
    violations = [
        (rows[i - 1][2], rows[i][2], rows[i - 1][3], rows[i][3])
        for i in range(1, len(rows))
        if rows[i][3] < rows[i - 1][3] - 1e-12
    ]

    if j_online >= j_offline:
        low, high, indicator = Fraction(0), Fraction(0), "offline-always"
    elif j_blocked < j_offline:
        low, high, indicator = Fraction(1), Fraction(1), "online-always"
    else:
        crossing = next(
            (i for i, (_, _, _, j) in enumerate(rows) if j >= j_offline), None
        )
        if crossing is None:
            low, high, indicator = rows[-1][2], Fraction(1), "crossing-above-grid"
        elif crossing == 0:
            low, high, indicator = Fraction(0), rows[0][2], "crossing"
        else:
            low, high = rows[crossing - 1][2], rows[crossing][2]
            indicator = "crossing"

    estimate = float(low + high) / 2.0
    if indicator == "offline-always":
        recs = ["offline"] * len(rows)
    elif indicator == "online-always":
        recs = ["online"] * len(rows)
    else:
        recs = [recommend_schedule(beta, estimate) for _, _, beta, _ in rows]

    return ThresholdReport(
        beta_low=low,
        beta_high=high,
        beta_bar_estimate=estimate,
        indicator=indicator,
        j_offline=j_offline,
        j_online=j_online,
        j_all_blocked=j_blocked,
        rows=rows,
        recommendations=recs,
        monotonicity_violations=violations,
    )


def recommend_schedule(beta, beta_bar) -> str:
    """Pick the schedule for a known attack budget: online iff beta < beta_bar."""
    return "online" if beta < beta_bar else "offline"


def detect_attack(observed_passed_rate: float, expected_rate: float,
                  n_observed: int, alpha: float) -> bool:
    """One-sided arrival-rate test for flag suppression.

    The remote side knows its own flag count and the no-attack passed-flag
    probability, so suppression shows up as a deficit of passed flags.
    Returns True when the observed passed count falls below the alpha
    quantile of Binomial(n_observed, expected_rate); the quantile is exact
    for n_observed <= 100 and a normal approximation beyond that.
    """
    if n_observed <= 0:
        raise ValueError("n_observed must be positive")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if not (0.0 <= expected_rate <= 1.0):
        raise ValueError("expected_rate must lie in [0, 1]")
    count = round(observed_passed_rate * n_observed)
    n, p = n_observed, expected_rate
    if n <= 100:
        cdf = 0.0
        quantile = n
        for k in range(n + 1):
            cdf += math.comb(n, k) * p ** k * (1.0 - p) ** (n - k)
            if cdf >= alpha:
                quantile = k
                break
        return count < quantile
    mean = n * p
    sd = math.sqrt(n * p * (1.0 - p))
    if sd == 0.0:
        return count < mean if p > 0 else False
    quantile = mean + statistics.NormalDist().inv_cdf(alpha) * sd
    return count < quantile
