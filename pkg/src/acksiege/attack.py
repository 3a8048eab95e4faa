"""Acknowledgment-channel attacker model.

The attacker observes the remote side's flag messages and may suppress each
one before it reaches the sensor.  A suppressed flag leaves the sensor on low
power, so the next transmission stays unreliable while the remote detector
believes a high-power slot was requested.

Suppression follows a deterministic duty cycle: out of every t consecutive
flags, the first r (counter values 0..r-1) are blocked and the remaining
t - r pass through.  With r/t equal to the attack budget beta in lowest
terms, the long-run blocked fraction is exactly beta and the passed-to-flag
ratio exactly 1 - beta.  beta = 0 disables the attacker; beta = 1 blocks
every flag.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

__all__ = ["AttackerConfig", "AttackerState", "reduce_beta", "attacker_step"]


@dataclass(frozen=True)
class AttackerConfig:
    """Duty-cycle attacker: block flags with counter < r, wrap at t."""

    r: int
    t: int
    enabled: bool

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("cycle length t must be at least 1")
        if not (0 <= self.r <= self.t):
            raise ValueError("blocked count r must lie in [0, t]")

    @property
    def beta(self) -> Fraction:
        """Long-run fraction of flags blocked (0 when disabled)."""
        return Fraction(self.r, self.t) if self.enabled else Fraction(0)


def reduce_beta(beta) -> AttackerConfig:
    """Build the duty-cycle config whose blocked fraction equals beta.

    beta is reduced to lowest terms r/t; beta = 0 yields a disabled
    attacker with the trivial (0, 1) cycle.
    """
    b = Fraction(beta)
    if not (0 <= b <= 1):
        raise ValueError(f"attack budget must lie in [0, 1], got {b}")
    if b == 0:
        return AttackerConfig(r=0, t=1, enabled=False)
    return AttackerConfig(r=b.numerator, t=b.denominator, enabled=True)


@dataclass(frozen=True)
class AttackerState:
    """Position in the duty cycle, advanced once per observed flag."""

    counter: int = 0


def attacker_step(cfg: AttackerConfig, state: AttackerState) -> tuple[AttackerState, bool]:
    """Process one flag; return (next state, blocked?).

    The counter advances on every flag whether or not the attacker is
    enabled, so enabling mid-run does not change the cycle phase.
    """
    blocked = cfg.enabled and state.counter < cfg.r
    nxt = state.counter + 1
    if nxt == cfg.t:
        nxt = 0
    return replace(state, counter=nxt), blocked
