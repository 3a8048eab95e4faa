"""Compiled inner loops for the event-driven simulator.

All randomness comes from a counter-free splitmix64 stream so that runs are
reproducible bit for bit across processes and thread counts.  Each run owns
one stream seeded from the master seed (see :func:`derive_run_seeds`); draws
are consumed in a fixed documented order, one per low-power slot plus one per
flag for the window redraw.

The compiled functions deliberately stay scalar state machines: covariance
traces are read from a precomputed lookup table indexed by the number of
consecutive losses, so no linear algebra happens inside the loop.  The mixing
arithmetic is inlined at each draw site rather than routed through a helper:
round-tripping uint64 state through the Python boxing layer can reinterpret
the top bit as a sign and silently fork the stream, so the state never leaves
the loop.  The pure Python originals remain reachable via ``fn.py_func`` for
equivalence tests; run those under ``np.errstate(over="ignore")`` because the
numpy scalar ops warn on the intentional 64-bit wraparound.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "splitmix64_next",
    "derive_run_seeds",
    "online_cov_run",
    "offline_cov_run",
    "online_flag_stats",
]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = np.float64(2.0 ** -53)


def splitmix64_next(state):
    """Advance a splitmix64 state; return (new_state, uniform in [0, 1)).

    Pure Python reference for the draw inlined in the compiled kernels.
    Seeding state 0 yields the standard first output 0xE220A8397B1DCDAF
    before the shift to 53 bits.
    """
    with np.errstate(over="ignore"):
        state = np.uint64(state) + _GAMMA
        z = state
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return state, float(np.float64(z >> np.uint64(11)) * _U53)


@njit(cache=True)
def derive_run_seeds(master, runs):
    """Per-run seeds: the first ``runs`` mixed outputs of the master stream."""
    out = np.empty(runs, dtype=np.uint64)
    state = master
    for i in range(runs):
        state = state + _GAMMA
        z = state
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        out[i] = z ^ (z >> np.uint64(31))
    return out


@njit(cache=True)
def online_cov_run(seed, horizon, lam, z0, mu, r, t, enabled,
                   trace_table, acc, comp):
    """One run of the online schedule under an acknowledgment-drop attacker.

    Draw order per step: one uniform for the erasure unless the previous
    flag passed (high power arrives surely), then one uniform for the window
    redraw if a flag fires.  The initial window consumes one draw.

    trace_table[i] must hold the error trace after i consecutive losses;
    indices are clamped at the end of the table and the clamp is visible to
    the caller through the returned max_tau.

    acc/comp are Kahan accumulator pairs over steps, shared across runs.
    Returns (flags, passed, high, run_sum, max_tau).
    """
    n_tab = trace_table.shape[0]
    state = seed

    state = state + _GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    u = np.float64(z >> np.uint64(11)) * _U53

    window = z0 if u < mu else z0 + 1
    drops = 0
    tau = 0
    sigma = 0
    pending_high = False
    flags = 0
    passed = 0
    high = 0
    run_sum = 0.0
    run_comp = 0.0
    max_tau = 0

    for k in range(horizon):
        if pending_high:
            arrived = True
            high += 1
            pending_high = False
        else:
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            u = np.float64(z >> np.uint64(11)) * _U53
            arrived = u < lam

        if arrived:
            tau = 0
            drops = 0
        else:
            tau += 1
            drops += 1
            if drops == window:
                flags += 1
                drops = 0
                blocked = enabled and sigma < r
                sigma += 1
                if sigma == t:
                    sigma = 0
                if not blocked:
                    passed += 1
                    pending_high = True
                state = state + _GAMMA
                z = state
                z = (z ^ (z >> np.uint64(30))) * _MIX1
                z = (z ^ (z >> np.uint64(27))) * _MIX2
                z = z ^ (z >> np.uint64(31))
                u = np.float64(z >> np.uint64(11)) * _U53
                window = z0 if u < mu else z0 + 1

        if tau > max_tau:
            max_tau = tau
        idx = tau if tau < n_tab else n_tab - 1
        tr = trace_table[idx]

        y = tr - run_comp
        s = run_sum + y
        run_comp = (s - run_sum) - y
        run_sum = s

        y = tr - comp[k]
        s = acc[k] + y
        comp[k] = (s - acc[k]) - y
        acc[k] = s

    return flags, passed, high, run_sum, max_tau


@njit(cache=True)
def offline_cov_run(seed, horizon, lam, pattern, trace_table, acc, comp):
    """One run of a periodic power pattern (1 = high slot, arrives surely).

    One uniform draw per low-power slot.  Returns (high, run_sum, max_tau).
    """
    n_tab = trace_table.shape[0]
    q = pattern.shape[0]
    state = seed
    tau = 0
    high = 0
    run_sum = 0.0
    run_comp = 0.0
    max_tau = 0

    for k in range(horizon):
        if pattern[k % q] == 1:
            arrived = True
            high += 1
        else:
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            u = np.float64(z >> np.uint64(11)) * _U53
            arrived = u < lam

        if arrived:
            tau = 0
        else:
            tau += 1

        if tau > max_tau:
            max_tau = tau
        idx = tau if tau < n_tab else n_tab - 1
        tr = trace_table[idx]

        y = tr - run_comp
        s = run_sum + y
        run_comp = (s - run_sum) - y
        run_sum = s

        y = tr - comp[k]
        s = acc[k] + y
        comp[k] = (s - acc[k]) - y
        acc[k] = s

    return high, run_sum, max_tau


@njit(cache=True)
def online_flag_stats(seed, steps, lam, z0, mu, r, t, enabled):
    """Flag statistics only, for energy calibration probes.

    Same state machine and draw order as :func:`online_cov_run` without the
    covariance bookkeeping.  Returns (flags, passed, high).
    """
    state = seed

    state = state + _GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    u = np.float64(z >> np.uint64(11)) * _U53

    window = z0 if u < mu else z0 + 1
    drops = 0
    sigma = 0
    pending_high = False
    flags = 0
    passed = 0
    high = 0

    for _ in range(steps):
        if pending_high:
            arrived = True
            high += 1
            pending_high = False
        else:
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            u = np.float64(z >> np.uint64(11)) * _U53
            arrived = u < lam

        if arrived:
            drops = 0
        else:
            drops += 1
            if drops == window:
                flags += 1
                drops = 0
                blocked = enabled and sigma < r
                sigma += 1
                if sigma == t:
                    sigma = 0
                if not blocked:
                    passed += 1
                    pending_high = True
                state = state + _GAMMA
                z = state
                z = (z ^ (z >> np.uint64(30))) * _MIX1
                z = (z ^ (z >> np.uint64(27))) * _MIX2
                z = z ^ (z >> np.uint64(31))
                u = np.float64(z >> np.uint64(11)) * _U53
                window = z0 if u < mu else z0 + 1

    return flags, passed, high


def _reference_stream(seed, n):
    """First ``n`` uniforms of the stream for ``seed`` (pure Python, tests)."""
    state = np.uint64(seed)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        state, out[i] = splitmix64_next(state)
    return out
