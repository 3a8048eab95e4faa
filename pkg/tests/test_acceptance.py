"""Acceptance gate: eight go/no-go criteria with pinned tolerances.

Each test prints exactly one PASS/FAIL line carrying the measured numbers,
so the suite output doubles as a release checklist. Every criterion is
asserted exactly as stated; when a stated target is not met the line says
by how much, and the test is left red rather than loosened.
"""

import dataclasses
import math
import time
from fractions import Fraction
from math import gcd

import numpy as np
import pytest

import acksiege as ak


LAMBDA_GRID = (0.3, 0.5, 0.7)


def coprime_pairs(t_max):
    return [
        (r, t)
        for t in range(2, t_max + 1)
        for r in range(1, t)
        if gcd(r, t) == 1
    ]


def report_line(num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {name}: {verdict} ({detail})")


def scalar_riccati_root(a, c, q, r):
    """Positive root of the scalar steady-state quadratic, solved directly."""
    qa = c * c * a * a
    qb = c * c * q + r * (1.0 - a * a)
    qc = -r * q
    return (-qb + math.sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa)


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels(scalar_model, em):
    """Load the compiled kernels once so timed tests measure computation."""
    cfg = ak.SimConfig(
        model=scalar_model, energy=em, schedule_kind="online",
        horizon=2000, runs=2, seed=0,
        detector=ak.DetectorConfig(z0=2, mu=1.0, L=4),
    )
    ak.simulate(cfg)
    ak.simulate(dataclasses.replace(cfg, schedule_kind="offline", detector=None))


def test_criterion_1_steady_state(scalar_model, ss):
    t0 = time.monotonic()
    pbar = float(ss.Pbar[0, 0])
    residual = abs(
        float(ak.riccati_gtilde(scalar_model, ak.lyapunov_h(scalar_model, ss.Pbar))[0, 0])
        - pbar
    )
    oracle = scalar_riccati_root(1.2, 0.7, 0.8, 0.8)
    oracle_gap = abs(pbar - oracle)
    elapsed = time.monotonic() - t0
    ok = residual < 1e-9 and oracle_gap < 1e-8 and elapsed < 1.0
    report_line(
        1, "steady-state fixed point", ok,
        f"Pbar={pbar:.13f} residual={residual:.2e} "
        f"quadratic-oracle gap={oracle_gap:.2e} runtime={elapsed:.3f}s",
    )
    assert residual < 1e-9, f"fixed-point residual {residual:.3e} >= 1e-9"
    assert oracle_gap < 1e-8, f"quadratic-oracle gap {oracle_gap:.3e} >= 1e-8"
    assert elapsed < 1.0, f"runtime {elapsed:.2f}s >= 1s"


def test_criterion_2_offline_closed_form(scalar_model, ss, em):
    t0 = time.monotonic()
    sched = ak.build_offline_schedule(em)
    j_off = ak.offline_J_closed_form(sched, ss, scalar_model.lam)
    rel = abs(j_off - 2.0953) / 2.0953

    worst = 0.0
    pairs = 0
    for q in range(2, 13):
        for p in range(1, q):
            if gcd(p, q) != 1:
                continue
            em_pq = ak.reduce_energy_budget(2, 1, 1 + Fraction(p, q))
            s = ak.build_offline_schedule(em_pq)
            closed = ak.offline_J_closed_form(s, ss, scalar_model.lam)
            enum = ak.first_principles_offline_J(s, ss, scalar_model)
            worst = max(worst, abs(closed - enum))
            pairs += 1
    elapsed = time.monotonic() - t0
    ok = rel <= 0.02 and worst < 1e-9 and elapsed < 5.0
    report_line(
        2, "offline closed form", ok,
        f"J_off={j_off:.10f} vs 2.0953 rel={rel:.4%}; "
        f"closed-vs-enumeration max gap={worst:.2e} over {pairs} budgets; "
        f"runtime={elapsed:.2f}s",
    )
    assert rel <= 0.02, f"offline cost {j_off:.6f} is {rel:.2%} from 2.0953"
    assert worst < 1e-9, f"closed form differs from enumeration by {worst:.3e}"
    assert elapsed < 5.0, f"runtime {elapsed:.2f}s >= 5s"


def test_criterion_3_online_closed_form(scalar_model, ss, em):
    t0 = time.monotonic()
    det = ak.calibrate_mu(scalar_model, em, z0=2)
    j_formula = ak.online_J_closed_form(det, ss, scalar_model.lam)
    rel_ref = abs(j_formula - 1.6399) / 1.6399

    cfg = ak.SimConfig(
        model=scalar_model, energy=em, schedule_kind="online",
        horizon=100_000, runs=1000, seed=20_260_819, detector=det,
    )
    j_mc = ak.simulate(cfg).j_final
    rel_mc = abs(j_mc - j_formula) / j_formula
    elapsed = time.monotonic() - t0
    ok = rel_ref <= 0.03 and rel_mc <= 0.03 and elapsed < 120.0
    report_line(
        3, "online series formula", ok,
        f"mu={det.mu:.4f} formula={j_formula:.10f} vs 1.6399 rel={rel_ref:.2%}; "
        f"MC(1000x1e5)={j_mc:.6f} vs formula rel={rel_mc:.2%}; "
        f"runtime={elapsed:.1f}s",
    )
    assert rel_ref <= 0.03, (
        f"series formula gives {j_formula:.6f} at calibrated mu={det.mu:.4f}, "
        f"{rel_ref:.1%} from the 1.6399 reference (tolerance 3%)"
    )
    assert rel_mc <= 0.03, (
        f"Monte Carlo {j_mc:.6f} differs from formula {j_formula:.6f} "
        f"by {rel_mc:.1%} (tolerance 3%)"
    )
    assert elapsed < 120.0, f"runtime {elapsed:.1f}s >= 120s"


GOLDEN_STATES = (
    (0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1),
    (3, 1), (4, 1), (0, 2), (1, 2), (2, 2),
)

# Hand-derived column-stochastic transitions for z0=2, r=1, t=3 at lam=0.5:
# sigma counts flags since the cycle started, the second coordinate is the
# post-flag drop count; blocked flags stretch the window, the passing flag
# forces one high-power slot, and the cycle closes after the third flag.
GOLDEN_EDGES = {
    (0, 0): [((0, 0), 0.5), ((1, 0), 0.5)],
    (1, 0): [((0, 0), 0.5), ((2, 0), 0.5)],
    (2, 0): [((0, 1), 0.5), ((3, 1), 0.5)],
    (0, 1): [((0, 1), 0.5), ((1, 1), 0.5)],
    (1, 1): [((0, 1), 0.5), ((2, 1), 0.5)],
    (2, 1): [((0, 2), 1.0)],
    (3, 1): [((0, 1), 0.5), ((4, 1), 0.5)],
    (4, 1): [((0, 2), 1.0)],
    (0, 2): [((0, 2), 0.5), ((1, 2), 0.5)],
    (1, 2): [((0, 2), 0.5), ((2, 2), 0.5)],
    (2, 2): [((0, 0), 1.0)],
}


def test_criterion_4_transition_matrix_golden():
    t0 = time.monotonic()
    cm = ak.build_transition_matrix(2, 1, 3, 0.5)
    golden = np.zeros((11, 11))
    idx = {s: i for i, s in enumerate(GOLDEN_STATES)}
    for src, edges in GOLDEN_EDGES.items():
        for dst, prob in edges:
            golden[idx[dst], idx[src]] = prob
    size_ok = cm.states == GOLDEN_STATES
    entries_ok = np.array_equal(cm.T, golden)
    elapsed = time.monotonic() - t0
    ok = size_ok and entries_ok and elapsed < 1.0
    report_line(
        4, "transition-matrix golden test", ok,
        f"|S|={len(cm.states)} entry-for-entry match={entries_ok} "
        f"runtime={elapsed:.3f}s",
    )
    assert size_ok, f"state order {cm.states} != golden"
    assert entries_ok, "transition matrix differs from the hand-derived golden"
    assert elapsed < 1.0, f"runtime {elapsed:.2f}s >= 1s"


def test_criterion_5_chain_vs_simulation(scalar_model, ss, em):
    t0 = time.monotonic()
    worst_rel = 0.0
    worst_key = None
    n_cfg = 0
    for z0 in (1, 2, 3):
        for (r, t) in coprime_pairs(5):
            for li, lam in enumerate(LAMBDA_GRID):
                cm = ak.build_transition_matrix(z0, r, t, lam)
                j_chain = ak.chain_J(cm, ss)
                model = ak.SystemModel(
                    A=1.2, C=0.7, Q=0.8, R=0.8, Pi0=0.8, lam=lam
                )
                cfg = ak.SimConfig(
                    model=model, energy=em, schedule_kind="online",
                    horizon=100_000, runs=200,
                    seed=1_000_000 * z0 + 10_000 * r + 100 * t + li,
                    detector=ak.DetectorConfig(z0=z0, mu=1.0, L=z0 + 1),
                    attacker=ak.reduce_beta(Fraction(r, t)),
                )
                j_mc = ak.simulate(cfg).j_final
                rel = abs(j_mc - j_chain) / j_chain
                n_cfg += 1
                if rel > worst_rel:
                    worst_rel = rel
                    worst_key = (z0, r, t, lam)
    elapsed = time.monotonic() - t0
    ok = worst_rel <= 0.02 and elapsed < 600.0
    report_line(
        5, "chain vs simulation grid", ok,
        f"{n_cfg} configs, worst rel gap={worst_rel:.4%} at "
        f"(z0,r,t,lam)={worst_key}, runtime={elapsed:.1f}s",
    )
    assert worst_rel <= 0.02, (
        f"chain and Monte Carlo disagree by {worst_rel:.2%} at {worst_key}"
    )
    assert elapsed < 600.0, f"runtime {elapsed:.1f}s >= 600s"


def test_criterion_6_threshold_bracket(scalar_model, ss, em):
    t0 = time.monotonic()
    rep = ak.threshold_beta(scalar_model, ss, em, z0=2, t_max=12)
    low, high, estimate = rep
    lo_f, hi_f = float(low), float(high)
    elapsed = time.monotonic() - t0
    intersects = lo_f <= 0.34 and hi_f >= 0.22
    ok = intersects and elapsed < 60.0
    report_line(
        6, "threshold bracket", ok,
        f"bracket=[{low}, {high}]=[{lo_f:.4f}, {hi_f:.4f}] "
        f"estimate={estimate:.4f} required to contain a value in "
        f"[0.22, 0.34]; runtime={elapsed:.1f}s",
    )
    assert intersects, (
        f"bracket [{lo_f:.4f}, {hi_f:.4f}] does not intersect the required "
        f"range [0.22, 0.34]"
    )
    assert elapsed < 60.0, f"runtime {elapsed:.1f}s >= 60s"


def test_criterion_7_cost_ordering(scalar_model, ss, em):
    t0 = time.monotonic()
    sched = ak.build_offline_schedule(em)
    j_off = ak.offline_J_closed_form(sched, ss, scalar_model.lam)
    # cost of the feedback-driven schedule taken from the exact chain
    # computation of the mechanism it implements
    j_on = ak.chain_J(ak.no_attack_chain(2, scalar_model.lam), ss)
    jm = ak.j_max(scalar_model, ss)
    j_15 = ak.chain_J(ak.build_transition_matrix(2, 1, 5, scalar_model.lam), ss)
    j_23 = ak.chain_J(ak.build_transition_matrix(2, 2, 3, scalar_model.lam), ss)
    elapsed = time.monotonic() - t0
    order_ok = j_on < j_off <= jm
    sandwich_ok = j_15 < j_off < j_23
    ok = order_ok and sandwich_ok and elapsed < 60.0
    report_line(
        7, "cost ordering", ok,
        f"J_on={j_on:.6f} < J_off={j_off:.6f} <= J_max={jm:.6f}: {order_ok}; "
        f"J(1/5)={j_15:.6f} < J_off < J(2/3)={j_23:.6f}: {sandwich_ok}; "
        f"runtime={elapsed:.2f}s",
    )
    assert order_ok, f"ordering violated: {j_on:.6f}, {j_off:.6f}, {jm:.6f}"
    assert sandwich_ok, f"sandwich violated: {j_15:.6f}, {j_off:.6f}, {j_23:.6f}"
    assert elapsed < 60.0, f"runtime {elapsed:.2f}s >= 60s"


def test_criterion_8_property_suites(scalar_model, ss, em):
    # trace monotonicity of repeated open-loop growth, i <= 50
    traces = ss.trace_table(51)
    mono_ok = bool(np.all(np.diff(traces) > 0))

    # column stochasticity and stationary residual across the chain grid
    worst_col = 0.0
    worst_res = 0.0
    for z0 in (1, 2, 3):
        for (r, t) in coprime_pairs(5):
            for lam in LAMBDA_GRID:
                cm = ak.build_transition_matrix(z0, r, t, lam)
                worst_col = max(
                    worst_col, float(np.max(np.abs(cm.T.sum(axis=0) - 1.0)))
                )
                pi = ak.stationary_distribution(cm)
                worst_res = max(
                    worst_res, float(np.max(np.abs(cm.T @ pi - pi)))
                )
    chain_ok = worst_col < 1e-10 and worst_res < 1e-10

    # Monte Carlo determinism under a fixed seed
    cfg = ak.SimConfig(
        model=scalar_model, energy=em, schedule_kind="online",
        horizon=5000, runs=50, seed=7,
        detector=ak.DetectorConfig(z0=2, mu=1.0, L=4),
        attacker=ak.reduce_beta("1/3"),
    )
    rep_a, rep_b = ak.simulate(cfg), ak.simulate(cfg)
    det_ok = (
        np.array_equal(rep_a.jk_series, rep_b.jk_series)
        and rep_a.j_final == rep_b.j_final
        and rep_a.per_run_seeds == rep_b.per_run_seeds
    )

    # energy accounting per schedule: exact for the periodic pattern over
    # whole periods, within calibration tolerance for the feedback schedule
    off_cfg = ak.SimConfig(
        model=scalar_model, energy=em, schedule_kind="offline",
        horizon=7 * 400, runs=20, seed=11,
    )
    off_gap = abs(ak.simulate(off_cfg).energy_avg - float(em.psi))
    det = ak.calibrate_mu(scalar_model, em, z0=2)
    on_cfg = ak.SimConfig(
        model=scalar_model, energy=em, schedule_kind="online",
        horizon=20_000, runs=50, seed=13, detector=det,
    )
    on_gap = abs(ak.simulate(on_cfg).energy_avg - float(em.psi))
    energy_ok = off_gap == 0.0 and on_gap < 0.05

    ok = mono_ok and chain_ok and det_ok and energy_ok
    report_line(
        8, "property suites", ok,
        f"trace monotone i<=50={mono_ok}; col-sum dev={worst_col:.1e} "
        f"stationary residual={worst_res:.1e}; deterministic={det_ok}; "
        f"energy gaps offline={off_gap:.1e} online={on_gap:.4f}",
    )
    assert mono_ok, "covariance trace not strictly increasing in holding time"
    assert chain_ok, (
        f"chain defects: col-sum dev {worst_col:.2e}, residual {worst_res:.2e}"
    )
    assert det_ok, "repeated simulation with a fixed seed is not bit-identical"
    assert energy_ok, f"energy gaps: offline {off_gap:.2e}, online {on_gap:.4f}"
