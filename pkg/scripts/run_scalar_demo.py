#!/usr/bin/env python3
"""End-to-end demo on the scalar benchmark system.

Reproduces the headline numbers from the library API directly, without the
CLI: steady-state covariance, both schedule costs, the attacked-cost curve
over a grid of blocking budgets, and the switching threshold. Finishes with
a short Monte Carlo run to confirm the chain values.

Usage:
    python3 scripts/run_scalar_demo.py [--runs N] [--horizon K]
"""

import argparse
from fractions import Fraction

import acksiege as ak


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=20_000)
    args = ap.parse_args()

    model = ak.SystemModel(A=1.2, C=0.7, Q=0.8, R=0.8, Pi0=0.8, lam=0.5)
    ss = ak.steady_state_cov(model)
    em = ak.reduce_energy_budget(10, 3, 4)

    print(f"steady-state trace(Pbar) = {float(ss.Pbar[0, 0]):.10f}")

    sched = ak.build_offline_schedule(em)
    j_off = ak.offline_J_closed_form(sched, ss, model.lam)
    print(f"periodic schedule: pattern {sched.pattern!r}, "
          f"energy {ak.offline_energy_closed_form(sched, em)}, "
          f"J = {j_off:.6f}")

    det = ak.calibrate_mu(model, em, z0=2)
    j_on = ak.chain_J(ak.no_attack_chain(det.z0, model.lam), ss)
    jm = ak.j_max(model, ss)
    print(f"feedback schedule: calibrated mu = {det.mu:.4f}, "
          f"J = {j_on:.6f} (no attack), worst case J_max = {jm:.6f}")

    print("\nattacked cost over blocking budgets beta = r/t:")
    for r, t in [(1, 5), (1, 3), (2, 5), (1, 2), (3, 5), (2, 3), (4, 5)]:
        cm = ak.build_transition_matrix(det.z0, r, t, model.lam)
        j = ak.chain_J(cm, ss)
        marker = "  <- exceeds offline" if j > j_off else ""
        print(f"  beta = {r}/{t} = {r / t:.3f}: J = {j:.6f}{marker}")

    rep = ak.threshold_beta(model, ss, em, z0=det.z0, t_max=12)
    low, high, estimate = rep
    print(f"\nswitching threshold: bracket [{low}, {high}], "
          f"estimate {estimate:.4f}, indicator {rep.indicator!r}")

    print(f"\nMonte Carlo spot check "
          f"({args.runs} runs x {args.horizon} steps) ...")
    for label, attacker in (("no attack", None),
                            ("beta = 1/3", ak.reduce_beta(Fraction(1, 3)))):
        cfg = ak.SimConfig(
            model=model, energy=em, schedule_kind="online",
            horizon=args.horizon, runs=args.runs, seed=42,
            detector=det, attacker=attacker,
        )
        out = ak.simulate(cfg)
        print(f"  {label}: J = {out.j_final:.6f}, "
              f"energy = {out.energy_avg:.4f}, "
              f"flag rate = {out.flag_rate:.4f}")


if __name__ == "__main__":
    main()
