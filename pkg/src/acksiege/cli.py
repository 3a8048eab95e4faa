"""Command-line front end.

Subcommands
-----------
analyze
    One-shot analytic report: steady-state covariance, offline schedule and
    its closed-form performance, calibrated detector, online performance
    (series formula and fixed-window chain), attacked-chain performance, the
    all-blocked ceiling, the attack-budget threshold scan, and a schedule
    recommendation.  Writes ``<out>.json`` and ``<out>.csv``.
simulate
    Monte Carlo run per the config's ``sim`` section.  Covariance mode
    writes the ``k,J_k`` series as CSV plus a ``.summary.json`` sidecar;
    trajectory mode writes the consistency report as JSON.
fig4
    J_k curves of four benchmark scenarios side by side (offline, online
    unattacked, online at beta = 1/5 and 2/3) with common random numbers.
fig5
    Chain performance over the attack-budget grid with Monte Carlo
    cross-points and the offline/online reference values.
threshold
    The budget grid scan alone, with the located crossing bracket.

Every emitted CSV starts with comment lines stating the tool version and
the SHA-256 of the effective config (after CLI overrides), so artifacts are
traceable and byte-reproducible.  Exit codes: 0 success, 2 config or model
error, 3 numerical/analysis error, 4 I/O error.  The ACKSIEGE_THREADS
environment variable caps worker threads for the chain grid.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .attack import reduce_beta
from .chain_analytics import (
    build_transition_matrix,
    chain_J,
    j_max,
    no_attack_chain,
    recommend_schedule,
    threshold_beta,
)
from .config import (
    build_attacker,
    build_detector,
    build_energy,
    build_sim_config,
    build_system,
    config_sha256,
    load_config,
    validate_config,
)
from .errors import (
    AnalysisError,
    BudgetError,
    CalibrationError,
    ConfigError,
    ModelError,
    SolverError,
)
from .lds_core import steady_state_cov
from .montecarlo import simulate, simulate_trajectory_check
from .schedule import (
    DetectorConfig,
    build_offline_schedule,
    first_principles_offline_J,
    offline_J_closed_form,
    online_J_closed_form,
    online_formula_vs_chain,
)

_CONFIG_EXIT = 2
_NUMERIC_EXIT = 3
_IO_EXIT = 4


def _threads() -> int | None:
    raw = os.environ.get("ACKSIEGE_THREADS")
    if raw is None:
        return None
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ACKSIEGE_THREADS must be an integer, got {raw!r}") from exc
    if val < 1:
        raise ConfigError(f"ACKSIEGE_THREADS must be at least 1, got {val}")
    return val


def _comments(doc: dict) -> list:
    return [f"# acksiege {__version__}", f"# config sha256={config_sha256(doc)}"]


def _write_csv(path: str, doc: dict, header: list, rows) -> str:
    if not path.endswith(".csv"):
        path = path + ".csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _comments(doc):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_overrides(doc: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        doc["sim"]["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        doc["sim"]["runs"] = args.runs
    if getattr(args, "horizon", None) is not None:
        doc["sim"]["horizon"] = args.horizon
    if getattr(args, "t_max", None) is not None:
        doc.setdefault("analysis", {})["t_max"] = args.t_max
    validate_config(doc)
    return doc


def _analysis_params(doc: dict) -> tuple[int, float]:
    an = doc.get("analysis", {})
    return an.get("t_max", 12), an.get("tail_tol", 1e-12)


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def cmd_analyze(doc: dict, out: str) -> None:
    model = build_system(doc)
    ss = steady_state_cov(model)
    em = build_energy(doc)
    sched = build_offline_schedule(em)
    j_off = offline_J_closed_form(sched, ss, model.lam)
    j_off_fp = first_principles_offline_J(sched, ss, model)

    detector = build_detector(doc, model, em)
    j_on_formula = online_J_closed_form(detector, ss, model.lam)
    j_on_chain = chain_J(no_attack_chain(detector.z0, model.lam), ss)
    gap = online_formula_vs_chain(detector.z0, ss)

    attacker = build_attacker(doc)
    beta = attacker.beta
    t_max, tail_tol = _analysis_params(doc)
    jmx = j_max(model, ss, tail_tol)
    if beta == 0:
        j_attacked = j_on_chain
    elif beta == 1:
        j_attacked = jmx
    else:
        j_attacked = chain_J(
            build_transition_matrix(detector.z0, attacker.r, attacker.t, model.lam),
            ss,
        )

    rep = threshold_beta(
        model, ss, em, detector.z0, t_max, tail_tol=tail_tol, threads=_threads()
    )
    if rep.indicator == "offline-always":
        recommendation = "offline"
    elif rep.indicator == "online-always":
        recommendation = "online"
    else:
        recommendation = recommend_schedule(float(beta), rep.beta_bar_estimate)

    payload = {
        "version": __version__,
        "config_sha256": config_sha256(doc),
        "pbar": ss.Pbar.tolist(),
        "pbar_trace": float(np.trace(ss.Pbar)),
        "offline": {
            "pattern": sched.pattern,
            "s0": sched.s0,
            "long_blocks": sched.m,
            "short_blocks": sched.n,
            "energy": _frac_str(em.psi),
            "j_closed_form": j_off,
            "j_first_principles": j_off_fp,
        },
        "online": {
            "z0": detector.z0,
            "mu": detector.mu,
            "L": detector.L,
            "j_formula": j_on_formula,
            "j_fixed_window_chain": j_on_chain,
            "formula_vs_chain": [
                {"mu": mu, **vals} for mu, vals in sorted(gap.items())
            ],
        },
        "attack": {
            "beta": _frac_str(beta),
            "r": attacker.r,
            "t": attacker.t,
            "enabled": attacker.enabled,
            "j_chain_at_beta": j_attacked,
        },
        "bounds": {"j_max": jmx},
        "threshold": {
            "beta_low": _frac_str(rep.beta_low),
            "beta_high": _frac_str(rep.beta_high),
            "estimate": rep.beta_bar_estimate,
            "indicator": rep.indicator,
            "monotonicity_violations": [
                [_frac_str(b1), _frac_str(b2), j1, j2]
                for b1, b2, j1, j2 in rep.monotonicity_violations
            ],
        },
        "recommendation": recommendation,
    }
    _write_json(out + ".json", payload)
    rows = [
        (r, t, repr(float(b)), repr(j), repr(rep.j_offline), repr(rep.j_online), rec)
        for (r, t, b, j), rec in zip(rep.rows, rep.recommendations)
    ]
    _write_csv(out + ".csv", doc,
               ["r", "t", "beta", "J_chain", "J_offline", "J_online",
                "recommendation"], rows)
    print(
        f"analyze: J_offline={j_off:.6f} J_online_formula={j_on_formula:.6f} "
        f"J_online_chain={j_on_chain:.6f} J_max={jmx:.6f} "
        f"threshold=({rep.beta_low}, {rep.beta_high}) "
        f"recommendation={recommendation}"
    )
    print(f"wrote {out}.json and {out}.csv")


def _build_cfg(doc: dict, schedule_kind: str | None = None, mode: str | None = None,
               attacker=None, detector=None):
    model = build_system(doc)
    em = build_energy(doc)
    kind = schedule_kind or doc["sim"].get("schedule", "online")
    if detector is None and kind == "online":
        detector = build_detector(doc, model, em)
    if attacker is None:
        attacker = build_attacker(doc)
    cfg = build_sim_config(doc, model, em, detector, attacker, schedule_kind=kind)
    if mode is not None:
        from dataclasses import replace
        cfg = replace(cfg, mode=mode)
    return cfg


def cmd_simulate(doc: dict, out: str) -> None:
    mode = doc["sim"].get("mode", "covariance")
    if mode == "trajectory":
        cfg = _build_cfg(doc, mode="trajectory")
        report = simulate_trajectory_check(cfg)
        report["version"] = __version__
        report["config_sha256"] = config_sha256(doc)
        if not out.endswith(".json"):
            out = out + ".json"
        _write_json(out, report)
        print(
            f"trajectory check: J_traj={report['j_trajectory']:.6f} "
            f"J_expected={report['j_covariance_expected']:.6f} "
            f"rel_gap={report['rel_gap']:+.4%}"
        )
        print(f"wrote {out}")
        return
    cfg = _build_cfg(doc)
    rep = simulate(cfg)
    rows = ((int(k), repr(float(j))) for k, j in rep.jk_series)
    csv_path = _write_csv(out, doc, ["k", "J_k"], rows)
    summary = {
        "version": __version__,
        "config_sha256": config_sha256(doc),
        "schedule": cfg.schedule_kind,
        "j_final": rep.j_final,
        "energy_avg": rep.energy_avg,
        "flag_rate": rep.flag_rate,
        "passed_flag_rate": rep.passed_flag_rate,
        "blocked_flag_rate": rep.blocked_flag_rate,
        "high_slot_count": rep.high_slot_count,
        "total_slots": rep.total_slots,
        "max_tau": rep.max_tau,
        "per_run_seeds": rep.per_run_seeds,
    }
    summary_path = csv_path[:-4] + ".summary.json"
    _write_json(summary_path, summary)
    print(f"simulate: j_final={rep.j_final:.6f} energy_avg={rep.energy_avg:.6f}")
    print(f"wrote {csv_path} and {summary_path}")


def cmd_fig4(doc: dict, out: str) -> None:
    model = build_system(doc)
    em = build_energy(doc)
    detector = build_detector(doc, model, em)
    scenarios = [
        ("offline", None, reduce_beta(0)),
        ("online", detector, reduce_beta(0)),
        ("online", detector, reduce_beta(Fraction(1, 5))),
        ("online", detector, reduce_beta(Fraction(2, 3))),
    ]
    series = []
    for kind, det, att in scenarios:
        cfg = _build_cfg(doc, schedule_kind=kind, attacker=att, detector=det)
        series.append(simulate(cfg).jk_series[:, 1])
    ks = np.arange(1, len(series[0]) + 1)
    rows = (
        (int(k), repr(float(a)), repr(float(b)), repr(float(c)), repr(float(d)))
        for k, a, b, c, d in zip(ks, *series)
    )
    csv_path = _write_csv(
        out, doc,
        ["k", "J_offline", "J_online", "J_attacked_1_5", "J_attacked_2_3"],
        rows,
    )
    print(
        f"fig4 terminal values: offline={series[0][-1]:.6f} "
        f"online={series[1][-1]:.6f} beta_1_5={series[2][-1]:.6f} "
        f"beta_2_3={series[3][-1]:.6f}"
    )
    print(f"wrote {csv_path}")


_FIG5_MC_BETAS = (Fraction(1, 5), Fraction(2, 5), Fraction(3, 5), Fraction(4, 5))


def cmd_fig5(doc: dict, out: str) -> None:
    model = build_system(doc)
    ss = steady_state_cov(model)
    em = build_energy(doc)
    detector = build_detector(doc, model, em)
    t_max, tail_tol = _analysis_params(doc)
    rep = threshold_beta(
        model, ss, em, detector.z0, t_max, tail_tol=tail_tol, threads=_threads()
    )
    # Monte Carlo cross-points use a fixed z0 window (mu = 1), the process
    # the chain describes, so the two columns are directly comparable.
    fixed = DetectorConfig(z0=detector.z0, mu=1.0, L=detector.L)
    mc = {}
    for beta in _FIG5_MC_BETAS:
        cfg = _build_cfg(doc, schedule_kind="online", detector=fixed,
                         attacker=reduce_beta(beta))
        mc[beta] = simulate(cfg).j_final
    rows = [
        (r, t, repr(float(b)), repr(j),
         repr(mc[b]) if b in mc else "",
         repr(rep.j_offline), repr(rep.j_online))
        for r, t, b, j in rep.rows
    ]
    if not out.endswith(".csv"):
        out = out + ".csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        for line in _comments(doc):
            fh.write(line + "\n")
        fh.write(f"# bracket_low={rep.beta_low} bracket_high={rep.beta_high} "
                 f"estimate={rep.beta_bar_estimate!r} indicator={rep.indicator}\n")
        writer = csv.writer(fh)
        writer.writerow(["r", "t", "beta", "J_chain", "J_mc", "J_offline",
                         "J_online"])
        writer.writerows(rows)
    print(
        f"fig5: bracket=({rep.beta_low}, {rep.beta_high}) "
        f"indicator={rep.indicator} J_offline={rep.j_offline:.6f}"
    )
    print(f"wrote {out}")


def cmd_threshold(doc: dict, out: str) -> None:
    model = build_system(doc)
    ss = steady_state_cov(model)
    em = build_energy(doc)
    detector = build_detector(doc, model, em)
    t_max, tail_tol = _analysis_params(doc)
    rep = threshold_beta(
        model, ss, em, detector.z0, t_max, tail_tol=tail_tol, threads=_threads()
    )
    rows = [
        (r, t, repr(float(b)), repr(j), repr(rep.j_offline), repr(rep.j_online), rec)
        for (r, t, b, j), rec in zip(rep.rows, rep.recommendations)
    ]
    if not out.endswith(".csv"):
        out = out + ".csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        for line in _comments(doc):
            fh.write(line + "\n")
        fh.write(f"# bracket_low={rep.beta_low} bracket_high={rep.beta_high} "
                 f"estimate={rep.beta_bar_estimate!r} indicator={rep.indicator}\n")
        fh.write(f"# j_max={rep.j_all_blocked!r} "
                 f"monotonicity_violations={len(rep.monotonicity_violations)}\n")
        writer = csv.writer(fh)
        writer.writerow(["r", "t", "beta", "J_chain", "J_offline", "J_online",
                         "recommendation"])
        writer.writerows(rows)
    print(
        f"threshold: bracket=({rep.beta_low}, {rep.beta_high}) "
        f"estimate={rep.beta_bar_estimate:.4f} indicator={rep.indicator}"
    )
    print(f"wrote {out}")


_DEFAULT_OUT = {
    "analyze": "acksiege_analyze",
    "simulate": "acksiege_sim.csv",
    "fig4": "acksiege_fig4.csv",
    "fig5": "acksiege_fig5.csv",
    "threshold": "acksiege_threshold.csv",
}

_DISPATCH = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
    "threshold": cmd_threshold,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acksiege",
        description="Schedules, suppression attacks, and estimation "
                    "performance for remote Kalman filtering over an "
                    "acknowledgment-driven erasure channel.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "closed-form and chain analysis report (JSON + CSV)"),
        ("simulate", "Monte Carlo run per the config's sim section"),
        ("fig4", "J_k curves for the four reference scenarios"),
        ("fig5", "chain J over the attack-budget grid with MC cross-points"),
        ("threshold", "attack-budget grid scan and crossing bracket"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=_DEFAULT_OUT[name],
                       help=f"output path (default: {_DEFAULT_OUT[name]})")
        p.add_argument("--seed", type=int, default=None,
                       help="override sim.seed")
        p.add_argument("--runs", type=int, default=None,
                       help="override sim.runs")
        p.add_argument("--horizon", type=int, default=None,
                       help="override sim.horizon")
        p.add_argument("--t-max", type=int, default=None, dest="t_max",
                       help="override analysis.t_max")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        doc = _apply_overrides(doc, args)
        _DISPATCH[args.command](doc, args.out)
        return 0
    except (ConfigError, BudgetError, ModelError, ValueError) as exc:
        print(f"acksiege: config error: {exc}", file=sys.stderr)
        return _CONFIG_EXIT
    except (SolverError, CalibrationError, AnalysisError) as exc:
        print(f"acksiege: analysis error: {exc}", file=sys.stderr)
        return _NUMERIC_EXIT
    except OSError as exc:
        print(f"acksiege: i/o error: {exc}", file=sys.stderr)
        return _IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
