"""Command-line front end: `python -m confinedbose <subcommand> ...`.

Exit codes: 0 success, 2 invariant failure, 3 guard violation, 4 config
error.  All heavy lifting lives in the library; this module only parses
flags, loads configs and writes result files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bounds import (
    RateSpec,
    interaction_norms,
    coulomb_confined_norms,
    growth_integrand_short_range,
    mean_field_coefficient,
    envelope_report,
)
from .errors import ConfigError, GuardError, InvariantError
from .harness import ExperimentConfig, run_ladder, run_single, verify_lemmas
from .model import measured_f_eps
from .onebody import trajectory_rows as onebody_rows

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_GUARD = 3
EXIT_CONFIG = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confinedbose")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate-onebody", "simulate-manybody", "counting", "ladder",
                 "verify-lemmas", "bounds", "coulomb-norms"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--out", type=str, default="out")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
    return p


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("this subcommand requires --config")
    cfg = ExperimentConfig.load(args.config)
    if args.seed:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def _cmd_simulate_onebody(args) -> int:
    from .harness import _csv, initial_state
    from .onebody import evolve_effective

    cfg = _load_config(args)
    spec = cfg.model_spec()
    os.makedirs(args.out, exist_ok=True)
    states = evolve_effective(initial_state(spec, cfg.initial), spec,
                              cfg.time_horizon, cfg.dt, stride=cfg.report_stride)
    _csv(os.path.join(args.out, "onebody.csv"),
         "t,mass,E_phi,sup_phi,H2_phi", onebody_rows(states, spec))
    return EXIT_OK


def _cmd_simulate_manybody(args) -> int:
    cfg = _load_config(args)
    run_single(cfg, args.out, counting_reports=False)
    return EXIT_OK


def _cmd_counting(args) -> int:
    cfg = _load_config(args)
    run_single(cfg, args.out, counting_reports=True)
    return EXIT_OK


def _cmd_ladder(args) -> int:
    cfg = _load_config(args)
    fit = run_ladder(cfg, args.out, workers=args.workers)
    if not fit.complete:
        print(f"ladder incomplete: {fit.note}", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def _cmd_verify_lemmas(args) -> int:
    checks = verify_lemmas(seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    table = {c.name: {"passed": c.passed, "worst": c.worst,
                      "tolerance": c.tolerance, "cases": c.cases} for c in checks}
    path = os.path.join(args.out, "verify_lemmas.json")
    with open(path + ".tmp", "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2)
    os.replace(path + ".tmp", path)
    failed = [c.name for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} "
              f"(worst {c.worst:.3e}, tol {c.tolerance:.1e}, {c.cases} cases)")
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_bounds(args) -> int:
    from .harness import initial_state
    from .onebody import evolve_effective, sup_norms

    cfg = _load_config(args)
    spec = cfg.model_spec()
    run_single(cfg, args.out, counting_reports=True)
    with open(os.path.join(args.out, "counting.json"), encoding="utf-8") as fh:
        reports = json.load(fh)
    times = [r["t"] for r in reports]
    ones = evolve_effective(initial_state(spec, cfg.initial), spec,
                            cfg.time_horizon, cfg.dt, stride=cfg.report_stride)
    if spec.regime == "hartree-theta0":
        sups = [sup_norms(st) for st in ones]
        norms = interaction_norms(spec.interaction, spec.eps, spec.free, spec.confined)
        f_eps = measured_f_eps(spec.interaction, spec.eps, spec.free, spec.confined)
        coeff = mean_field_coefficient(times, [s[0] for s in sups], [s[1] for s in sups], norms)
        report = envelope_report(
            times, [r["alpha"] for r in reports], RateSpec("mean-field"), spec,
            coefficient=coeff, f_eps=f_eps,
        )
    else:
        if not 0.25 < spec.theta < 1.0 / 3.0:
            raise ConfigError("the short-range bound check needs theta in (1/4, 1/3)")
        integrand = growth_integrand_short_range(ones, spec)
        report = envelope_report(
            times, [r["beta_tilde"] for r in reports],
            RateSpec("short-range", theta=spec.theta, nu=spec.nu), spec,
            growth_integrand=integrand,
        )
    path = os.path.join(args.out, "bounds.json")
    with open(path + ".tmp", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    os.replace(path + ".tmp", path)
    print(f"below_envelope: {report.below_envelope}")
    return EXIT_OK


def _cmd_coulomb_norms(args) -> int:
    eps_list = (0.1, 0.05, 0.025)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            eps_list = tuple(json.load(fh).get("eps_list", eps_list))
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for eps in eps_list:
        res = coulomb_confined_norms(eps)
        rows.append({"eps": eps, "l1_defect": res.l1_defect,
                     "linf_defect": res.linf_defect,
                     "log_divergence": res.log_divergence})
        print(f"eps={eps}: L1 defect {res.l1_defect:.6g}, "
              f"Linf defect {res.linf_defect:.6g}, log term {res.log_divergence:.6g}")
    path = os.path.join(args.out, "coulomb_norms.json")
    with open(path + ".tmp", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    os.replace(path + ".tmp", path)
    return EXIT_OK


_COMMANDS = {
    "simulate-onebody": _cmd_simulate_onebody,
    "simulate-manybody": _cmd_simulate_manybody,
    "counting": _cmd_counting,
    "ladder": _cmd_ladder,
    "verify-lemmas": _cmd_verify_lemmas,
    "bounds": _cmd_bounds,
    "coulomb-norms": _cmd_coulomb_norms,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
