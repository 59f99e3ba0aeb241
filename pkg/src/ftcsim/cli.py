"""Command line interface.

    ftcsim simulate <config.yaml> [-o DIR] [--seed N] [--backend NAME]
    ftcsim validate <config.yaml> [--kappa X --c1 X --c2 X]
    ftcsim sweep <config.yaml> --param PATH --values V ... [--mode set|scale]

``simulate`` writes trace.csv, metrics.txt and resolved_config.yaml into the
output directory.  ``validate`` prints one pass/fail line per design
condition.  ``sweep`` runs one scenario per value (in parallel) and emits a
CSV table of metrics.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import os
import sys

import numpy as np

from . import backends
from .config import ConfigError, build_scenario, dump_config, load_config, resolve_config
from .controller import settling_time_bound
from .engine import ScenarioValidationError, run_scenario
from .observer import validate_gain_conditions


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def cmd_simulate(args) -> int:
    try:
        resolved = resolve_config(load_config(args.config), seed=args.seed)
        scenario = build_scenario(resolved)
        result = run_scenario(scenario, backend=args.backend)
    except (ConfigError, ScenarioValidationError, OSError) as exc:
        return _fail(str(exc))

    os.makedirs(args.output, exist_ok=True)
    result.trace.to_csv(os.path.join(args.output, "trace.csv"))
    with open(os.path.join(args.output, "metrics.txt"), "w") as fh:
        fh.write(f"status = {result.status}\n")
        if result.failure_message:
            fh.write(f"failure = {result.failure_message}\n")
        if result.metrics is not None:
            fh.write(result.metrics.to_text())
    dump_config(resolved, os.path.join(args.output, "resolved_config.yaml"))

    print(f"status: {result.status}  ({result.backend} backend, {result.runtime_s:.2f}s, "
          f"{len(result.trace)} samples)")
    if result.failure_message:
        print(result.failure_message, file=sys.stderr)
    print(f"wrote {args.output}/trace.csv, metrics.txt, resolved_config.yaml")
    return 0 if result.ok else 1


def cmd_validate(args) -> int:
    try:
        resolved = resolve_config(load_config(args.config))
        ob = resolved.setdefault("observer", {})
        if args.kappa is not None:
            ob["kappa"] = args.kappa
        if args.c1 is not None:
            ob["c1"] = args.c1
        if args.c2 is not None:
            ob["c2"] = args.c2
    except ConfigError as exc:
        return _fail(str(exc))

    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:   # every failure becomes a report line
            checks.append((name, False, str(exc)))

    scenario = None

    def build():
        nonlocal scenario
        scenario = build_scenario(resolved)

    check("config structure (parities, SPD, Hurwitz, observability)", build)
    if scenario is not None:
        check("scenario consistency (dimensions, funnel initialization)", scenario.validate)
        lam_resid = float(np.abs(scenario.obs_gains.P @ scenario.obs_gains.Lambda
                                 - scenario.aug.C_a.T).max())
        checks.append(("correction gain solves P*Lambda = C_a^T (residual %.2e)" % lam_resid,
                       lam_resid <= 1e-10, ""))
        bound = settling_time_bound(scenario.controller.g)
        print(f"terminal-dynamics settling bound: {bound:.4f} s")
        if scenario.obs_gains.kappa is None:
            print("note: observer.kappa not supplied; skipping the Q1/Q2 eigenvalue report "
                  "(pass --kappa, optionally --c1/--c2)")
        else:
            rep = validate_gain_conditions(scenario.aug, scenario.obs_gains)
            checks.append((f"Q1 positive definite (min eig {rep.min_eig_Q1:.4g})",
                           rep.Q1_positive, ""))
            checks.append((f"Q2 positive definite (min eig {rep.min_eig_Q2:.4g})",
                           rep.Q2_positive, ""))

    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}" + (f": {detail}" if detail else ""))
        ok &= passed
    return 0 if ok else 1


def _set_path(doc: dict, path: str, value, scale: bool):
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(f"sweep parameter path {path!r} not found at {k!r}")
        node = node[k]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"sweep parameter path {path!r} not found at {leaf!r}")
    if scale:
        old = node[leaf]
        if isinstance(old, list):
            node[leaf] = [x * value for x in old]
        else:
            node[leaf] = old * value
    else:
        node[leaf] = value


def _sweep_one(payload):
    doc, param, value, scale, backend = payload
    doc = copy.deepcopy(doc)
    _set_path(doc, param, value, scale)
    try:
        result = run_scenario(build_scenario(doc), backend=backend)
    except (ConfigError, ScenarioValidationError) as exc:
        return value, None, str(exc)
    return value, result, None


def cmd_sweep(args) -> int:
    try:
        resolved = resolve_config(load_config(args.config), seed=args.seed)
    except ConfigError as exc:
        return _fail(str(exc))

    jobs = [(resolved, args.param, v, args.mode == "scale", args.backend)
            for v in args.values]
    if args.jobs > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]

    header = [args.param, "status", "funnel_violations", "max_steady_state_error",
              "recovery_time", "sigma_settling_time", "max_xtilde_final_window",
              "fault_rmse_final_10s", "beta_hat_max"]
    print(",".join(header))
    exit_code = 0
    for value, result, err in rows:
        if result is None:
            print(f"{value!r},error({err}),,,,,,,")
            exit_code = 1
            continue
        mtr = result.metrics
        cells = [repr(value), result.status]
        if mtr is None:
            cells += [""] * 7
        else:
            def fmt(x):
                return "" if x is None else f"{x:.10g}"
            cells += [str(mtr.funnel_violations), fmt(float(mtr.steady_state_error.max())),
                      fmt(mtr.recovery_time), fmt(mtr.sigma_settling_time),
                      fmt(mtr.max_xtilde_final_window), fmt(mtr.fault_rmse_final_10s),
                      fmt(mtr.beta_hat_max)]
        if not result.ok:
            exit_code = 1
        print(",".join(cells))
    return exit_code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ftcsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario and write trace + metrics")
    p_sim.add_argument("config")
    p_sim.add_argument("-o", "--output", default="out")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--backend", choices=backends.available_backends(), default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="check design conditions, print pass/fail lines")
    p_val.add_argument("config")
    p_val.add_argument("--kappa", type=float, default=None)
    p_val.add_argument("--c1", type=float, default=None)
    p_val.add_argument("--c2", type=float, default=None)
    p_val.set_defaults(func=cmd_validate)

    p_sw = sub.add_parser("sweep", help="run one scenario per parameter value")
    p_sw.add_argument("config")
    p_sw.add_argument("--param", required=True,
                      help="dotted config path, e.g. reference.offset or simulation.step")
    p_sw.add_argument("--values", required=True, nargs="+", type=float)
    p_sw.add_argument("--mode", choices=("set", "scale"), default="set",
                      help="replace the leaf value, or multiply it (lists scale elementwise)")
    p_sw.add_argument("--seed", type=int, default=None)
    p_sw.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_sw.add_argument("--backend", choices=backends.available_backends(), default=None)
    p_sw.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
