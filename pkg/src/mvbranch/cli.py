"""Command-line entry point.

    mvbranch {simulate,reference,distance,convergence,check,value}
             --config run.json [--seed S] [--workers W] [--out DIR]

Every CSV artifact starts with a ``# config_sha256=... seed=...`` line followed
by its header row; JSON artifacts carry the same two fields.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .branching import InitialCondition, NumericsError, PopulationExplosion, SimGrid, mass_statistics, simulate_ensemble
from .coefficients import Bounds, Scenario
from .config import ConfigError, RunConfig, load_config
from .functionals import LiftedSettings, flow_constancy_check, make_functional, value_function_U
from .harness import ReplicaPolicy, battery_report, fit_rate, run_battery, weak_error_study
from .lifted import picard_solve, simulate_lifted_self
from .measures import read_measure
from .metrics import bounded_lipschitz_dual, extended_w1

SUBCOMMANDS = ("simulate", "reference", "distance", "convergence", "check", "value")


class CheckFailed(Exception):
    """A requested check did not pass; artifacts were still written."""


def _scenario(cfg: RunConfig) -> Scenario:
    s = cfg.scenario
    bounds = Bounds(**s.bounds) if s.bounds is not None else None
    return Scenario(s.family, dict(s.params), int(s.dim), bounds)


def _init(cfg: RunConfig) -> InitialCondition:
    i = cfg.init
    return InitialCondition(i.count, i.mean, i.std, i.law)


def _grid(cfg: RunConfig) -> SimGrid:
    return SimGrid(cfg.grid.horizon, cfg.grid.dt)


def _write(out: str, name: str, text: str) -> str:
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _json(cfg: RunConfig, payload: dict) -> str:
    doc = {"config_sha256": cfg.sha256(), "seed": cfg.seed}
    doc.update(payload)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv(cfg: RunConfig, header: str, rows) -> str:
    lines = [f"# {cfg.provenance()}", header]
    lines += [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig, out: str, workers: int) -> None:
    sc = cfg.simulate
    coeffs = _scenario(cfg).build()
    grid = _grid(cfg)
    ens = simulate_ensemble(sc.N, coeffs, _init(cfg), grid, cfg.seed, replicas=sc.replicas, record=sc.record,
                            track_genealogy=True, cap=sc.cap, workers=workers)
    for r in range(sc.replicas):
        traj = ens.trajectory(r)
        _write(out, f"trajectory_{r}.csv", traj.measures_csv(cfg.provenance()))
        _write(out, f"events_{r}.csv", traj.events_csv(cfg.provenance()))
    st = mass_statistics(ens)
    rows = [(repr(float(t)), repr(float(m)), repr(float(v)), repr(float(s)))
            for t, m, v, s in zip(st.times, st.mean, st.var, st.stderr)]
    _write(out, "mass.csv", _csv(cfg, "time,mean,variance,stderr", rows))


def cmd_reference(cfg: RunConfig, out: str, workers: int) -> None:
    rc = cfg.reference
    coeffs = _scenario(cfg).build()
    if rc.method == "self-interaction":
        flow = simulate_lifted_self(rc.Mp, coeffs, _init(cfg), _grid(cfg), cfg.seed)
    elif rc.method == "picard":
        flow = picard_solve(rc.Mp, coeffs, _init(cfg), _grid(cfg), rc.iterations, cfg.seed)
    else:
        raise ConfigError(f"unknown reference method {rc.method!r}; use 'self-interaction' or 'picard'")
    _write(out, "reference_flow.csv", flow.measures_csv(cfg.provenance()))
    _write(out, "reference_manifest.json", _json(cfg, flow.manifest()))


def cmd_distance(cfg: RunConfig, out: str, workers: int) -> None:
    dc = cfg.distance
    if not dc.mu or not dc.nu:
        raise ConfigError("distance needs 'distance.mu' and 'distance.nu' measure paths")
    mu, nu = read_measure(dc.mu), read_measure(dc.nu)
    sol = bounded_lipschitz_dual(mu, nu, dc.radius)
    w1 = extended_w1(mu, nu)
    _write(out, "distance.csv", _csv(cfg, "bounded_lipschitz,extended_w1,error_bound",
                                     [(repr(sol.value), repr(w1), repr(sol.error_bound))]))
    if dc.witness:
        d = sol.points.shape[1] if sol.points.ndim == 2 else mu.dim
        header = ",".join([f"x{i + 1}" for i in range(d)] + ["signed_weight", "f"])
        rows = [[repr(float(v)) for v in p] + [repr(float(w)), repr(float(f))]
                for p, w, f in zip(sol.points, sol.signed_weights, sol.f)]
        _write(out, "witness.csv", _csv(cfg, header, rows))
    print(f"bounded_lipschitz={sol.value!r} extended_w1={w1!r}")


def cmd_convergence(cfg: RunConfig, out: str, workers: int) -> None:
    st = cfg.study
    sc = _scenario(cfg)
    G = make_functional(st.functional, sc.dim)
    rp = st.replicas
    policy = ReplicaPolicy(rp.r0, rp.n0, rp.power, rp.cap, rp.minimum)
    table = weak_error_study(sc, G, st.N_list, policy, _init(cfg), _grid(cfg), st.Mp, cfg.seed, workers)
    fit = fit_rate(table)
    _write(out, "weak_error.csv", table.to_csv(cfg.provenance()))
    summary = fit.as_dict()
    summary["interval"] = list(fit.interval)
    summary["budget"] = table.meta
    _write(out, "rate_fit.json", _json(cfg, summary))


def cmd_check(cfg: RunConfig, out: str, workers: int) -> None:
    cc = cfg.check
    res = run_battery(_scenario(cfg), _init(cfg), cfg.grid.horizon, cfg.grid.dt, cc.N, cc.replicas, cc.Mp,
                      cfg.seed, workers, cc.pairs)
    _write(out, "check_report.csv", battery_report(res, cfg.provenance()))
    for r in res:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.4g} (threshold {r.threshold:.4g})")
    failed = [r.name for r in res if not r.passed]
    if failed:
        raise CheckFailed(f"failed checks: {', '.join(failed)}")


def cmd_value(cfg: RunConfig, out: str, workers: int) -> None:
    vc = cfg.value
    sc = _scenario(cfg)
    coeffs = sc.build()
    G = make_functional(vc.functional, sc.dim)
    settings = LiftedSettings(coeffs, vc.Mp, cfg.grid.dt, cfg.grid.horizon, cfg.seed)
    if vc.measure:
        mu = read_measure(vc.measure)
        rows = []
        for k, t in enumerate(vc.times):
            s = LiftedSettings(coeffs, vc.Mp, cfg.grid.dt, cfg.grid.horizon, cfg.seed + k)
            v, se = value_function_U(float(t), mu, G, s)
            rows.append((repr(float(t)), repr(v), repr(se)))
        _write(out, "value.csv", _csv(cfg, "time,U,stderr", rows))
        return
    fc = flow_constancy_check(G, coeffs, _init(cfg), [float(t) for t in vc.times], settings)
    rows = [(repr(float(t)), repr(float(v)), repr(float(s)), repr(float(d)), repr(float(c)))
            for t, v, s, d, c in zip(fc.times, fc.values, fc.stderrs, fc.deviations, fc.combined_stderr)]
    _write(out, "value.csv", _csv(cfg, "time,U,stderr,deviation,combined_stderr", rows))
    if vc.check and not fc.passed():
        raise CheckFailed(f"flow constancy: max deviation {fc.max_deviation:.4g} exceeds 3 combined stderr")


COMMANDS = {
    "simulate": cmd_simulate,
    "reference": cmd_reference,
    "distance": cmd_distance,
    "convergence": cmd_convergence,
    "check": cmd_check,
    "value": cmd_value,
}


def run(subcommand: str, cfg: RunConfig, workers: int = 1) -> int:
    """Execute a subcommand; returns the process exit status.

    0 on success, 1 when a requested check fails (reports are still written),
    2 for configuration errors and 3 for simulation errors.
    """
    try:
        os.makedirs(cfg.output, exist_ok=True)
        COMMANDS[subcommand](cfg, cfg.output, workers)
    except CheckFailed as exc:
        print(f"mvbranch {subcommand}: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"mvbranch {subcommand}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (PopulationExplosion, NumericsError) as exc:
        print(f"mvbranch {subcommand}: simulation error ({cfg.scenario.family}, seed {cfg.seed}): {exc}",
              file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"mvbranch {subcommand}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvbranch", description="Branching mean-field particle simulations.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (never changes results)")
    p.add_argument("--out", help="output directory (overrides the config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"mvbranch: configuration error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("mvbranch: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    if args.workers < 1:
        print("mvbranch: --workers must be >= 1", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg, args.workers)


if __name__ == "__main__":
    sys.exit(main())
