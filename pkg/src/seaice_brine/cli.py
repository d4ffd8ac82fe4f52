"""Command-line entry point.

Exit codes: 0 success, 2 a declared check failed, 1 error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from . import phasefield as pf
from . import scenarios as sc
from . import stefan as st
from .model import TABLE_OF_PARAMETERS, ModelParams

EXIT_OK, EXIT_ERROR, EXIT_ASSERT = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config or model parameter (repeatable)")
    common.add_argument("--output-dir", "-o", help="output directory (overrides config)")

    p = argparse.ArgumentParser(prog="seaice-brine",
                                description="Brine inclusion phase-field and Stefan simulations.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium-pore", parents=[common],
                   help="equilibrium pore profile (single run with --set b0=..., else the gradient sweep)")
    ev = sub.add_parser("evolve", parents=[common], help="run a scenario")
    ev.add_argument("--scenario", help="built-in name or path to a scenario JSON file")
    sub.add_parser("suite", parents=[common], help="all built-in scenarios and studies")
    sub.add_parser("convergence", parents=[common], help="time and space convergence study")
    sub.add_parser("drift", parents=[common], help="drift speed against thermal gradient")
    ph = sub.add_parser("phasefield-1d", parents=[common], help="1-D phase-field run")
    ph.add_argument("--suite", action="store_true", help="run the conservation/entropy/front-speed checks")
    sub.add_parser("dump-defaults", parents=[common], help="print default parameters as JSON")
    ds = sub.add_parser("dump-scenario", parents=[common], help="print a built-in scenario as JSON")
    ds.add_argument("name", choices=sorted(sc.BUILTIN_SCENARIOS))
    return p


def _finish(report, out: Path, name: str) -> int:
    io.write_report(out / f"{name}.json", report)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_ASSERT


def _load_scenario(ref, cfg: io.RunConfig) -> sc.Scenario:
    if isinstance(ref, dict):
        return sc.Scenario.from_dict(ref)
    if ref is None:
        raise io.ConfigError("evolve needs --scenario (built-in name or JSON path)")
    if ref in sc.BUILTIN_SCENARIOS:
        return sc.builtin_scenario(ref)
    path = Path(ref)
    if path.exists():
        return sc.Scenario.from_dict(json.loads(path.read_text()))
    raise io.ConfigError(f"unknown scenario: {ref}")


def cmd_equilibrium_pore(cfg: io.RunConfig, out: Path) -> int:
    params = cfg.model_params()
    if cfg.b0 is None:
        rep = sc.run_pore_sweep(params, r0=cfg.r0, a0=cfg.a0, x3_max=cfg.x3_max)
        for prof, b0 in zip(rep.frames, sc.PORE_GRADIENTS):
            io.write_pore_profile(out / f"pore_b0_{b0:g}.csv", prof)
        io.write_json(out / "events.json", rep.events)
        return _finish(rep, out, "pore_sweep")
    prof = st.equilibrium_pore(cfg.r0, cfg.a0, float(cfg.b0), cfg.x3_max, params)
    regime = st.classify_pore_regime(prof)
    io.write_pore_profile(out / "pore.csv", prof)
    events = []
    if regime is st.PoreRegime.PINCH_OFF:
        events.append({"type": "pinch", "tau": None, "s": None, "x3": prof.x3_end, "reason": prof.reason})
    io.write_json(out / "events.json", events)
    io.write_json(out / "pore.json", {"r0": cfg.r0, "a0": cfg.a0, "b0": cfg.b0, "N0": prof.salt,
                                      "regime": regime.value, "reason": prof.reason,
                                      "x3_end": prof.x3_end})
    print(f"regime={regime.value} reason={prof.reason} x3_end={prof.x3_end:.6g} mm")
    return EXIT_OK


def cmd_evolve(cfg: io.RunConfig, out: Path, scenario_ref) -> int:
    scen = _load_scenario(scenario_ref if scenario_ref is not None else cfg.scenario, cfg)
    rep = sc.run_scenario(scen, cfg.model_params())
    io.write_frames(out / "frames.csv", rep.frames)
    io.write_json(out / "events.json", rep.events)
    return _finish(rep, out, "report")


def cmd_suite(cfg: io.RunConfig, out: Path) -> int:
    params = cfg.model_params()
    reports = sc.run_suite(params)
    reports += [sc.run_stratification_check(params), sc.run_pore_sweep(params),
                sc.run_convergence_study(params), sc.run_drift_sweep(params)]
    code = EXIT_OK
    for rep in reports:
        sub = out / rep.name
        if rep.frames and hasattr(rep.frames[0], "curve"):
            io.write_frames(sub / "frames.csv", rep.frames)
        io.write_report(sub / "report.json", rep)
        print(rep.summary())
        if not rep.passed:
            code = EXIT_ASSERT
    io.write_json(out / "suite.json", {"passed": code == EXIT_OK,
                                       "reports": [r.name for r in reports],
                                       "failed": [r.name for r in reports if not r.passed]})
    return code


def cmd_phasefield(cfg: io.RunConfig, out: Path, suite: bool) -> int:
    params = cfg.model_params()
    if suite:
        return _finish(sc.run_phasefield_suite(params), out, "phasefield_suite")
    grid = pf.Grid1D(int(cfg.n_cells), float(cfg.domain_length))
    state = pf.front_state(grid, cfg.x_front, cfg.theta0, cfg.rho0, params)
    dt = pf.stable_dt(grid, params)
    traj = pf.simulate(state, dt, int(cfg.n_steps), params, save_every_steps=int(cfg.save_every_steps))
    io.write_field_frames(out / "trajectory.csv", traj.frames, traj.diagnostics)
    d0, d1 = traj.diagnostics[0], traj.diagnostics[-1]
    print(f"steps={traj.steps} dt={dt:.6g} salt drift={abs(d1.total_salt - d0.total_salt):.3g} "
          f"entropy {d0.total_entropy:.12g} -> {d1.total_entropy:.12g}")
    return EXIT_OK


def cmd_dump_defaults() -> int:
    data = {"params": ModelParams.defaults().to_dict(), "table": TABLE_OF_PARAMETERS}
    print(json.dumps(data, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = io.load_config(args.config, args.overrides)
        if args.output_dir:
            cfg = io.RunConfig.from_dict({**cfg.to_dict(), "output_dir": args.output_dir})
        out = Path(cfg.output_dir)
        if args.command == "dump-defaults":
            return cmd_dump_defaults()
        if args.command == "dump-scenario":
            print(json.dumps(sc.builtin_scenario(args.name).to_dict(), indent=2))
            return EXIT_OK
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "equilibrium-pore":
            return cmd_equilibrium_pore(cfg, out)
        if args.command == "evolve":
            return cmd_evolve(cfg, out, args.scenario)
        if args.command == "suite":
            return cmd_suite(cfg, out)
        if args.command == "convergence":
            return _finish(sc.run_convergence_study(cfg.model_params()), out, "convergence")
        if args.command == "drift":
            return _finish(sc.run_drift_sweep(cfg.model_params()), out, "drift")
        if args.command == "phasefield-1d":
            return cmd_phasefield(cfg, out, args.suite)
    except (io.ConfigError, KeyError, ValueError, OSError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    parser.error(f"unhandled command {args.command}")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
