"""Command-line entry point ``fvgt``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime instability (or a
failed oracle comparison), 3 file or format problems.  ``FVGT_LOG`` sets the
log level (error, warn, info, debug; default warn).
"""

import argparse
import json
import logging
import os
import sys
import time

from . import __version__
from .crosscheck import all_passed, equivalence_suite
from .errors import (
    ConfigParseError,
    ConfigurationError,
    FormatError,
    InstabilityError,
    StudyError,
)
from .io import (
    build_manifest,
    load_config,
    read_checkpoint,
    write_checkpoint,
    write_json,
    write_manifest,
    write_timeseries,
)
from .solver import run
from .studies import alpha_convergence_study, blowup_scan, viscosity_limit_study

log = logging.getLogger("fracvoigt.cli")

EXIT_OK, EXIT_VALIDATION, EXIT_INSTABILITY, EXIT_IO = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


def setup_logging():
    name = os.environ.get("FVGT_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    if level is None:
        log.warning("FVGT_LOG=%r not recognized; using warn", name)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--set", dest="overrides", metavar="KEY=VALUE", action="append", default=[],
                        help="override a config key (section.key or a unique key); repeatable")
    common.add_argument("--out", metavar="DIR", help="output directory (default: [output] directory)")
    common.add_argument("--workers", metavar="K", type=int, default=os.cpu_count() or 1,
                        help="worker processes for ladder studies (default: available cores)")

    parser = argparse.ArgumentParser(prog="fvgt", description="Fractional Navier-Stokes-Voigt / Euler-Voigt solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="integrate one configuration")
    p_run.add_argument("--resume", metavar="CKPT", help="continue from a checkpoint file")
    sub.add_parser("convergence", parents=[common], help="alpha -> 0 convergence ladder")
    sub.add_parser("viscosity-limit", parents=[common], help="nu -> 0 convergence ladder")
    sub.add_parser("blowup", parents=[common], help="blow-up monitor scan over an alpha ladder")
    p_oracle = sub.add_parser("oracle-check", parents=[common], help="compare against the brute-force oracle")
    p_oracle.add_argument("--seeds", type=int, default=20, help="random pairs per grid size (default 20)")
    sub.add_parser("info", parents=[common], help="validate a config and print its regime")
    return parser


def _config(args):
    if not args.config:
        raise ConfigurationError(f"{args.command} needs --config PATH")
    cfg = load_config(args.config, args.overrides)
    for w in cfg.warnings:
        log.warning(w)
    return cfg


def _out_dir(args, cfg):
    out = args.out or cfg.output.directory
    os.makedirs(out, exist_ok=True)
    return out


def _study(cfg, parameter):
    st = cfg.study
    if st is None or not st.values:
        raise ConfigurationError(f"[study] values are required for a {parameter} ladder")
    if st.parameter not in (None, parameter):
        raise ConfigurationError(f"[study] parameter={st.parameter!r} but this command varies {parameter!r}")
    return st


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args):
    cfg = _config(args)
    p = cfg.params
    out = _out_dir(args, cfg)
    started = time.time()
    outputs, extra = [], {"command": "run"}

    start, dissipation, u0 = None, 0.0, None
    if args.resume:
        ckpt = read_checkpoint(args.resume)
        problems = ckpt.mismatches(p)
        if problems:
            raise ConfigurationError(problems)
        if ckpt.dissipation_cum is None:
            if p.nu > 0:
                log.warning("checkpoint has no dissipation sidecar; restarting the integral at 0")
        else:
            dissipation = ckpt.dissipation_cum
        start = ckpt.state
        extra["resumed_from"] = {"step_index": start.step_index, "t": start.t}
    else:
        u0 = cfg.initial_field()

    every = cfg.output.checkpoint_every

    def on_sample(state, report):
        if every and state.step_index % every == 0 and state.step_index > (start.step_index if start else 0):
            name = f"checkpoint_{state.step_index:08d}.ckpt"
            write_checkpoint(state, p, os.path.join(out, name), report.dissipation_cum)
            outputs.extend([name, name + ".json"])

    try:
        result = run(p, u0, cfg.output.sample_every, on_sample=on_sample, start=start, dissipation_cum=dissipation)
    except KeyboardInterrupt:
        manifest = build_manifest(cfg.echo(), "aborted", out, outputs, started=started, extra=extra)
        write_manifest(manifest, out)
        print("aborted", file=sys.stderr)
        return EXIT_INSTABILITY

    write_timeseries(result.series, os.path.join(out, "series.csv"))
    write_checkpoint(result.final, p, os.path.join(out, "final.ckpt"), result.dissipation_cum)
    outputs.extend(["series.csv", "final.ckpt", "final.ckpt.json"])
    extra["final_step"] = result.final.step_index
    extra["regime"] = p.regime()
    manifest = build_manifest(cfg.echo(), result.status, out, outputs, started=started,
                              warnings=result.warnings, error=result.error, extra=extra)
    write_manifest(manifest, out)
    last = result.series[-1] if result.series else None
    if last is not None:
        print(f"{result.status}: t={last.t:g} modified={last.modified:.12g} dissipation={last.dissipation_cum:.6g}")
    if result.status != "ok":
        print(f"run diverged: {result.error}", file=sys.stderr)
        return EXIT_INSTABILITY
    return EXIT_OK


def _write_ladder(out, result, cfg, started, command):
    os.makedirs(os.path.join(out, "series"), exist_ok=True)
    outputs = ["convergence.json", "series/reference.csv"]
    write_json(result.to_dict(), os.path.join(out, "convergence.json"))
    write_timeseries(result.reference_series, os.path.join(out, "series", "reference.csv"))
    for i, rung in enumerate(result.ladder):
        name = f"series/rung_{i:02d}_{result.parameter}_{rung.value:g}.csv"
        write_timeseries(rung.series, os.path.join(out, name))
        outputs.append(name)
    manifest = build_manifest(cfg.echo(), "ok", out, outputs, started=started,
                              extra={"command": command, "reference_id": result.reference_id})
    write_manifest(manifest, out)
    print(f"{result.study}: fitted {result.primary_norm} rate {result.fitted_rate:.4f}, "
          f"monotone={result.monotone}")
    for rung in result.ladder:
        print(f"  {result.parameter}={rung.value:<10g} error={rung.norm(result.primary_norm):.6e}")


def _ladder_failed(out, cfg, started, command, exc):
    manifest = build_manifest(cfg.echo(), "diverged", out, [], started=started, error=exc,
                              extra={"command": command})
    write_manifest(manifest, out)
    print(f"{command} failed: {exc}", file=sys.stderr)
    return EXIT_INSTABILITY


def cmd_convergence(args):
    cfg = _config(args)
    st = _study(cfg, "alpha")
    out = _out_dir(args, cfg)
    started = time.time()
    try:
        result = alpha_convergence_study(
            cfg.params, st.values, cfg.initial_field(), st.mode or "to_euler",
            sample_every=cfg.output.sample_every, workers=args.workers, rate_norm=st.rate_norm or "L2",
            strict=st.strict,
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    except StudyError as exc:
        return _ladder_failed(out, cfg, started, "convergence", exc)
    _write_ladder(out, result, cfg, started, "convergence")
    return EXIT_OK


def cmd_viscosity(args):
    cfg = _config(args)
    st = _study(cfg, "nu")
    out = _out_dir(args, cfg)
    started = time.time()
    try:
        result = viscosity_limit_study(
            cfg.params, st.values, cfg.initial_field(), st.mode or "fixed_alpha",
            sample_every=cfg.output.sample_every, workers=args.workers, rate_norm=st.rate_norm, strict=st.strict,
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    except StudyError as exc:
        return _ladder_failed(out, cfg, started, "viscosity-limit", exc)
    _write_ladder(out, result, cfg, started, "viscosity-limit")
    return EXIT_OK


def cmd_blowup(args):
    cfg = _config(args)
    st = _study(cfg, "alpha")
    out = _out_dir(args, cfg)
    started = time.time()
    try:
        report = blowup_scan(cfg.params, st.values, cfg.initial_field(), threshold=st.threshold,
                             sample_every=cfg.output.sample_every, workers=args.workers)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    write_json(report.to_dict(), os.path.join(out, "blowup.json"))
    diverged = any(s != "ok" for s in report.statuses)
    manifest = build_manifest(cfg.echo(), "diverged" if diverged else "ok", out, ["blowup.json"], started=started,
                              extra={"command": "blowup", "verdict": report.verdict})
    write_manifest(manifest, out)
    for a, sup, status in zip(report.alphas, report.monitor_sup, report.statuses):
        print(f"  alpha={a:<10g} monitor_sup={sup:.6e} {status}")
    print(f"verdict: {report.verdict} (heuristic evidence, not proof)")
    return EXIT_INSTABILITY if diverged else EXIT_OK


def cmd_oracle(args):
    rows = equivalence_suite(seeds=args.seeds)
    for row in rows:
        print(row.line())
    ok = all_passed(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        table = [{"name": r.name, "N": r.N, "value": r.value, "tol": r.tol, "passed": r.passed} for r in rows]
        write_json({"passed": ok, "checks": table}, os.path.join(args.out, "oracle_check.json"))
    print("all comparisons pass" if ok else "ORACLE MISMATCH")
    return EXIT_OK if ok else EXIT_INSTABILITY


def cmd_info(args):
    cfg = _config(args)
    print(json.dumps(cfg.echo(), indent=2, sort_keys=True))
    print(f"system: {cfg.params.system}")
    print(f"regime: {cfg.params.regime()}")
    for w in cfg.warnings:
        print(f"warning: {w}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "convergence": cmd_convergence,
    "viscosity-limit": cmd_viscosity,
    "blowup": cmd_blowup,
    "oracle-check": cmd_oracle,
    "info": cmd_info,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors with status 2, which means instability here
        return EXIT_VALIDATION if exc.code == 2 else exc.code
    setup_logging()
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ConfigParseError) as exc:
        errors = getattr(exc, "errors", [str(exc)])
        print("configuration error:", file=sys.stderr)
        for e in errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (OSError, FormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
