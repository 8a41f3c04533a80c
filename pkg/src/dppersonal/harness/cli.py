"""Command line entry point.

Exit codes: 0 success, 1 config error, 2 invariant or bound violation,
3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from dppersonal import privacy
from dppersonal.harness import io, runner
from dppersonal.harness.config import ConfigError, ExperimentConfig, load_config
from dppersonal.harness.lemmas import run_lemma_suite
from dppersonal.harness.sweep import run_separation_sweep

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_IO = 0, 1, 2, 3
SLOPE_REL_TOL = 0.10

logger = logging.getLogger("dppersonal")


def _common(p: argparse.ArgumentParser, config_required: bool):
    p.add_argument("--config", required=config_required, help="JSON or TOML config file")
    p.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    p.add_argument("--out", help="write per-trial records (or the full report) here")
    p.add_argument("--format", choices=io.FORMATS, default="csv", help="record format")
    p.add_argument("--parallelism", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dppersonal", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run one experiment"), True)
    _common(sub.add_parser("sweep", help="four-framework sweep over the config's axes"), True)
    _common(sub.add_parser("lemmas", help="fingerprinting and privacy verification"), False)
    _common(sub.add_parser("attack", help="membership-inference experiment"), True)
    conv = sub.add_parser("convert", help="zCDP <-> (eps, delta) conversion")
    _common(conv, False)
    conv.add_argument("--rho", type=float)
    conv.add_argument("--epsilon", type=float)
    conv.add_argument("--delta", type=float)
    return parser


def _load(args) -> ExperimentConfig:
    return load_config(args.config, {"seed": args.seed, "trials": args.trials})


def _print(obj):
    sys.stdout.write(io.dumps(obj) + "\n")


def cmd_run(args) -> int:
    config = runner.prepare(_load(args))
    losses, refs = [], []

    def records():
        for rec in runner.iter_trial_records(config, args.parallelism):
            losses.append(rec.loss)
            if rec.reference_loss is not None:
                refs.append(rec.reference_loss)
            yield rec

    if args.out:
        io.emit_results(records(), args.out, args.format, config)
    else:
        for _ in records():
            pass
    report = runner.aggregate(config, losses, refs if config.is_meta else None)
    _print(report.to_dict())
    return EXIT_OK if report.bound_satisfied else EXIT_VIOLATION


def cmd_sweep(args) -> int:
    config = _load(args)
    axes = config.sweep or {}
    if "d" not in axes:
        raise ConfigError("sweep configs need a 'd' axis under [sweep]")
    writer = io.ResultWriter(args.out, args.format) if args.out else None
    try:
        sink = (lambda pair: writer.write(pair)) if writer else None
        result = run_separation_sweep(config, axes["d"], axes.get("t"), axes.get("rho"),
                                      parallelism=args.parallelism, sink=sink)
    finally:
        if writer:
            writer.close()
    slopes = []
    ok = result.ordering_holds
    for (fw, t, rho), fit in sorted(result.slopes.items()):
        if fit.expected > 0:
            passed = fit.relative_error <= SLOPE_REL_TOL
        else:
            passed = fit.consistent_with(0.0)
        ok = ok and passed
        slopes.append({"framework": fw, "t": t, "rho": rho, "slope": fit.slope, "se": fit.se,
                       "expected": fit.expected, "passed": passed})
    _print({"table": result.table(), "slopes": slopes,
            "ordering_violations": [list(v) for v in result.ordering_violations], "ok": ok})
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_lemmas(args) -> int:
    result = run_lemma_suite()
    summary = {"ok": result.ok, "fingerprint_checks": len(result.fingerprints),
               "privacy_checks": len(result.privacy),
               "failures": [f.to_dict() for f in result.failures()]}
    if args.out:
        io.write_json(result.to_dict(), args.out)
    _print(summary)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_attack(args) -> int:
    config = _load(args)
    report, records = runner.run_attack(config)
    if args.out:
        io.emit_results(records, args.out, args.format, config.resolved())
    out = report.to_dict()
    ok = True
    if report.dp_tpr_bound is not None:
        ok = report.tpr <= report.dp_tpr_bound + 3 * report.dp_bound_se
        lhs, rhs, se = report.statistic_dp_check()
        out["statistic_check"] = {"mean_in": lhs, "bound": rhs, "se": se,
                                  "passed": lhs <= rhs + 3 * se}
        ok = ok and out["statistic_check"]["passed"]
    out["passed"] = ok
    _print(out)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_convert(args) -> int:
    if args.config:
        cfg = _load(args)
        rho, eps, delta = cfg.rho, cfg.epsilon, cfg.delta
    else:
        rho, eps, delta = args.rho, args.epsilon, args.delta
    if delta is None or (rho is None) == (eps is None):
        raise ConfigError("give --delta and exactly one of --rho / --epsilon")
    try:
        if rho is not None:
            res = privacy.zcdp_to_approx_dp(rho, delta)
            _print({"rho": rho, "delta": delta, "epsilon": res.epsilon})
        else:
            res = privacy.approx_dp_to_zcdp(eps, delta)
            back = privacy.zcdp_to_approx_dp(res.rho, delta).epsilon
            _print({"epsilon": eps, "delta": delta, "rho": res.rho, "round_trip_epsilon": back})
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "lemmas": cmd_lemmas,
            "attack": cmd_attack, "convert": cmd_convert}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.parallelism < 1:
        logger.error("--parallelism must be positive")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
