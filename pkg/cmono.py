# cmono.py
"""
cmono: complete-monotonicity toolkit for Gamma/digamma families

    cmono.py certify "exp(-sqrt(x)) on (0,inf)"
    cmono.py test "gammalogratio a=2 b=0 c=1 d=0"
    cmono.py classify "psi-gap a=0 b=0.5 alpha=1 beta=0.5"
    cmono.py alpha0 --format csv
    cmono.py asymcheck

Exit codes: 0 PASS / CM / LCM / certified, 2 FAIL with witness / NOT,
3 INCONCLUSIVE / UNKNOWN / no rule applies, 1 errors.
"""
import argparse
import sys
import time

from config.settings import (ALPHA0_BISECT_TOL, ALPHA0_GRID_SIZE, ALPHA0_ORDER, ALPHA0_SWEEP_A,
                             ALPHA0_SWEEP_OFFSETS, ASYMCHECK_GAP, ASYMCHECK_POINTS, ASYMCHECK_SHIFT,
                             LOG_LEVELS, OUTPUT_FORMATS, get_run_config, load_env)
from models.expr import validity
from models.family import CM, LCM, NOT
from models.report import FAIL, INCONCLUSIVE, MODES, PASS
from services import alpha0, asymptotics, certifier, families, reports, testers
from services.parser import FamilyFileParser, parse, parse_family_spec, parse_interval
from utils.errors import Alpha0Aborted, CmonoError, ParseError
from utils.logger import setup_logger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3

CLASS_EXIT = {CM: EXIT_OK, LCM: EXIT_OK, NOT: EXIT_FAIL}
SIGN_EXIT = {PASS: EXIT_OK, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}


def split_target(text):
    """(expr, interval) from an expression or a family spec, each with an optional "on I" suffix"""
    head, sep, tail = text.partition(' on ')
    words = head.split()
    if words and families.normalize_name(words[0]) in families.FAMILY_NAMES and '(' not in words[0]:
        name, params = parse_family_spec(head)
        e = families.build_family(name, params)
        interval = parse_interval(tail) if sep else families.family_interval(families.family_of(e))
        return e, interval
    e, interval = parse(text)
    return e, interval or validity(e)


def cmd_certify(args, config, logger):
    e, interval = parse(args.target)
    certificate = certifier.certify(e, interval)
    emit('certify', {'certificate': certificate}, config)
    return EXIT_OK if certificate.certified else EXIT_INCONCLUSIVE


def cmd_test(args, config, logger):
    e, interval = split_target(args.target)
    report = testers.sign_test(e, interval, config.order, config.grid_size, config.tol, args.mode,
                               config.precision, config.workers)
    sections = {'report': report}
    status = report.verdict.status
    if status == PASS:
        sections['strictness'] = testers.strictness_margins(report)
    elif status == FAIL:
        witness = testers.witness_search(e, interval, config.order, args.budget, args.mode, config.precision)
        sections['witness'] = witness
        if not witness.found:
            logger.warning("Grid FAIL did not survive re-confirmation at doubled precision")
            status = INCONCLUSIVE
    emit('test', sections, config)
    return SIGN_EXIT[status]


def _classify_one(name, params, interval):
    p = families.make_family(name, params)
    return p, families.classify_family(p, interval)


def cmd_classify(args, config, logger):
    if args.file:
        rows = []
        for index, record in enumerate(FamilyFileParser(args.file).parse()):
            try:
                p, verdict = _classify_one(record['family'], record['params'], record['interval'])
            except (CmonoError, KeyError, ValueError) as e:
                logger.warning(f"Record {index}: {e}")
                continue
            rows.append({'index': index, 'family': str(p), 'interval': str(record['interval'] or ''),
                         **verdict.to_dict()})
        emit('classify', {'verdicts': rows}, config)
        statuses = [row['status'] for row in rows]
        if any(status == NOT for status in statuses):
            return EXIT_FAIL
        return EXIT_OK if all(status in (CM, LCM) for status in statuses) else EXIT_INCONCLUSIVE

    if not args.target:
        raise ParseError("classify needs a family spec or --file", 0, '')
    head, sep, tail = args.target.partition(' on ')
    name, params = parse_family_spec(head)
    p, verdict = _classify_one(name, params, parse_interval(tail) if sep else None)
    emit('classify', {'verdict': verdict, 'family': str(p)}, config)
    return CLASS_EXIT.get(verdict.status, EXIT_INCONCLUSIVE)


def cmd_alpha0(args, config, logger):
    order = args.alpha0_order or ALPHA0_ORDER
    precision = config.precision_bits
    if args.a is not None and args.b is not None:
        try:
            estimate = alpha0.estimate_alpha0(args.a, args.b, order, args.bisect_tol, precision,
                                              args.alpha0_grid, config.workers)
        except Alpha0Aborted as e:
            logger.warning(f"alpha0 a={args.a}, b={args.b} aborted: {e}")
            estimate = alpha0.aborted_estimate(args.a, args.b, order, precision, e)
        emit('alpha0', {'estimates': [estimate]}, config)
        return EXIT_INCONCLUSIVE if estimate.status == alpha0.ABORTED else EXIT_OK
    rows = alpha0.sweep_alpha0(args.sweep_a, args.sweep_offsets, order, args.bisect_tol, precision,
                               args.alpha0_grid, config.workers)
    emit('alpha0', {'estimates': rows}, config)
    return EXIT_INCONCLUSIVE if any(row.status == alpha0.ABORTED for row in rows) else EXIT_OK


def cmd_asymcheck(args, config, logger):
    fits = asymptotics.asymptotic_checks(shift=args.shift, gap=tuple(args.gap), points=args.points,
                                         threads=config.workers)
    emit('asymcheck', {'fits': fits}, config)
    return EXIT_OK if all(fit.status == PASS for fit in fits) else EXIT_FAIL


def emit(kind, sections, config):
    text = reports.render(kind, sections, config.output_format, config.timestamp, config)
    reports.write_report(text, config.output_path)


def build_parser():
    parser = argparse.ArgumentParser(description='Complete-monotonicity toolkit for Gamma/digamma families')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--precision', type=int, help='Working precision P in bits (default max(64, 8N))')
    common.add_argument('--order', type=int, help='Highest derivative order N')
    common.add_argument('--grid', type=int, help='Geometric grid points')
    common.add_argument('--tol', type=float, help='Base sign tolerance (default 2^(-P/2))')
    common.add_argument('--format', choices=OUTPUT_FORMATS, help='Report format')
    common.add_argument('--out', help='Report file (default stdout)')
    common.add_argument('--threads', type=int, help='Worker processes (default: CPU count)')
    common.add_argument('--seed', type=int, help='Seed recorded in the report envelope')
    common.add_argument('--no-timestamp', action='store_true', help='Omit the timestamp from JSON reports')
    common.add_argument('--config', help='key=value config file')
    common.add_argument('--log-level', choices=LOG_LEVELS, help='Set logging level')
    common.add_argument('--log-file', help='Also log to this file inside logs/')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('certify', parents=[common], help='Derive a monotonicity certificate')
    p.add_argument('target', help='Expression with optional "on (lo, hi)"')
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser('test', parents=[common], help='Grid sign test with witness search')
    p.add_argument('target', help='Expression or family spec, with optional "on (lo, hi)"')
    p.add_argument('--mode', choices=MODES, default='CM')
    p.add_argument('--budget', type=int, default=testers.DEFAULT_WITNESS_BUDGET, help='Witness search budget')
    p.set_defaults(handler=cmd_test)

    p = sub.add_parser('classify', parents=[common], help='Classify a family instance')
    p.add_argument('target', nargs='?', help='Family spec such as "psi-gap a=0 b=0.5 alpha=1 beta=0.5"')
    p.add_argument('--file', help='JSON file of {family, params, interval} records')
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser('alpha0', parents=[common], help='Bracket the largest passing alpha empirically')
    p.add_argument('--a', help='Single cell: a')
    p.add_argument('--b', help='Single cell: b')
    p.add_argument('--sweep-a', nargs='+', default=list(ALPHA0_SWEEP_A))
    p.add_argument('--sweep-offsets', nargs='+', default=list(ALPHA0_SWEEP_OFFSETS), help='Values of b - a')
    p.add_argument('--bisect-tol', default=ALPHA0_BISECT_TOL)
    p.add_argument('--alpha0-order', type=int, help=f'Probe order (default {ALPHA0_ORDER})')
    p.add_argument('--alpha0-grid', type=int, default=ALPHA0_GRID_SIZE, help='Probe grid points')
    p.set_defaults(handler=cmd_alpha0)

    p = sub.add_parser('asymcheck', parents=[common], help='Fit truncation-error slopes of the expansions')
    p.add_argument('--shift', default=ASYMCHECK_SHIFT, help='a in psi(x+a)')
    p.add_argument('--gap', nargs=2, default=list(ASYMCHECK_GAP), metavar=('A', 'B'))
    p.add_argument('--points', type=int, default=ASYMCHECK_POINTS)
    p.set_defaults(handler=cmd_asymcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    load_env()
    overrides = {
        'precision_bits': args.precision,
        'order': args.order,
        'grid_size': args.grid,
        'tol': args.tol,
        'output_format': args.format,
        'output_path': args.out,
        'threads': args.threads,
        'seed': args.seed,
        'timestamp': False if args.no_timestamp else None,
        'log_level': args.log_level,
    }

    try:
        config = get_run_config(args.config, overrides)
    except CmonoError as e:
        setup_logger(args.log_level or 'INFO')
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    logger = setup_logger(config.log_level, args.log_file)
    logger.info(f"Starting {args.command}")
    start_time = time.time()

    try:
        code = args.handler(args, config, logger)
    except ParseError as e:
        logger.debug("Parse failure", exc_info=True)
        print(f"error: {e.reason} at position {e.position}", file=sys.stderr)
        if e.text:
            print(e.pointer(), file=sys.stderr)
        return EXIT_ERROR
    except (CmonoError, OSError, KeyError, ValueError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR

    logger.info(f"{args.command} finished in {time.time() - start_time:.2f} seconds with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
