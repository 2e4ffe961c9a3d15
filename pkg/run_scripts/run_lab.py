#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# =====================================
# @Time    : 2026/10/18
# @Author  : boundary-lab maintainers
# @FileName: run_lab.py
# =====================================

import argparse
import datetime
import json
import logging
import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), os.path.pardir))

from experiment import NAME2RUNNER, ExperimentConfig
from utils.misc import ConfigValidationError, InvalidArgumentError, InvalidParameterError, SolverBreakdownError

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

os.environ['TF_CPP_MIN_LOG_LEVEL'] = '3'
os.environ['OMP_NUM_THREADS'] = '1'

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_AUDIT = 4


def built_parser():
    parser = argparse.ArgumentParser(description='numerical lab for the boundary-reaction singular perturbation')
    parser.add_argument('subcommand', choices=sorted(NAME2RUNNER))
    parser.add_argument('--config', type=str, default=None)
    parser.add_argument('--out-dir', dest='out_dir', type=str, default=None)
    parser.add_argument('--s', type=float, default=None)
    parser.add_argument('--eps', type=float, default=None)
    parser.add_argument('--mass', type=float, default=None)
    parser.add_argument('--num-workers', dest='num_workers', type=int, default=None)
    parser.add_argument('--strict', action='store_true')
    return parser


def _default_out_dir(subcommand):
    time_now = datetime.datetime.now().strftime("%Y-%m-%d-%H-%M-%S")
    return os.path.join('..', 'results', subcommand, time_now)


def load_config(args):
    overrides = dict(s=args.s, eps=args.eps, mass=args.mass, num_workers=args.num_workers)
    if args.s is not None and args.subcommand in ('constants', 'symbol-check'):
        overrides['s_values'] = [args.s]
    return ExperimentConfig.from_sources(args.config, overrides).validate()


def run(argv=None):
    args = built_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigValidationError as e:
        for line in e.diagnostics:
            logger.error(line)
        return EXIT_VALIDATION
    except InvalidParameterError as e:
        logger.error(str(e))
        return EXIT_VALIDATION

    out_dir = args.out_dir if args.out_dir is not None else _default_out_dir(args.subcommand)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, 'config.json'), 'w', encoding='utf-8') as f:
        json.dump(dict(subcommand=args.subcommand, strict=args.strict, **config.to_dict()), f,
                  ensure_ascii=False, indent=4, sort_keys=True)
    logger.info('running {} with parameter {}'.format(args.subcommand, config))

    runner = NAME2RUNNER[args.subcommand](config, out_dir)
    try:
        runner.run()
    except (InvalidParameterError, InvalidArgumentError) as e:
        logger.error('{} rejected its input: {}'.format(args.subcommand, e))
        runner.summary['error'] = str(e)
        runner.write_summary()
        return EXIT_VALIDATION
    except SolverBreakdownError as e:
        logger.error('{} failed in the solver: {}'.format(args.subcommand, e))
        runner.summary['error'] = str(e)
        report = getattr(e, 'report', None)
        runner.summary['failed_solve_report'] = report.to_dict() if hasattr(report, 'to_dict') else report
        runner.summary['failed_step'] = getattr(e, 'step', None)
        runner.write_summary()
        return EXIT_SOLVER
    runner.write_summary()
    if runner.audit_failures:
        for failure in runner.audit_failures:
            logger.warning('audit: {}'.format(failure))
        if args.strict:
            return EXIT_AUDIT
    logger.info('{} finished, artifacts in {}'.format(args.subcommand, out_dir))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
