"""Command line surface: ``spg scrub|classify|simulate|audit|registry-dump``.

Exit codes: 0 ok, 2 input or config error, 3 privacy rejected, 4 audit findings.
JSON goes to standard output; logs and error names go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import PrivacyRejected, SpgError
from .leak_audit import audit_report, audit_scenario
from .privacy_registry import PrivacyScope, Protocol, classify, registry_dump
from .scenario import export_transcript, load_transcript, preset_case, run_config
from .sip_message import parse_sip, serialize_sip
from .user_privacy import ScrubPolicy, scrub_message

logger = logging.getLogger('spg')

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REJECTED = 3
EXIT_FINDINGS = 4

FINDINGS_FILE = 'findings.json'
OUTCOME_FILE = 'outcome.json'


def _emit(data, out=None):
    out = out or sys.stdout
    out.write(json.dumps(data, indent=2, sort_keys=True) + '\n')


def _fail(error):
    sys.stderr.write('{}: {}\n'.format(type(error).__name__, error))


def _load_config(args):
    if args.preset is not None:
        config = preset_case(args.preset)
    else:
        with open(args.config) as f:
            config = json.load(f)
    if getattr(args, 'mode', None):
        config['mode'] = args.mode
    if getattr(args, 'key', None):
        config['key'] = args.key
    if getattr(args, 'seed', None) is not None:
        config['seed'] = args.seed
    return config


def cmd_scrub(args):
    with open(args.input, 'rb') as f:
        message = parse_sip(f.read())
    policy = ScrubPolicy(PrivacyScope.parse(args.scope), seed=args.seed)
    scrubbed, report = scrub_message(message, policy)
    data = serialize_sip(scrubbed)
    if args.out:
        with open(args.out, 'wb') as f:
            f.write(data)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_classify(args):
    _emit(classify(Protocol(args.protocol), args.field).to_dict())
    return EXIT_OK


def cmd_registry_dump(args):
    _emit(registry_dump())
    return EXIT_OK


def _write_json(path, data):
    with open(path, 'w') as f:
        _emit(data, f)


def cmd_simulate(args):
    config = _load_config(args)
    transcript = run_config(config)
    findings = audit_scenario(config, transcript)
    report = audit_report(findings)
    outcomes = [outcome.to_dict() for outcome in transcript.outcomes]
    if args.out:
        export_transcript(transcript, args.out)
        _write_json(os.path.join(args.out, FINDINGS_FILE), report['findings'])
        _write_json(os.path.join(args.out, OUTCOME_FILE), outcomes)
    _emit({'scenario': config.get('name', ''), 'messages': len(transcript),
           'outcomes': outcomes, 'audit': report})
    if any(outcome.rejected for outcome in transcript.outcomes):
        sys.stderr.write('{}: call rejected\n'.format(PrivacyRejected.__name__))
        return EXIT_REJECTED
    if findings and not args.allow_findings:
        return EXIT_FINDINGS
    if not all(outcome.completed for outcome in transcript.outcomes):
        sys.stderr.write('call did not complete\n')
        return EXIT_INPUT
    return EXIT_OK


def cmd_audit(args):
    config = _load_config(args)
    transcript = load_transcript(args.transcript)
    report = audit_report(audit_scenario(config, transcript))
    _emit(report)
    if report['count'] and not args.allow_findings:
        return EXIT_FINDINGS
    return EXIT_OK


def _add_config_options(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', help='scenario config JSON file')
    source.add_argument('--preset', type=int, choices=(1, 2, 3),
                        help='built-in privacy case instead of a config file')
    parser.add_argument('--allow-findings', action='store_true',
                        help='exit 0 even when the audit reports findings')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='spg', description='SIP privacy toolkit and peering simulator',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    commands = parser.add_subparsers(dest='command', required=True)

    scrub = commands.add_parser('scrub', help='scrub a SIP message file')
    scrub.add_argument('input', help='raw SIP message')
    scrub.add_argument('--scope', default='u', help='u, p or up')
    scrub.add_argument('--seed', type=int, default=0, help='token generator seed')
    scrub.add_argument('--out', help='where to write the scrubbed message')
    scrub.set_defaults(func=cmd_scrub)

    field = commands.add_parser('classify', help='privacy class of a field')
    field.add_argument('field', help='field name, e.g. Via or CNAME')
    field.add_argument('--protocol', default='SIP', choices=[p.value for p in Protocol])
    field.set_defaults(func=cmd_classify)

    simulate = commands.add_parser('simulate', help='run and audit a peering scenario')
    _add_config_options(simulate)
    simulate.add_argument('--mode', choices=('strip', 'encrypt', 'cache'),
                          help='VPP conceal mode, overriding the config')
    simulate.add_argument('--key', help='hex key for encrypt mode')
    simulate.add_argument('--seed', type=int, help='seed, overriding the config')
    simulate.add_argument('--out', help='directory for the transcript and findings')
    simulate.set_defaults(func=cmd_simulate)

    audit = commands.add_parser('audit', help='audit an exported transcript')
    audit.add_argument('transcript', help='transcript.jsonl or its directory')
    _add_config_options(audit)
    audit.set_defaults(func=cmd_audit)

    dump = commands.add_parser('registry-dump', help='print the privacy registry')
    dump.set_defaults(func=cmd_registry_dump)
    return parser


def configure_logging():
    level = os.environ.get('SPG_LOG', 'WARNING').upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


def main(args=None):
    configure_logging()
    parsed = build_parser().parse_args(args)
    try:
        return parsed.func(parsed)
    except SpgError as error:
        _fail(error)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError) as error:
        _fail(error)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
