"""Transcript audit: finds protected identity tokens on links outside their trust boundary."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .errors import CodecError
from .rtcp_sdes import parse_sdes
from .sip_message import canonical_name
from .topology import build_topology, link_key

logger = logging.getLogger(__name__)

_CRLF = b'\r\n'


@dataclass(frozen=True)
class LeakFinding:
    index: int
    link: tuple
    token: str
    field: str
    domain: str
    offset: int = 0

    def to_dict(self):
        return {
            'index': self.index,
            'link': list(self.link),
            'token': self.token,
            'field': self.field,
            'domain': self.domain,
            'offset': self.offset,
        }


def _occurrences(data, needle):
    start = data.find(needle)
    while start >= 0:
        yield start
        start = data.find(needle, start + 1)


def _sip_field(data, offset):
    """Name of the part of a serialized SIP message holding byte `offset`."""
    head_end = data.find(_CRLF + _CRLF)
    if head_end < 0 or offset < head_end:
        line_start = data.rfind(_CRLF, 0, offset + 1)
        if line_start < 0:
            return 'start-line'
        # folded lines belong to the header above them
        while data[line_start + 2:line_start + 3] in (b' ', b'\t') and line_start > 0:
            line_start = data.rfind(_CRLF, 0, line_start)
            if line_start < 0:
                return 'start-line'
        line = data[line_start + 2:data.find(b':', line_start + 2)]
        return canonical_name(line.decode('utf-8', 'replace').strip())
    body_start = head_end + 4
    head = data[:head_end].lower()
    if offset < body_start:
        return 'body'
    if b'content-type: application/sdp' in head or b'\nc: application/sdp' in head:
        line_start = data.rfind(b'\n', body_start, offset + 1)
        line_start = body_start if line_start < 0 else line_start + 1
        letter = data[line_start:line_start + 1].decode('ascii', 'replace')
        return 'sdp:' + letter
    return 'body'


def _sdes_field(data, token):
    try:
        packet = parse_sdes(data)
    except CodecError:
        return 'sdes'
    for item in packet.items:
        if token in item.text:
            return 'sdes:' + item.item_type.name
    return 'sdes'


def _boundary_for(boundary, domain):
    if isinstance(boundary, dict):
        links = boundary.get(domain, ())
    else:
        links = boundary
    return {link_key(*link) for link in links}


def leak_audit(transcript, protected, boundary):
    """Report every protected token found on a link outside its boundary.

    Args:
        transcript: the recorded messages; every entry is scanned as bytes,
            so an encrypted token only matches if it carries plaintext.
        protected: mapping of a domain (or any label) to its sensitive tokens.
        boundary: the links those tokens may appear on, either one set for
            all domains or a mapping of domain to links.

    Returns:
        A list of LeakFinding in transcript order; empty when nothing leaked.
    """
    findings = []
    allowed = {domain: _boundary_for(boundary, domain) for domain in protected}
    for entry in transcript:
        for domain in sorted(protected):
            if entry.link in allowed[domain]:
                continue
            for token in sorted(set(protected[domain])):
                if not token:
                    continue
                for offset in _occurrences(entry.data, token.encode('utf-8')):
                    if entry.kind == 'sip':
                        field = _sip_field(entry.data, offset)
                    else:
                        field = _sdes_field(entry.data, token)
                    findings.append(LeakFinding(entry.index, entry.link, token, field, domain,
                                                offset))
    if findings:
        logger.warning('%d protected tokens found outside their boundary', len(findings))
    return findings


def config_audit(config):
    """(protected, boundary) of a scenario config.

    An explicit ``audit`` section wins; otherwise every VSP's domain and
    node hosts are protected everywhere but on its own and the VPP's links.
    """
    audit = config.get('audit')
    if audit:
        protected = {name: list(tokens) for name, tokens in audit['protected'].items()}
        boundary = audit['boundary']
        if not isinstance(boundary, dict):
            boundary = {name: boundary for name in protected}
        return protected, {name: [tuple(link) for link in links]
                           for name, links in boundary.items()}
    topology = build_topology(config)
    protected = {name: topology.protected_tokens(name) for name in topology.vsps}
    boundary = {name: sorted(topology.boundary(name)) for name in topology.vsps}
    return protected, boundary


def audit_scenario(config, transcript):
    protected, boundary = config_audit(config)
    return leak_audit(transcript, protected, boundary)


def audit_report(findings):
    """JSON-ready summary of a findings list."""
    return {
        'clean': not findings,
        'count': len(findings),
        'by_domain': dict(sorted(Counter(f.domain for f in findings).items())),
        'findings': [finding.to_dict() for finding in findings],
    }
