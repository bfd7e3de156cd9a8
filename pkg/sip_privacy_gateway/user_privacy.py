"""User-side privacy functions: removal and anonymization of sensitive fields.

These run at a user agent, or at a network privacy service acting on the
user's behalf. Random values come from a keyed generator seeded by the
policy, so the same message and seed always give the same bytes.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import string
from dataclasses import dataclass, field, replace

from .privacy_registry import (
    PrivacyScope,
    Protocol,
    removable_fields,
    routing_critical_fields,
)
from .rtcp_sdes import RtcpSdesPacket, SdesItem, SdesItemType
from .sdp import serialize_sdp
from .sip_message import (
    check_invariants,
    parse_address,
    parse_uri,
    serialize_address,
    split_entries,
)

logger = logging.getLogger(__name__)

ANONYMOUS_DISPLAY = 'Anonymous'
ANONYMOUS_HOST = 'anonymous.invalid'
ANONYMOUS_USER = 'anonymous'
TOKEN_ALPHABET = string.ascii_lowercase + string.digits
MIN_TOKEN_LENGTH = 16

_SDP_LETTERS = {'Email': 'e', 'Phone': 'p', 'Information': 'i', 'URI': 'u'}


@dataclass(frozen=True)
class ScrubPolicy:
    scope: PrivacyScope
    seed: int = 0
    token_length: int = 24

    def __post_init__(self):
        if self.token_length < MIN_TOKEN_LENGTH:
            raise ValueError('token_length must be at least {}'.format(MIN_TOKEN_LENGTH))

    def token(self, *context):
        """Random-looking lowercase alphanumeric token, fixed by seed and context."""
        key = (self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, 'big')
        message = '\x1f'.join(context).encode('utf-8')
        out = []
        counter = 0
        while len(out) < self.token_length:
            digest = hmac.new(key, counter.to_bytes(4, 'big') + message, hashlib.sha256).digest()
            out.extend(TOKEN_ALPHABET[b % len(TOKEN_ALPHABET)] for b in digest)
            counter += 1
        return ''.join(out[:self.token_length])


@dataclass
class ScrubReport:
    removed: list = field(default_factory=list)
    anonymized: list = field(default_factory=list)
    untouched_sensitive: list = field(default_factory=list)

    @property
    def empty(self):
        return not self.removed and not self.anonymized

    def to_dict(self):
        return {
            'removed': list(self.removed),
            'anonymized': [
                {'field': name, 'before': before, 'after': after}
                for name, before, after in self.anonymized],
            'untouched_sensitive': list(self.untouched_sensitive),
        }


def _anonymize_call_id(value, policy):
    local, at, _host = value.partition('@')
    if not at:
        return value
    return '{}@{}'.format(local, policy.token('call-id', local))


def _anonymize_call_id_list(value, policy):
    return ', '.join(_anonymize_call_id(v.strip(), policy) for v in value.split(','))


def _rewrite_entries(value, func):
    return ', '.join(func(parse_address(entry)) for entry in split_entries(value))


def _hide_provider_in_uri(uri):
    if uri.is_tel:
        return uri.without_params('phone-context')
    if uri.host == ANONYMOUS_HOST and uri.port is None:
        return uri
    return replace(uri, host=ANONYMOUS_HOST, port=None).without_params('maddr')


def _anonymous_address(address):
    return replace(address, uri=parse_uri('sip:{}@{}'.format(ANONYMOUS_USER, ANONYMOUS_HOST)),
                   display_name=ANONYMOUS_DISPLAY, quoted=True, bracketed=True)


def _anonymous_display(address):
    if not address.display_name:
        return address
    return replace(address, display_name=ANONYMOUS_DISPLAY, quoted=True)


def _user_rules(policy):
    return {
        'Call-ID': lambda v: _anonymize_call_id(v.strip(), policy),
        'In-Reply-To': lambda v: _anonymize_call_id_list(v, policy),
        'From': lambda v: _rewrite_entries(v, lambda a: serialize_address(_anonymous_address(a))),
        'Reply-To': lambda v: _rewrite_entries(
            v, lambda a: serialize_address(_anonymous_address(a))),
        'To': lambda v: _rewrite_entries(v, lambda a: serialize_address(_anonymous_display(a))),
        'Contact': lambda v: v if v.strip() == '*' else _rewrite_entries(
            v, lambda a: serialize_address(_anonymous_display(a))),
    }


def _provider_rules(policy):
    def hide(address):
        return serialize_address(replace(address, uri=_hide_provider_in_uri(address.uri)))

    def hide_tel_only(address):
        if not address.uri.is_tel:
            return serialize_address(address)
        return hide(address)

    return {
        'Call-ID': lambda v: _anonymize_call_id(v.strip(), policy),
        'In-Reply-To': lambda v: _anonymize_call_id_list(v, policy),
        'From': lambda v: _rewrite_entries(v, hide),
        'Reply-To': lambda v: _rewrite_entries(v, hide),
        'To': lambda v: _rewrite_entries(v, hide_tel_only),
    }


def _apply_rules(message, rules):
    changes = []
    headers = []
    for header in message.headers:
        rule = rules.get(header.canonical)
        if rule is not None:
            after = rule(header.value)
            if after != header.value:
                changes.append((header.canonical, header.value, after))
                header = header.with_value(after)
        headers.append(header)
    if not changes:
        return message, changes
    return message.with_headers(headers), changes


def anonymize_user_fields(message, policy):
    """Hide the user: From becomes anonymous, display names become "Anonymous".

    Call-ID and In-Reply-To host parts are replaced by tokens; tags and the
    To URI are kept.
    """
    return _apply_rules(message, _user_rules(policy))[0]


def anonymize_provider_fields(message, policy):
    """Hide the provider: From/Reply-To hosts become anonymous.invalid, user parts stay."""
    return _apply_rules(message, _provider_rules(policy))[0]


def remove_fields(message, scope):
    removable = removable_fields(scope)
    removed = []
    for header in message.headers:
        if header.canonical in removable and header.canonical not in removed:
            removed.append(header.canonical)
    return message.without_headers(*removed), removed


def scrub_sdp(sdp, policy):
    letters = [_SDP_LETTERS[name] for name in sorted(removable_fields(policy.scope, Protocol.SDP))
               if name in _SDP_LETTERS]
    scrubbed = sdp.without(*letters)
    if policy.scope.includes_user:
        origin = scrubbed.origin
        if origin is not None and origin.username != '-':
            scrubbed = scrubbed.with_origin(username='-')
        if scrubbed.session_name not in (None, '-'):
            scrubbed = scrubbed.with_session_name('-')
    return scrubbed


def _scrub_cname(cname, ssrc, policy):
    context = '{:08x}'.format(ssrc)
    user, at, host = cname.rpartition('@')
    if not at:
        user, host = None, cname
    host = policy.token('cname-host', context)
    if user is None:
        return host
    if policy.scope.includes_user:
        user = policy.token('cname-user', context)
    return '{}@{}'.format(user, host)


def scrub_sdes(packet, policy):
    removable = removable_fields(policy.scope, Protocol.SDES)
    items = []
    for item in packet.items:
        if item.item_type.name in removable:
            continue
        if item.item_type == SdesItemType.CNAME:
            item = SdesItem(item.item_type, _scrub_cname(item.text, packet.ssrc, policy))
        items.append(item)
    return RtcpSdesPacket(ssrc=packet.ssrc, items=tuple(items))


def preserve_opaque_body(message, source=None):
    """Return `message` carrying the opaque body of `source` (or its own) unchanged."""
    origin = source if source is not None else message
    if origin.opaque_body is None or message.opaque_body is origin.opaque_body:
        return message
    return message.with_opaque_body(origin.opaque_body)


def scrub_message(message, policy):
    """Remove and anonymize the sensitive fields of `message` at the policy scope.

    Routing headers (Via, Route, Record-Route, Contact URIs) are left for
    network privacy and reported as untouched.
    """
    report = ScrubReport()
    scrubbed, report.removed = remove_fields(message, policy.scope)
    if policy.scope.includes_user:
        scrubbed, changes = _apply_rules(scrubbed, _user_rules(policy))
        report.anonymized.extend(changes)
    if policy.scope.includes_provider:
        scrubbed, changes = _apply_rules(scrubbed, _provider_rules(policy))
        report.anonymized.extend(changes)
    if scrubbed.sdp is not None:
        sdp = scrub_sdp(scrubbed.sdp, policy)
        if sdp != scrubbed.sdp:
            report.anonymized.append(
                ('SDP', serialize_sdp(scrubbed.sdp), serialize_sdp(sdp)))
            scrubbed = scrubbed.with_sdp(sdp)
    scrubbed = preserve_opaque_body(scrubbed, message)
    report.untouched_sensitive = [
        name for name in routing_critical_fields() if scrubbed.has(name)]
    check_invariants(scrubbed)
    if report.removed or report.anonymized:
        logger.debug('scrubbed %s at scope %s: removed %s', message.cseq_method,
                     policy.scope.value, ', '.join(report.removed) or '-')
    return scrubbed, report
