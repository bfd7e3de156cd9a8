"""Registry of privacy-sensitive SIP, SDP and RTCP SDES fields.

Each field is classified by whose information it carries (user, provider or
both), what may be done with it (remove, anonymize, or nothing because it
routes the dialog) and what a proxy is allowed to do to it.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

from .sdp import FIELD_NAMES as SDP_FIELD_NAMES
from .sip_message import canonical_name


class Protocol(enum.Enum):
    SIP = 'SIP'
    SDP = 'SDP'
    SDES = 'RTCP-SDES'


class PrivacyScope(enum.Enum):
    USER = 'u'
    PROVIDER = 'p'
    BOTH = 'up'

    @property
    def includes_user(self):
        return self in (PrivacyScope.USER, PrivacyScope.BOTH)

    @property
    def includes_provider(self):
        return self in (PrivacyScope.PROVIDER, PrivacyScope.BOTH)

    def matches(self, query):
        """True if a field of this scope answers a query for `query`."""
        if query is PrivacyScope.BOTH or self is PrivacyScope.BOTH:
            return True
        return self is query

    @classmethod
    def parse(cls, text):
        lowered = text.strip().lower()
        aliases = {'user': cls.USER, 'u': cls.USER, 'provider': cls.PROVIDER,
                   'p': cls.PROVIDER, 'service-provider': cls.PROVIDER,
                   'both': cls.BOTH, 'up': cls.BOTH}
        if lowered not in aliases:
            raise ValueError('unknown privacy scope: {!r}'.format(text))
        return aliases[lowered]


class Disposition(enum.Enum):
    REMOVABLE = 'removable'
    ANONYMIZABLE = 'anonymizable'
    ROUTING_CRITICAL = 'routing-critical'


@dataclass(frozen=True)
class ProxyMutability:
    may_add: bool = False
    may_modify: bool = False
    may_delete: bool = False
    must_read: bool = False

    @classmethod
    def from_letters(cls, letters):
        return cls(may_add='a' in letters, may_modify='m' in letters,
                   may_delete='d' in letters, must_read='r' in letters)


@dataclass(frozen=True)
class FieldClass:
    protocol: Protocol
    field_name: str
    scope: PrivacyScope
    disposition: Disposition
    mutability: ProxyMutability = ProxyMutability()
    notes: str = ''
    sensitive = True

    def to_dict(self):
        return {
            'protocol': self.protocol.value,
            'field': self.field_name,
            'sensitive': True,
            'scope': self.scope.value,
            'disposition': self.disposition.value,
            'mutability': asdict(self.mutability),
            'notes': self.notes,
        }


@dataclass(frozen=True)
class NotSensitive:
    protocol: Protocol
    field_name: str
    sensitive = False

    def to_dict(self):
        return {'protocol': self.protocol.value, 'field': self.field_name, 'sensitive': False}


AUTH_EXEMPT = 'auth-exempt'
CONDITIONAL = 'scope depends on how the field is used'

U, P, UP = PrivacyScope.USER, PrivacyScope.PROVIDER, PrivacyScope.BOTH
REM, ANON, ROUTE = Disposition.REMOVABLE, Disposition.ANONYMIZABLE, Disposition.ROUTING_CRITICAL

# name, scope, disposition, proxy letters for requests, where,
# presence for ACK BYE CAN INV OPT REG, notes
_SIP_ROWS = (
    ('Alert-Info', P, REM, 'ar', 'R', '---o--', ''),
    ('Authorization', U, ANON, '', 'R', 'oooooo', AUTH_EXEMPT),
    ('Call-ID', UP, ANON, 'r', 'c', 'mmmmmm', 'host part anonymized'),
    ('Call-Info', P, REM, 'ar', '', '---ooo', ''),
    ('Contact', UP, ROUTE, '', 'R', 'o--moo', ''),
    ('Error-Info', P, REM, 'a', '300-699', '-ooooo', ''),
    ('From', UP, ANON, 'r', 'c', 'mmmmmm', 'tag preserved'),
    ('In-Reply-To', UP, REM, '', 'R', '---o--', ''),
    ('Organization', UP, REM, 'ar', '', '---ooo', CONDITIONAL),
    ('Proxy-Authenticate', P, ANON, 'ar', '407', '-m-mmm', AUTH_EXEMPT),
    ('Record-Route', P, ROUTE, 'ar', 'R', 'ooooo-', ''),
    ('Reply-To', UP, REM, '', '', '---o--', ''),
    ('Route', P, ROUTE, 'adr', 'R', 'cccccc', ''),
    ('Server', P, REM, '', 'r', '-ooooo', CONDITIONAL),
    ('Subject', U, REM, '', 'R', '---o--', CONDITIONAL),
    ('To', UP, ANON, 'r', 'c', 'mmmmmm', 'tag preserved'),
    ('User-Agent', P, REM, '', '', 'oooooo', CONDITIONAL),
    ('Via', P, ROUTE, 'amr', 'R', 'mmmmmm', ''),
    ('Warning', P, REM, 'r', 'r', '-ooooo', ''),
    ('WWW-Authenticate', P, ANON, 'ar', '401', '-m-mmm', AUTH_EXEMPT),
)

# Proxy-Authorization is auth data with mutability flags, but no privacy row.
_AUTH_ONLY = {'Proxy-Authorization': ('dr', 'R', 'oooooo')}

METHOD_COLUMNS = ('ACK', 'BYE', 'CANCEL', 'INVITE', 'OPTIONS', 'REGISTER')

_SDP_ROWS = (
    ('Origin', UP, ANON, 'username replaced; address handled by session privacy'),
    ('Session-name', U, ANON, ''),
    ('Information', U, REM, ''),
    ('URI', UP, REM, ''),
    ('Email', UP, REM, ''),
    ('Phone', U, REM, ''),
    ('Connection', UP, ROUTE, 'address handled by session privacy'),
)

_SDES_ROWS = (
    ('CNAME', UP, ANON, 'host part randomized'),
    ('NAME', U, REM, ''),
    ('EMAIL', UP, REM, ''),
    ('LOC', U, REM, ''),
    ('TOOL', P, REM, ''),
)

URI_PARAMETERS = (
    {'scheme': 'tel', 'parameter': 'phone-context', 'scope': P.value,
     'disposition': REM.value, 'notes': 'may name the service provider'},
)

REGISTRY_NOTES = (
    'provider-scoped fields may name different kinds of provider (access, voice, '
    'mail); the registry does not tell them apart and provider-scope scrubbing '
    'acts on all of them',
)


@dataclass(frozen=True)
class _HeaderRow:
    letters: str
    where: str
    presence: str


def _build():
    fields = {}
    header_rows = {}
    for name, scope, disposition, letters, where, presence, notes in _SIP_ROWS:
        fields[(Protocol.SIP, name.lower())] = FieldClass(
            Protocol.SIP, name, scope, disposition, ProxyMutability.from_letters(letters), notes)
        header_rows[name.lower()] = _HeaderRow(letters, where, presence)
    for name, (letters, where, presence) in _AUTH_ONLY.items():
        header_rows[name.lower()] = _HeaderRow(letters, where, presence)
    for name, scope, disposition, notes in _SDP_ROWS:
        fields[(Protocol.SDP, name.lower())] = FieldClass(
            Protocol.SDP, name, scope, disposition, ProxyMutability(), notes)
    for name, scope, disposition, notes in _SDES_ROWS:
        fields[(Protocol.SDES, name.lower())] = FieldClass(
            Protocol.SDES, name, scope, disposition, ProxyMutability(), notes)
    return fields, header_rows


_FIELDS, _HEADER_ROWS = _build()
_SDP_BY_LETTER = {letter: name for letter, name in SDP_FIELD_NAMES.items()}


def _lookup_name(protocol, field_name):
    name = field_name.strip()
    if protocol is Protocol.SIP:
        return canonical_name(name).lower()
    if protocol is Protocol.SDP:
        name = _SDP_BY_LETTER.get(name.rstrip('='), name)
    return name.lower()


def classify(protocol, field_name):
    """Return the FieldClass of a field, or NotSensitive for fields outside the tables."""
    protocol = Protocol(protocol) if not isinstance(protocol, Protocol) else protocol
    entry = _FIELDS.get((protocol, _lookup_name(protocol, field_name)))
    if entry is None:
        return NotSensitive(protocol, field_name.strip())
    return entry


def fields(protocol=None):
    """Registry entries in table order, optionally for one protocol."""
    return [f for f in _FIELDS.values() if protocol is None or f.protocol is protocol]


def removable_fields(scope, protocol=Protocol.SIP):
    """Names of removable fields whose markings answer a query for `scope`."""
    return {
        f.field_name for f in fields(protocol)
        if f.disposition is Disposition.REMOVABLE and f.scope.matches(scope)
    }


def routing_critical_fields(protocol=Protocol.SIP):
    """Fields a privacy function must leave for network privacy to handle."""
    return [f.field_name for f in fields(protocol)
            if f.disposition is Disposition.ROUTING_CRITICAL]


def is_auth_exempt(field_name):
    entry = classify(Protocol.SIP, field_name)
    return isinstance(entry, FieldClass) and entry.notes == AUTH_EXEMPT \
        or canonical_name(field_name) in _AUTH_ONLY


def header_presence(field_name, method):
    """Presence letter ('m', 'o', 'c', '-') of a header for a method, or None."""
    row = _HEADER_ROWS.get(canonical_name(field_name).lower())
    if row is None or method.upper() not in METHOD_COLUMNS:
        return None
    return row.presence[METHOD_COLUMNS.index(method.upper())]


def proxy_letters(field_name):
    """Proxy mutability letters of a header for requests, or None if it has no row."""
    row = _HEADER_ROWS.get(canonical_name(field_name).lower())
    return row.letters if row is not None else None


def requires_b2bua(field_name, operation):
    """True if a proxy may not perform `operation` ('add'|'modify'|'delete') on the field.

    Replacing entries of Via or Record-Route counts as modification and
    deletion at once, and neither is open to a proxy in requests.
    """
    letters = proxy_letters(field_name)
    if letters is None:
        return False
    flag = {'add': 'a', 'modify': 'm', 'delete': 'd'}[operation]
    if canonical_name(field_name) in ('Via', 'Record-Route') and operation in ('modify', 'delete'):
        return True
    return flag not in letters


def registry_dump():
    return {
        'fields': [f.to_dict() for f in _FIELDS.values()],
        'uri_parameters': [dict(p) for p in URI_PARAMETERS],
        'notes': list(REGISTRY_NOTES),
    }
