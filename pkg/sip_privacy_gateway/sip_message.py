"""SIP message model: parsing, serialization and field-level mutation.

Header lines keep their raw spelling, so a message that is parsed and
serialized without mutation comes back byte for byte. Mutation helpers
return new messages and only re-render the header lines they touch.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, replace
from typing import Optional

from .errors import (
    BodyLengthMismatch,
    CodecError,
    InvariantViolation,
    MalformedStartLine,
    MalformedUri,
    MissingMandatoryHeader,
)
from .sdp import SdpSession, parse_sdp, serialize_sdp

CRLF = '\r\n'
SIP_VERSION = 'SIP/2.0'

COMPACT_FORMS = {
    'c': 'Content-Type',
    'e': 'Content-Encoding',
    'f': 'From',
    'i': 'Call-ID',
    'k': 'Supported',
    'l': 'Content-Length',
    'm': 'Contact',
    's': 'Subject',
    't': 'To',
    'v': 'Via',
}

KNOWN_HEADERS = (
    'Accept', 'Alert-Info', 'Allow', 'Authorization', 'Call-ID', 'Call-Info',
    'Contact', 'Content-Disposition', 'Content-Encoding', 'Content-Length',
    'Content-Type', 'CSeq', 'Error-Info', 'Expires', 'From', 'In-Reply-To',
    'Max-Forwards', 'MIME-Version', 'Organization', 'P-Asserted-Identity',
    'P-Preferred-Identity', 'Privacy', 'Proxy-Authenticate',
    'Proxy-Authorization', 'Record-Route', 'Reply-To', 'Require', 'Route',
    'Server', 'Subject', 'Supported', 'To', 'User-Agent', 'Via', 'Warning',
    'WWW-Authenticate',
)
_CANONICAL = {name.lower(): name for name in KNOWN_HEADERS}

REQUEST_MANDATORY = ('Call-ID', 'From', 'To', 'Via', 'CSeq', 'Max-Forwards')
RESPONSE_MANDATORY = ('Call-ID', 'From', 'To', 'Via', 'CSeq')

SDP_CONTENT_TYPE = 'application/sdp'


def canonical_name(name):
    """Map a header name (any case, compact or long form) to its canonical spelling."""
    stripped = name.strip()
    lower = stripped.lower()
    if lower in COMPACT_FORMS:
        return COMPACT_FORMS[lower]
    return _CANONICAL.get(lower, stripped)


def same_header(a, b):
    return canonical_name(a).lower() == canonical_name(b).lower()


def split_entries(value):
    """Split a header value on commas that are outside quotes and angle brackets."""
    parts = []
    current = []
    depth = 0
    in_quotes = False
    escaped = False
    for ch in value:
        if escaped:
            escaped = False
        elif ch == '\\' and in_quotes:
            escaped = True
        elif ch == '"':
            in_quotes = not in_quotes
        elif ch == '<' and not in_quotes:
            depth += 1
        elif ch == '>' and not in_quotes:
            depth = max(0, depth - 1)
        elif ch == ',' and depth == 0 and not in_quotes:
            parts.append(''.join(current).strip())
            current = []
            continue
        current.append(ch)
    tail = ''.join(current).strip()
    if tail:
        parts.append(tail)
    return parts


def _split_params(text):
    """Split `;name=value` parameters keeping order, case and valueless names."""
    params = []
    for part in text.split(';'):
        name, sep, value = part.partition('=')
        params.append((name, value if sep else None))
    return tuple(params)


def _render_params(params):
    return ''.join(
        ';' + name if value is None else ';{}={}'.format(name, value)
        for name, value in params)


def get_param(params, name):
    for key, value in params:
        if key.strip().lower() == name.lower():
            return value if value is not None else ''
    return None


def set_param(params, name, value):
    """Return params with `name` set (appended when absent); value None means valueless."""
    out = []
    found = False
    for key, old in params:
        if key.strip().lower() == name.lower():
            if not found:
                out.append((key, value))
                found = True
            continue
        out.append((key, old))
    if not found:
        out.append((name, value))
    return tuple(out)


def drop_params(params, *names):
    lowered = {n.lower() for n in names}
    return tuple((k, v) for k, v in params if k.strip().lower() not in lowered)


@dataclass(frozen=True)
class SipUri:
    """A sip, sips or tel URI.

    Parameters and the header part are kept exactly as written so that
    ``serialize_uri(parse_uri(s)) == s``.
    """

    scheme: str
    user: Optional[str]
    host: str
    port: Optional[int] = None
    params: tuple = ()
    headers: Optional[str] = None

    def param(self, name):
        return get_param(self.params, name)

    def with_param(self, name, value):
        return replace(self, params=set_param(self.params, name, value))

    def without_params(self, *names):
        return replace(self, params=drop_params(self.params, *names))

    @property
    def is_tel(self):
        return self.scheme.lower() == 'tel'

    def __str__(self):
        return serialize_uri(self)


def _split_hostport(text):
    if text.startswith('['):
        end = text.find(']')
        if end == -1:
            raise MalformedUri('unterminated IPv6 reference: {!r}'.format(text))
        host, rest = text[:end + 1], text[end + 1:]
        if not rest:
            return host, None
        if not rest.startswith(':'):
            raise MalformedUri('garbage after IPv6 reference: {!r}'.format(text))
        port_text = rest[1:]
    elif ':' in text:
        host, _, port_text = text.rpartition(':')
    else:
        return text, None
    if not (port_text.isascii() and port_text.isdigit()) or str(int(port_text)) != port_text:
        raise MalformedUri('bad port in {!r}'.format(text))
    return host, int(port_text)


def parse_uri(text):
    scheme, sep, rest = text.partition(':')
    if not sep or scheme.lower() not in ('sip', 'sips', 'tel'):
        raise MalformedUri('unsupported URI: {!r}'.format(text))
    if scheme.lower() == 'tel':
        number, _, param_text = rest.partition(';')
        if not number:
            raise MalformedUri('empty tel number: {!r}'.format(text))
        params = _split_params(param_text) if ';' in rest else ()
        return SipUri(scheme=scheme, user=number, host='', params=params)
    headers = None
    if '?' in rest:
        rest, _, headers = rest.partition('?')
    user = None
    if '@' in rest:
        user, _, rest = rest.rpartition('@')
    hostport, semi, param_text = rest.partition(';')
    params = _split_params(param_text) if semi else ()
    host, port = _split_hostport(hostport)
    if not host:
        raise MalformedUri('empty host in {!r}'.format(text))
    return SipUri(scheme=scheme, user=user, host=host, port=port,
                  params=params, headers=headers)


def serialize_uri(uri):
    text = uri.scheme + ':'
    if uri.user is not None:
        text += uri.user
        if not uri.is_tel:
            text += '@'
    text += uri.host
    if uri.port is not None:
        text += ':{}'.format(uri.port)
    text += _render_params(uri.params)
    if uri.headers is not None:
        text += '?' + uri.headers
    return text


@dataclass(frozen=True)
class Address:
    """A name-addr (``"Bob" <sip:bob@host>;tag=x``) or addr-spec header entry."""

    uri: SipUri
    display_name: Optional[str] = None
    quoted: bool = True
    bracketed: bool = True
    params: tuple = ()

    @property
    def tag(self):
        return get_param(self.params, 'tag')

    def with_param(self, name, value):
        return replace(self, params=set_param(self.params, name, value))

    def without_params(self, *names):
        return replace(self, params=drop_params(self.params, *names))

    def with_display_name(self, name):
        return replace(self, display_name=name, quoted=True, bracketed=True)

    def __str__(self):
        return serialize_address(self)


def parse_address(text):
    text = text.strip()
    in_quotes = False
    lt = -1
    for i, ch in enumerate(text):
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == '<' and not in_quotes:
            lt = i
            break
    if lt == -1:
        uri_text, semi, param_text = text.partition(';')
        params = _split_params(param_text) if semi else ()
        return Address(uri=parse_uri(uri_text), bracketed=False, params=params)
    gt = text.find('>', lt)
    if gt == -1:
        raise MalformedUri('unterminated name-addr: {!r}'.format(text))
    display = text[:lt].strip()
    quoted = display.startswith('"') and display.endswith('"') and len(display) >= 2
    if quoted:
        display = display[1:-1]
    tail = text[gt + 1:]
    if tail and not tail.startswith(';'):
        raise MalformedUri('garbage after name-addr: {!r}'.format(text))
    params = _split_params(tail[1:]) if tail else ()
    return Address(uri=parse_uri(text[lt + 1:gt]), display_name=display or None,
                   quoted=quoted, bracketed=True, params=params)


def serialize_address(address):
    uri_text = serialize_uri(address.uri)
    if not address.bracketed:
        return uri_text + _render_params(address.params)
    if address.display_name:
        if address.quoted:
            head = '"{}" '.format(address.display_name)
        else:
            head = address.display_name + ' '
    else:
        head = ''
    return '{}<{}>{}'.format(head, uri_text, _render_params(address.params))


@dataclass(frozen=True)
class Via:
    protocol: str
    host: str
    port: Optional[int] = None
    params: tuple = ()

    @property
    def transport(self):
        return self.protocol.rpartition('/')[2]

    @property
    def branch(self):
        return get_param(self.params, 'branch')

    def param(self, name):
        return get_param(self.params, name)

    def __str__(self):
        return serialize_via(self)


def parse_via(text):
    text = text.strip()
    protocol, sep, rest = text.partition(' ')
    if not sep or protocol.count('/') != 2:
        raise MalformedUri('malformed Via: {!r}'.format(text))
    sent_by, semi, param_text = rest.strip().partition(';')
    params = _split_params(param_text) if semi else ()
    host, port = _split_hostport(sent_by.strip())
    if not host:
        raise MalformedUri('empty Via host: {!r}'.format(text))
    return Via(protocol=protocol, host=host, port=port, params=params)


def serialize_via(via):
    text = '{} {}'.format(via.protocol, via.host)
    if via.port is not None:
        text += ':{}'.format(via.port)
    return text + _render_params(via.params)


def entry_host(entry, name):
    """Host named by one Via/Route/Record-Route/Contact entry, or None if unparseable."""
    try:
        if same_header(name, 'Via'):
            return parse_via(entry).host
        return parse_address(entry).uri.host
    except CodecError:
        return None


def is_ip_literal(host):
    try:
        ipaddress.ip_address(host.strip('[]'))
    except ValueError:
        return False
    return True


ADDRESS_HEADERS = ('From', 'To', 'Contact', 'Reply-To', 'Route', 'Record-Route',
                   'P-Asserted-Identity', 'P-Preferred-Identity')


@dataclass(frozen=True)
class HeaderField:
    """One header line: raw name, the whitespace after the colon, and the raw value."""

    name: str
    value: str
    spacing: str = ' '

    @property
    def canonical(self):
        return canonical_name(self.name)

    def is_named(self, name):
        return same_header(self.name, name)

    def entries(self):
        return split_entries(self.value)

    def parsed(self):
        """Value parsed according to the header kind."""
        canonical = self.canonical
        if canonical == 'Via':
            return [parse_via(e) for e in self.entries()]
        if canonical in ADDRESS_HEADERS:
            if self.value.strip() == '*':
                return ['*']
            return [parse_address(e) for e in self.entries()]
        if canonical in ('Privacy', 'Supported', 'Require', 'Allow'):
            return [t.strip() for t in self.value.replace(';', ',').split(',') if t.strip()]
        return self.value.strip()

    def with_value(self, value):
        return replace(self, value=value)

    def render(self):
        return '{}:{}{}'.format(self.name, self.spacing, self.value)


@dataclass(frozen=True)
class OpaqueBody:
    """A body part the privacy functions never look into (stand-in for S/MIME)."""

    content_type: str
    data: bytes


@dataclass(frozen=True)
class SipMessage:
    """A parsed SIP request or response.

    Header order is the order of ``headers``; a message carries at most one
    of ``sdp`` and ``opaque_body``.
    """

    kind: str
    headers: tuple
    method: Optional[str] = None
    request_uri: Optional[str] = None
    status_code: Optional[int] = None
    reason: str = ''
    version: str = SIP_VERSION
    sdp: Optional[SdpSession] = None
    opaque_body: Optional[OpaqueBody] = None

    @property
    def is_request(self):
        return self.kind == 'request'

    @property
    def is_response(self):
        return self.kind == 'response'

    @property
    def start_line(self):
        if self.is_request:
            return '{} {} {}'.format(self.method, self.request_uri, self.version)
        if not self.reason:
            return '{} {}'.format(self.version, self.status_code)
        return '{} {} {}'.format(self.version, self.status_code, self.reason)

    @property
    def uri(self):
        return parse_uri(self.request_uri) if self.is_request else None

    @property
    def body(self):
        if self.sdp is not None:
            return serialize_sdp(self.sdp).encode('utf-8')
        if self.opaque_body is not None:
            return self.opaque_body.data
        return b''

    @property
    def cseq(self):
        value = self.value('CSeq')
        if value is None:
            return None, None
        number, _, method = value.partition(' ')
        try:
            return int(number), method.strip()
        except ValueError:
            raise InvariantViolation('malformed CSeq: {!r}'.format(value))

    @property
    def cseq_method(self):
        return self.cseq[1]

    @property
    def call_id(self):
        return self.value('Call-ID')

    # lookup

    def header(self, name):
        for header in self.headers:
            if header.is_named(name):
                return header
        return None

    def headers_named(self, name):
        return [h for h in self.headers if h.is_named(name)]

    def has(self, name):
        return self.header(name) is not None

    def value(self, name):
        header = self.header(name)
        return header.value.strip() if header is not None else None

    def entries(self, name):
        """All comma-separated entries of every `name` line, in message order."""
        out = []
        for header in self.headers_named(name):
            out.extend(header.entries())
        return out

    def address(self, name):
        value = self.value(name)
        return parse_address(value) if value is not None else None

    def vias(self):
        return [parse_via(e) for e in self.entries('Via')]

    # mutation, each returning a new message

    def with_headers(self, headers):
        return replace(self, headers=tuple(headers))

    def with_header_value(self, name, value):
        """Replace the first `name` line's value, appending a line if there is none."""
        headers = list(self.headers)
        for i, header in enumerate(headers):
            if header.is_named(name):
                if header.value == value:
                    return self
                headers[i] = header.with_value(value)
                return self.with_headers(headers)
        headers.append(HeaderField(canonical_name(name), value))
        return self.with_headers(headers)

    def without_headers(self, *names):
        kept = [h for h in self.headers if not any(h.is_named(n) for n in names)]
        if len(kept) == len(self.headers):
            return self
        return self.with_headers(kept)

    def insert_header(self, index, name, value):
        headers = list(self.headers)
        headers.insert(index, HeaderField(name, value))
        return self.with_headers(headers)

    def with_entries(self, name, entries):
        """Rewrite the `name` entries, one header line per entry.

        The lines go where the first `name` line was; if there was none they
        follow the last Via line (or open the header block for Via itself).
        Unchanged entry lists leave the message untouched.
        """
        entries = list(entries)
        if entries == self.entries(name):
            return self
        existing = self.headers_named(name)
        spelled = existing[0].name if existing else canonical_name(name)
        new_lines = [HeaderField(spelled, e) for e in entries]
        headers = []
        inserted = False
        for header in self.headers:
            if header.is_named(name):
                if not inserted:
                    headers.extend(new_lines)
                    inserted = True
                continue
            headers.append(header)
        if not inserted:
            index = 0
            if not same_header(name, 'Via'):
                for i, header in enumerate(headers):
                    if header.is_named('Via'):
                        index = i + 1
            headers[index:index] = new_lines
        return self.with_headers(headers)

    def with_request_uri(self, uri):
        return replace(self, request_uri=str(uri))

    def with_sdp(self, sdp):
        return replace(self, sdp=sdp)

    def with_opaque_body(self, body):
        return replace(self, opaque_body=body)


@dataclass(frozen=True)
class DialogKey:
    """Call-ID plus tags; the to-tag is unknown until the callee answers."""

    call_id: str
    from_tag: str
    to_tag: Optional[str] = None

    def unified(self, to_tag):
        return replace(self, to_tag=to_tag)

    def same_dialog(self, other):
        """True if both keys name the same dialog in either direction.

        A missing to-tag matches any to-tag (early dialog).
        """
        if self.call_id != other.call_id:
            return False
        if self.from_tag == other.from_tag:
            return self.to_tag is None or other.to_tag is None or self.to_tag == other.to_tag
        return (self.from_tag == other.to_tag
                and (self.to_tag is None or self.to_tag == other.from_tag))


def dialog_key(message):
    call_id = message.call_id
    if not call_id:
        raise MissingMandatoryHeader('Call-ID')
    from_address = _address_or_missing(message, 'From')
    if not from_address.tag:
        raise MissingMandatoryHeader('From;tag')
    to_tag = None
    if message.has('To'):
        to_tag = _address_or_missing(message, 'To').tag or None
    return DialogKey(call_id=call_id, from_tag=from_address.tag, to_tag=to_tag)


def _address_or_missing(message, name):
    value = message.value(name)
    if value is None:
        raise MissingMandatoryHeader(name)
    return parse_address(value)


def _mandatory(message):
    return REQUEST_MANDATORY if message.is_request else RESPONSE_MANDATORY


def _parse_start_line(line):
    if line.startswith('SIP/'):
        parts = line.split(' ', 2)
        if len(parts) < 2 or not parts[0].startswith('SIP/') \
                or len(parts[1]) != 3 or not parts[1].isdigit():
            raise MalformedStartLine(line)
        return dict(kind='response', version=parts[0], status_code=int(parts[1]),
                    reason=parts[2] if len(parts) == 3 else '')
    parts = line.split(' ')
    if len(parts) != 3 or not all(parts) or not parts[2].startswith('SIP/') \
            or not parts[0].isalpha():
        raise MalformedStartLine(line)
    return dict(kind='request', method=parts[0], request_uri=parts[1], version=parts[2])


def _content_type(headers):
    for header in headers:
        if header.is_named('Content-Type'):
            return header.value.strip()
    return None


def parse_sip(data):
    """Parse raw SIP bytes into a :class:`SipMessage`.

    Folded header lines are accepted and unfolded.
    """
    if isinstance(data, str):
        data = data.encode('utf-8')
    head, sep, body = data.partition(b'\r\n\r\n')
    eol = '\r\n'
    if not sep:
        head, sep, body = data.partition(b'\n\n')
        eol = '\n'
        if not sep:
            head, body = data, b''
    try:
        text = head.decode('utf-8')
    except UnicodeDecodeError:
        raise MalformedStartLine(repr(head[:40]))
    if eol == '\n' and '\r\n' in text:
        eol = '\r\n'
    lines = text.split(eol)
    if not lines or not lines[0].strip():
        raise MalformedStartLine(lines[0] if lines else '')
    start = _parse_start_line(lines[0])

    headers = []
    for line in lines[1:]:
        if not line:
            continue
        if line[0] in ' \t':
            if not headers:
                raise MalformedStartLine(line)
            last = headers[-1]
            headers[-1] = last.with_value(last.value.rstrip() + ' ' + line.strip())
            continue
        name, colon, rest = line.partition(':')
        if not colon or not name.strip():
            raise CodecError('malformed header line: {!r}'.format(line))
        value = rest.lstrip(' \t')
        headers.append(HeaderField(name=name, value=value, spacing=rest[:len(rest) - len(value)]))

    for mandatory in (REQUEST_MANDATORY if start['kind'] == 'request' else RESPONSE_MANDATORY):
        if not any(h.is_named(mandatory) for h in headers):
            raise MissingMandatoryHeader(mandatory)

    for header in headers:
        if header.is_named('Content-Length'):
            declared = header.value.strip()
            if not declared.isdigit() or int(declared) != len(body):
                raise BodyLengthMismatch(declared, len(body))
            break

    sdp = None
    opaque = None
    if body:
        content_type = _content_type(headers) or ''
        if content_type.split(';')[0].strip().lower() == SDP_CONTENT_TYPE:
            try:
                sdp = parse_sdp(body.decode('utf-8'))
            except UnicodeDecodeError:
                raise CodecError('SDP body is not UTF-8')
        else:
            opaque = OpaqueBody(content_type=content_type, data=bytes(body))
    return SipMessage(headers=tuple(headers), sdp=sdp, opaque_body=opaque, **start)


def check_invariants(message):
    for mandatory in _mandatory(message):
        if not message.has(mandatory):
            raise InvariantViolation('missing mandatory header: {}'.format(mandatory))
    if message.sdp is not None and message.opaque_body is not None:
        raise InvariantViolation('message carries both an SDP and an opaque body')
    if message.is_request and not message.request_uri:
        raise InvariantViolation('request without Request-URI')


def serialize_sip(message):
    """Render a message to bytes, recomputing Content-Length when the body changed."""
    check_invariants(message)
    body = message.body
    headers = list(message.headers)
    length = str(len(body))
    for i, header in enumerate(headers):
        if header.is_named('Content-Length'):
            if header.value.strip() != length:
                headers[i] = header.with_value(length)
            break
    else:
        if body:
            headers.append(HeaderField('Content-Length', length))
    lines = [message.start_line] + [h.render() for h in headers]
    return (CRLF.join(lines) + CRLF + CRLF).encode('utf-8') + body


def make_request(method, request_uri, headers, sdp=None, opaque_body=None):
    """Build a request from (name, value) pairs."""
    return SipMessage(kind='request', method=method, request_uri=str(request_uri),
                      headers=tuple(HeaderField(n, v) for n, v in headers),
                      sdp=sdp, opaque_body=opaque_body)


def make_response(request, status_code, reason, to_tag=None, extra=(), sdp=None,
                  opaque_body=None):
    """Build a response copying Via, From, To, Call-ID, CSeq and Record-Route from `request`."""
    headers = []
    for header in request.headers:
        if any(header.is_named(n) for n in ('Via', 'Record-Route', 'From', 'Call-ID', 'CSeq')):
            headers.append(header)
        elif header.is_named('To'):
            if to_tag and not parse_address(header.value).tag:
                address = parse_address(header.value).with_param('tag', to_tag)
                header = header.with_value(serialize_address(address))
            headers.append(header)
    if status_code >= 300:
        headers = [h for h in headers if not h.is_named('Record-Route')]
    headers.extend(HeaderField(n, v) for n, v in extra)
    if sdp is not None or opaque_body is not None:
        content_type = SDP_CONTENT_TYPE if sdp is not None else opaque_body.content_type
        headers.append(HeaderField('Content-Type', content_type))
    headers.append(HeaderField('Content-Length', '0'))
    return SipMessage(kind='response', status_code=status_code, reason=reason,
                      headers=tuple(headers), sdp=sdp, opaque_body=opaque_body)


__all__ = [
    'Address', 'DialogKey', 'HeaderField', 'MalformedUri', 'OpaqueBody', 'SipMessage',
    'SipUri', 'Via', 'canonical_name', 'check_invariants', 'dialog_key', 'entry_host',
    'is_ip_literal', 'make_request', 'make_response', 'parse_address',
    'parse_sip', 'parse_uri', 'parse_via', 'same_header', 'serialize_address',
    'serialize_sip', 'serialize_uri', 'serialize_via', 'split_entries',
]
