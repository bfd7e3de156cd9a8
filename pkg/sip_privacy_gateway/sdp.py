"""SDP session descriptions kept as ordered ``x=value`` lines."""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, replace
from typing import Optional

from .errors import MalformedSdpLine

_FQDN = re.compile(r'^(?=.{1,253}$)([A-Za-z0-9_]([A-Za-z0-9_-]{0,61}[A-Za-z0-9])?\.?)+$')

# letter -> field name used by the registry
FIELD_NAMES = {
    'o': 'Origin',
    's': 'Session-name',
    'i': 'Information',
    'u': 'URI',
    'e': 'Email',
    'p': 'Phone',
    'c': 'Connection',
}


def valid_address(address):
    """True for IP literals (multicast /ttl suffix allowed) and FQDNs."""
    host = address.split('/')[0]
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        return bool(_FQDN.match(host))


@dataclass(frozen=True)
class Origin:
    username: str
    sess_id: str
    sess_version: str
    net_type: str
    addr_type: str
    address: str

    def render(self):
        return ' '.join((self.username, self.sess_id, self.sess_version,
                         self.net_type, self.addr_type, self.address))


@dataclass(frozen=True)
class Connection:
    net_type: str
    addr_type: str
    address: str

    def render(self):
        return ' '.join((self.net_type, self.addr_type, self.address))


@dataclass(frozen=True)
class MediaLine:
    media: str
    port: int
    proto: str
    formats: tuple
    port_count: Optional[int] = None

    def render(self):
        port = str(self.port)
        if self.port_count is not None:
            port += '/{}'.format(self.port_count)
        return ' '.join((self.media, port, self.proto) + tuple(self.formats))


def _parse_origin(value, line_no):
    parts = value.split(' ')
    if len(parts) != 6 or not valid_address(parts[5]):
        raise MalformedSdpLine(line_no, 'o=' + value)
    return Origin(*parts)


def _parse_connection(value, line_no):
    parts = value.split(' ')
    if len(parts) != 3 or not valid_address(parts[2]):
        raise MalformedSdpLine(line_no, 'c=' + value)
    return Connection(*parts)


def _parse_media(value, line_no):
    parts = value.split(' ')
    if len(parts) < 3:
        raise MalformedSdpLine(line_no, 'm=' + value)
    port_text, _, count_text = parts[1].partition('/')
    if not port_text.isdigit() or (count_text and not count_text.isdigit()):
        raise MalformedSdpLine(line_no, 'm=' + value)
    return MediaLine(media=parts[0], port=int(port_text), proto=parts[2],
                     formats=tuple(parts[3:]),
                     port_count=int(count_text) if count_text else None)


@dataclass(frozen=True)
class SdpSession:
    """An SDP body.

    ``lines`` holds every ``(type, value)`` pair in order, unknown lines
    included; the typed accessors read from it.
    """

    lines: tuple
    eol: str = '\r\n'
    trailing_eol: bool = True

    def _session_lines(self):
        for kind, value in self.lines:
            if kind == 'm':
                return
            yield kind, value

    def _session_value(self, kind):
        for k, value in self._session_lines():
            if k == kind:
                return value
        return None

    def values(self, kind):
        return [value for k, value in self.lines if k == kind]

    @property
    def origin(self):
        value = self._session_value('o')
        return _parse_origin(value, 0) if value is not None else None

    @property
    def session_name(self):
        return self._session_value('s')

    @property
    def information(self):
        return self._session_value('i')

    @property
    def uri(self):
        return self._session_value('u')

    @property
    def email(self):
        return self._session_value('e')

    @property
    def phone(self):
        return self._session_value('p')

    @property
    def connection(self):
        values = self.values('c')
        return _parse_connection(values[0], 0) if values else None

    @property
    def connections(self):
        return [_parse_connection(v, 0) for v in self.values('c')]

    @property
    def media(self):
        return [_parse_media(v, 0) for v in self.values('m')]

    def without(self, *kinds):
        kept = tuple((k, v) for k, v in self.lines if k not in kinds)
        return self if len(kept) == len(self.lines) else replace(self, lines=kept)

    def map_lines(self, kind, func):
        """Apply `func(value, index)` to every `kind` line, index counting from zero."""
        out = []
        index = 0
        for k, value in self.lines:
            if k == kind:
                value = func(value, index)
                index += 1
            out.append((k, value))
        out = tuple(out)
        return self if out == self.lines else replace(self, lines=out)

    def with_origin(self, **changes):
        return self.map_lines('o', lambda v, _: replace(_parse_origin(v, 0), **changes).render())

    def with_session_name(self, name):
        return self.map_lines('s', lambda v, _: name)

    def with_connection_address(self, address, addr_type=None):
        def rewrite(value, _):
            connection = _parse_connection(value, 0)
            return replace(connection, address=address,
                           addr_type=addr_type or connection.addr_type).render()
        return self.map_lines('c', rewrite)

    def with_media_ports(self, ports):
        """Replace media ports positionally; ports of disabled streams (0) stay 0."""
        def rewrite(value, index):
            media = _parse_media(value, 0)
            if media.port == 0 or index >= len(ports):
                return value
            return replace(media, port=ports[index]).render()
        return self.map_lines('m', rewrite)


def parse_sdp(text):
    eol = '\r\n' if '\r\n' in text else '\n'
    raw = text.split(eol)
    trailing = bool(raw) and raw[-1] == ''
    if trailing:
        raw = raw[:-1]
    lines = []
    for line_no, line in enumerate(raw, start=1):
        if len(line) < 2 or line[1] != '=' or not line[0].isalpha():
            raise MalformedSdpLine(line_no, line)
        kind, value = line[0], line[2:]
        if kind == 'o':
            _parse_origin(value, line_no)
        elif kind == 'c':
            _parse_connection(value, line_no)
        elif kind == 'm':
            _parse_media(value, line_no)
        lines.append((kind, value))
    if not lines:
        raise MalformedSdpLine(1, '')
    return SdpSession(lines=tuple(lines), eol=eol, trailing_eol=trailing)


def serialize_sdp(session):
    text = session.eol.join('{}={}'.format(k, v) for k, v in session.lines)
    return text + session.eol if session.trailing_eol else text
