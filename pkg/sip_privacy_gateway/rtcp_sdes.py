"""RTCP source description (SDES) packets with a single chunk."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import CodecError, InvariantViolation, TruncatedItem

RTCP_VERSION = 2
SDES_PACKET_TYPE = 202


class SdesItemType(enum.IntEnum):
    CNAME = 1
    NAME = 2
    EMAIL = 3
    PHONE = 4
    LOC = 5
    TOOL = 6
    NOTE = 7
    PRIV = 8


@dataclass(frozen=True)
class SdesItem:
    item_type: SdesItemType
    text: str


@dataclass(frozen=True)
class RtcpSdesPacket:
    ssrc: int
    items: tuple

    @property
    def cname(self):
        for item in self.items:
            if item.item_type == SdesItemType.CNAME:
                return item.text
        return None

    def item(self, item_type):
        for item in self.items:
            if item.item_type == item_type:
                return item.text
        return None


def parse_sdes(data):
    data = bytes(data)
    if len(data) < 8:
        raise TruncatedItem('SDES packet shorter than header and SSRC')
    first, packet_type, length = struct.unpack('!BBH', data[:4])
    if first >> 6 != RTCP_VERSION or packet_type != SDES_PACKET_TYPE:
        raise CodecError('not an RTCP SDES packet')
    if first & 0x1f != 1:
        raise CodecError('only single-chunk SDES packets are supported')
    end = (length + 1) * 4
    if end > len(data):
        raise TruncatedItem('declared length {} exceeds packet size {}'.format(end, len(data)))
    ssrc = struct.unpack('!I', data[4:8])[0]
    items = []
    offset = 8
    while offset < end:
        item_type = data[offset]
        if item_type == 0:
            break
        if offset + 2 > end:
            raise TruncatedItem('item header at offset {} runs past the packet'.format(offset))
        size = data[offset + 1]
        if offset + 2 + size > end:
            raise TruncatedItem('item at offset {} runs past the packet'.format(offset))
        try:
            kind = SdesItemType(item_type)
            text = data[offset + 2:offset + 2 + size].decode('utf-8')
        except (ValueError, UnicodeDecodeError):
            raise CodecError('bad SDES item at offset {}'.format(offset))
        items.append(SdesItem(kind, text))
        offset += 2 + size
    packet = RtcpSdesPacket(ssrc=ssrc, items=tuple(items))
    _check(packet)
    return packet


def _check(packet):
    if packet.cname is None:
        raise InvariantViolation('SDES packet without CNAME')
    if any(not item.text for item in packet.items):
        raise InvariantViolation('empty SDES item text')


def serialize_sdes(packet):
    _check(packet)
    chunk = bytearray(struct.pack('!I', packet.ssrc))
    for item in packet.items:
        text = item.text.encode('utf-8')
        if len(text) > 255:
            raise InvariantViolation('SDES item longer than 255 octets')
        chunk += bytes((int(item.item_type), len(text))) + text
    # at least one null octet terminates the item list, then pad to 32 bits
    chunk += b'\x00'
    chunk += b'\x00' * (-len(chunk) % 4)
    header = struct.pack('!BBH', (RTCP_VERSION << 6) | 1, SDES_PACKET_TYPE, len(chunk) // 4)
    return header + bytes(chunk)
