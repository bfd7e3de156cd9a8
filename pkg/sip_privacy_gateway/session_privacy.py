"""Session privacy: anchor media at a relay by rewriting SDP addresses and ports."""

from __future__ import annotations

import heapq
import ipaddress
import logging
import threading
from dataclasses import dataclass

from .errors import NoSdpBody, RelayPortsExhausted

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelayLeg:
    """One advertised media endpoint and the relay port standing in for it."""

    call_id: str
    address: str
    port: int
    relay_port: int
    private: bool = False


class MediaRelay:
    """Port allocations of a media relay.

    Media sent to ``relay_port`` is forwarded to the endpoint that advertised
    it; RTCP uses the port above each RTP port on both sides. Ports freed by
    `release` are handed out again, lowest first.
    """

    def __init__(self, address, port_base=40000, port_span=20000):
        self.address = address
        self.addr_type = 'IP6' if ipaddress.ip_address(address).version == 6 else 'IP4'
        self.port_base = port_base - port_base % 2
        self.port_span = port_span
        self._next = self.port_base
        self._free = []
        self._lock = threading.Lock()
        self._legs = {}
        self._by_port = {}

    def _take_port(self):
        if self._free:
            return heapq.heappop(self._free)
        if self._next >= self.port_base + self.port_span:
            raise RelayPortsExhausted('relay {} has no free port pair'.format(self.address))
        port = self._next
        self._next += 2
        return port

    def allocate(self, call_id, address, port, private=False):
        """Relay port for an endpoint; the same endpoint always gets the same port."""
        key = (call_id, address, port)
        with self._lock:
            leg = self._legs.get(key)
            if leg is None:
                leg = RelayLeg(call_id, address, port, self._take_port(), private)
                self._legs[key] = leg
                self._by_port[leg.relay_port] = leg
                logger.debug('relay %s:%d -> %s:%d', self.address, leg.relay_port, address, port)
            return leg.relay_port

    def release(self, call_id):
        """Free every leg of `call_id`; returns how many went."""
        with self._lock:
            gone = [key for key, leg in self._legs.items() if leg.call_id == call_id]
            for key in gone:
                leg = self._legs.pop(key)
                del self._by_port[leg.relay_port]
                heapq.heappush(self._free, leg.relay_port)
        if gone:
            logger.debug('released %d relay leg(s) of %s', len(gone), call_id)
        return len(gone)

    def leg_at(self, relay_port):
        """Leg behind an RTP or RTCP relay port, or None."""
        with self._lock:
            return self._by_port.get(relay_port - relay_port % 2)

    def destination(self, relay_port):
        """(address, port) that traffic to `relay_port` goes on to, or None."""
        leg = self.leg_at(relay_port)
        if leg is None:
            return None
        return leg.address, leg.port + relay_port % 2

    def legs(self, call_id=None):
        with self._lock:
            return [leg for leg in self._legs.values()
                    if call_id is None or leg.call_id == call_id]


def apply_session_privacy(message, relay, private=False):
    """Point the SDP origin, every connection line and every media port at `relay`.

    Legs allocated with `private` set mark a dialog whose Session privacy
    was requested; their reports are scrubbed in transit.
    """
    sdp = message.sdp
    if sdp is None:
        raise NoSdpBody('{} carries no SDP'.format(message.cseq_method or 'message'))
    call_id = message.call_id

    # a media-level c= line overrides the session-level one for its section
    session_address = None
    media_connection = {}
    index = -1
    for kind, value in sdp.lines:
        if kind == 'm':
            index += 1
        elif kind == 'c':
            address = value.split(' ')[2].split('/')[0]
            if index < 0:
                session_address = address
            else:
                media_connection[index] = address
    ports = []
    for i, media in enumerate(sdp.media):
        if media.port == 0:
            ports.append(0)
            continue
        address = media_connection.get(i, session_address)
        ports.append(relay.allocate(call_id, address, media.port, private))

    rewritten = sdp.with_connection_address(relay.address, relay.addr_type)
    rewritten = rewritten.with_origin(address=relay.address, addr_type=relay.addr_type)
    rewritten = rewritten.with_media_ports(ports)
    if rewritten == sdp:
        return message
    logger.info('anchored %d media stream(s) of %s at %s', len(ports), call_id, relay.address)
    return message.with_sdp(rewritten)
