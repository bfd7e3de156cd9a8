"""Simulated user agent: places and answers calls, exchanges one SDES report per direction."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .b2bua import is_dialog_initial
from .errors import TokenTampered, UnknownDialog
from .privacy_header import PrivacyLevel, format_levels, levels_from_names
from .privacy_registry import PrivacyScope
from .rtcp_sdes import RtcpSdesPacket, SdesItem, SdesItemType, parse_sdes, serialize_sdes
from .sdp import parse_sdp, serialize_sdp
from .sim_node import Send, SimNode
from .sip_message import (
    OpaqueBody,
    entry_host,
    make_request,
    make_response,
    parse_address,
    serialize_address,
)
from .user_privacy import ScrubPolicy, remove_fields, scrub_message, scrub_sdes, scrub_sdp

SEALED_CONTENT_TYPE = 'application/pkcs7-mime'
SEAL_NONCE_SIZE = 12
SEAL_AAD = b'spg-end-to-end'
REASONS = {180: 'Ringing', 183: 'Session Progress', 200: 'OK', 486: 'Busy Here',
           603: 'Decline'}
DEFAULT_TOOL = 'spg-phone/1.0'


def seal_body(payload, key, nonce):
    """Encrypt a JSON payload into an opaque body only the far end can open."""
    plaintext = json.dumps(payload, sort_keys=True).encode('utf-8')
    data = nonce + AESGCM(key).encrypt(nonce, plaintext, SEAL_AAD)
    return OpaqueBody(SEALED_CONTENT_TYPE, data)


def open_body(body, key):
    data = body.data
    try:
        plaintext = AESGCM(key).decrypt(data[:SEAL_NONCE_SIZE], data[SEAL_NONCE_SIZE:],
                                        SEAL_AAD)
    except (InvalidTag, ValueError):
        raise TokenTampered('sealed body failed authentication')
    return json.loads(plaintext.decode('utf-8'))


@dataclass
class CallLeg:
    """One UA's view of a call."""

    call_id: str
    local_tag: str
    local_address: str
    remote_address: str
    is_caller: bool
    media_port: int
    remote_tag: Optional[str] = None
    remote_target: Optional[str] = None
    route_set: list = field(default_factory=list)
    cseq: int = 0
    state: str = 'calling'
    final_status: Optional[int] = None
    final_reason: str = ''
    invite: object = None
    remote_media: Optional[tuple] = None
    received: list = field(default_factory=list)
    sdes_received: list = field(default_factory=list)
    sealed_payload: Optional[dict] = None
    invites_received: int = 0
    ok_for_invite: int = 0


class UserAgent(SimNode):

    def __init__(self, spec, network, rng):
        super().__init__(spec, network, rng)
        self.declare_parameter('user', spec.node_id)
        self.declare_parameter('display_name', '')
        self.declare_parameter('port', 5060)
        self.declare_parameter('proxy', '')
        self.declare_parameter('user_privacy', '')
        self.declare_parameter('privacy', [])
        self.declare_parameter('critical', False)
        self.declare_parameter('media_port', 49170)
        self.declare_parameter('ssrc', 0)
        self.declare_parameter('e2e_key', '')
        self.declare_parameter('headers', [['User-Agent', DEFAULT_TOOL]])
        self.declare_parameter('response_headers', [['Server', DEFAULT_TOOL]])
        self.declare_parameter('location', '')

        self.user = self.get_parameter('user').value
        self.display_name = self.get_parameter('display_name').value
        self.port = int(self.get_parameter('port').value)
        proxy = self.get_parameter('proxy').value
        if not proxy:
            neighbors = network.topology.neighbors(self.node_id)
            proxy = neighbors[0] if neighbors else ''
        self.proxy = proxy
        scope = self.get_parameter('user_privacy').value
        self.policy = None
        if scope:
            self.policy = ScrubPolicy(PrivacyScope.parse(scope), seed=int(rng.integers(2 ** 32)))
        self.privacy = levels_from_names(self.get_parameter('privacy').value)
        key = self.get_parameter('e2e_key').value
        self.e2e_key = bytes.fromhex(key) if key else None
        ssrc = int(self.get_parameter('ssrc').value)
        self.ssrc = ssrc or int(rng.integers(1, 2 ** 32))
        self._next_media_port = int(self.get_parameter('media_port').value)
        self._lock = threading.Lock()
        self.calls = {}
        self._by_media_port = {}

    # identity

    @property
    def address_of_record(self):
        return 'sip:{}@{}'.format(self.user, self.domain)

    @property
    def contact_uri(self):
        if self.policy is not None and self.policy.scope.includes_user:
            return 'sip:{}:{}'.format(self.host, self.port)
        return 'sip:{}@{}:{}'.format(self.user, self.host, self.port)

    def _via(self):
        return 'SIP/2.0/UDP {}:{};branch={}'.format(self.host, self.port, self.new_branch())

    def _from_value(self, tag):
        if self.display_name:
            return '"{}" <{}>;tag={}'.format(self.display_name, self.address_of_record, tag)
        return '<{}>;tag={}'.format(self.address_of_record, tag)

    def _allocate_media_port(self, call_id):
        """Next local RTP port; RTCP for `call_id` arrives on the port above it."""
        with self._lock:
            port = self._next_media_port
            self._next_media_port += 2
            self._by_media_port[port + 1] = call_id
        return port

    def _sdp(self, media_port):
        session_id = self.random_int(10 ** 9, 10 ** 10)
        lines = [
            'v=0',
            'o={} {} {} IN IP4 {}'.format(self.user, session_id, session_id, self.host),
            's=call',
            'u=http://www.{}/{}'.format(self.domain, self.user),
            'e={}@{}'.format(self.user, self.domain),
            'c=IN IP4 {}'.format(self.host),
            't=0 0',
            'm=audio {} RTP/AVP 0 8'.format(media_port),
            'a=rtpmap:0 PCMU/8000',
        ]
        return parse_sdp('\r\n'.join(lines) + '\r\n')

    def _body(self, media_port, identity=None):
        """(sdp, opaque_body) for an offer or answer."""
        sdp = self._sdp(media_port)
        if self.e2e_key is None:
            return sdp, None
        payload = {'sdp': serialize_sdp(sdp)}
        if identity is not None:
            payload['from'] = identity
        nonce = self.random_bytes(SEAL_NONCE_SIZE)
        return None, seal_body(payload, self.e2e_key, nonce)

    def _remote_media(self, message, leg):
        sdp = message.sdp
        if sdp is None and message.opaque_body is not None and self.e2e_key is not None:
            leg.sealed_payload = open_body(message.opaque_body, self.e2e_key)
            sdp = parse_sdp(leg.sealed_payload['sdp'])
        if sdp is None or sdp.connection is None or not sdp.media:
            return
        leg.remote_media = (sdp.connection.address, sdp.media[0].port)

    def _protect(self, message):
        """Apply this user's own privacy to an outgoing message."""
        if self.policy is None:
            return message
        if message.is_request:
            return scrub_message(message, self.policy)[0]
        message, _removed = remove_fields(message, self.policy.scope)
        if message.sdp is not None:
            message = message.with_sdp(scrub_sdp(message.sdp, self.policy))
        return message

    def _send_request(self, message, leg):
        message = self._protect(message)
        target = self.proxy
        if leg.route_set:
            host = entry_host(leg.route_set[0], 'Route')
            node = self.network.node_for_host(host)
            if node is None:
                raise UnknownDialog('route set names unknown host {}'.format(host))
            target = node.node_id
        return [Send(target, message)]

    def _send_response(self, message):
        message = self._protect(message)
        host = entry_host(message.entries('Via')[0], 'Via')
        node = self.network.node_for_host(host)
        if node is None:
            raise UnknownDialog('top Via names unknown host {}'.format(host))
        return [Send(node.node_id, message)]

    def leg(self, call_id):
        try:
            return self.calls[call_id]
        except KeyError:
            raise UnknownDialog('{} has no call {}'.format(self.node_id, call_id))

    def leg_with_remote_tag(self, tag):
        with self._lock:
            legs = list(self.calls.values())
        for leg in legs:
            if leg.remote_tag == tag:
                return leg
        return None

    # caller side

    def place_call(self, target):
        """Send an INVITE to `target`; returns (call_id, sends)."""
        tag = self.random_hex(4)
        call_id = '{}@{}'.format(self.random_hex(8), self.host)
        media_port = self._allocate_media_port(None)
        sdp, opaque = self._body(media_port, identity=self._from_value(tag))
        headers = [
            ('Via', self._via()),
            ('Max-Forwards', '70'),
            ('From', self._from_value(tag)),
            ('To', '<{}>'.format(target)),
            ('Call-ID', call_id),
            ('CSeq', '1 INVITE'),
            ('Contact', '<{}>'.format(self.contact_uri)),
        ]
        headers.extend(self._privacy_header())
        headers.extend((name, value) for name, value in self.get_parameter('headers').value)
        if sdp is not None:
            headers.append(('Content-Type', 'application/sdp'))
        elif opaque is not None:
            headers.append(('Content-Type', opaque.content_type))
        invite = self._protect(make_request('INVITE', target, headers, sdp=sdp,
                                            opaque_body=opaque))
        with self._lock:
            self._by_media_port[media_port + 1] = invite.call_id
        leg = CallLeg(call_id=invite.call_id, local_tag=tag,
                      local_address=invite.value('From'), remote_address=invite.value('To'),
                      is_caller=True, media_port=media_port, remote_target=target, cseq=1,
                      invite=invite)
        with self._lock:
            self.calls[leg.call_id] = leg
        self.get_logger().info('calling %s', target)
        return leg.call_id, [Send(self.proxy, invite)]

    def _privacy_header(self):
        levels = set(self.privacy)
        if not levels:
            return []
        if self.get_parameter('critical').value:
            levels.add(PrivacyLevel.CRITICAL)
        ordered = sorted(levels, key=list(PrivacyLevel).index)
        return [('Privacy', format_levels(ordered))]

    def _in_dialog_request(self, leg, method, cseq):
        headers = [('Via', self._via()), ('Max-Forwards', '70')]
        headers.extend(('Route', route) for route in leg.route_set)
        remote = parse_address(leg.remote_address)
        if leg.remote_tag and remote.tag is None:
            remote = remote.with_param('tag', leg.remote_tag)
        headers.extend([
            ('From', leg.local_address),
            ('To', serialize_address(remote)),
            ('Call-ID', leg.call_id),
            ('CSeq', '{} {}'.format(cseq, method)),
        ])
        headers.extend(self._privacy_header())
        return make_request(method, leg.remote_target, headers)

    def acknowledge(self, call_id):
        leg = self.leg(call_id)
        if leg.state != 'confirmed':
            return []
        ack = self._in_dialog_request(leg, 'ACK', 1)
        return self._send_request(ack, leg)

    def hang_up(self, call_id):
        leg = self.leg(call_id)
        if leg.state != 'confirmed':
            return []
        leg.cseq += 1
        leg.state = 'terminating'
        bye = self._in_dialog_request(leg, 'BYE', leg.cseq)
        self.get_logger().info('hanging up')
        return self._send_request(bye, leg)

    # callee side

    def respond(self, call_id, code):
        """Answer the pending INVITE of `call_id` with `code`."""
        leg = self.leg(call_id)
        if leg.invite is None or leg.is_caller or leg.state in ('confirmed', 'failed'):
            return []
        extra = [(name, value) for name, value in self.get_parameter('response_headers').value]
        sdp = opaque = None
        if code < 300:
            extra.insert(0, ('Contact', '<{}>'.format(self.contact_uri)))
        if code == 200:
            sdp, opaque = self._body(leg.media_port)
        response = make_response(leg.invite, code, REASONS.get(code, ''), to_tag=leg.local_tag,
                                 extra=extra, sdp=sdp, opaque_body=opaque)
        if code >= 300:
            leg.state = 'failed'
            leg.final_status = code
        elif code >= 200:
            leg.state = 'answered'
        return self._send_response(response)

    def _accept_invite(self, message):
        leg = self.calls.get(message.call_id)
        if leg is not None:
            leg.invites_received += 1
            return []
        from_address = parse_address(message.value('From'))
        call_id = message.call_id
        leg = CallLeg(call_id=call_id, local_tag=self.random_hex(4),
                      local_address=message.value('To'), remote_address=message.value('From'),
                      is_caller=False, media_port=self._allocate_media_port(call_id),
                      remote_tag=from_address.tag, invite=message, invites_received=1)
        contact = message.entries('Contact')
        leg.remote_target = str(parse_address(contact[0]).uri) if contact else None
        leg.route_set = message.entries('Record-Route')
        local = parse_address(leg.local_address).with_param('tag', leg.local_tag)
        leg.local_address = serialize_address(local)
        self._remote_media(message, leg)
        with self._lock:
            self.calls[call_id] = leg
        self.get_logger().info('incoming call from %s', from_address.uri)
        return []

    # receiving

    def receive_sip(self, message, source):
        if message.is_request:
            if message.method == 'INVITE' and is_dialog_initial(message):
                return self._accept_invite(message)
            leg = self.leg(message.call_id)
            leg.received.append(message.method)
            if message.method == 'ACK':
                leg.state = 'confirmed'
                return []
            if message.method == 'BYE':
                leg.state = 'terminated'
                return self._send_response(make_response(message, 200, 'OK'))
            return self._send_response(make_response(message, 501, 'Not Implemented'))

        leg = self.leg(message.call_id)
        code = message.status_code
        leg.received.append(code)
        if message.cseq_method == 'INVITE':
            to_tag = parse_address(message.value('To')).tag
            if to_tag and leg.remote_tag is None:
                leg.remote_tag = to_tag
            if code >= 300:
                # the ACK for a failure stays with the next hop
                leg.state = 'failed'
                leg.final_status = code
                leg.final_reason = message.reason
                self.get_logger().info('call failed with %d %s', code, message.reason)
            elif code >= 200:
                leg.ok_for_invite += 1
                leg.final_status = code
                leg.state = 'confirmed'
                leg.remote_address = message.value('To')
                contact = message.entries('Contact')
                if contact:
                    leg.remote_target = str(parse_address(contact[0]).uri)
                leg.route_set = list(reversed(message.entries('Record-Route')))
                self._remote_media(message, leg)
            else:
                leg.state = 'early'
        elif message.cseq_method == 'BYE' and code < 300:
            leg.state = 'terminated'
        return []

    # media

    def send_sdes(self, call_id):
        leg = self.leg(call_id)
        if leg.remote_media is None:
            return []
        address, port = leg.remote_media
        packet = self.sdes_packet()
        if self.policy is not None:
            packet = scrub_sdes(packet, self.policy)
        return [Send(None, serialize_sdes(packet), kind='rtcp', address=address, port=port + 1)]

    def sdes_packet(self):
        items = [SdesItem(SdesItemType.CNAME, '{}@{}'.format(self.user, self.host))]
        if self.display_name:
            items.append(SdesItem(SdesItemType.NAME, self.display_name))
        items.append(SdesItem(SdesItemType.EMAIL, '{}@{}'.format(self.user, self.domain)))
        location = self.get_parameter('location').value
        if location:
            items.append(SdesItem(SdesItemType.LOC, location))
        items.append(SdesItem(SdesItemType.TOOL, DEFAULT_TOOL))
        return RtcpSdesPacket(ssrc=self.ssrc, items=tuple(items))

    def receive_media(self, data, port, source):
        call_id = self._by_media_port.get(port)
        if call_id is None:
            return super().receive_media(data, port, source)
        self.leg(call_id).sdes_received.append(parse_sdes(data))
        return []
