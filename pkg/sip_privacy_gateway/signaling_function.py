"""Simulated signaling function: a VSP proxy or the VPP front end with its privacy service."""

from __future__ import annotations

import numpy as np

from .b2bua import is_dialog_initial
from .errors import PrivacyRejected, UnknownNextHop
from .header_privacy import is_service_entry
from .privacy_header import PrivacyLevel, PrivacyRole, add_privacy_levels, levels_from_names
from .privacy_service import DEFAULT_CAPABILITIES, PrivacyService, ServiceConfig
from .session_privacy import apply_session_privacy
from .sim_node import Send, SimNode
from .sip_message import entry_host
from .topology import NodeRole


class SignalingFunction(SimNode):
    """A proxy with static location (LF) and routing (PF) tables.

    Requests are routed by the top Route entry, then by a Request-URI that
    names a node, then by the location table for the node's own domain,
    then by number prefix and finally by domain with ``*`` as default.
    Responses follow the Via list.
    """

    def __init__(self, spec, network, rng):
        super().__init__(spec, network, rng)
        vsp = network.topology.vsps.get(spec.vsp)
        default_privacy = sorted(level.value for level in vsp.privacy) if vsp else []
        self.declare_parameter('routes', dict(spec.routes))
        self.declare_parameter('locations', {})
        self.declare_parameter('enum', {})
        self.declare_parameter('record_route', True)
        self.declare_parameter('privacy', default_privacy)
        self.declare_parameter('critical', bool(vsp.critical) if vsp else False)
        self.declare_parameter('assert_identity', False)
        self.declare_parameter('media_function', '')
        self.declare_parameter('service', {})
        self.declare_parameter('mode', 'strip')
        self.declare_parameter('key', '')
        capabilities = sorted(level.value for level in DEFAULT_CAPABILITIES)
        self.declare_parameter('capabilities', capabilities)
        self.declare_parameter('freshness_seconds', 8 * 3600)
        self.declare_parameter('server', '')

        self.routes = self.get_parameter('routes').value
        self.locations = self.get_parameter('locations').value
        self.enum = self.get_parameter('enum').value
        self.record_route = bool(self.get_parameter('record_route').value)
        self.privacy = levels_from_names(self.get_parameter('privacy').value)
        self.critical = bool(self.get_parameter('critical').value)
        self.assert_identity = bool(self.get_parameter('assert_identity').value)

        relay = None
        media_function = self.get_parameter('media_function').value
        if media_function:
            relay = network.node(media_function).relay
        self.relay = relay if spec.role is NodeRole.SF else None
        self.service = self._make_service(relay)

    def _make_service(self, relay):
        if self.spec.role is NodeRole.VPP_SF:
            topology = self.network.topology
            data = {
                'identity': self.host,
                'mode': self.get_parameter('mode').value,
                'key': self.get_parameter('key').value or None,
                'capabilities': self.get_parameter('capabilities').value,
                'role': PrivacyRole.VPP_SERVICE.value,
                'sides': {name: {'domains': [vsp.domain], 'networks': list(vsp.networks)}
                          for name, vsp in topology.vsps.items()},
                'freshness_seconds': self.get_parameter('freshness_seconds').value,
                'server': self.get_parameter('server').value or None,
            }
        else:
            data = dict(self.get_parameter('service').value)
            if not data:
                return None
            vsp = self.network.topology.vsps[self.vsp]
            data.setdefault('identity', self.host)
            data.setdefault('role', PrivacyRole.VSP_SERVICE.value)
            data.setdefault('sides', {self.vsp: {'domains': [vsp.domain],
                                                 'networks': list(vsp.networks)}})
            relay = None
        data['seed'] = self.random_int(0, 2 ** 32)
        config = ServiceConfig.from_dict(data)
        rng = np.random.default_rng(self.random_int(0, 2 ** 62))
        self.get_logger().info('privacy service %s in %s mode', config.identity, config.mode.value)
        return PrivacyService(config, clock=self.network.now, rng=rng, relay=relay)

    # routing

    def _own_plain(self, entry, name):
        return entry_host(entry, name) == self.host and not is_service_entry(entry, name,
                                                                             self.host)

    def _node_by_host(self, host):
        node = self.network.node_for_host(host)
        if node is None:
            raise UnknownNextHop('{} cannot reach host {}'.format(self.node_id, host))
        return node.node_id

    def _pop_own_routes(self, message):
        routes = message.entries('Route')
        kept = list(routes)
        while kept and self._own_plain(kept[0], 'Route'):
            kept.pop(0)
        return message.with_entries('Route', kept) if len(kept) != len(routes) else message

    def _enum_domain(self, number):
        best = None
        for prefix, domain in self.enum.items():
            if number.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, domain)
        return best[1] if best else None

    def _next_hop(self, message):
        """(next node id, message with its Request-URI possibly rewritten)."""
        routes = message.entries('Route')
        if routes:
            return self._node_by_host(entry_host(routes[0], 'Route')), message
        uri = message.uri
        if not uri.is_tel:
            node = self.network.node_for_host(uri.host)
            if node is not None and node.node_id != self.node_id:
                return node.node_id, message
        if uri.is_tel or uri.host in (self.domain, self.host):
            target = self.locations.get(uri.user)
            if target:
                ua = self.network.node(target)
                return target, message.with_request_uri(ua.contact_uri)
        domain = None if uri.is_tel else uri.host
        number = uri.user or ''
        if number.startswith('+') and self.enum:
            found = self._enum_domain(number)
            if found is not None:
                domain = found
                message = message.with_request_uri(
                    'sip:{}@{};user=phone'.format(number, domain))
        next_hop = self.routes.get(domain) or self.routes.get('*')
        if next_hop is None:
            raise UnknownNextHop('{} has no route for {}'.format(self.node_id,
                                                                 message.request_uri))
        return next_hop, message

    # processing

    def _leaving(self, destination):
        return self.side_of(destination) != self.vsp

    def _request_privacy(self, message, with_critical):
        if not self.privacy:
            return message
        levels = set(self.privacy)
        if with_critical and self.critical:
            levels.add(PrivacyLevel.CRITICAL)
        return add_privacy_levels(message, levels)

    def _anchor_media(self, message):
        if self.relay is None or message.sdp is None:
            return message
        return apply_session_privacy(message, self.relay)

    def _add_own_entries(self, message):
        vias = message.entries('Via')
        if not vias or not is_service_entry(vias[0], 'Via', self.host):
            via = 'SIP/2.0/UDP {};branch={}'.format(self.host, self.new_branch())
            message = message.with_entries('Via', [via] + vias)
        if self.record_route and message.method == 'INVITE' and is_dialog_initial(message):
            record_routes = message.entries('Record-Route')
            if not any(is_service_entry(e, 'Record-Route', self.host) for e in record_routes):
                own = '<sip:{};lr>'.format(self.host)
                message = message.with_entries('Record-Route', [own] + record_routes)
        return message

    def receive_sip(self, message, source):
        from_side = self.side_of(source)
        if self.service is not None:
            message = self.service.inbound(message, from_side)
        if message.is_request:
            return self._forward_request(message, from_side)
        return self._forward_response(message, from_side)

    def _forward_request(self, message, from_side):
        message = self._pop_own_routes(message)
        destination, message = self._next_hop(message)
        to_side = self.side_of(destination)
        if self.assert_identity and from_side == self.vsp and is_dialog_initial(message) \
                and not message.has('P-Asserted-Identity'):
            message = message.with_header_value(
                'P-Asserted-Identity', '<{}>'.format(message.address('From').uri))
        if self._leaving(destination):
            message = self._request_privacy(message, with_critical=True)
        message = self._anchor_media(message)
        if self.service is not None:
            try:
                message = self.service.outbound(message, from_side, to_side,
                                                self.trusted_link(destination))
            except PrivacyRejected as error:
                return self._reject(message, error)
        message = self._add_own_entries(message)
        self.get_logger().debug('%s -> %s', message.method, destination)
        return [Send(destination, message)]

    def _reject(self, request, error):
        response = self.service.reject(request, error, to_tag=self.random_hex(4))
        destination = self._node_by_host(entry_host(response.entries('Via')[0], 'Via'))
        return [Send(destination, response)]

    def _forward_response(self, message, from_side):
        vias = message.entries('Via')
        if vias and self._own_plain(vias[0], 'Via'):
            message = message.with_entries('Via', vias[1:])
            vias = vias[1:]
        if not vias:
            raise UnknownNextHop('{} got a response with no Via left'.format(self.node_id))
        destination = self._node_by_host(entry_host(vias[0], 'Via'))
        if self._leaving(destination):
            message = self._request_privacy(message, with_critical=False)
        message = self._anchor_media(message)
        if self.relay is not None and message.cseq_method == 'BYE' and message.status_code < 300:
            self.relay.release(message.call_id)
        if self.service is not None:
            message = self.service.outbound(message, from_side, self.side_of(destination),
                                            self.trusted_link(destination))
        self.get_logger().debug('%d %s -> %s', message.status_code, message.cseq_method,
                                destination)
        return [Send(destination, message)]
