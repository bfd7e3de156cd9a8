"""Simulated media function: relays RTCP between the legs its signaling function anchored."""

from __future__ import annotations

from .errors import UnknownNextHop
from .privacy_registry import PrivacyScope
from .rtcp_sdes import parse_sdes, serialize_sdes
from .session_privacy import MediaRelay
from .sim_node import Send, SimNode
from .topology import NodeRole
from .user_privacy import ScrubPolicy, scrub_sdes


class MediaFunction(SimNode):
    """A VSP media function or the VPP's media relay.

    Reports on a leg anchored for a dialog with Session privacy are scrubbed
    at ``sdes_scope``; the VPP relay defaults to provider scope, so they
    never name a provider's hosts past the VPP.
    """

    def __init__(self, spec, network, rng):
        super().__init__(spec, network, rng)
        default_scope = 'p' if spec.role is NodeRole.VPP_MF else ''
        self.declare_parameter('port_base', 40000)
        self.declare_parameter('port_span', 20000)
        self.declare_parameter('sdes_scope', default_scope)

        self.relay = MediaRelay(self.host, int(self.get_parameter('port_base').value),
                                int(self.get_parameter('port_span').value))
        scope = self.get_parameter('sdes_scope').value
        self.policy = None
        if scope:
            self.policy = ScrubPolicy(PrivacyScope.parse(scope), seed=int(rng.integers(2 ** 32)))

    def receive_media(self, data, port, source):
        leg = self.relay.leg_at(port)
        if leg is None:
            raise UnknownNextHop('{} has no relay leg on port {}'.format(self.node_id, port))
        address, target_port = leg.address, leg.port + port % 2
        if self.policy is not None and leg.private:
            data = serialize_sdes(scrub_sdes(parse_sdes(data), self.policy))
        self.get_logger().debug('relaying RTCP from port %d to %s:%d', port, address,
                                target_port)
        return [Send(None, data, kind='rtcp', address=address, port=target_port)]
