from conftest import read_sdes_vectors
import numpy as np

from sip_privacy_gateway.media_function import MediaFunction
from sip_privacy_gateway.rtcp_sdes import parse_sdes
from sip_privacy_gateway.sim_node import Network
from sip_privacy_gateway.topology import NodeRole, NodeSpec


def relay_node(**parameters):
    spec = NodeSpec('vpp-mf', NodeRole.VPP_MF, 'vpp', '203.0.113.9', parameters=parameters)
    return MediaFunction(spec, Network(None), np.random.default_rng(1))


def test_reports_scrubbed_only_for_session_private_legs():
    _name, _ssrc, cname, data = read_sdes_vectors()[0]
    node = relay_node()
    plain = node.relay.allocate('plain', '192.0.2.10', 49170)
    private = node.relay.allocate('private', '198.51.100.7', 49170, private=True)

    [kept] = node.receive_media(data, plain + 1, 'vspa')
    assert kept.payload == data
    assert (kept.address, kept.port) == ('192.0.2.10', 49171)

    [scrubbed] = node.receive_media(data, private + 1, 'vspb')
    assert scrubbed.payload != data
    assert cname not in parse_sdes(scrubbed.payload).cname
    assert (scrubbed.address, scrubbed.port) == ('198.51.100.7', 49171)


def test_no_scrubbing_without_scope():
    _name, _ssrc, _cname, data = read_sdes_vectors()[0]
    node = relay_node(sdes_scope='')
    port = node.relay.allocate('private', '198.51.100.7', 49170, private=True)
    [sent] = node.receive_media(data, port + 1, 'vspb')
    assert sent.payload == data
