import copy

import pytest

from sip_privacy_gateway.errors import DisconnectedGraph, InvalidTopology, UnknownNextHop
from sip_privacy_gateway.privacy_header import PrivacyLevel
from sip_privacy_gateway.scenario import negative_control, preset_case
from sip_privacy_gateway.topology import (
    ConnectionMethod,
    DeploymentModel,
    NodeRole,
    build_topology,
    derive_privacy_request,
    link_key,
)

HEADER = PrivacyLevel.HEADER
SESSION = PrivacyLevel.SESSION
PROVIDER = PrivacyLevel.SERVICE_PROVIDER

DERIVATION = [
    ('composed', 'collocated', {HEADER, PROVIDER, SESSION}),
    ('composed', 'separate-shared', {HEADER, PROVIDER, SESSION}),
    ('composed', 'separate-dedicated', {HEADER, PROVIDER, SESSION}),
    ('quasi-decomposed', 'collocated', {HEADER, PROVIDER, SESSION}),
    ('quasi-decomposed', 'separate-shared', {HEADER, PROVIDER, SESSION}),
    ('quasi-decomposed', 'separate-dedicated', {HEADER, PROVIDER, SESSION}),
    ('fully-decomposed', 'collocated', {HEADER, PROVIDER, SESSION}),
    ('fully-decomposed', 'separate-shared', {HEADER, PROVIDER}),
    ('fully-decomposed', 'separate-dedicated', {HEADER, PROVIDER}),
]


@pytest.mark.parametrize('model,method,expected', DERIVATION)
def test_derived_privacy_request(model, method, expected):
    assert derive_privacy_request(model, method) == expected
    relaxed = derive_privacy_request(DeploymentModel(model), ConnectionMethod(method), True)
    assert relaxed == expected - {SESSION}


def config():
    return copy.deepcopy(preset_case(3))


def node(data, node_id):
    return next(item for item in data['nodes'] if item['id'] == node_id)


def test_preset_topology():
    topology = build_topology(config())
    assert topology.has_vpp
    assert topology.vsps['vspa'].privacy == {HEADER, PROVIDER, SESSION}
    assert topology.vsps['vspb'].privacy == {HEADER, PROVIDER}
    assert topology.node('vpp-sf').parameters['mode'] == 'strip'
    assert topology.node('vpp-sf').domain == 'vpp.example.com'
    assert topology.node_for_host('[198.51.100.20]').node_id == 'ua-b'
    assert topology.node_for_host('nowhere') is None
    assert sorted(topology.neighbors('vpp-sf')) == ['sf-a', 'sf-b', 'vpp-mf']
    assert [n.node_id for n in topology.nodes_with_role(NodeRole.MF)] == ['mf-a']
    assert topology.link('sf-b', 'vpp-sf').trusted is False
    assert topology.link('ua-a', 'ua-b') is None


def test_boundary_and_tokens():
    topology = build_topology(config())
    boundary = topology.boundary('vspa')
    assert link_key('ua-a', 'sf-a') in boundary
    assert link_key('sf-a', 'vpp-sf') in boundary
    assert link_key('vpp-sf', 'vpp-mf') in boundary
    assert link_key('vpp-sf', 'sf-b') not in boundary
    tokens = topology.protected_tokens('vspa')
    assert 'vspa.example.com' in tokens
    assert {'192.0.2.10', 'sf.vspa.example.com', '192.0.2.20'} <= set(tokens)


def test_privacy_disabled():
    topology = build_topology(negative_control())
    assert all(not vsp.privacy for vsp in topology.vsps.values())
    direct = build_topology(negative_control(direct=True))
    assert not direct.has_vpp


def test_explicit_privacy_and_critical():
    data = config()
    data['vsps']['vspa'].update(privacy=['header'], critical=True)
    vsp = build_topology(data).vsps['vspa']
    assert vsp.privacy == {HEADER}
    assert vsp.critical


def broken(change):
    data = config()
    change(data)
    return data


def drop_ua_b_links(data):
    data['links'] = [link for link in data['links'] if 'ua-b' not in link[:2]]


@pytest.mark.parametrize('change,error', [
    (lambda d: node(d, 'ua-b').update(role='PBX'), InvalidTopology),
    (lambda d: node(d, 'ua-b').update(vsp='vspc'), InvalidTopology),
    (lambda d: d['links'].append(['ua-a', 'nowhere']), InvalidTopology),
    (lambda d: d['nodes'].append(dict(node(d, 'ua-b'), host='198.51.100.21')), InvalidTopology),
    (lambda d: d['nodes'].append(dict(node(d, 'ua-b'), id='ua-c')), InvalidTopology),
    (lambda d: d['vsps']['vspa'].update(model='fully-decomposed'), InvalidTopology),
    (lambda d: d['links'].append(['sf-a', 'sf-b']), InvalidTopology),
    (drop_ua_b_links, DisconnectedGraph),
    (lambda d: d['script'].update(callee='ua-z'), DisconnectedGraph),
    (lambda d: node(d, 'sf-a')['routes'].update({'*': 'sf-b'}), UnknownNextHop),
    (lambda d: node(d, 'sf-b')['parameters']['locations'].update(bob='sf-a'), UnknownNextHop),
    (lambda d: node(d, 'sf-a')['parameters'].update(media_function='sf-b'), UnknownNextHop),
    (lambda d: node(d, 'ua-a')['parameters'].update(proxy='vpp-sf'), UnknownNextHop),
])
def test_invalid_topologies(change, error):
    with pytest.raises(error):
        build_topology(broken(change))


def test_no_nodes():
    with pytest.raises(DisconnectedGraph):
        build_topology({'vsps': {}, 'nodes': [], 'links': []})
