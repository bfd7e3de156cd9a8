from conftest import read_corpus
import pytest

from sip_privacy_gateway.errors import IdentityConflict, PrivacyRejected
from sip_privacy_gateway.privacy_header import PrivacyLevel, PrivacyRole
from sip_privacy_gateway.privacy_service import (
    Distinctness,
    PrivacyService,
    ServiceConfig,
    check_identity_distinctness,
    guard_added_headers,
    scope_for,
)
from sip_privacy_gateway.privacy_registry import PrivacyScope
from sip_privacy_gateway.route_vault import ConcealMode
from sip_privacy_gateway.sip_message import make_request, make_response, parse_sip

SIDES = {
    'vspa': {'domains': ['vspa.example.com'], 'networks': ['192.0.2.0/24']},
    'vspb': {'domains': ['vspb.example.com'], 'networks': ['198.51.100.0/24']},
}


def service(**overrides):
    data = {'identity': 'vpp.example.com', 'sides': SIDES, 'relay': '203.0.113.9', 'seed': 5}
    data.update(overrides)
    return PrivacyService(ServiceConfig.from_dict(data), clock=lambda: 0.0)


def invite(privacy=None, extra=()):
    headers = [
        ('Via', 'SIP/2.0/UDP sf.vspa.example.com;branch=z9hG4bKsf1'),
        ('Via', 'SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKua1'),
        ('Max-Forwards', '69'),
        ('Record-Route', '<sip:sf.vspa.example.com;lr>'),
        ('From', '"Alice" <sip:alice@vspa.example.com>;tag=a1'),
        ('To', '<tel:+15550100>'),
        ('Call-ID', 'c1@192.0.2.10'),
        ('CSeq', '1 INVITE'),
        ('Contact', '<sip:alice@192.0.2.10:5060>'),
        ('Subject', 'Quarterly review'),
    ]
    if privacy is not None:
        headers.append(('Privacy', privacy))
    return make_request('INVITE', 'tel:+15550100', headers + list(extra))


def test_config_from_dict():
    config = ServiceConfig.from_dict({
        'identity': 'vpp.example.com:5060', 'mode': 'encrypt', 'key': '00' * 16,
        'capabilities': ['header', 'session'], 'role': 'vsp',
        'sides': {'vspa': {'domains': ['vspa.example.com'], 'prearranged': ['header']}},
        'freshness_seconds': 60})
    assert config.mode is ConcealMode.ENCRYPT
    assert config.key == bytes(16)
    assert config.capabilities == {PrivacyLevel.HEADER, PrivacyLevel.SESSION}
    assert config.role is PrivacyRole.VSP_SERVICE
    assert config.side('vspa').prearranged == {PrivacyLevel.HEADER}
    assert config.side('nowhere') is None
    assert config.protected_domains == ['vspa.example.com']
    assert config.freshness == 60.0


@pytest.mark.parametrize('identity,domains,expected', [
    ('vpp.example.net', ['vspa.example.com'], Distinctness.OK),
    ('vpp.vspa.example.com', ['vspa.example.com'], Distinctness.CONFLICT),
    ('VSPA.example.com:5060', ['vspa.example.com'], Distinctness.CONFLICT),
    ('notvspa.example.com', ['vspa.example.com'], Distinctness.OK),
    ('vpp.example.net', [], Distinctness.OK),
])
def test_identity_distinctness(identity, domains, expected):
    assert check_identity_distinctness(identity, domains) is expected


def test_identity_inside_protected_domain_refused():
    with pytest.raises(IdentityConflict):
        service(identity='vpp.vspa.example.com')


def test_scope_for():
    assert scope_for({PrivacyLevel.USER}) is PrivacyScope.USER
    assert scope_for({PrivacyLevel.SERVICE_PROVIDER}) is PrivacyScope.PROVIDER
    assert scope_for({PrivacyLevel.USER, PrivacyLevel.SERVICE_PROVIDER}) is PrivacyScope.BOTH
    assert scope_for({PrivacyLevel.HEADER}) is None


def test_header_privacy_round_trip():
    vpp = service()
    original = invite('header')
    out = vpp.outbound(original, from_side='vspa', to_side='vspb')
    assert not out.has('Privacy')
    assert len(out.entries('Via')) == 1
    assert 'vspa' not in ' '.join(out.entries('Via') + out.entries('Record-Route'))
    assert out.address('Contact').uri.host == 'vpp.example.com'
    ok = make_response(out, 200, 'OK', to_tag='b1')
    back = vpp.handle(ok, from_side='vspb', to_side='vspa')
    assert back.entries('Via') == original.entries('Via')


def test_prearranged_levels_apply_without_header():
    sides = dict(SIDES, vspa=dict(SIDES['vspa'], prearranged=['header']))
    out = service(sides=sides).outbound(invite(), from_side='vspa', to_side='vspb')
    assert len(out.entries('Via')) == 1
    plain = service().outbound(invite(), from_side='vspa', to_side='vspb')
    assert plain.entries('Via') == invite().entries('Via')


def test_critical_request_rejected():
    vpp = service(capabilities=['header', 'user', 'id', 'none'])
    request = invite('header;session;critical')
    with pytest.raises(PrivacyRejected) as info:
        vpp.outbound(request, from_side='vspa', to_side='vspb')
    assert info.value.missing == {PrivacyLevel.SESSION}
    response = vpp.reject(request, info.value, to_tag='r1')
    assert (response.status_code, response.reason) == (500, 'Privacy Disagreement')
    assert response.address('To').tag == 'r1'


def test_session_privacy_anchors_both_directions():
    vpp = service()
    request = parse_sip(read_corpus('invite_full.sip')).with_header_value('Privacy', 'session')
    out = vpp.outbound(request, from_side='vspa', to_side='vspb')
    assert out.sdp.connection.address == '203.0.113.9'
    answer = parse_sip(read_corpus('response_200_sdp.sip'))
    back = vpp.outbound(answer, from_side='vspb', to_side='vspa')
    assert back.sdp.connection.address == '203.0.113.9'
    assert len(vpp.relay.legs(request.call_id)) == 2


def test_user_privacy_on_behalf_of_caller():
    vpp = service()
    original = invite('user')
    out = vpp.outbound(original, from_side='vspa', to_side='vspb')
    assert out.call_id != original.call_id
    assert out.address('From').uri.host == 'anonymous.invalid'
    assert not out.has('Subject')
    assert len(vpp.dialogs) == 1
    ringing = make_response(out, 180, 'Ringing', to_tag='b1')
    back = vpp.inbound(ringing, from_side='vspb')
    assert back.call_id == original.call_id
    assert back.address('From').display_name == 'Alice'


def test_id_level_and_trusted_link():
    pai = [('P-Asserted-Identity', '<sip:alice@vspa.example.com>')]
    out = service().outbound(invite('id', pai), from_side='vspa', to_side='vspb')
    assert not out.has('P-Asserted-Identity')
    kept = service().outbound(invite('id', pai), from_side='vspa', to_side='vspb',
                              trusted_out=True)
    assert kept.has('P-Asserted-Identity')


def test_dialog_end_releases_vault():
    vpp = service()
    out = vpp.outbound(invite('header'), from_side='vspa', to_side='vspb')
    assert len(vpp.vault) == 1
    bye = make_request('BYE', str(out.address('Contact').uri), [
        ('Via', 'SIP/2.0/UDP sf.vspb.example.com;branch=z9hG4bKbye'),
        ('Max-Forwards', '69'),
        ('From', '<tel:+15550100>;tag=b1'),
        ('To', out.value('From')),
        ('Call-ID', out.call_id),
        ('CSeq', '1 BYE'),
    ])
    ok = make_response(bye, 200, 'OK')
    vpp.outbound(ok, from_side='vspa', to_side='vspb')
    assert vpp.vault.expire(now=10000.0) == 1
    assert len(vpp.vault) == 0


def test_guard_drops_removable_headers():
    response = make_response(invite(), 500, 'Privacy Disagreement', to_tag='r1',
                             extra=[('Server', 'vpp/1.0'), ('Warning', '399 vpp "no"')])
    guarded = guard_added_headers(response, PrivacyScope.BOTH)
    assert not guarded.has('Server')
    assert not guarded.has('Warning')
    assert guarded.has('Via')


def test_per_dialog_state_drains_after_calls():
    now = [0.0]
    data = {'identity': 'vpp.example.com', 'sides': SIDES, 'relay': '203.0.113.9', 'seed': 5}
    vpp = PrivacyService(ServiceConfig.from_dict(data), clock=lambda: now[0])
    offer = parse_sip(read_corpus('invite_full.sip')).sdp
    for n in range(5):
        now[0] += 1.0
        request = invite('header;session;user').with_header_value(
            'Call-ID', 'c{}@192.0.2.10'.format(n)).with_sdp(offer)
        out = vpp.outbound(request, from_side='vspa', to_side='vspb')
        assert out.sdp.media[0].port == vpp.relay.port_base
        assert len(vpp.dialogs) == 1
        bye = make_request('BYE', 'sip:alice@192.0.2.10:5060', [
            ('Via', 'SIP/2.0/UDP sf.vspa.example.com;branch=z9hG4bKbye{}'.format(n)),
            ('Max-Forwards', '69'),
            ('From', '<tel:+15550100>;tag=b1'),
            ('To', request.value('From')),
            ('Call-ID', request.call_id),
            ('CSeq', '1 BYE'),
        ])
        vpp.outbound(make_response(bye, 200, 'OK'), from_side='vspa', to_side='vspb')
        assert len(vpp.dialogs) == 0
        assert vpp.relay.legs() == []
    assert len(vpp.vault) == 5
    now[0] += 10 * vpp.vault.grace
    vpp.outbound(invite(), from_side='vspa', to_side='vspb')
    assert len(vpp.vault) == 0
